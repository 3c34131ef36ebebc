#pragma once

#include "stlsynth/reach.hpp"
#include "stlsynth/rtl.hpp"
#include "stlsynth/system.hpp"

namespace stlsynth {

struct VerifyConfig {
    int swarm = 40;
    int iterations = 60;
    int restarts = 4;
    double beta = 0.0;       // > 0 switches the search objective to smooth min/max
    int bb_depth = 48;
    int bb_max_nodes = 40000;
    double bb_tol = 1e-3;    // reported-gap tolerance at exhaustion
    double gap_accept = 0.05;
    std::uint64_t seed = 1;
};

// smooth max M^beta(x) = sum x_i e^(beta x_i) / sum e^(beta x_i);
// beta -> +inf approaches max, beta -> -inf approaches min
double smooth_max(const std::vector<double>& values, double beta);

enum class Verdict { Certified, Falsified, Inconclusive };

enum class AtomOutcome { Holds, Violated, Unknown };

struct AtomScore {
    int conjunct = 0;
    int position = 0;      // index within the clause
    int grid_index = 0;
    double p_hat = 0.0;
    std::vector<double> alpha;  // full factor vector of the entry (minimizer)
    AtomOutcome certify_outcome = AtomOutcome::Unknown;
    double certify_gap = 0.0;
    std::vector<double> witness;  // full factor vector when Violated
};

struct RobustnessReport {
    std::vector<std::vector<AtomScore>> scores;  // [conjunct][atom]
    double p_hat = 0.0;
    int worst_conjunct = -1;
    int worst_position = -1;
    Verdict verdict = Verdict::Inconclusive;
    double residual_gap = 0.0;  // max certify gap over non-holding atoms

    const AtomScore& worst() const { return scores[worst_conjunct][worst_position]; }
};

// ── Per-atom evaluation over a reach entry ──────────────────────────────────
// Wraps one atom's DNF as functions of the entry's parameterization vector.
// Input references are bound through the controller; at interval entries a
// time-dependent predicate gains one extra factor spanning the window.

class AtomEvaluator {
public:
    AtomEvaluator(const RtlAtom& atom, const ReachSequence& seq, const Controller* kappa);

    int dimension() const { return static_cast<int>(active_.size()); }
    int entry_factors() const { return entry_factors_; }
    bool on_point_entry() const { return point_entry_; }

    // max over disjuncts of min over their predicates, at a compact alpha
    double value(const std::vector<double>& alpha_compact) const;
    // smooth surrogate of the same (beta > 0), used to guide the swarm search
    double value_beta(const std::vector<double>& alpha_compact, double beta) const;
    // sound interval bound over a compact sub-box
    Interval bound(const std::vector<Interval>& box) const;
    // per-dimension branching weight (zero means the dimension is irrelevant)
    const std::vector<double>& sensitivity() const { return sensitivity_; }

    // expand a compact vector to the entry's full factor vector
    std::vector<double> expand(const std::vector<double>& alpha_compact) const;

private:
    struct Pred {
        bool poly_path = false;
        FactorPoly poly;      // composed h over factors
        Interval poly_rem{0.0};
        ScalarExpression h;   // fallback path
        CompiledExpr tape;
        bool strict = false;
    };
    std::vector<std::vector<Pred>> dnf_;
    std::vector<FactorPoly> rows_;   // state rows over the entry's factors
    std::vector<int> active_;        // compact dim -> factor id
    int entry_factors_ = 0;
    bool point_entry_ = true;
    const Controller* kappa_ = nullptr;
    Interval time_range_{0.0};
    int time_factor_ = -1;           // factor id of the time variable, if any
    std::vector<double> sensitivity_;

    friend std::string export_smtlib(const RtlAtom&, const ReachSequence&, const Controller*,
                                     const std::string&);
};

// ── Operations ──────────────────────────────────────────────────────────────

// multi-start particle swarm minimization of the atom value; returns the best
// achieved value (an upper bound on the true infimum) and its minimizer
AtomScore subscore(const RtlAtom& atom, int conjunct, int position, const ReachSequence& seq,
                   const Controller* kappa, const VerifyConfig& cfg);

// p_hat = min over conjuncts of max over their atoms, argmin/argmax recorded
void aggregate(RobustnessReport& report);

// x0 from the worst atom's alpha, projected to the initial-set factors and
// clamped into the initial box
std::vector<double> extract_counterexample(const RobustnessReport& report,
                                           const ReachSequence& seq);
std::vector<double> extract_from_alpha(const std::vector<double>& alpha_full,
                                       const ReachSequence& seq);

// interval branch-and-bound certification of one atom
struct CertifyResult {
    AtomOutcome outcome = AtomOutcome::Unknown;
    double gap = 0.0;                // residual negativity bound at exhaustion
    std::vector<double> witness;     // compact alpha with negative direct value
};
CertifyResult certify(const RtlAtom& atom, const ReachSequence& seq, const Controller* kappa,
                      const VerifyConfig& cfg);

// full pipeline: subscore every atom (parallel), aggregate, then certify all
// atoms when p_hat >= 0
RobustnessReport verify_sequence(const NormalFormRtl& phi, const ReachSequence& seq,
                                 const Controller* kappa, const VerifyConfig& cfg);

// SMT-LIB 2 script asserting the negation of the atom's claim; `unsat` from
// an external solver certifies the atom. Transcendental predicates are
// flagged in the header comment.
std::string export_smtlib(const RtlAtom& atom, const ReachSequence& seq,
                          const Controller* kappa, const std::string& name);

}  // namespace stlsynth
