#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stlsynth/stl.hpp"

namespace stlsynth {

// ── Reachset temporal logic, carried in normal form ─────────────────────────
//
// Grid convention: the reachable sequence alternates point and open-interval
// sets with point spacing c; entry (grid index) j stands for time j*c/2,
// even j = the point set at that time, odd j = the open interval between the
// neighbouring points. A formula is a conjunction of clauses; a clause is a
// disjunction of atoms; an atom is X[j*c/2] A(psi) with psi a propositional
// formula over the state, stored in disjunctive normal form. This is exactly
// the shape the robustness recursion and the per-atom optimization consume.

// Propositional layer (negation lives only here).
enum class PropKind : std::uint8_t { True, Pred, Not, And, Or };

struct PropNode;
using PropPtr = std::shared_ptr<const PropNode>;

struct PropNode {
    PropKind kind = PropKind::True;
    ScalarExpression pred;
    bool strict = false;
    PropPtr a, b;
};

class Prop {
public:
    Prop() : n_(std::make_shared<const PropNode>()) {}
    explicit Prop(PropPtr p) : n_(std::move(p)) {}
    static Prop make_true();
    static Prop make_false();  // encoded as Not(True)
    static Prop pred(ScalarExpression h, bool strict);
    static Prop negation(Prop p);
    static Prop conj(Prop a, Prop b);
    static Prop disj(Prop a, Prop b);
    const PropNode& node() const { return *n_; }
    const PropPtr& ptr() const { return n_; }

    bool sat(const EvalPoint& p, const std::vector<CompiledExpr>* kappa = nullptr) const;
    double robustness(const EvalPoint& p, const std::vector<CompiledExpr>* kappa = nullptr) const;

    std::string str() const;

private:
    PropPtr n_;
};

struct Predicate {
    ScalarExpression h;
    bool strict = false;
};

// Disjunctive normal form of a propositional formula: or over disjuncts,
// and over each disjunct's predicates. No disjuncts = false; a disjunct
// with no predicates = true.
struct PropDnf {
    std::vector<std::vector<Predicate>> disjuncts;

    bool is_true() const {
        for (const auto& d : disjuncts)
            if (d.empty()) return true;
        return false;
    }
    bool is_false() const { return disjuncts.empty(); }

    bool sat(const EvalPoint& p, const std::vector<CompiledExpr>* kappa = nullptr) const;
    double robustness(const EvalPoint& p, const std::vector<CompiledExpr>* kappa = nullptr) const;
    bool references_input() const;
    std::string str() const;
};

PropDnf to_dnf(const Prop& p);

struct RtlAtom {
    int grid_index = 0;  // time offset grid_index * c/2
    PropDnf prop;
};

struct RtlClause {
    std::vector<RtlAtom> atoms;  // disjunction
};

struct NormalFormRtl {
    Rational c;
    std::vector<RtlClause> conjuncts;

    int max_grid_index() const;
    Rational horizon() const { return Rational(max_grid_index()) * c / Rational(2); }
    std::string str() const;  // one conjunct per line, grid times in seconds
};

// ── stl_to_rtl ──────────────────────────────────────────────────────────────
// Sound transformation of a c-divisible STL formula in the fragment
// {Pred, !, &, |, U, F, G, X} with propositional temporal operands into
// normal-form RTL over the c/2 grid. Negations are pushed to the predicates
// first; a negation over U is outside the fragment and rejected, as is a
// temporal operator nested under another temporal operator.

struct TransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

NormalFormRtl stl_to_rtl(const StlFormula& phi, const Rational& c);

// ── Finite point maps and their semantics ───────────────────────────────────
// TimedPointMap: entry j is the finite set of states reached at grid time
// j*c/2 (odd entries carry representatives of the open interval). This is
// both the simulation-side approximated reachable set and the brute-force
// oracle domain for the RTL semantics.

struct TimedPointMap {
    Rational c;
    std::vector<std::vector<std::vector<double>>> entries;  // entries[j][point][dim]

    double time_at(int j) const { return (Rational(j) * c / Rational(2)).to_double(); }
};

struct RtlEvalContext {
    const std::vector<CompiledExpr>* kappa = nullptr;  // binds u in predicates
};

bool model_check_rtl(const NormalFormRtl& phi, const TimedPointMap& map,
                     const RtlEvalContext& ctx = {});

double rtl_robustness_points(const NormalFormRtl& phi, const TimedPointMap& map,
                             const RtlEvalContext& ctx = {});

// ── CompiledFormula ─────────────────────────────────────────────────────────
// Tape-compiled view of a normal form for the simulation-fitness hot path:
// predicates are compiled once, and controller inputs are evaluated once per
// (trajectory, grid) point instead of once per predicate.

class CompiledFormula {
public:
    CompiledFormula() = default;
    explicit CompiledFormula(const NormalFormRtl& phi);

    // trajs[scenario][grid][dim]; all trajectories share the grid
    double robustness(const std::vector<std::vector<std::vector<double>>>& trajs,
                      double half_c, const std::vector<CompiledExpr>* kappa) const;

    bool any_input() const { return any_input_; }

private:
    struct CPred {
        CompiledExpr tape;
        bool wants_input = false;
    };
    struct CAtom {
        int grid = 0;
        bool is_true = false;
        bool is_false = false;
        std::vector<std::vector<CPred>> dnf;
    };
    std::vector<std::vector<CAtom>> conjuncts_;
    bool any_input_ = false;
    int max_grid_ = 0;
};

}  // namespace stlsynth
