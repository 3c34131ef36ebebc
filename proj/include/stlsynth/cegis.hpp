#pragma once

#include <iosfwd>

#include "stlsynth/problem.hpp"
#include "stlsynth/rtl.hpp"
#include "stlsynth/simulate.hpp"

namespace stlsynth {

struct PhaseTimings {
    double feedforward = 0.0;
    double reference = 0.0;
    double gp_kappa = 0.0;
    double gp_omega = 0.0;
    double reach = 0.0;
    double counterexample = 0.0;
    double certification = 0.0;
};

enum class SynthesisVerdict { Certified, CertifiedWithGap, Exhausted };

struct SynthesisResult {
    Controller controller;
    std::vector<ScalarExpression> u_ff;   // reference-tracking mode only
    std::vector<ScalarExpression> x_ref;
    SynthesisVerdict verdict = SynthesisVerdict::Exhausted;
    double residual_gap = 0.0;
    int refinements = 0;          // A2 invocations minus one
    int total_generations = 0;    // GGGP generations spent on kappa
    int complexity_value = 0;
    double final_p_hat = 0.0;
    double best_sim_fitness = 0.0;
    PhaseTimings timings;
    RobustnessReport final_report;
    std::string log;  // deterministic trace: no wall-clock content
};

// ── Synthesizer ─────────────────────────────────────────────────────────────
// The full counterexample-guided loop: initialization, candidate proposal by
// GGGP over simulations (alternating controller and per-scenario disturbance
// synthesis), reachability analysis of the proposed controller, robustness
// optimization over the reach sequence, and either certification or
// counterexample extraction feeding the scenario set.

class Synthesizer {
public:
    Synthesizer(const ProblemSpec& spec, std::uint64_t seed);

    // I1/I2
    const NormalFormRtl& formula_rtl() const { return phi_; }
    ScenarioSet initialize_scenarios();

    // R1/R2 (reference-tracking mode)
    std::vector<ScalarExpression> synth_feedforward();
    std::vector<ScalarExpression> fit_reference(const std::vector<ScalarExpression>& u_ff);

    // A1: returns the candidate and whether its approximation is positive
    struct Proposal {
        Controller controller;
        Individual individual;
        double fitness = 0.0;
        bool positive = false;
        int batches = 0;
        int generations = 0;
    };
    Proposal propose_controller(ScenarioSet& scenarios);

    // A1.b / B3.a: worst-case disturbance (and error signal) for one initial
    // condition under the current controller
    Scenario worst_case_disturbance(const Controller& kappa, const std::vector<double>& x0);

    SynthesisResult synthesize();

    // live progress (one line per refinement) written here when set; wall
    // clock may appear — the deterministic log never carries it
    void set_progress(std::ostream* out) { progress_ = out; }

    // helpers shared with the CLI
    Controller controller_from(const Individual& ind) const;
    double scenario_robustness(const Controller& kappa, const Scenario& sc) const;
    DisturbanceRealization random_disturbance(std::uint64_t stream);
    std::optional<ErrorSignalModel> random_error_signal(std::uint64_t stream);

    double delta() const { return delta_; }

    // hot path shared by every fitness oracle: plan-based integration plus
    // the compiled formula
    double robustness_fast(const Controller& kappa, const ScenarioSet& scenarios) const;

private:
    const ProblemSpec& spec_;
    std::uint64_t seed_;
    NormalFormRtl phi_;
    Rational horizon_;
    SimPlan plan_;
    CompiledFormula cphi_;
    double half_c_ = 0.0;
    Grammar base_grammar_;           // without reference terminals
    Grammar kappa_grammar_;          // rebound after R1/R2 in tracking mode
    bool kappa_grammar_ready_ = false;
    double delta_ = 0.0;
    std::mt19937_64 rng_;
    std::optional<Population> kappa_pop_;  // warm start across A1.a batches
    std::ostream* progress_ = nullptr;

    Grammar& kappa_grammar();
    FitnessFn kappa_fitness(const ScenarioSet& scenarios);
};

}  // namespace stlsynth
