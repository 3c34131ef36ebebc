#pragma once

#include <functional>

#include "stlsynth/rtl.hpp"
#include "stlsynth/system.hpp"

namespace stlsynth {

struct DivergenceError : std::runtime_error {
    double at_time;
    explicit DivergenceError(double t)
        : std::runtime_error("trajectory diverged (non-finite state) at t = " +
                             std::to_string(t)),
          at_time(t) {}
};

// ── integrate_closed_loop ───────────────────────────────────────────────────
// Classic fixed-step RK4 of the sampled-data closed loop on the c/2 grid.
// The sub-step is min(eta, c/2)/4; sampling instants and grid points are
// always mesh nodes (the event grid is the union of {k*eta} and {q*c/2}).
// With an error model, each field component i integrates as
// (1 + delta*sigma_ii(t)) * f_i.

SampledSignal integrate_closed_loop(const SystemModel& sys, const Controller& kappa,
                                    const std::vector<double>& x0,
                                    const DisturbanceRealization& omega,
                                    const ErrorSignalModel* eps, const Rational& horizon);

// Instrumented variant: `on_input` fires at every accepted sub-step with the
// currently held input (used by the sample-and-hold tests).
SampledSignal integrate_closed_loop_traced(
    const SystemModel& sys, const Controller& kappa, const std::vector<double>& x0,
    const DisturbanceRealization& omega, const ErrorSignalModel* eps, const Rational& horizon,
    const std::function<void(double, const std::vector<double>&)>& on_input);

// ── SimPlan ─────────────────────────────────────────────────────────────────
// Compile-once integration plan for the hot fitness path: field tapes and the
// event grid are shared across the thousands of simulations per GP batch.

struct SimPlan {
    const SystemModel* sys = nullptr;
    std::vector<CompiledExpr> field;
    struct Event {
        double t;
        bool sample;
        bool record;
    };
    std::vector<Event> events;
    double h_target = 0.0;
};

SimPlan make_sim_plan(const SystemModel& sys, const Rational& horizon);

// writes the state at every recorded grid time into `out` (resized)
void integrate_plan(const SimPlan& plan, const Controller& kappa,
                    const std::vector<double>& x0, const DisturbanceRealization& omega,
                    const ErrorSignalModel* eps, std::vector<std::vector<double>>& out);

// ── approx_reach / approx_robustness ────────────────────────────────────────
// R_hat(tau_q) = { x(tau_q) | (x(tau_0), omega) in I }: the finite point map
// formed by all scenario trajectories, entries deduplicated exactly.

TimedPointMap approx_reach(const SystemModel& sys, const Controller& kappa,
                           const ScenarioSet& scenarios, const Rational& horizon);

double approx_robustness(const SystemModel& sys, const Controller& kappa,
                         const ScenarioSet& scenarios, const NormalFormRtl& phi);

// Single-scenario variant used by the disturbance synthesis and delta fit.
double approx_robustness_single(const SystemModel& sys, const Controller& kappa,
                                const Scenario& scenario, const NormalFormRtl& phi);

// ── fit_delta ───────────────────────────────────────────────────────────────
// Scalar delta in [0, delta_max] minimizing |target - robustness_fn(delta)|:
// coarse scan (smallest near-optimal point wins ties) refined by golden
// section to tolerance 1e-4.

double fit_delta(double target, const std::function<double(double)>& robustness_fn,
                 double delta_max = 0.2, double tol = 1e-4);

}  // namespace stlsynth
