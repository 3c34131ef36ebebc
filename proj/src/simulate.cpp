#include "stlsynth/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stlsynth/threadpool.hpp"

namespace stlsynth {

void SystemModel::validate() const {
    if (n <= 0 || static_cast<int>(f.size()) != n)
        throw std::invalid_argument("system needs one field expression per state");
    if (static_cast<int>(init.size()) != n)
        throw std::invalid_argument("initial box dimension mismatch");
    if (static_cast<int>(omega.size()) != l)
        throw std::invalid_argument("disturbance box dimension mismatch");
    if (eta.num <= 0 || c.num <= 0) throw std::invalid_argument("eta and c must be positive");
    for (const auto& e : f) {
        if (e.max_var_index(ExprOp::State) > n || e.max_var_index(ExprOp::Input) > m ||
            e.max_var_index(ExprOp::Disturb) > l)
            throw std::invalid_argument("field references an out-of-range variable");
    }
}

namespace {

void run_plan(const SimPlan& plan, const Controller& kappa, const std::vector<double>& x0,
              const DisturbanceRealization& omega, const ErrorSignalModel* eps,
              std::vector<std::vector<double>>& out,
              const std::function<void(double, const std::vector<double>&)>* on_input) {
    const SystemModel& sys = *plan.sys;
    out.clear();
    std::vector<double> x = x0;
    std::vector<double> u, w_buf;

    thread_local std::vector<double> k1, k2, k3, k4, tmp;
    auto deriv = [&](double t, const std::vector<double>& xs, std::vector<double>& dst) {
        omega.eval(t, w_buf);
        EvalPoint p{t, {xs.data(), xs.size()}, {u.data(), u.size()},
                    {w_buf.data(), w_buf.size()}};
        dst.resize(xs.size());
        for (std::size_t i = 0; i < plan.field.size(); ++i) {
            dst[i] = plan.field[i].eval(p);
            if (eps) dst[i] *= eps->scale(static_cast<int>(i), t);
        }
    };

    double prev_t = 0.0;
    bool first = true;
    for (const auto& ev : plan.events) {
        if (!first) {
            double span = ev.t - prev_t;
            if (span > 0) {
                int steps = std::max(1, static_cast<int>(std::ceil(span / plan.h_target - 1e-9)));
                double h = span / steps;
                for (int s = 0; s < steps; ++s) {
                    double t = prev_t + s * h;
                    deriv(t, x, k1);
                    tmp.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
                    deriv(t + 0.5 * h, tmp, k2);
                    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
                    deriv(t + 0.5 * h, tmp, k3);
                    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
                    deriv(t + h, tmp, k4);
                    for (std::size_t i = 0; i < x.size(); ++i)
                        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    if (on_input) (*on_input)(t + h, u);
                }
                for (double v : x)
                    if (!std::isfinite(v)) throw DivergenceError(ev.t);
            }
        }
        first = false;
        prev_t = ev.t;
        if (ev.sample) {
            u = kappa.eval(ev.t, {x.data(), x.size()});
            if (on_input) (*on_input)(ev.t, u);
        }
        if (ev.record) out.push_back(x);
    }
}

}  // namespace

SimPlan make_sim_plan(const SystemModel& sys, const Rational& horizon) {
    SimPlan plan;
    plan.sys = &sys;
    for (const auto& fe : sys.f) plan.field.emplace_back(fe);
    Rational half = sys.c / Rational(2);
    std::set<Rational> events;
    for (Rational t(0); t <= horizon; t = t + half) events.insert(t);
    for (Rational t(0); t <= horizon; t = t + sys.eta) events.insert(t);
    events.insert(horizon);
    for (const Rational& ev : events)
        plan.events.push_back({ev.to_double(), ev.divisible_by(sys.eta), ev.divisible_by(half)});
    plan.h_target = std::min(sys.eta.to_double(), half.to_double()) / 4.0;
    return plan;
}

void integrate_plan(const SimPlan& plan, const Controller& kappa,
                    const std::vector<double>& x0, const DisturbanceRealization& omega,
                    const ErrorSignalModel* eps, std::vector<std::vector<double>>& out) {
    run_plan(plan, kappa, x0, omega, eps, out, nullptr);
}

SampledSignal integrate_closed_loop(const SystemModel& sys, const Controller& kappa,
                                    const std::vector<double>& x0,
                                    const DisturbanceRealization& omega,
                                    const ErrorSignalModel* eps, const Rational& horizon) {
    SimPlan plan = make_sim_plan(sys, horizon);
    SampledSignal out;
    out.c = sys.c;
    run_plan(plan, kappa, x0, omega, eps, out.entries, nullptr);
    return out;
}

SampledSignal integrate_closed_loop_traced(
    const SystemModel& sys, const Controller& kappa, const std::vector<double>& x0,
    const DisturbanceRealization& omega, const ErrorSignalModel* eps, const Rational& horizon,
    const std::function<void(double, const std::vector<double>&)>& on_input) {
    SimPlan plan = make_sim_plan(sys, horizon);
    SampledSignal out;
    out.c = sys.c;
    run_plan(plan, kappa, x0, omega, eps, out.entries, &on_input);
    return out;
}

TimedPointMap approx_reach(const SystemModel& sys, const Controller& kappa,
                           const ScenarioSet& scenarios, const Rational& horizon) {
    std::vector<SampledSignal> trajs(scenarios.size());
    parallel_for(scenarios.size(), [&](int i) {
        const Scenario& sc = scenarios[i];
        trajs[i] = integrate_closed_loop(sys, kappa, sc.x0, sc.disturbance,
                                         sc.error ? &*sc.error : nullptr, horizon);
    });
    TimedPointMap map;
    map.c = sys.c;
    if (trajs.empty()) return map;
    std::size_t entries = trajs[0].entries.size();
    map.entries.resize(entries);
    for (std::size_t q = 0; q < entries; ++q) {
        for (const auto& tr : trajs) {
            const auto& x = tr.entries[q];
            bool dup = false;
            for (const auto& existing : map.entries[q])
                if (existing == x) { dup = true; break; }
            if (!dup) map.entries[q].push_back(x);
        }
    }
    return map;
}

double approx_robustness(const SystemModel& sys, const Controller& kappa,
                         const ScenarioSet& scenarios, const NormalFormRtl& phi) {
    Rational horizon = phi.horizon();
    TimedPointMap map = approx_reach(sys, kappa, scenarios, horizon);
    RtlEvalContext ctx;
    ctx.kappa = &kappa.tapes;
    return rtl_robustness_points(phi, map, ctx);
}

double approx_robustness_single(const SystemModel& sys, const Controller& kappa,
                                const Scenario& scenario, const NormalFormRtl& phi) {
    ScenarioSet one(1);
    one.insert(scenario);
    return approx_robustness(sys, kappa, one, phi);
}

double fit_delta(double target, const std::function<double(double)>& robustness_fn,
                 double delta_max, double tol) {
    auto mismatch = [&](double d) { return std::abs(target - robustness_fn(d)); };
    // coarse scan; strict improvement keeps the smallest near-optimal abscissa
    const int grid = 33;
    double best_d = 0.0, best_v = mismatch(0.0);
    for (int i = 1; i < grid; ++i) {
        double d = delta_max * i / (grid - 1);
        double v = mismatch(d);
        if (v < best_v - 1e-12) { best_v = v; best_d = d; }
    }
    double lo = std::max(0.0, best_d - delta_max / (grid - 1));
    double hi = std::min(delta_max, best_d + delta_max / (grid - 1));
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = mismatch(x1), f2 = mismatch(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = mismatch(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = mismatch(x2);
        }
    }
    double mid = 0.5 * (a + b);
    // tie-break toward the smallest minimizer
    if (mismatch(best_d) <= mismatch(mid) + 1e-12 && best_d <= mid) return best_d;
    return mid;
}

}  // namespace stlsynth
