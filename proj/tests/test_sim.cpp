#include "doctest.h"

#include <cmath>
#include <random>

#include "stlsynth/simulate.hpp"

using namespace stlsynth;

namespace {

SystemModel decay_system(Rational eta, Rational c) {
    SystemModel sys;
    sys.n = 1; sys.m = 1; sys.l = 0;
    sys.f = {parse_expression("-x1 + 0*u1")};
    sys.init = {Interval(0.9, 1.1)};
    sys.omega = {};
    sys.eta = eta;
    sys.c = c;
    sys.validate();
    return sys;
}

Controller zero_controller(int m) {
    Controller k;
    for (int i = 0; i < m; ++i) k.kappa.push_back(ScalarExpression::constant(0.0));
    k.compile();
    return k;
}

}  // namespace

TEST_CASE("RK4 single-step value and analytic error bound") {
    // sub-step = min(eta, c/2)/4 = 0.1 here, so [0, 0.4] is four 0.1-steps;
    // for xdot = -x each step multiplies by 1 - h + h^2/2 - h^3/6 + h^4/24
    auto sys = decay_system(Rational(2, 5), Rational(4, 5));
    auto kappa = zero_controller(1);
    auto traj = integrate_closed_loop(sys, kappa, {1.0}, DisturbanceRealization::zero(0),
                                      nullptr, Rational(2, 5));
    REQUIRE(traj.entries.size() == 2);  // t = 0 and t = c/2 = 0.4
    const double rho = 0.9048375;      // RK4 step factor at h = 0.1
    CHECK(std::abs(rho - std::exp(-0.1)) < 1e-7);  // single-step accuracy
    CHECK(traj.entries[1][0] == doctest::Approx(std::pow(rho, 4)).epsilon(1e-12));
    CHECK(std::abs(traj.entries[1][0] - std::exp(-0.4)) < 4e-7);
}

TEST_CASE("RK4 order: halving the step cuts the error about 16x") {
    auto run = [](Rational eta, Rational c) {
        auto sys = decay_system(eta, c);
        auto kappa = zero_controller(1);
        auto traj = integrate_closed_loop(sys, kappa, {1.0}, DisturbanceRealization::zero(0),
                                          nullptr, Rational(2, 5));
        return std::abs(traj.entries.back()[0] - std::exp(-0.4));
    };
    double e1 = run(Rational(2, 5), Rational(4, 5));   // h = 0.1
    double e2 = run(Rational(1, 5), Rational(2, 5));   // h = 0.05
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("spacecraft cross-coupling field value") {
    auto f3 = parse_expression("x1*x2");
    std::vector<double> x{1.0, 2.0, 0.7};
    EvalPoint p{0, {x.data(), x.size()}, {}, {}};
    CHECK(f3.eval(p) == doctest::Approx(2.0));
}

TEST_CASE("zero-delta error model leaves trajectories unchanged") {
    auto sys = decay_system(Rational(1, 10), Rational(1, 5));
    auto kappa = zero_controller(1);
    ErrorSignalModel eps;
    eps.delta = 0.0;
    eps.sigma = {ScalarExpression::saturate(parse_expression("t"), -1, 1)};
    eps.compile();
    auto a = integrate_closed_loop(sys, kappa, {1.0}, DisturbanceRealization::zero(0),
                                   nullptr, Rational(1));
    auto b = integrate_closed_loop(sys, kappa, {1.0}, DisturbanceRealization::zero(0),
                                   &eps, Rational(1));
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t q = 0; q < a.entries.size(); ++q)
        CHECK(a.entries[q][0] == b.entries[q][0]);

    // nonzero delta changes them
    eps.delta = 0.1;
    auto cst = integrate_closed_loop(sys, kappa, {1.0}, DisturbanceRealization::zero(0),
                                     &eps, Rational(1));
    CHECK(cst.entries.back()[0] != a.entries.back()[0]);
}

TEST_CASE("sample-and-hold: input constant between sampling instants") {
    // xdot = u, kappa(t,x) = x; eta = c/2 so samples align with the grid
    SystemModel sys;
    sys.n = 1; sys.m = 1; sys.l = 0;
    sys.f = {parse_expression("u1")};
    sys.init = {Interval(1.0, 1.0)};
    sys.eta = Rational(1, 4);
    sys.c = Rational(1, 2);
    sys.validate();
    Controller kappa;
    kappa.kappa = {parse_expression("x1")};
    kappa.compile();

    std::vector<std::pair<double, double>> trace;  // (time, held input)
    auto traj = integrate_closed_loop_traced(
        sys, kappa, {1.0}, DisturbanceRealization::zero(0), nullptr, Rational(1),
        [&](double t, const std::vector<double>& u) { trace.emplace_back(t, u[0]); });

    // input piecewise constant with jumps only at multiples of eta
    for (std::size_t i = 1; i < trace.size(); ++i) {
        double t = trace[i].first;
        double k_eta = std::round(t / 0.25) * 0.25;
        bool at_sample = std::abs(t - k_eta) < 1e-12;
        if (!at_sample) CHECK(trace[i].second == trace[i - 1].second);
    }
    // at each sample the held input equals kappa at the recorded state
    for (std::size_t q = 0; q < traj.entries.size(); ++q) {
        double t = 0.25 * q;
        bool found = false;
        for (const auto& [tt, u] : trace)
            if (std::abs(tt - t) < 1e-12 && std::abs(u - traj.entries[q][0]) < 1e-9)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("divergence raises with the first bad time") {
    SystemModel sys;
    sys.n = 1; sys.m = 0; sys.l = 0;
    sys.f = {parse_expression("x1^3")};  // finite-time blowup from x0 = 3
    sys.init = {Interval(3.0, 3.0)};
    sys.eta = Rational(1, 10);
    sys.c = Rational(1, 5);
    sys.validate();
    Controller kappa;
    kappa.compile();
    CHECK_THROWS_AS(integrate_closed_loop(sys, kappa, {3.0}, DisturbanceRealization::zero(0),
                                          nullptr, Rational(5)),
                    DivergenceError);
}

TEST_CASE("approx_reach: initial entry equals the scenario initials, duplicates merge") {
    auto sys = decay_system(Rational(1, 10), Rational(1, 5));
    auto kappa = zero_controller(1);
    ScenarioSet scen(3);
    scen.insert({{1.0}, DisturbanceRealization::zero(0), std::nullopt});
    scen.insert({{0.95}, DisturbanceRealization::zero(0), std::nullopt});
    scen.insert({{1.0}, DisturbanceRealization::zero(0), std::nullopt});  // duplicate
    auto map = approx_reach(sys, kappa, scen, Rational(1));
    REQUIRE(!map.entries.empty());
    CHECK(map.entries[0].size() == 2);  // deduplicated
    bool has1 = false, has95 = false;
    for (const auto& x : map.entries[0]) {
        if (x[0] == 1.0) has1 = true;
        if (x[0] == 0.95) has95 = true;
    }
    CHECK(has1);
    CHECK(has95);

    ScenarioSet single(1);
    single.insert({{1.0}, DisturbanceRealization::zero(0), std::nullopt});
    auto map1 = approx_reach(sys, kappa, single, Rational(1));
    for (const auto& e : map1.entries) CHECK(e.size() == 1);
}

TEST_CASE("scenario set is FIFO at capacity") {
    ScenarioSet scen(2);
    scen.insert({{1.0}, DisturbanceRealization::zero(0), std::nullopt});
    scen.insert({{2.0}, DisturbanceRealization::zero(0), std::nullopt});
    scen.insert({{3.0}, DisturbanceRealization::zero(0), std::nullopt});
    REQUIRE(scen.size() == 2);
    CHECK(scen[0].x0[0] == 2.0);
    CHECK(scen[1].x0[0] == 3.0);
}

TEST_CASE("approx_robustness composes reach and the point semantics") {
    auto sys = decay_system(Rational(1, 10), Rational(1, 5));
    auto kappa = zero_controller(1);
    ScenarioSet scen(2);
    scen.insert({{0.9}, DisturbanceRealization::zero(0), std::nullopt});
    scen.insert({{1.1}, DisturbanceRealization::zero(0), std::nullopt});
    StlParseOptions opt;
    auto phi = stl_to_rtl(parse_stl("G[0,1](x1 >= 0.5)", opt), sys.c);
    double rob = approx_robustness(sys, kappa, scen, phi);
    // worst point: the smaller initial decayed to t=1: 0.9*e^-1 - 0.5
    CHECK(rob == doctest::Approx(0.9 * std::exp(-1.0) - 0.5).epsilon(1e-4));
}

TEST_CASE("disturbance realizations never leave the box") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> C(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        // random cubic in t wrapped in sat(-0.5, 0.5)
        auto poly = ScalarExpression::add(
            ScalarExpression::constant(C(rng)),
            ScalarExpression::add(
                ScalarExpression::mul(ScalarExpression::constant(C(rng)),
                                      ScalarExpression::time()),
                ScalarExpression::mul(ScalarExpression::constant(C(rng)),
                                      ScalarExpression::pow(ScalarExpression::time(), 3))));
        DisturbanceRealization d;
        d.omega = {ScalarExpression::saturate(poly, -0.5, 0.5)};
        d.compile();
        std::vector<double> w;
        for (int i = 0; i < 500; ++i) {
            d.eval(i * 0.01, w);
            CHECK(w[0] >= -0.5);
            CHECK(w[0] <= 0.5);
        }
    }
}

TEST_CASE("fit_delta") {
    // constant mismatch: smallest minimizer wins
    CHECK(fit_delta(1.0, [](double) { return 0.3; }) == doctest::Approx(0.0));
    // |a - (b + delta)| with a - b = 0.3 minimizes at delta = 0.3; widen the
    // search range so the analytic minimizer is interior
    double d = fit_delta(0.5, [](double dd) { return 0.2 + dd; }, /*delta_max=*/0.5);
    CHECK(std::abs(d - 0.3) < 1e-3);
    // synthetic unimodal mismatch with known minimizer at 0.125; a dense-grid
    // scan of the same function confirms the location
    auto fn = [](double dd) { return (dd - 0.125) * (dd - 0.125); };
    double oracle_best = 0.0, oracle_val = 1e99;
    for (int i = 0; i <= 20000; ++i) {
        double dd = 0.2 * i / 20000;
        if (fn(dd) < oracle_val) { oracle_val = fn(dd); oracle_best = dd; }
    }
    double d2 = fit_delta(0.0, fn);
    CHECK(std::abs(d2 - oracle_best) < 1e-3);
}
