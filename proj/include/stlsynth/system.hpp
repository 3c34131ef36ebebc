#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stlsynth/expr.hpp"
#include "stlsynth/interval.hpp"
#include "stlsynth/rational.hpp"

namespace stlsynth {

// ── SystemModel ─────────────────────────────────────────────────────────────
// Open-loop dynamics xdot = f(t, x, u, w) with a compact initial box, a
// compact disturbance box, the controller sampling time eta and the RTL
// step c. Boxes may have zero-width dimensions.

struct SystemModel {
    int n = 0, m = 0, l = 0;
    std::vector<ScalarExpression> f;
    Box init;
    Box omega;
    Rational eta{1, 40};
    Rational c{1, 20};

    void validate() const;
};

// Sampled-data controller u(t) = kappa(t_k, x(t_k)) on [t_k, t_k + eta).
struct Controller {
    std::vector<ScalarExpression> kappa;  // one expression per input, over (t, x)
    std::vector<CompiledExpr> tapes;

    void compile() {
        tapes.clear();
        for (const auto& e : kappa) tapes.emplace_back(e);
    }
    std::vector<double> eval(double t, std::span<const double> x) const {
        EvalPoint p{t, x, {}, {}};
        std::vector<double> u;
        u.reserve(tapes.size());
        for (const auto& tp : tapes) u.push_back(tp.eval(p));
        return u;
    }
    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < kappa.size(); ++i) {
            if (i) s += ", ";
            s += kappa[i].str();
        }
        return s + ")";
    }
};

// Closed-form disturbance realization w(t), saturated into Omega by
// construction (the grammar wraps every component in sat(...)).
struct DisturbanceRealization {
    std::vector<ScalarExpression> omega;  // l expressions over t
    std::vector<CompiledExpr> tapes;

    void compile() {
        tapes.clear();
        for (const auto& e : omega) tapes.emplace_back(e);
    }
    void eval(double t, std::vector<double>& out) const {
        EvalPoint p{t, {}, {}, {}};
        out.resize(tapes.size());
        for (std::size_t i = 0; i < tapes.size(); ++i) out[i] = tapes[i].eval(p);
    }
    static DisturbanceRealization zero(int l) {
        DisturbanceRealization d;
        for (int i = 0; i < l; ++i) d.omega.push_back(ScalarExpression::constant(0.0));
        d.compile();
        return d;
    }
};

// Error signal eps(t,x) = delta * sigma(t) * f(...), sigma diagonal with
// entries saturated into [-1,1]. Scales the integrated field per component.
struct ErrorSignalModel {
    double delta = 0.0;
    std::vector<ScalarExpression> sigma;  // n diagonal entries over t
    std::vector<CompiledExpr> tapes;

    void compile() {
        tapes.clear();
        for (const auto& e : sigma) tapes.emplace_back(e);
    }
    double scale(int dim, double t) const {
        if (delta == 0.0 || tapes.empty()) return 1.0;
        EvalPoint p{t, {}, {}, {}};
        return 1.0 + delta * tapes[dim].eval(p);
    }
};

struct Scenario {
    std::vector<double> x0;
    DisturbanceRealization disturbance;
    std::optional<ErrorSignalModel> error;
};

// The set of (initial condition, disturbance realization) pairs driving
// simulation-based fitness. Fixed capacity with first-in, first-out
// replacement on insert.
class ScenarioSet {
public:
    explicit ScenarioSet(int capacity = 1) : capacity_(capacity) {}

    void insert(Scenario s) {
        items_.push_back(std::move(s));
        if (static_cast<int>(items_.size()) > capacity_) items_.erase(items_.begin());
    }
    void replace(int i, Scenario s) { items_[i] = std::move(s); }

    int size() const { return static_cast<int>(items_.size()); }
    int capacity() const { return capacity_; }
    const Scenario& operator[](int i) const { return items_[i]; }
    Scenario& operator[](int i) { return items_[i]; }

private:
    int capacity_;
    std::vector<Scenario> items_;
};

}  // namespace stlsynth
