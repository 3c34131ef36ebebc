#include "stlsynth/reach.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace stlsynth {

std::vector<double> ReachSequence::initial_point(const std::vector<double>& alpha_init) const {
    std::vector<double> x(init_box.size());
    for (std::size_t d = 0; d < init_box.size(); ++d) x[d] = init_box[d].mid();
    for (std::size_t k = 0; k < init_factor_dims.size() && k < alpha_init.size(); ++k) {
        int d = init_factor_dims[k];
        double a = std::clamp(alpha_init[k], -1.0, 1.0);
        x[d] = init_box[d].mid() + a * init_box[d].rad();
    }
    return x;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// entrywise Taylor exponential of a nonnegative matrix (upper bound helper)
Mat expm_nonneg(const Mat& x) {
    Mat acc = Mat::Identity(x.rows(), x.cols());
    Mat term = Mat::Identity(x.rows(), x.cols());
    for (int i = 1; i <= 40; ++i) {
        term = (term * x) / i;
        acc += term;
        if (term.lpNorm<Eigen::Infinity>() < 1e-300) break;
    }
    return acc;
}

struct FieldModel {
    // augmented state z = (x, u_held [, t]); disturbances stay inputs.
    // The set is carried as a dependent polynomial zonotope plus an
    // independent symmetric error box (radius vector) that absorbs the
    // per-step remainder terms without growing the factor space.
    int n, m, l;
    bool time_state = false;
    int dim;   // n + m (+1)
    int vars;  // dim + l

    std::vector<CompiledExpr> f;
    std::vector<std::vector<CompiledExpr>> jac;                // n x vars
    std::vector<std::vector<std::vector<CompiledExpr>>> hess;  // n x vars x (vars-a)

    FieldModel(const SystemModel& sys) : n(sys.n), m(sys.m), l(sys.l) {
        for (const auto& e : sys.f)
            if (e.references(ExprOp::Time)) time_state = true;
        dim = n + m + (time_state ? 1 : 0);
        vars = dim + l;

        auto var_of = [&](int v) -> std::pair<ExprOp, int> {
            if (v < n) return {ExprOp::State, v + 1};
            if (v < n + m) return {ExprOp::Input, v - n + 1};
            if (time_state && v == n + m) return {ExprOp::Time, 0};
            return {ExprOp::Disturb, v - dim + 1};
        };

        f.reserve(n);
        jac.resize(n);
        hess.resize(n);
        for (int i = 0; i < n; ++i) {
            f.emplace_back(sys.f[i]);
            jac[i].reserve(vars);
            std::vector<ScalarExpression> first;
            for (int v = 0; v < vars; ++v) {
                auto [op, idx] = var_of(v);
                first.push_back(sys.f[i].derivative(op, idx));
                jac[i].emplace_back(first.back());
            }
            hess[i].resize(vars);
            for (int a = 0; a < vars; ++a)
                for (int b = a; b < vars; ++b) {
                    auto [op, idx] = var_of(b);
                    hess[i][a].emplace_back(first[a].derivative(op, idx));
                }
        }
    }

    EvalPoint point(const std::vector<double>& z, const std::vector<double>& w) const {
        EvalPoint p;
        p.x = {z.data(), static_cast<std::size_t>(n)};
        p.u = {z.data() + n, static_cast<std::size_t>(m)};
        p.w = {w.data(), w.size()};
        p.t = time_state ? z[n + m] : 0.0;
        return p;
    }

    IntervalPoint box_point(const Box& z, const Box& w, const Interval& t) const {
        IntervalPoint p;
        p.x.assign(z.begin(), z.begin() + n);
        p.u.assign(z.begin() + n, z.begin() + n + m);
        p.w.assign(w.begin(), w.end());
        p.t = time_state ? z[n + m] : t;
        return p;
    }

    Vec g_point(const std::vector<double>& z, const std::vector<double>& w) const {
        Vec out = Vec::Zero(dim);
        EvalPoint p = point(z, w);
        for (int i = 0; i < n; ++i) out(i) = f[i].eval(p);
        if (time_state) out(dim - 1) = 1.0;
        return out;
    }

    Box g_box(const Box& z, const Box& w, const Interval& t) const {
        Box out(dim, Interval(0.0));
        IntervalPoint p = box_point(z, w, t);
        for (int i = 0; i < n; ++i) out[i] = f[i].eval_interval(p);
        if (time_state) out[dim - 1] = Interval(1.0);
        return out;
    }

    void linearization(const std::vector<double>& z, const std::vector<double>& w, Mat& A,
                       Mat& B) const {
        A = Mat::Zero(dim, dim);
        B = Mat::Zero(dim, std::max(l, 1));
        EvalPoint p = point(z, w);
        for (int i = 0; i < n; ++i) {
            for (int v = 0; v < dim; ++v) A(i, v) = jac[i][v].eval(p);
            for (int v = 0; v < l; ++v) B(i, v) = jac[i][dim + v].eval(p);
        }
    }

    // L_i = 1/2 zeta' H_i(box) zeta over the a-priori enclosure
    Box lagrange(const Box& z_box, const Box& w_box, const Interval& t,
                 const std::vector<double>& z_star, const std::vector<double>& w_star) const {
        Box out(dim, Interval(0.0));
        IntervalPoint p = box_point(z_box, w_box, t);
        std::vector<Interval> zeta(vars);
        for (int v = 0; v < dim; ++v) zeta[v] = z_box[v] - Interval(z_star[v]);
        for (int v = 0; v < l; ++v) zeta[dim + v] = w_box[v] - Interval(w_star[v]);
        for (int i = 0; i < n; ++i) {
            Interval acc(0.0);
            for (int a = 0; a < vars; ++a) {
                if (zeta[a].is_degenerate() && zeta[a].mid() == 0.0) continue;
                for (int b = a; b < vars; ++b) {
                    Interval h = hess[i][a][b - a].eval_interval(p);
                    if (h.lo == 0.0 && h.hi == 0.0) continue;
                    Interval term = h * zeta[a] * zeta[b];
                    if (b > a) term = 2.0 * term;
                    acc += term;
                }
            }
            out[i] = 0.5 * acc;
        }
        return out;
    }
};

double sym_rad(const Interval& v) { return std::max(std::abs(v.lo), std::abs(v.hi)); }

// reset u_held <- kappa(t_k, x)
void apply_sampling_reset(PolyZonotope& z, const FieldModel& fm, const Controller& kappa,
                          double t_k, int poly_order, int& next_factor_id) {
    std::vector<FactorPoly> x_rows;
    for (int d = 0; d < fm.n; ++d) x_rows.push_back(z.row_poly(d));
    Box x_box = [&] {
        Box b = z.enclosure();
        return Box(b.begin(), b.begin() + fm.n);
    }();

    for (int i = 0; i < fm.m; ++i) {
        const ScalarExpression& ki = kappa.kappa[i];
        if (ki.references(ExprOp::Sat))
            throw ReachError("controller with saturation is not smooth; reachability "
                             "requires polynomial or smooth expressions");
        if (ki.is_polynomial()) {
            ComposeContext ctx;
            FactorPoly tp = FactorPoly::constant(t_k);
            ctx.states = &x_rows;
            ctx.time = &tp;
            ctx.trunc_order = poly_order;
            auto r = compose_polynomial(ki, ctx);
            z.replace_row(fm.n + i, r.poly, r.remainder, next_factor_id);
        } else {
            // mean value: kappa(c) + J_mid (x - c) + (J(box) - J_mid)(box - c)
            std::vector<double> xc(fm.n);
            for (int d = 0; d < fm.n; ++d) xc[d] = x_box[d].mid();
            EvalPoint pc{t_k, {xc.data(), xc.size()}, {}, {}};
            FactorPoly row = FactorPoly::constant(ki.eval(pc));
            Interval rem(0.0);
            IntervalPoint pb;
            pb.t = Interval(t_k);
            pb.x = x_box;
            for (int d = 0; d < fm.n; ++d) {
                auto dk = ki.derivative(ExprOp::State, d + 1);
                double j_mid = dk.eval(pc);
                Interval j_box = dk.eval_interval(pb);
                row = poly_add(row, poly_scale(poly_add(x_rows[d], FactorPoly::constant(-xc[d])),
                                               j_mid));
                rem += (j_box - Interval(j_mid)) * (x_box[d] - Interval(xc[d]));
            }
            z.replace_row(fm.n + i, row, rem, next_factor_id);
        }
    }
}

}  // namespace

ReachSequence reach_closed_loop(const SystemModel& sys, const Controller& kappa,
                                const Rational& horizon, const ReachConfig& cfg) {
    sys.validate();
    if (static_cast<int>(kappa.kappa.size()) != sys.m)
        throw std::invalid_argument("controller output dimension mismatch");
    FieldModel fm(sys);

    ReachSequence seq;
    seq.c = sys.c;
    seq.init_box = sys.init;

    Box aug0 = sys.init;
    for (int i = 0; i < fm.dim - fm.n; ++i) aug0.push_back(Interval(0.0));
    PolyZonotope z = PolyZonotope::from_box(aug0, 0, &seq.init_factor_dims);
    seq.p0 = static_cast<int>(seq.init_factor_dims.size());
    int next_factor_id = seq.p0;

    const Box& omega = sys.omega;
    std::vector<double> w_star(sys.l, 0.0);
    for (int i = 0; i < sys.l; ++i) w_star[i] = omega[i].mid();

    Rational half = sys.c / Rational(2);
    std::set<Rational> events;
    for (Rational t(0); t <= horizon; t = t + half) events.insert(t);
    for (Rational t(0); t <= horizon; t = t + sys.eta) events.insert(t);
    events.insert(horizon);

    auto record_point_entry = [&]() {
        std::vector<int> xdims(fm.n);
        for (int d = 0; d < fm.n; ++d) xdims[d] = d;
        ReachEntry e;
        e.is_point = true;
        e.set = z.select_rows(xdims);
        e.set.reduce_order(cfg.max_gens_factor * fm.n, seq.p0, next_factor_id);
        e.box = e.set.enclosure();
        e.time = Interval((Rational(static_cast<int>(seq.entries.size())) * half).to_double());
        seq.entries.push_back(std::move(e));
    };

    Box window_hull;
    bool window_open = false;
    // the marching representation keeps a generous budget; the stored entries
    // are reduced to the tight budget above (their enclosure is unchanged)
    const int gen_budget = 100 * fm.dim;

    Rational prev(0);
    bool first = true;
    for (const Rational& ev : events) {
        if (!first) {
            double t0 = prev.to_double();
            double t1 = ev.to_double();
            double span = t1 - t0;
            int steps = std::max(1, static_cast<int>(std::ceil(span / cfg.step - 1e-9)));
            double dt = span / steps;
            for (int s = 0; s < steps; ++s) {
                double ts = t0 + s * dt;
                Interval t_int(ts, ts + dt);

                Box z_box = z.enclosure();
                std::vector<double> z_star(fm.dim);
                for (int d = 0; d < fm.dim; ++d) z_star[d] = z_box[d].mid();

                // validated a-priori enclosure: B >= encl(Z) + [0,dt]*g(B)
                Box guess = z_box;
                {
                    Box g0 = fm.g_box(z_box, omega, t_int);
                    for (int d = 0; d < fm.dim; ++d)
                        guess[d] = (z_box[d] + Interval(0.0, dt) * g0[d])
                                       .inflate(cfg.inflation_abs, cfg.inflation_rel);
                }
                Box apriori;
                bool converged = false;
                for (int it = 0; it < cfg.max_inflations; ++it) {
                    Box gb = fm.g_box(guess, omega, t_int);
                    Box check(fm.dim);
                    bool inside = true;
                    for (int d = 0; d < fm.dim; ++d) {
                        check[d] = z_box[d] + Interval(0.0, dt) * gb[d];
                        if (!guess[d].contains(check[d])) inside = false;
                    }
                    if (inside) {
                        apriori = check;
                        converged = true;
                        break;
                    }
                    for (int d = 0; d < fm.dim; ++d)
                        guess[d] = Interval::hull(guess[d], check[d])
                                       .inflate(cfg.inflation_abs, cfg.inflation_rel);
                }
                if (!converged)
                    throw ReachError(
                        "a-priori enclosure did not converge at t = " + std::to_string(ts) +
                        "; reduce the reachability step size");

                Mat A, B;
                fm.linearization(z_star, w_star, A, B);
                Vec f_star = fm.g_point(z_star, w_star);
                Vec c_vec = f_star - A * Vec::Map(z_star.data(), fm.dim);

                Mat Adt = A * dt;
                Mat phi = Mat::Identity(fm.dim, fm.dim);
                Mat phi1 = Mat::Identity(fm.dim, fm.dim) * dt;
                Mat term = Mat::Identity(fm.dim, fm.dim);
                for (int i = 1; i <= cfg.taylor_order; ++i) {
                    term = term * Adt / i;
                    phi += term;
                    phi1 += term * dt / (i + 1);
                }
                Mat abs_a = Adt.cwiseAbs();
                Mat expm_abs = expm_nonneg(abs_a);
                Mat pow_k = Mat::Identity(fm.dim, fm.dim);
                for (int i = 0; i < cfg.taylor_order + 1; ++i) pow_k = pow_k * abs_a;
                double fact = 1.0;
                for (int i = 2; i <= cfg.taylor_order + 1; ++i) fact *= i;
                Mat e_rem = pow_k * expm_abs / fact;  // |exp(A dt) - phi| bound
                Mat phi1_abs = Mat::Identity(fm.dim, fm.dim) * dt;
                {
                    Mat t2 = Mat::Identity(fm.dim, fm.dim);
                    for (int i = 1; i <= cfg.taylor_order; ++i) {
                        t2 = t2 * abs_a / i;
                        phi1_abs += t2 * dt / (i + 1);
                    }
                    phi1_abs += e_rem * dt;
                }

                Box lag = fm.lagrange(apriori, omega, t_int, z_star, w_star);

                Vec lag_rad = Vec::Zero(fm.dim), v_rad = Vec::Zero(fm.dim);
                for (int d = 0; d < fm.dim; ++d) {
                    lag_rad(d) = sym_rad(lag[d]);
                    if (sys.l > 0) {
                        Interval acc(0.0);
                        for (int j = 0; j < sys.l; ++j)
                            acc += Interval(B(d, j)) * (omega[j] - Interval(w_star[j]));
                        v_rad(d) = sym_rad(acc);
                    }
                }
                Vec z0_abs = Vec::Zero(fm.dim);
                for (int d = 0; d < fm.dim; ++d)
                    z0_abs(d) = std::max(std::abs(z_box[d].lo), std::abs(z_box[d].hi));
                Vec step_err =
                    phi1_abs * (lag_rad + v_rad) + e_rem * z0_abs + e_rem * dt * c_vec.cwiseAbs();

                z.apply_linear(phi);
                z.add_offset(phi1 * c_vec);
                Box err(fm.dim);
                for (int d = 0; d < fm.dim; ++d) err[d] = Interval(-step_err(d), step_err(d));
                z.minkowski_box(err, next_factor_id);
                if (z.num_gens() > gen_budget + gen_budget / 2)
                    z.reduce_order(gen_budget, seq.p0, next_factor_id);

                Box state_apriori(apriori.begin(), apriori.begin() + fm.n);
                if (!window_open) {
                    window_hull = state_apriori;
                    window_open = true;
                } else {
                    window_hull = box_hull(window_hull, state_apriori);
                }
            }
        }
        first = false;
        prev = ev;

        if (ev.divisible_by(sys.eta) && (ev < horizon || ev == Rational(0)))
            apply_sampling_reset(z, fm, kappa, ev.to_double(), cfg.poly_order, next_factor_id);

        if (ev.divisible_by(half) && ev.divisible_by(sys.c)) {
            if (window_open) {
                ReachEntry e;
                e.is_point = false;
                e.box = window_hull;
                e.time = Interval((ev - sys.c).to_double(), ev.to_double());
                seq.entries.push_back(std::move(e));
                window_open = false;
            }
            record_point_entry();
        }
    }
    return seq;
}

std::string reach_csv(const ReachSequence& seq) {
    std::ostringstream os;
    os << "grid_index,kind,time_lo,time_hi";
    std::size_t n = seq.init_box.size();
    for (std::size_t d = 0; d < n; ++d) os << ",x" << (d + 1) << "_lo,x" << (d + 1) << "_hi";
    os << "\n";
    for (std::size_t j = 0; j < seq.entries.size(); ++j) {
        const auto& e = seq.entries[j];
        os << j << "," << (e.is_point ? "point" : "interval") << "," << e.time.lo << ","
           << e.time.hi;
        for (std::size_t d = 0; d < n; ++d) os << "," << e.box[d].lo << "," << e.box[d].hi;
        os << "\n";
    }
    return os.str();
}

}  // namespace stlsynth
