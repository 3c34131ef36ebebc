#include "stlsynth/polyzono.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stlsynth {

// ── exponent vectors ────────────────────────────────────────────────────────

ExpVec exp_mul(const ExpVec& a, const ExpVec& b) {
    ExpVec out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j >= b.size() || (i < a.size() && a[i].first < b[j].first)) out.push_back(a[i++]);
        else if (i >= a.size() || b[j].first < a[i].first) out.push_back(b[j++]);
        else {
            out.emplace_back(a[i].first, a[i].second + b[j].second);
            ++i; ++j;
        }
    }
    return out;
}

int exp_degree(const ExpVec& e) {
    int d = 0;
    for (const auto& [id, k] : e) d += k;
    return d;
}

Interval monomial_range(const ExpVec& e) {
    // product over factors of alpha^k ranges: even k -> [0,1], odd -> [-1,1]
    bool any_odd = false;
    for (const auto& [id, k] : e)
        if (k % 2 != 0) { any_odd = true; break; }
    if (e.empty()) return Interval(1.0);
    return any_odd ? Interval(-1.0, 1.0) : Interval(0.0, 1.0);
}

double monomial_eval(const ExpVec& e, const std::vector<double>& alpha) {
    double v = 1.0;
    for (const auto& [id, k] : e) {
        if (id >= static_cast<int>(alpha.size()))
            throw std::invalid_argument("parameterization vector too short");
        v *= std::pow(alpha[id], k);
    }
    return v;
}

Interval monomial_interval(const ExpVec& e, const std::function<Interval(int)>& factor_box) {
    Interval v(1.0);
    for (const auto& [id, k] : e) v = v * pow_int(factor_box(id), k);
    return v;
}

// ── FactorPoly ──────────────────────────────────────────────────────────────

FactorPoly FactorPoly::constant(double v) {
    FactorPoly p;
    if (v != 0.0) p.terms.push_back({v, {}});
    return p;
}

FactorPoly FactorPoly::factor(int id) {
    FactorPoly p;
    p.terms.push_back({1.0, {{id, 1}}});
    return p;
}

double FactorPoly::eval(const std::vector<double>& alpha) const {
    double v = 0.0;
    for (const auto& m : terms) v += m.coeff * monomial_eval(m.exps, alpha);
    return v;
}

Interval FactorPoly::interval(const std::function<Interval(int)>& factor_box) const {
    Interval v(0.0);
    for (const auto& m : terms) v += Interval(m.coeff) * monomial_interval(m.exps, factor_box);
    return v;
}

Interval FactorPoly::range() const {
    Interval v(0.0);
    for (const auto& m : terms) v += Interval(m.coeff) * monomial_range(m.exps);
    return v;
}

int FactorPoly::degree() const {
    int d = 0;
    for (const auto& m : terms) d = std::max(d, exp_degree(m.exps));
    return d;
}

void FactorPoly::canonicalize() {
    std::sort(terms.begin(), terms.end(),
              [](const FactorMonomial& a, const FactorMonomial& b) { return a.exps < b.exps; });
    std::vector<FactorMonomial> out;
    for (auto& m : terms) {
        if (!out.empty() && out.back().exps == m.exps) out.back().coeff += m.coeff;
        else out.push_back(std::move(m));
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const FactorMonomial& m) { return m.coeff == 0.0; }),
              out.end());
    terms = std::move(out);
}

FactorPoly poly_add(const FactorPoly& a, const FactorPoly& b) {
    FactorPoly out;
    out.terms.reserve(a.terms.size() + b.terms.size());
    out.terms.insert(out.terms.end(), a.terms.begin(), a.terms.end());
    out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
    out.canonicalize();
    return out;
}

FactorPoly poly_scale(const FactorPoly& a, double s) {
    FactorPoly out = a;
    for (auto& m : out.terms) m.coeff *= s;
    if (s == 0.0) out.terms.clear();
    return out;
}

FactorPoly poly_mul(const FactorPoly& a, const FactorPoly& b, int trunc_order,
                    Interval* remainder) {
    FactorPoly out;
    out.terms.reserve(a.terms.size() * b.terms.size());
    for (const auto& ma : a.terms)
        for (const auto& mb : b.terms) {
            ExpVec e = exp_mul(ma.exps, mb.exps);
            double c = ma.coeff * mb.coeff;
            if (exp_degree(e) > trunc_order) {
                if (!remainder)
                    throw std::domain_error("polynomial degree exceeds truncation order");
                *remainder += Interval(c) * monomial_range(e);
            } else {
                out.terms.push_back({c, std::move(e)});
            }
        }
    out.canonicalize();
    return out;
}

// ── compose ─────────────────────────────────────────────────────────────────

namespace {

ComposeResult compose_node(const ExprNode* n, const ComposeContext& ctx) {
    switch (n->op) {
        case ExprOp::Const: return {FactorPoly::constant(n->value), Interval(0.0)};
        case ExprOp::Time:
            if (!ctx.time) throw std::domain_error("time variable not bound in composition");
            return {*ctx.time, Interval(0.0)};
        case ExprOp::State:
            if (!ctx.states || n->index > static_cast<int>(ctx.states->size()))
                throw std::domain_error("state row missing in composition");
            return {(*ctx.states)[n->index - 1], Interval(0.0)};
        case ExprOp::Input:
            if (!ctx.inputs || n->index > static_cast<int>(ctx.inputs->size()))
                throw std::domain_error("input row missing in composition");
            return {(*ctx.inputs)[n->index - 1], Interval(0.0)};
        case ExprOp::Disturb:
            throw std::domain_error("disturbance variable cannot appear in a set-valued map");
        case ExprOp::Neg: {
            auto r = compose_node(n->a.get(), ctx);
            return {poly_scale(r.poly, -1.0), -r.remainder};
        }
        case ExprOp::Add: {
            auto l = compose_node(n->a.get(), ctx);
            auto r = compose_node(n->b.get(), ctx);
            return {poly_add(l.poly, r.poly), l.remainder + r.remainder};
        }
        case ExprOp::Mul: {
            auto l = compose_node(n->a.get(), ctx);
            auto r = compose_node(n->b.get(), ctx);
            Interval rem(0.0);
            FactorPoly p = poly_mul(l.poly, r.poly, ctx.trunc_order, &rem);
            // cross terms with the operand remainders, bounded over [-1,1]^p
            rem += l.remainder * r.poly.range() + r.remainder * l.poly.range() +
                   l.remainder * r.remainder;
            return {std::move(p), rem};
        }
        case ExprOp::Pow: {
            auto base = compose_node(n->a.get(), ctx);
            ComposeResult acc{FactorPoly::constant(1.0), Interval(0.0)};
            for (int i = 0; i < n->exponent; ++i) {
                Interval rem(0.0);
                FactorPoly p = poly_mul(acc.poly, base.poly, ctx.trunc_order, &rem);
                rem += acc.remainder * base.poly.range() + base.remainder * acc.poly.range() +
                       acc.remainder * base.remainder;
                acc = {std::move(p), rem};
            }
            return acc;
        }
        default:
            throw std::domain_error("expression is not polynomial");
    }
}

}  // namespace

ComposeResult compose_polynomial(const ScalarExpression& e, const ComposeContext& ctx) {
    if (ctx.trunc_order < 1) throw std::invalid_argument("truncation order must be >= 1");
    return compose_node(e.root().get(), ctx);
}

// ── PolyZonotope ────────────────────────────────────────────────────────────

PolyZonotope::PolyZonotope(Eigen::MatrixXd G, const Eigen::MatrixXi& E) {
    if (G.cols() != E.cols())
        throw std::invalid_argument("generator/exponent column count mismatch");
    gens_ = std::move(G);
    num_factors_ = static_cast<int>(E.rows());
    exps_.resize(E.cols());
    for (int i = 0; i < E.cols(); ++i) {
        for (int k = 0; k < E.rows(); ++k) {
            if (E(k, i) < 0) throw std::invalid_argument("negative exponent");
            if (E(k, i) > 0) exps_[i].emplace_back(k, E(k, i));
        }
    }
    canonicalize();
}

PolyZonotope PolyZonotope::point(const Eigen::VectorXd& v, int num_factors) {
    PolyZonotope z;
    z.gens_ = v;
    z.exps_.resize(1);
    z.num_factors_ = num_factors;
    z.canonicalize();
    return z;
}

PolyZonotope PolyZonotope::from_box(const Box& b, int first_id, std::vector<int>* factor_dims) {
    PolyZonotope z;
    int n = static_cast<int>(b.size());
    std::vector<int> dims;
    for (int i = 0; i < n; ++i)
        if (b[i].rad() > 0.0) dims.push_back(i);
    z.gens_ = Eigen::MatrixXd::Zero(n, 1 + dims.size());
    z.exps_.resize(1 + dims.size());
    for (int i = 0; i < n; ++i) z.gens_(i, 0) = b[i].mid();
    for (std::size_t k = 0; k < dims.size(); ++k) {
        z.gens_(dims[k], 1 + k) = b[dims[k]].rad();
        z.exps_[1 + k] = {{first_id + static_cast<int>(k), 1}};
    }
    z.num_factors_ = first_id + static_cast<int>(dims.size());
    if (factor_dims) *factor_dims = dims;
    z.canonicalize();
    return z;
}

Eigen::MatrixXi PolyZonotope::exponent_matrix() const {
    Eigen::MatrixXi E = Eigen::MatrixXi::Zero(num_factors_, num_gens());
    for (int i = 0; i < num_gens(); ++i)
        for (const auto& [id, k] : exps_[i]) E(id, i) = k;
    return E;
}

Eigen::VectorXd PolyZonotope::point_at(const std::vector<double>& alpha) const {
    if (static_cast<int>(alpha.size()) < num_factors_)
        throw std::invalid_argument("parameterization vector dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
    for (int i = 0; i < num_gens(); ++i) out += monomial_eval(exps_[i], alpha) * gens_.col(i);
    return out;
}

Box PolyZonotope::enclosure() const {
    Box b(dim(), Interval(0.0));
    for (int i = 0; i < num_gens(); ++i) {
        Interval r = monomial_range(exps_[i]);
        for (int d = 0; d < dim(); ++d) b[d] += Interval(gens_(d, i)) * r;
    }
    return b;
}

FactorPoly PolyZonotope::row_poly(int d) const {
    FactorPoly p;
    for (int i = 0; i < num_gens(); ++i) {
        if (gens_(d, i) != 0.0) p.terms.push_back({gens_(d, i), exps_[i]});
    }
    p.canonicalize();
    return p;
}

void PolyZonotope::apply_linear(const Eigen::MatrixXd& M) {
    if (M.cols() != gens_.rows()) throw std::invalid_argument("linear map dimension mismatch");
    gens_ = M * gens_;
    canonicalize();
}

void PolyZonotope::add_offset(const Eigen::VectorXd& v) {
    // fold into the all-zero exponent column
    for (int i = 0; i < num_gens(); ++i) {
        if (exps_[i].empty()) {
            gens_.col(i) += v;
            return;
        }
    }
    gens_.conservativeResize(Eigen::NoChange, gens_.cols() + 1);
    gens_.col(gens_.cols() - 1) = v;
    exps_.emplace_back();
}

void PolyZonotope::minkowski_box(const Box& b, int& next_factor_id) {
    if (static_cast<int>(b.size()) != dim())
        throw std::invalid_argument("box dimension mismatch");
    Eigen::VectorXd center(dim());
    std::vector<int> dims;
    for (int i = 0; i < dim(); ++i) {
        center(i) = b[i].mid();
        if (b[i].rad() > 0.0) dims.push_back(i);
    }
    add_offset(center);
    if (!dims.empty()) {
        int h0 = num_gens();
        gens_.conservativeResize(Eigen::NoChange, h0 + dims.size());
        for (std::size_t k = 0; k < dims.size(); ++k) {
            gens_.col(h0 + k).setZero();
            gens_(dims[k], h0 + k) = b[dims[k]].rad();
            exps_.push_back({{next_factor_id++, 1}});
        }
    }
    num_factors_ = std::max(num_factors_, next_factor_id);
    canonicalize();
}

void PolyZonotope::append_rows(const PolyZonotope& other) {
    // join two PZs over the same factor space into a stacked-state PZ
    std::map<ExpVec, int> col_of;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim() + other.dim(), 0);
    std::vector<ExpVec> exps;
    auto add_cols = [&](const PolyZonotope& z, int row_off) {
        for (int i = 0; i < z.num_gens(); ++i) {
            auto it = col_of.find(z.exps_[i]);
            int col;
            if (it == col_of.end()) {
                col = static_cast<int>(G.cols());
                G.conservativeResize(Eigen::NoChange, col + 1);
                G.col(col).setZero();
                exps.push_back(z.exps_[i]);
                col_of[z.exps_[i]] = col;
            } else {
                col = it->second;
            }
            G.block(row_off, col, z.dim(), 1) += z.gens_.col(i);
        }
    };
    add_cols(*this, 0);
    add_cols(other, dim());
    gens_ = std::move(G);
    exps_ = std::move(exps);
    num_factors_ = std::max(num_factors_, other.num_factors_);
    canonicalize();
}

PolyZonotope PolyZonotope::select_rows(const std::vector<int>& rows) const {
    PolyZonotope out;
    out.gens_ = Eigen::MatrixXd(rows.size(), num_gens());
    for (std::size_t r = 0; r < rows.size(); ++r) out.gens_.row(r) = gens_.row(rows[r]);
    out.exps_ = exps_;
    out.num_factors_ = num_factors_;
    out.canonicalize();
    return out;
}

void PolyZonotope::replace_row(int d, const FactorPoly& poly, const Interval& remainder,
                               int& next_factor_id) {
    // zero the row, then scatter the polynomial terms into matching columns
    gens_.row(d).setZero();
    std::map<ExpVec, int> col_of;
    for (int i = 0; i < num_gens(); ++i) col_of[exps_[i]] = i;
    for (const auto& m : poly.terms) {
        auto it = col_of.find(m.exps);
        if (it != col_of.end()) {
            gens_(d, it->second) += m.coeff;
        } else {
            int col = num_gens();
            gens_.conservativeResize(Eigen::NoChange, col + 1);
            gens_.col(col).setZero();
            gens_(d, col) = m.coeff;
            exps_.push_back(m.exps);
            col_of[m.exps] = col;
        }
    }
    if (remainder.rad() > 0.0 || remainder.mid() != 0.0) {
        Box rb(dim(), Interval(0.0));
        rb[d] = remainder;
        minkowski_box(rb, next_factor_id);
    }
    canonicalize();
}

std::vector<int> PolyZonotope::active_factors() const {
    std::vector<bool> seen(num_factors_, false);
    for (const auto& e : exps_)
        for (const auto& [id, k] : e) seen[id] = true;
    std::vector<int> out;
    for (int i = 0; i < num_factors_; ++i)
        if (seen[i]) out.push_back(i);
    return out;
}

void PolyZonotope::canonicalize() {
    std::map<ExpVec, int> col_of;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(gens_.rows(), 0);
    std::vector<ExpVec> exps;
    for (int i = 0; i < num_gens(); ++i) {
        auto it = col_of.find(exps_[i]);
        if (it == col_of.end()) {
            int col = static_cast<int>(G.cols());
            G.conservativeResize(Eigen::NoChange, col + 1);
            G.col(col) = gens_.col(i);
            exps.push_back(exps_[i]);
            col_of[exps_[i]] = col;
        } else {
            G.col(it->second) += gens_.col(i);
        }
    }
    // drop zero columns (keep the offset column only if nonzero)
    Eigen::MatrixXd G2 = Eigen::MatrixXd::Zero(G.rows(), 0);
    std::vector<ExpVec> exps2;
    for (int i = 0; i < G.cols(); ++i) {
        if (G.col(i).isZero(0.0)) continue;
        G2.conservativeResize(Eigen::NoChange, G2.cols() + 1);
        G2.col(G2.cols() - 1) = G.col(i);
        exps2.push_back(exps[i]);
    }
    gens_ = std::move(G2);
    exps_ = std::move(exps2);
    for (const auto& e : exps_)
        for (const auto& [id, k] : e) num_factors_ = std::max(num_factors_, id + 1);
}

void PolyZonotope::reduce_order(int max_gens, int protected_below_id, int& next_factor_id) {
    if (num_gens() <= max_gens) return;
    // boxing cost of a column is ||g||_1 - ||g||_inf: zero for axis-aligned
    // columns, so young remainder generators fold without loss
    struct Cand { int col; double norm; bool protected_col; };
    std::vector<Cand> cands;
    for (int i = 0; i < num_gens(); ++i) {
        if (exps_[i].empty()) continue;  // offset stays
        bool prot = false;
        for (const auto& [id, k] : exps_[i])
            if (id < protected_below_id) { prot = true; break; }
        double cost = gens_.col(i).lpNorm<1>() - gens_.col(i).lpNorm<Eigen::Infinity>();
        cands.push_back({i, cost + 1e-6 * gens_.col(i).lpNorm<1>(), prot});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.protected_col != b.protected_col) return !a.protected_col;
        return a.norm < b.norm;
    });
    int to_remove = num_gens() - max_gens;
    std::vector<bool> remove(num_gens(), false);
    Box slack(dim(), Interval(0.0));
    for (const auto& c : cands) {
        if (to_remove <= 0) break;
        if (c.protected_col) break;  // never fold initial-set dependencies into a box
        remove[c.col] = true;
        Interval r = monomial_range(exps_[c.col]);
        for (int d = 0; d < dim(); ++d) slack[d] += Interval(gens_(d, c.col)) * r;
        --to_remove;
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim(), 0);
    std::vector<ExpVec> exps;
    for (int i = 0; i < num_gens(); ++i) {
        if (remove[i]) continue;
        G.conservativeResize(Eigen::NoChange, G.cols() + 1);
        G.col(G.cols() - 1) = gens_.col(i);
        exps.push_back(exps_[i]);
    }
    gens_ = std::move(G);
    exps_ = std::move(exps);
    minkowski_box(slack, next_factor_id);
}

// ── exact polynomial image ──────────────────────────────────────────────────

PolyZonotope pz_exact_poly_map(const std::vector<ScalarExpression>& q, const PolyZonotope& z,
                               int trunc_order, int& next_factor_id, double t_value) {
    if (trunc_order < 1) throw std::invalid_argument("truncation order must be >= 1");
    std::vector<FactorPoly> rows;
    rows.reserve(z.dim());
    for (int d = 0; d < z.dim(); ++d) rows.push_back(z.row_poly(d));
    FactorPoly tp = FactorPoly::constant(t_value);
    ComposeContext ctx;
    ctx.states = &rows;
    ctx.time = &tp;
    ctx.trunc_order = trunc_order;

    std::vector<ComposeResult> results;
    results.reserve(q.size());
    for (const auto& e : q) results.push_back(compose_polynomial(e, ctx));

    PolyZonotope out = PolyZonotope::point(Eigen::VectorXd::Zero(q.size()), z.num_factors());
    for (std::size_t d = 0; d < results.size(); ++d) {
        int dummy = next_factor_id;
        out.replace_row(static_cast<int>(d), results[d].poly, Interval(0.0), dummy);
    }
    // truncation remainders enter as one interval box
    Box rem(q.size(), Interval(0.0));
    bool any = false;
    for (std::size_t d = 0; d < results.size(); ++d) {
        rem[d] = results[d].remainder;
        if (rem[d].mid() != 0.0 || rem[d].rad() != 0.0) any = true;
    }
    if (any) out.minkowski_box(rem, next_factor_id);
    out.canonicalize();
    return out;
}

}  // namespace stlsynth
