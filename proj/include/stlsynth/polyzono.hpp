#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "stlsynth/expr.hpp"
#include "stlsynth/interval.hpp"

namespace stlsynth {

// ── Factor monomials and polynomials ────────────────────────────────────────
// A sparse exponent vector over factor ids, sorted by id. Factor ids are
// stable within one reachability run: ids 0..p0-1 parameterize the initial
// set and are never reduced away.

using ExpVec = std::vector<std::pair<int, int>>;  // (factor id, exponent > 0)

ExpVec exp_mul(const ExpVec& a, const ExpVec& b);
int exp_degree(const ExpVec& e);
Interval monomial_range(const ExpVec& e);  // over alpha in [-1,1]^p
double monomial_eval(const ExpVec& e, const std::vector<double>& alpha);
Interval monomial_interval(const ExpVec& e, const std::function<Interval(int)>& factor_box);

struct FactorMonomial {
    double coeff = 0.0;
    ExpVec exps;
};

// Canonical polynomial over factors: monomials sorted by exponent vector,
// no duplicates, no zero coefficients.
struct FactorPoly {
    std::vector<FactorMonomial> terms;

    static FactorPoly constant(double v);
    static FactorPoly factor(int id);
    double eval(const std::vector<double>& alpha) const;
    Interval interval(const std::function<Interval(int)>& factor_box) const;
    Interval range() const;  // over [-1,1]^p
    int degree() const;
    void canonicalize();
};

FactorPoly poly_add(const FactorPoly& a, const FactorPoly& b);
FactorPoly poly_scale(const FactorPoly& a, double s);
FactorPoly poly_mul(const FactorPoly& a, const FactorPoly& b, int trunc_order,
                    Interval* remainder);

// Composition of polynomial scalar expressions over factor-polynomial rows.
// Time resolves to `time_poly` when provided (otherwise Time must not occur),
// states/inputs resolve to the given rows. Monomials above `trunc_order`
// are enclosed into the per-output remainder interval.
struct ComposeContext {
    const std::vector<FactorPoly>* states = nullptr;
    const std::vector<FactorPoly>* inputs = nullptr;
    const FactorPoly* time = nullptr;
    int trunc_order = 6;
};

struct ComposeResult {
    FactorPoly poly;
    Interval remainder{0.0};
};

ComposeResult compose_polynomial(const ScalarExpression& e, const ComposeContext& ctx);

// ── PolyZonotope ────────────────────────────────────────────────────────────
// Dependent-generator set { sum_i (prod_k alpha_k^{E(k,i)}) G(:,i) } with
// alpha in [-1,1]^p. The all-zero exponent column, when present, is the
// constant offset. Columns with equal exponent vectors are merged.

class PolyZonotope {
public:
    PolyZonotope() = default;
    PolyZonotope(Eigen::MatrixXd G, const Eigen::MatrixXi& E);
    static PolyZonotope point(const Eigen::VectorXd& v, int num_factors = 0);
    // identity parameterization of a box; factor ids first_id.. for the
    // non-degenerate dims (degenerate dims carry no generator)
    static PolyZonotope from_box(const Box& b, int first_id, std::vector<int>* factor_dims = nullptr);

    int dim() const { return static_cast<int>(gens_.rows()); }
    int num_gens() const { return static_cast<int>(gens_.cols()); }
    int num_factors() const { return num_factors_; }
    const Eigen::MatrixXd& generators() const { return gens_; }
    const std::vector<ExpVec>& exponents() const { return exps_; }
    Eigen::MatrixXi exponent_matrix() const;  // dense p x h view

    Eigen::VectorXd point_at(const std::vector<double>& alpha) const;
    Box enclosure() const;
    FactorPoly row_poly(int dim) const;

    void apply_linear(const Eigen::MatrixXd& M);
    void add_offset(const Eigen::VectorXd& v);
    void minkowski_box(const Box& b, int& next_factor_id);
    void append_rows(const PolyZonotope& other);  // same factor space
    PolyZonotope select_rows(const std::vector<int>& rows) const;
    void replace_row(int dim, const FactorPoly& poly, const Interval& remainder,
                     int& next_factor_id);

    // merge smallest generators into an interval enclosure until at most
    // max_gens remain; columns whose exponents touch a protected factor are
    // kept unless nothing else is left.
    void reduce_order(int max_gens, int protected_below_id, int& next_factor_id);

    std::vector<int> active_factors() const;
    void canonicalize();  // merge duplicate exponent columns, drop zero columns

private:
    Eigen::MatrixXd gens_;        // n x h
    std::vector<ExpVec> exps_;    // h entries
    int num_factors_ = 0;
};

// Exact polynomial image (exponent addition / generator products), with
// degree truncation above trunc_order enclosed as an added interval box.
PolyZonotope pz_exact_poly_map(const std::vector<ScalarExpression>& q, const PolyZonotope& z,
                               int trunc_order, int& next_factor_id, double t_value = 0.0);

}  // namespace stlsynth
