#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stlsynth/interval.hpp"

namespace stlsynth {

// ── ScalarExpression ────────────────────────────────────────────────────────
// Immutable expression tree over time `t`, states x1..xn, inputs u1..um and
// disturbances w1..wl.  Shared subtrees are safe to use from parallel workers.
// Node set: constants, variables, {neg, sin, cos, tanh, saturate, recip}
// unary, {add, mul, pow(k >= 0)} binary.  `recip` exists for dynamics with a
// state in the denominator; the GP grammars never generate it.
// ─────────────────────────────────────────────────────────────────────────────

enum class ExprOp : std::uint8_t {
    Const, Time, State, Input, Disturb,
    Neg, Sin, Cos, Tanh, Sat, Recip,
    Add, Mul, Pow,
    // partial-tree leaves for grammar templates; never present in phenotypes
    NtRef,      // index = nonterminal id
    RandConst   // sat_lo/sat_hi carry the draw range
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprOp op = ExprOp::Const;
    double value = 0.0;   // Const
    int index = 0;        // State/Input/Disturb, 1-based
    int exponent = 0;     // Pow
    double sat_lo = 0.0, sat_hi = 0.0;
    ExprPtr a, b;
};

struct EvalPoint {
    double t = 0.0;
    std::span<const double> x{};
    std::span<const double> u{};
    std::span<const double> w{};
};

struct IntervalPoint {
    Interval t{0.0};
    std::vector<Interval> x{};
    std::vector<Interval> u{};
    std::vector<Interval> w{};
};

class ScalarExpression {
public:
    ScalarExpression() = default;
    explicit ScalarExpression(ExprPtr root) : root_(std::move(root)) {}

    bool empty() const { return root_ == nullptr; }
    const ExprPtr& root() const { return root_; }

    // ── Builders ────────────────────────────────────────────────────────
    static ScalarExpression constant(double v);
    static ScalarExpression time();
    static ScalarExpression state(int i);     // x_i, 1-based
    static ScalarExpression input(int i);     // u_i
    static ScalarExpression disturbance(int i);
    static ScalarExpression add(ScalarExpression a, ScalarExpression b);
    static ScalarExpression sub(ScalarExpression a, ScalarExpression b);
    static ScalarExpression mul(ScalarExpression a, ScalarExpression b);
    static ScalarExpression neg(ScalarExpression a);
    static ScalarExpression pow(ScalarExpression a, int k);
    static ScalarExpression sin(ScalarExpression a);
    static ScalarExpression cos(ScalarExpression a);
    static ScalarExpression tanh(ScalarExpression a);
    static ScalarExpression saturate(ScalarExpression a, double lo, double hi);
    static ScalarExpression recip(ScalarExpression a);
    static ScalarExpression nt_ref(int id);
    static ScalarExpression rand_const(double lo, double hi);

    double eval(const EvalPoint& p) const;
    Interval eval_interval(const IntervalPoint& p) const;

    // Symbolic partial derivative. `wrt` selects the variable: Time, or
    // State/Input/Disturb with `index`. Throws on Sat (non-smooth).
    ScalarExpression derivative(ExprOp wrt, int index = 0) const;

    // Structural queries.
    bool references(ExprOp kind) const;                // any node of this op
    bool references_var(ExprOp kind, int index) const;
    int max_var_index(ExprOp kind) const;
    bool is_polynomial() const;  // only Const/Time/State/Input/Disturb/Neg/Add/Mul/Pow
    int node_count() const;

    std::string str() const;

    // substitute occurrences of variable (kind,index) with `repl`.
    ScalarExpression substitute(ExprOp kind, int index, const ScalarExpression& repl) const;
    // substitute a numeric value for the time variable.
    ScalarExpression bind_time(double t) const;

    bool structurally_equal(const ScalarExpression& o) const;

private:
    ExprPtr root_;
};

// ── Parsing ─────────────────────────────────────────────────────────────────
// Surface syntax: numbers, `t`, `x<k>`, `u<k>`, `w<k>`, + - * / ^, parens,
// sin(e), cos(e), tanh(e), sat(e, lo, hi), recip(e). `a / b` becomes
// a * recip(b). An optional resolver maps other identifiers to expressions
// (grammar nonterminals, uff/xref terminals, named macros).

struct ExprParseError : std::runtime_error {
    std::size_t pos;
    ExprParseError(const std::string& msg, std::size_t p)
        : std::runtime_error(msg + " (at position " + std::to_string(p) + ")"), pos(p) {}
};

struct ExprLimits {
    int n_states = 0;      // 0 disables the check
    int n_inputs = 0;
    int n_disturbances = 0;
    bool check = false;
    bool allow_rand = false;  // grammar files: rand(lo,hi) placeholder leaves
};

using IdentResolver = std::function<ScalarExpression(const std::string&, std::size_t pos)>;

ScalarExpression parse_expression(const std::string& text, const ExprLimits& lim = {},
                                  const IdentResolver& resolver = nullptr);

// ── Compiled tape ───────────────────────────────────────────────────────────
// Post-order flattening for fast repeated evaluation in integrators and
// optimizers. One instruction per node; slots hold intermediate results.

class CompiledExpr {
public:
    CompiledExpr() = default;
    explicit CompiledExpr(const ScalarExpression& e);

    double eval(const EvalPoint& p) const;
    Interval eval_interval(const IntervalPoint& p) const;
    bool empty() const { return code_.empty(); }

private:
    struct Instr {
        ExprOp op;
        std::int32_t a = -1, b = -1;
        double value = 0.0;
        int index = 0;
        int exponent = 0;
        double sat_lo = 0.0, sat_hi = 0.0;
    };
    std::vector<Instr> code_;

    template <class Scalar, class Point>
    Scalar run(const Point& p) const;
};

}  // namespace stlsynth
