#include "stlsynth/expr.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace stlsynth {

namespace {

ExprPtr make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

bool is_const(const ExprPtr& e, double v) {
    return e && e->op == ExprOp::Const && e->value == v;
}

}  // namespace

// ── Builders (with light constant folding) ──────────────────────────────────

ScalarExpression ScalarExpression::constant(double v) {
    ExprNode n; n.op = ExprOp::Const; n.value = v;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::time() {
    ExprNode n; n.op = ExprOp::Time;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::state(int i) {
    if (i < 1) throw std::invalid_argument("state index must be >= 1");
    ExprNode n; n.op = ExprOp::State; n.index = i;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::input(int i) {
    if (i < 1) throw std::invalid_argument("input index must be >= 1");
    ExprNode n; n.op = ExprOp::Input; n.index = i;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::disturbance(int i) {
    if (i < 1) throw std::invalid_argument("disturbance index must be >= 1");
    ExprNode n; n.op = ExprOp::Disturb; n.index = i;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::add(ScalarExpression a, ScalarExpression b) {
    if (is_const(a.root(), 0.0)) return b;
    if (is_const(b.root(), 0.0)) return a;
    if (a.root()->op == ExprOp::Const && b.root()->op == ExprOp::Const)
        return constant(a.root()->value + b.root()->value);
    ExprNode n; n.op = ExprOp::Add; n.a = a.root(); n.b = b.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::sub(ScalarExpression a, ScalarExpression b) {
    return add(std::move(a), neg(std::move(b)));
}
ScalarExpression ScalarExpression::mul(ScalarExpression a, ScalarExpression b) {
    if (is_const(a.root(), 0.0) || is_const(b.root(), 0.0)) return constant(0.0);
    if (is_const(a.root(), 1.0)) return b;
    if (is_const(b.root(), 1.0)) return a;
    if (a.root()->op == ExprOp::Const && b.root()->op == ExprOp::Const)
        return constant(a.root()->value * b.root()->value);
    ExprNode n; n.op = ExprOp::Mul; n.a = a.root(); n.b = b.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::neg(ScalarExpression a) {
    if (a.root()->op == ExprOp::Const) return constant(-a.root()->value);
    if (a.root()->op == ExprOp::Neg) return ScalarExpression(a.root()->a);
    ExprNode n; n.op = ExprOp::Neg; n.a = a.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::pow(ScalarExpression a, int k) {
    if (k < 0) throw std::invalid_argument("pow exponent must be non-negative");
    if (k == 0) return constant(1.0);
    if (k == 1) return a;
    if (a.root()->op == ExprOp::Const) return constant(std::pow(a.root()->value, k));
    ExprNode n; n.op = ExprOp::Pow; n.a = a.root(); n.exponent = k;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::sin(ScalarExpression a) {
    ExprNode n; n.op = ExprOp::Sin; n.a = a.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::cos(ScalarExpression a) {
    ExprNode n; n.op = ExprOp::Cos; n.a = a.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::tanh(ScalarExpression a) {
    ExprNode n; n.op = ExprOp::Tanh; n.a = a.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::saturate(ScalarExpression a, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("saturate bounds out of order");
    ExprNode n; n.op = ExprOp::Sat; n.a = a.root(); n.sat_lo = lo; n.sat_hi = hi;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::recip(ScalarExpression a) {
    ExprNode n; n.op = ExprOp::Recip; n.a = a.root();
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::nt_ref(int id) {
    ExprNode n; n.op = ExprOp::NtRef; n.index = id;
    return ScalarExpression(make(std::move(n)));
}
ScalarExpression ScalarExpression::rand_const(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("rand bounds out of order");
    ExprNode n; n.op = ExprOp::RandConst; n.sat_lo = lo; n.sat_hi = hi;
    return ScalarExpression(make(std::move(n)));
}

// ── Evaluation ──────────────────────────────────────────────────────────────

namespace {

double eval_node(const ExprNode* n, const EvalPoint& p) {
    switch (n->op) {
        case ExprOp::Const: return n->value;
        case ExprOp::Time: return p.t;
        case ExprOp::State: return p.x[n->index - 1];
        case ExprOp::Input: return p.u[n->index - 1];
        case ExprOp::Disturb: return p.w[n->index - 1];
        case ExprOp::Neg: return -eval_node(n->a.get(), p);
        case ExprOp::Sin: return std::sin(eval_node(n->a.get(), p));
        case ExprOp::Cos: return std::cos(eval_node(n->a.get(), p));
        case ExprOp::Tanh: return std::tanh(eval_node(n->a.get(), p));
        case ExprOp::Sat: {
            double v = eval_node(n->a.get(), p);
            return std::clamp(v, n->sat_lo, n->sat_hi);
        }
        case ExprOp::Recip: return 1.0 / eval_node(n->a.get(), p);
        case ExprOp::Add: return eval_node(n->a.get(), p) + eval_node(n->b.get(), p);
        case ExprOp::Mul: return eval_node(n->a.get(), p) * eval_node(n->b.get(), p);
        case ExprOp::Pow: return std::pow(eval_node(n->a.get(), p), n->exponent);
        case ExprOp::NtRef:
        case ExprOp::RandConst:
            throw std::logic_error("cannot evaluate a partial tree");
    }
    return 0.0;
}

Interval eval_node_i(const ExprNode* n, const IntervalPoint& p) {
    switch (n->op) {
        case ExprOp::Const: return Interval(n->value);
        case ExprOp::Time: return p.t;
        case ExprOp::State: return p.x[n->index - 1];
        case ExprOp::Input: return p.u[n->index - 1];
        case ExprOp::Disturb: return p.w[n->index - 1];
        case ExprOp::Neg: return -eval_node_i(n->a.get(), p);
        case ExprOp::Sin: return stlsynth::sin(eval_node_i(n->a.get(), p));
        case ExprOp::Cos: return stlsynth::cos(eval_node_i(n->a.get(), p));
        case ExprOp::Tanh: return stlsynth::tanh(eval_node_i(n->a.get(), p));
        case ExprOp::Sat: return saturate(eval_node_i(n->a.get(), p), n->sat_lo, n->sat_hi);
        case ExprOp::Recip: return recip(eval_node_i(n->a.get(), p));
        case ExprOp::Add: return eval_node_i(n->a.get(), p) + eval_node_i(n->b.get(), p);
        case ExprOp::Mul: return eval_node_i(n->a.get(), p) * eval_node_i(n->b.get(), p);
        case ExprOp::Pow: return pow_int(eval_node_i(n->a.get(), p), n->exponent);
        case ExprOp::NtRef:
        case ExprOp::RandConst:
            throw std::logic_error("cannot evaluate a partial tree");
    }
    return Interval();
}

}  // namespace

double ScalarExpression::eval(const EvalPoint& p) const { return eval_node(root_.get(), p); }

Interval ScalarExpression::eval_interval(const IntervalPoint& p) const {
    return eval_node_i(root_.get(), p);
}

// ── Derivatives ─────────────────────────────────────────────────────────────

namespace {

ScalarExpression diff(const ExprPtr& e, ExprOp wrt, int index) {
    using E = ScalarExpression;
    auto wrap = [](const ExprPtr& p) { return ScalarExpression(p); };
    switch (e->op) {
        case ExprOp::Const: return E::constant(0.0);
        case ExprOp::Time: return E::constant(wrt == ExprOp::Time ? 1.0 : 0.0);
        case ExprOp::State:
        case ExprOp::Input:
        case ExprOp::Disturb:
            return E::constant(e->op == wrt && e->index == index ? 1.0 : 0.0);
        case ExprOp::Neg: return E::neg(diff(e->a, wrt, index));
        case ExprOp::Sin: return E::mul(E::cos(wrap(e->a)), diff(e->a, wrt, index));
        case ExprOp::Cos: return E::neg(E::mul(E::sin(wrap(e->a)), diff(e->a, wrt, index)));
        case ExprOp::Tanh: {
            // 1 - tanh(a)^2
            auto th = E::tanh(wrap(e->a));
            auto one_m = E::sub(E::constant(1.0), E::mul(th, th));
            return E::mul(one_m, diff(e->a, wrt, index));
        }
        case ExprOp::Sat:
            throw std::domain_error("derivative of saturate is not smooth");
        case ExprOp::Recip: {
            // -a' / a^2
            auto inner = diff(e->a, wrt, index);
            auto sq = E::mul(wrap(e->a), wrap(e->a));
            return E::neg(E::mul(inner, E::recip(sq)));
        }
        case ExprOp::Add:
            return E::add(diff(e->a, wrt, index), diff(e->b, wrt, index));
        case ExprOp::Mul:
            return E::add(E::mul(diff(e->a, wrt, index), wrap(e->b)),
                          E::mul(wrap(e->a), diff(e->b, wrt, index)));
        case ExprOp::Pow:
            return E::mul(E::mul(E::constant(e->exponent), E::pow(wrap(e->a), e->exponent - 1)),
                          diff(e->a, wrt, index));
        case ExprOp::NtRef:
        case ExprOp::RandConst:
            throw std::logic_error("cannot differentiate a partial tree");
    }
    return E::constant(0.0);
}

}  // namespace

ScalarExpression ScalarExpression::derivative(ExprOp wrt, int index) const {
    return diff(root_, wrt, index);
}

// ── Structural queries ──────────────────────────────────────────────────────

namespace {

template <class Fn>
void visit(const ExprNode* n, Fn&& fn) {
    fn(n);
    if (n->a) visit(n->a.get(), fn);
    if (n->b) visit(n->b.get(), fn);
}

}  // namespace

bool ScalarExpression::references(ExprOp kind) const {
    bool found = false;
    visit(root_.get(), [&](const ExprNode* n) { found |= n->op == kind; });
    return found;
}

bool ScalarExpression::references_var(ExprOp kind, int index) const {
    bool found = false;
    visit(root_.get(), [&](const ExprNode* n) { found |= n->op == kind && n->index == index; });
    return found;
}

int ScalarExpression::max_var_index(ExprOp kind) const {
    int mx = 0;
    visit(root_.get(), [&](const ExprNode* n) {
        if (n->op == kind) mx = std::max(mx, n->index);
    });
    return mx;
}

bool ScalarExpression::is_polynomial() const {
    bool poly = true;
    visit(root_.get(), [&](const ExprNode* n) {
        switch (n->op) {
            case ExprOp::Sin: case ExprOp::Cos: case ExprOp::Tanh:
            case ExprOp::Sat: case ExprOp::Recip:
            case ExprOp::NtRef: case ExprOp::RandConst: poly = false; break;
            default: break;
        }
    });
    return poly;
}

int ScalarExpression::node_count() const {
    int c = 0;
    visit(root_.get(), [&](const ExprNode*) { ++c; });
    return c;
}

ScalarExpression ScalarExpression::substitute(ExprOp kind, int index,
                                              const ScalarExpression& repl) const {
    std::function<ScalarExpression(const ExprPtr&)> rec = [&](const ExprPtr& e) -> ScalarExpression {
        if (e->op == kind && (kind == ExprOp::Time || e->index == index)) return repl;
        switch (e->op) {
            case ExprOp::Const: case ExprOp::Time: case ExprOp::State:
            case ExprOp::Input: case ExprOp::Disturb:
                return ScalarExpression(e);
            case ExprOp::Neg: return neg(rec(e->a));
            case ExprOp::Sin: return sin(rec(e->a));
            case ExprOp::Cos: return cos(rec(e->a));
            case ExprOp::Tanh: return tanh(rec(e->a));
            case ExprOp::Sat: return saturate(rec(e->a), e->sat_lo, e->sat_hi);
            case ExprOp::Recip: return recip(rec(e->a));
            case ExprOp::Add: return add(rec(e->a), rec(e->b));
            case ExprOp::Mul: return mul(rec(e->a), rec(e->b));
            case ExprOp::Pow: return pow(rec(e->a), e->exponent);
            case ExprOp::NtRef:
            case ExprOp::RandConst:
                return ScalarExpression(e);
        }
        return ScalarExpression(e);
    };
    return rec(root_);
}

ScalarExpression ScalarExpression::bind_time(double t) const {
    return substitute(ExprOp::Time, 0, constant(t));
}

bool ScalarExpression::structurally_equal(const ScalarExpression& o) const {
    std::function<bool(const ExprPtr&, const ExprPtr&)> eq = [&](const ExprPtr& a,
                                                                 const ExprPtr& b) -> bool {
        if (a.get() == b.get()) return true;
        if (!a || !b) return false;
        if (a->op != b->op || a->value != b->value || a->index != b->index ||
            a->exponent != b->exponent || a->sat_lo != b->sat_lo || a->sat_hi != b->sat_hi)
            return false;
        return eq(a->a, b->a) && eq(a->b, b->b);
    };
    return eq(root_, o.root_);
}

// ── Printing ────────────────────────────────────────────────────────────────

namespace {

// precedence: add 1, mul 2, unary 3, pow 4, atom 5
int prec(const ExprNode* n) {
    switch (n->op) {
        case ExprOp::Add: return 1;
        case ExprOp::Mul: return 2;
        case ExprOp::Neg: return 3;
        case ExprOp::Pow: return 4;
        default: return 5;
    }
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

void print_node(const ExprNode* n, std::ostream& os, int parent_prec) {
    bool paren = prec(n) < parent_prec;
    if (paren) os << "(";
    switch (n->op) {
        case ExprOp::Const: os << fmt_num(n->value); break;
        case ExprOp::Time: os << "t"; break;
        case ExprOp::State: os << "x" << n->index; break;
        case ExprOp::Input: os << "u" << n->index; break;
        case ExprOp::Disturb: os << "w" << n->index; break;
        case ExprOp::Neg:
            os << "-";
            print_node(n->a.get(), os, 4);
            break;
        case ExprOp::Sin: os << "sin("; print_node(n->a.get(), os, 0); os << ")"; break;
        case ExprOp::Cos: os << "cos("; print_node(n->a.get(), os, 0); os << ")"; break;
        case ExprOp::Tanh: os << "tanh("; print_node(n->a.get(), os, 0); os << ")"; break;
        case ExprOp::Sat:
            os << "sat(";
            print_node(n->a.get(), os, 0);
            os << ", " << fmt_num(n->sat_lo) << ", " << fmt_num(n->sat_hi) << ")";
            break;
        case ExprOp::Recip: os << "recip("; print_node(n->a.get(), os, 0); os << ")"; break;
        case ExprOp::Add:
            print_node(n->a.get(), os, 1);
            if (n->b->op == ExprOp::Neg) {
                os << " - ";
                print_node(n->b->a.get(), os, 2);
            } else {
                os << " + ";
                print_node(n->b.get(), os, 1);
            }
            break;
        case ExprOp::Mul:
            print_node(n->a.get(), os, 2);
            os << "*";
            print_node(n->b.get(), os, 3);
            break;
        case ExprOp::Pow:
            print_node(n->a.get(), os, 5);
            os << "^" << n->exponent;
            break;
        case ExprOp::NtRef: os << "<nt" << n->index << ">"; break;
        case ExprOp::RandConst:
            os << "rand(" << fmt_num(n->sat_lo) << ", " << fmt_num(n->sat_hi) << ")";
            break;
    }
    if (paren) os << ")";
}

}  // namespace

std::string ScalarExpression::str() const {
    if (!root_) return "<empty>";
    std::ostringstream os;
    print_node(root_.get(), os, 0);
    return os.str();
}

// ── Parser ──────────────────────────────────────────────────────────────────

namespace {

class Parser {
public:
    Parser(const std::string& text, const ExprLimits& lim, const IdentResolver& resolver)
        : s_(text), lim_(lim), resolver_(resolver) {}

    ScalarExpression parse() {
        auto e = parse_sum();
        skip_ws();
        if (pos_ != s_.size()) throw ExprParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
    ExprLimits lim_;
    const IdentResolver& resolver_;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }
    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    ScalarExpression parse_sum() {
        auto e = parse_term();
        for (;;) {
            if (eat('+')) e = ScalarExpression::add(e, parse_term());
            else if (eat('-')) e = ScalarExpression::sub(e, parse_term());
            else return e;
        }
    }

    ScalarExpression parse_term() {
        auto e = parse_unary();
        for (;;) {
            if (eat('*')) e = ScalarExpression::mul(e, parse_unary());
            else if (eat('/')) e = ScalarExpression::mul(e, ScalarExpression::recip(parse_unary()));
            else return e;
        }
    }

    ScalarExpression parse_unary() {
        if (eat('-')) return ScalarExpression::neg(parse_unary());
        return parse_power();
    }

    ScalarExpression parse_power() {
        auto e = parse_atom();
        while (eat('^')) {
            skip_ws();
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (pos_ == start) throw ExprParseError("expected non-negative integer exponent", pos_);
            e = ScalarExpression::pow(e, std::stoi(s_.substr(start, pos_ - start)));
        }
        return e;
    }

    double parse_number_literal() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
        bool any = false;
        while (pos_ < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                s_[pos_] == 'e' || s_[pos_] == 'E' ||
                ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > start &&
                 (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E')))) {
            ++pos_;
            any = true;
        }
        if (!any) throw ExprParseError("expected number", start);
        return std::stod(s_.substr(start, pos_ - start));
    }

    ScalarExpression parse_atom() {
        skip_ws();
        if (pos_ >= s_.size()) throw ExprParseError("unexpected end of expression", pos_);
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = parse_sum();
            if (!eat(')')) throw ExprParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return ScalarExpression::constant(parse_number_literal());
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string id = s_.substr(start, pos_ - start);
            return resolve_ident(id, start);
        }
        throw ExprParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    static bool var_index(const std::string& id, char prefix, int& out) {
        if (id.size() < 2 || id[0] != prefix) return false;
        for (std::size_t i = 1; i < id.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(id[i]))) return false;
        out = std::stoi(id.substr(1));
        return true;
    }

    ScalarExpression resolve_ident(const std::string& id, std::size_t at) {
        int idx = 0;
        if (id == "t") return ScalarExpression::time();
        if (var_index(id, 'x', idx)) {
            if (lim_.check && (idx < 1 || idx > lim_.n_states))
                throw ExprParseError("unknown variable " + id, at);
            return ScalarExpression::state(idx);
        }
        if (var_index(id, 'u', idx)) {
            if (lim_.check && (idx < 1 || idx > lim_.n_inputs))
                throw ExprParseError("unknown input " + id, at);
            return ScalarExpression::input(idx);
        }
        if (var_index(id, 'w', idx)) {
            if (lim_.check && (idx < 1 || idx > lim_.n_disturbances))
                throw ExprParseError("unknown disturbance " + id, at);
            return ScalarExpression::disturbance(idx);
        }
        if (id == "sin" || id == "cos" || id == "tanh" || id == "recip") {
            if (!eat('(')) throw ExprParseError("expected '(' after " + id, pos_);
            auto e = parse_sum();
            if (!eat(')')) throw ExprParseError("expected ')'", pos_);
            if (id == "sin") return ScalarExpression::sin(e);
            if (id == "cos") return ScalarExpression::cos(e);
            if (id == "tanh") return ScalarExpression::tanh(e);
            return ScalarExpression::recip(e);
        }
        if (id == "rand" && lim_.allow_rand) {
            if (!eat('(')) throw ExprParseError("expected '(' after rand", pos_);
            skip_ws();
            bool n1 = eat('-');
            double lo = parse_number_literal() * (n1 ? -1.0 : 1.0);
            if (!eat(',')) throw ExprParseError("expected ',' in rand", pos_);
            skip_ws();
            bool n2 = eat('-');
            double hi = parse_number_literal() * (n2 ? -1.0 : 1.0);
            if (!eat(')')) throw ExprParseError("expected ')'", pos_);
            return ScalarExpression::rand_const(lo, hi);
        }
        if (id == "sat") {
            if (!eat('(')) throw ExprParseError("expected '(' after sat", pos_);
            auto e = parse_sum();
            if (!eat(',')) throw ExprParseError("expected ',' in sat", pos_);
            skip_ws();
            bool neg1 = eat('-');
            double lo = parse_number_literal() * (neg1 ? -1.0 : 1.0);
            if (!eat(',')) throw ExprParseError("expected ',' in sat", pos_);
            skip_ws();
            bool neg2 = eat('-');
            double hi = parse_number_literal() * (neg2 ? -1.0 : 1.0);
            if (!eat(')')) throw ExprParseError("expected ')'", pos_);
            return ScalarExpression::saturate(e, lo, hi);
        }
        if (resolver_) {
            auto r = resolver_(id, at);
            if (!r.empty()) return r;
        }
        throw ExprParseError("unknown identifier '" + id + "'", at);
    }
};

}  // namespace

ScalarExpression parse_expression(const std::string& text, const ExprLimits& lim,
                                  const IdentResolver& resolver) {
    Parser p(text, lim, resolver);
    return p.parse();
}

// ── CompiledExpr ────────────────────────────────────────────────────────────

CompiledExpr::CompiledExpr(const ScalarExpression& e) {
    std::function<std::int32_t(const ExprPtr&)> emit = [&](const ExprPtr& n) -> std::int32_t {
        Instr in;
        in.op = n->op;
        in.value = n->value;
        in.index = n->index;
        in.exponent = n->exponent;
        in.sat_lo = n->sat_lo;
        in.sat_hi = n->sat_hi;
        if (n->a) in.a = emit(n->a);
        if (n->b) in.b = emit(n->b);
        code_.push_back(in);
        return static_cast<std::int32_t>(code_.size() - 1);
    };
    if (!e.empty()) emit(e.root());
}

template <class Scalar, class Point>
Scalar CompiledExpr::run(const Point& p) const {
    // small fixed stack fallback keeps allocs off the hot path
    thread_local std::vector<Scalar> slots;
    slots.resize(code_.size());
    for (std::size_t i = 0; i < code_.size(); ++i) {
        const Instr& in = code_[i];
        switch (in.op) {
            case ExprOp::Const: slots[i] = Scalar(in.value); break;
            case ExprOp::Time: slots[i] = p.t; break;
            case ExprOp::State: slots[i] = p.x[in.index - 1]; break;
            case ExprOp::Input: slots[i] = p.u[in.index - 1]; break;
            case ExprOp::Disturb: slots[i] = p.w[in.index - 1]; break;
            case ExprOp::Neg: slots[i] = -slots[in.a]; break;
            case ExprOp::Sin:
                if constexpr (std::is_same_v<Scalar, double>) slots[i] = std::sin(slots[in.a]);
                else slots[i] = stlsynth::sin(slots[in.a]);
                break;
            case ExprOp::Cos:
                if constexpr (std::is_same_v<Scalar, double>) slots[i] = std::cos(slots[in.a]);
                else slots[i] = stlsynth::cos(slots[in.a]);
                break;
            case ExprOp::Tanh:
                if constexpr (std::is_same_v<Scalar, double>) slots[i] = std::tanh(slots[in.a]);
                else slots[i] = stlsynth::tanh(slots[in.a]);
                break;
            case ExprOp::Sat:
                if constexpr (std::is_same_v<Scalar, double>)
                    slots[i] = std::clamp(slots[in.a], in.sat_lo, in.sat_hi);
                else
                    slots[i] = stlsynth::saturate(slots[in.a], in.sat_lo, in.sat_hi);
                break;
            case ExprOp::Recip:
                if constexpr (std::is_same_v<Scalar, double>) slots[i] = 1.0 / slots[in.a];
                else slots[i] = stlsynth::recip(slots[in.a]);
                break;
            case ExprOp::Add: slots[i] = slots[in.a] + slots[in.b]; break;
            case ExprOp::Mul: slots[i] = slots[in.a] * slots[in.b]; break;
            case ExprOp::Pow:
                if constexpr (std::is_same_v<Scalar, double>)
                    slots[i] = std::pow(slots[in.a], in.exponent);
                else
                    slots[i] = pow_int(slots[in.a], in.exponent);
                break;
            case ExprOp::NtRef:
            case ExprOp::RandConst:
                throw std::logic_error("cannot evaluate a partial tree");
        }
    }
    return slots.back();
}

double CompiledExpr::eval(const EvalPoint& p) const { return run<double>(p); }

Interval CompiledExpr::eval_interval(const IntervalPoint& p) const {
    return run<Interval>(p);
}

}  // namespace stlsynth
