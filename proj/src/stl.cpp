#include "stlsynth/stl.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace stlsynth {

namespace {
StlPtr mk(StlNode n) { return std::make_shared<const StlNode>(std::move(n)); }
}

StlFormula StlFormula::make_true() {
    StlNode n; n.kind = StlKind::True;
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::pred(ScalarExpression h, bool strict) {
    StlNode n; n.kind = StlKind::Pred; n.pred = std::move(h); n.strict = strict;
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::negation(StlFormula f) {
    StlNode n; n.kind = StlKind::Not; n.lhs = f.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::conj(StlFormula a, StlFormula b) {
    StlNode n; n.kind = StlKind::And; n.lhs = a.ptr(); n.rhs = b.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::disj(StlFormula a, StlFormula b) {
    StlNode n; n.kind = StlKind::Or; n.lhs = a.ptr(); n.rhs = b.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::until(Rational a, Rational b, StlFormula lhs, StlFormula rhs) {
    if (!(Rational(0) <= a) || !(a < b))
        throw std::invalid_argument("until requires 0 <= a < b");
    StlNode n; n.kind = StlKind::Until; n.a = a; n.b = b; n.lhs = lhs.ptr(); n.rhs = rhs.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::next(Rational a, StlFormula f) {
    if (a < Rational(0)) throw std::invalid_argument("next requires a >= 0");
    StlNode n; n.kind = StlKind::Next; n.a = a; n.b = a; n.lhs = f.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::eventually(Rational a, Rational b, StlFormula f) {
    if (!(Rational(0) <= a) || !(a <= b))
        throw std::invalid_argument("eventually requires 0 <= a <= b");
    StlNode n; n.kind = StlKind::Eventually; n.a = a; n.b = b; n.lhs = f.ptr();
    return StlFormula(mk(std::move(n)));
}
StlFormula StlFormula::always(Rational a, Rational b, StlFormula f) {
    if (!(Rational(0) <= a) || !(a <= b))
        throw std::invalid_argument("always requires 0 <= a <= b");
    StlNode n; n.kind = StlKind::Always; n.a = a; n.b = b; n.lhs = f.ptr();
    return StlFormula(mk(std::move(n)));
}

Rational StlFormula::horizon() const {
    const StlNode& n = *node_;
    switch (n.kind) {
        case StlKind::True:
        case StlKind::Pred:
            return Rational(0);
        case StlKind::Not:
            return StlFormula(n.lhs).horizon();
        case StlKind::And:
        case StlKind::Or: {
            Rational l = StlFormula(n.lhs).horizon(), r = StlFormula(n.rhs).horizon();
            return l < r ? r : l;
        }
        case StlKind::Until: {
            Rational l = StlFormula(n.lhs).horizon(), r = StlFormula(n.rhs).horizon();
            return n.b + (l < r ? r : l);
        }
        case StlKind::Next:
            return n.a + StlFormula(n.lhs).horizon();
        case StlKind::Eventually:
        case StlKind::Always:
            return n.b + StlFormula(n.lhs).horizon();
    }
    return Rational(0);
}

std::string StlFormula::str() const {
    const StlNode& n = *node_;
    auto ival = [&](const Rational& a, const Rational& b) {
        return "[" + a.str() + "," + b.str() + "]";
    };
    switch (n.kind) {
        case StlKind::True: return "true";
        case StlKind::Pred:
            return "(" + n.pred.str() + (n.strict ? " > 0)" : " >= 0)");
        case StlKind::Not: return "!" + StlFormula(n.lhs).str();
        case StlKind::And:
            return "(" + StlFormula(n.lhs).str() + " & " + StlFormula(n.rhs).str() + ")";
        case StlKind::Or:
            return "(" + StlFormula(n.lhs).str() + " | " + StlFormula(n.rhs).str() + ")";
        case StlKind::Until:
            return "(" + StlFormula(n.lhs).str() + " U" + ival(n.a, n.b) + " " +
                   StlFormula(n.rhs).str() + ")";
        case StlKind::Next:
            return "X[" + n.a.str() + "]" + StlFormula(n.lhs).str();
        case StlKind::Eventually:
            return "F" + ival(n.a, n.b) + StlFormula(n.lhs).str();
        case StlKind::Always:
            return "G" + ival(n.a, n.b) + StlFormula(n.lhs).str();
    }
    return "?";
}

bool check_divisible(const StlFormula& f, const Rational& c) {
    if (c.num <= 0) throw std::domain_error("c must be positive");
    const StlNode& n = f.node();
    switch (n.kind) {
        case StlKind::True:
        case StlKind::Pred:
            return true;
        case StlKind::Not:
            return check_divisible(StlFormula(n.lhs), c);
        case StlKind::And:
        case StlKind::Or:
            return check_divisible(StlFormula(n.lhs), c) &&
                   check_divisible(StlFormula(n.rhs), c);
        case StlKind::Until:
            return n.a.divisible_by(c) && n.b.divisible_by(c) &&
                   check_divisible(StlFormula(n.lhs), c) &&
                   check_divisible(StlFormula(n.rhs), c);
        case StlKind::Next:
            return n.a.divisible_by(c) && check_divisible(StlFormula(n.lhs), c);
        case StlKind::Eventually:
        case StlKind::Always:
            return n.a.divisible_by(c) && n.b.divisible_by(c) &&
                   check_divisible(StlFormula(n.lhs), c);
    }
    return true;
}

// ── Parser ──────────────────────────────────────────────────────────────────

namespace {

class StlParser {
public:
    StlParser(const std::string& s, const StlParseOptions& opt) : s_(s), opt_(opt) {}

    StlFormula parse() {
        auto f = parse_or();
        skip_ws();
        if (pos_ != s_.size()) throw ExprParseError("unexpected trailing input", pos_);
        return f;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
    const StlParseOptions& opt_;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char ch) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ch) { ++pos_; return true; }
        return false;
    }
    bool peek_word(const char* w) {
        skip_ws();
        std::size_t len = std::strlen(w);
        if (s_.compare(pos_, len, w) != 0) return false;
        // word boundary: next char must not be alphanumeric
        char nxt = pos_ + len < s_.size() ? s_[pos_ + len] : '\0';
        return !(std::isalnum(static_cast<unsigned char>(nxt)) || nxt == '_');
    }

    // bound := rational-literal | [k]"c" | rational "*" "c"  (c must be bound)
    Rational parse_bound() {
        skip_ws();
        std::size_t start = pos_;
        bool neg = eat('-');
        skip_ws();
        Rational value(1);
        bool have_number = false;
        if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
            std::size_t nstart = pos_;
            while (pos_ < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                    s_[pos_] == '/'))
                ++pos_;
            value = Rational::parse(s_.substr(nstart, pos_ - nstart));
            have_number = true;
        }
        skip_ws();
        bool star = false;
        if (pos_ < s_.size() && s_[pos_] == '*') { star = true; ++pos_; skip_ws(); }
        if (pos_ < s_.size() && s_[pos_] == 'c' &&
            (pos_ + 1 >= s_.size() || !std::isalnum(static_cast<unsigned char>(s_[pos_ + 1])))) {
            ++pos_;
            if (!opt_.have_c) throw ExprParseError("symbol c used but not bound", start);
            value = value * opt_.c_value;
            have_number = true;
        } else if (star) {
            throw ExprParseError("expected c after '*'", pos_);
        }
        if (!have_number) throw ExprParseError("expected interval bound", start);
        if (neg) value = Rational(0) - value;
        return value;
    }

    void parse_interval(Rational& a, Rational& b, bool allow_singleton) {
        if (!eat('[')) throw ExprParseError("expected '['", pos_);
        a = parse_bound();
        if (!eat(',')) throw ExprParseError("expected ',' in interval", pos_);
        b = parse_bound();
        if (!eat(']')) throw ExprParseError("expected ']'", pos_);
        if (a < Rational(0)) throw ExprParseError("interval bound must be non-negative", pos_);
        if (allow_singleton ? b < a : !(a < b))
            throw ExprParseError("interval bounds out of order", pos_);
    }

    StlFormula parse_or() {
        auto f = parse_and();
        while (eat('|')) f = StlFormula::disj(f, parse_and());
        return f;
    }

    StlFormula parse_and() {
        auto f = parse_until();
        while (peek_and()) f = StlFormula::conj(f, parse_until());
        return f;
    }
    bool peek_and() {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '&') { ++pos_; return true; }
        return false;
    }

    StlFormula parse_until() {
        auto f = parse_unary();
        skip_ws();
        while (pos_ < s_.size() && s_[pos_] == 'U' &&
               pos_ + 1 < s_.size() && s_[pos_ + 1] == '[') {
            ++pos_;
            Rational a, b;
            parse_interval(a, b, /*allow_singleton=*/false);
            auto rhs = parse_unary();
            f = StlFormula::until(a, b, f, rhs);
            skip_ws();
        }
        return f;
    }

    StlFormula parse_unary() {
        skip_ws();
        if (eat('!')) return StlFormula::negation(parse_unary());
        if (pos_ < s_.size() && (s_[pos_] == 'G' || s_[pos_] == 'F' || s_[pos_] == 'X') &&
            pos_ + 1 < s_.size() && s_[pos_ + 1] == '[') {
            char op = s_[pos_++];
            Rational a, b;
            if (op == 'X') {
                if (!eat('[')) throw ExprParseError("expected '['", pos_);
                a = parse_bound();
                if (!eat(']')) throw ExprParseError("expected ']'", pos_);
                if (a < Rational(0)) throw ExprParseError("negative next offset", pos_);
                return StlFormula::next(a, parse_unary());
            }
            parse_interval(a, b, /*allow_singleton=*/op == 'G' || op == 'F');
            auto f = parse_unary();
            return op == 'G' ? StlFormula::always(a, b, f) : StlFormula::eventually(a, b, f);
        }
        return parse_primary();
    }

    StlFormula parse_primary() {
        skip_ws();
        if (peek_word("true")) { pos_ += 4; return StlFormula::make_true(); }
        if (eat('(')) {
            // either a parenthesized formula or a predicate; try formula first,
            // falling back to predicate scanning inside the same parens
            std::size_t save = pos_;
            try {
                auto f = parse_or();
                if (!eat(')')) throw ExprParseError("expected ')'", pos_);
                return f;
            } catch (const ExprParseError&) {
                pos_ = save;
                auto f = parse_predicate();
                if (!eat(')')) throw ExprParseError("expected ')'", pos_);
                return f;
            }
        }
        return parse_predicate();
    }

    // predicate: e1 (>=|>|<=|<) e2, normalized to h ~ 0 with h on the left.
    StlFormula parse_predicate() {
        skip_ws();
        std::size_t start = pos_;
        // scan to comparison operator at paren depth 0
        int depth = 0;
        std::size_t op_pos = std::string::npos;
        for (std::size_t i = pos_; i < s_.size(); ++i) {
            char ch = s_[i];
            if (ch == '(') ++depth;
            else if (ch == ')') {
                if (depth == 0) break;
                --depth;
            } else if (depth == 0 && (ch == '>' || ch == '<')) { op_pos = i; break; }
            else if (depth == 0 && (ch == '&' || ch == '|')) break;
        }
        if (op_pos == std::string::npos)
            throw ExprParseError("expected predicate comparison", start);
        std::string lhs_text = s_.substr(pos_, op_pos - pos_);
        char cmp = s_[op_pos];
        std::size_t rhs_start = op_pos + 1;
        bool strict = true;
        if (rhs_start < s_.size() && s_[rhs_start] == '=') { strict = false; ++rhs_start; }
        // right side extends to the next &, | or unbalanced ) at depth 0
        depth = 0;
        std::size_t end = rhs_start;
        for (; end < s_.size(); ++end) {
            char ch = s_[end];
            if (ch == '(') ++depth;
            else if (ch == ')') {
                if (depth == 0) break;
                --depth;
            } else if (depth == 0 && (ch == '&' || ch == '|')) break;
            else if (depth == 0 && ch == 'U' && end + 1 < s_.size() && s_[end + 1] == '[') break;
        }
        std::string rhs_text = s_.substr(rhs_start, end - rhs_start);
        pos_ = end;
        ScalarExpression l, r;
        try {
            l = parse_expression(lhs_text, opt_.limits, opt_.macro);
            r = parse_expression(rhs_text, opt_.limits, opt_.macro);
        } catch (const ExprParseError& e) {
            throw ExprParseError(std::string("in predicate: ") + e.what(), start);
        }
        // normalize: e1 >= e2  ->  e1 - e2 >= 0 ; e1 <= e2 -> e2 - e1 >= 0
        ScalarExpression h = cmp == '>' ? ScalarExpression::sub(l, r)
                                        : ScalarExpression::sub(r, l);
        return StlFormula::pred(std::move(h), strict);
    }
};

}  // namespace

StlFormula parse_stl(const std::string& text, const StlParseOptions& opt) {
    StlParser p(text, opt);
    return p.parse();
}

// ── STL robustness on sampled signals ───────────────────────────────────────

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RobCtx {
    const SampledSignal& sig;
    const SignalContext& ext;
    Rational half_c;

    int entities() const { return static_cast<int>(sig.entries.size()); }

    double pred_value(const ScalarExpression& h, int entity) const {
        if (entity < 0 || entity >= entities())
            throw std::out_of_range("signal does not cover formula horizon");
        const auto& x = sig.entries[entity];
        double t = half_c.to_double() * entity;
        std::vector<double> u;
        if (h.references(ExprOp::Input)) {
            if (!ext.kappa) throw std::runtime_error("predicate references u but no controller bound");
            EvalPoint pu{t, {x.data(), x.size()}, {}, {}};
            u.reserve(ext.kappa->size());
            for (const auto& k : *ext.kappa) u.push_back(k.eval(pu));
        }
        EvalPoint p{t, {x.data(), x.size()}, {u.data(), u.size()}, {}};
        return h.eval(p);
    }

    // entity shift for a rational time offset (must be multiple of c/2 by
    // c-divisibility of the formula; callers guarantee it)
    int shift(const Rational& offset) const {
        return static_cast<int>(offset.exact_quotient(half_c));
    }

    double rob(const StlNode& n, int e) const {
        switch (n.kind) {
            case StlKind::True: return kInf;
            case StlKind::Pred: return pred_value(n.pred, e);
            case StlKind::Not: return -rob(*n.lhs, e);
            case StlKind::And: return std::min(rob(*n.lhs, e), rob(*n.rhs, e));
            case StlKind::Or: return std::max(rob(*n.lhs, e), rob(*n.rhs, e));
            case StlKind::Next: return rob(*n.lhs, e + shift(n.a));
            case StlKind::Always: {
                int lo = e + shift(n.a), hi = e + shift(n.b);
                double v = kInf;
                for (int q = lo; q <= hi; ++q) v = std::min(v, rob(*n.lhs, q));
                return v;
            }
            case StlKind::Eventually: {
                int lo = e + shift(n.a), hi = e + shift(n.b);
                double v = -kInf;
                for (int q = lo; q <= hi; ++q) v = std::max(v, rob(*n.lhs, q));
                return v;
            }
            case StlKind::Until: {
                // witness t' at entity q in [e+A, e+B]: rhs at q, lhs on [e, q).
                // An odd q is an open-interval entity; a witness inside it also
                // needs lhs on the part of the interval before t', i.e. at q itself.
                int lo = e + shift(n.a), hi = e + shift(n.b);
                double best = -kInf;
                double prefix = kInf;  // min of lhs over entities [e, q)
                for (int q = e; q <= hi; ++q) {
                    if (q >= lo) {
                        double wit = rob(*n.rhs, q);
                        if (q % 2 != 0) wit = std::min(wit, rob(*n.lhs, q));
                        best = std::max(best, std::min(wit, prefix));
                    }
                    prefix = std::min(prefix, rob(*n.lhs, q));
                }
                return best;
            }
        }
        return 0.0;
    }
};

}  // namespace

double stl_robustness(const SampledSignal& sig, const StlFormula& f, int entity0,
                      const SignalContext& ctx) {
    Rational half_c = sig.c / Rational(2);
    RobCtx rc{sig, ctx, half_c};
    // ensure grid coverage up front for a clear error
    Rational hz = f.horizon();
    int need = entity0 + static_cast<int>((hz / half_c).to_double() + 0.5);
    if (need >= static_cast<int>(sig.entries.size()))
        throw std::out_of_range("signal does not cover formula horizon");
    return rc.rob(f.node(), entity0);
}

}  // namespace stlsynth
