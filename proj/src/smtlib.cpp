#include <sstream>

#include "stlsynth/verify.hpp"

namespace stlsynth {

namespace {

void smt_number(std::ostream& os, double v) {
    if (v < 0) {
        os << "(- ";
        smt_number(os, -v);
        os << ")";
        return;
    }
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << std::fixed << v;
    std::string s = tmp.str();
    // trim trailing zeros but keep one decimal digit
    auto dot = s.find('.');
    std::size_t last = s.find_last_not_of('0');
    if (last > dot) s.erase(last + 1);
    else s.erase(dot + 2);
    os << s;
}

// expression to SMT-LIB over declared symbols t, x<i>, u<i>
void smt_expr(std::ostream& os, const ExprNode* n) {
    switch (n->op) {
        case ExprOp::Const: smt_number(os, n->value); break;
        case ExprOp::Time: os << "t"; break;
        case ExprOp::State: os << "x" << n->index; break;
        case ExprOp::Input: os << "u" << n->index; break;
        case ExprOp::Disturb: os << "w" << n->index; break;
        case ExprOp::Neg:
            os << "(- ";
            smt_expr(os, n->a.get());
            os << ")";
            break;
        case ExprOp::Sin: os << "(sin "; smt_expr(os, n->a.get()); os << ")"; break;
        case ExprOp::Cos: os << "(cos "; smt_expr(os, n->a.get()); os << ")"; break;
        case ExprOp::Tanh: os << "(tanh "; smt_expr(os, n->a.get()); os << ")"; break;
        case ExprOp::Recip:
            os << "(/ 1.0 ";
            smt_expr(os, n->a.get());
            os << ")";
            break;
        case ExprOp::Sat:
            // max(lo, min(e, hi)) via ite
            os << "(ite (<= ";
            smt_expr(os, n->a.get());
            os << " ";
            smt_number(os, n->sat_lo);
            os << ") ";
            smt_number(os, n->sat_lo);
            os << " (ite (>= ";
            smt_expr(os, n->a.get());
            os << " ";
            smt_number(os, n->sat_hi);
            os << ") ";
            smt_number(os, n->sat_hi);
            os << " ";
            smt_expr(os, n->a.get());
            os << "))";
            break;
        case ExprOp::Add:
            os << "(+ ";
            smt_expr(os, n->a.get());
            os << " ";
            smt_expr(os, n->b.get());
            os << ")";
            break;
        case ExprOp::Mul:
            os << "(* ";
            smt_expr(os, n->a.get());
            os << " ";
            smt_expr(os, n->b.get());
            os << ")";
            break;
        case ExprOp::Pow:
            if (n->exponent == 0) {
                os << "1.0";
            } else {
                os << "(*";
                for (int i = 0; i < n->exponent; ++i) {
                    os << " ";
                    smt_expr(os, n->a.get());
                }
                os << ")";
            }
            break;
        default:
            throw std::logic_error("partial tree in SMT export");
    }
}

void smt_poly(std::ostream& os, const FactorPoly& poly) {
    if (poly.terms.empty()) {
        os << "0.0";
        return;
    }
    os << "(+";
    for (const auto& m : poly.terms) {
        os << " (*";
        os << " ";
        smt_number(os, m.coeff);
        for (const auto& [id, k] : m.exps)
            for (int i = 0; i < k; ++i) os << " a" << id;
        os << ")";
    }
    os << ")";
}

}  // namespace

std::string export_smtlib(const RtlAtom& atom, const ReachSequence& seq,
                          const Controller* kappa, const std::string& name) {
    const ReachEntry& entry = seq.at(atom.grid_index);
    PolyZonotope set =
        entry.is_point ? entry.set : PolyZonotope::from_box(entry.box, seq.p0, nullptr);
    int n = set.dim();

    bool transcendental = false;
    bool uses_input = false;
    for (const auto& d : atom.prop.disjuncts)
        for (const auto& p : d) {
            if (!p.h.is_polynomial()) transcendental = true;
            if (p.h.references(ExprOp::Input)) uses_input = true;
        }
    if (uses_input && kappa)
        for (const auto& k : kappa->kappa)
            if (!k.is_polynomial()) transcendental = true;

    std::ostringstream os;
    os << "; atom " << name << " at grid index " << atom.grid_index << " (time "
       << entry.time.lo;
    if (!entry.is_point) os << " .. " << entry.time.hi;
    os << ")\n";
    os << "; asserts the negation of: for all states of the entry, "
          "some disjunct's predicates all hold\n";
    if (transcendental)
        os << "; contains transcendental functions: use a nonlinear-capable solver "
              "(e.g. dReal)\n";
    os << "(set-logic QF_NRA)\n";

    // factors
    std::vector<int> active = set.active_factors();
    for (int id : active) {
        os << "(declare-const a" << id << " Real)\n";
        os << "(assert (and (>= a" << id << " (- 1.0)) (<= a" << id << " 1.0)))\n";
    }
    // time symbol when referenced
    bool needs_time = false;
    for (const auto& d : atom.prop.disjuncts)
        for (const auto& p : d)
            if (p.h.references(ExprOp::Time)) needs_time = true;
    if (uses_input && kappa)
        for (const auto& k : kappa->kappa)
            if (k.references(ExprOp::Time)) needs_time = true;
    if (needs_time) {
        os << "(declare-const t Real)\n";
        os << "(assert (and (>= t ";
        smt_number(os, entry.time.lo);
        os << ") (<= t ";
        smt_number(os, entry.time.hi);
        os << ")))\n";
    }

    // states bound by the parameterization
    for (int d = 0; d < n; ++d) {
        os << "(declare-const x" << (d + 1) << " Real)\n";
        os << "(assert (= x" << (d + 1) << " ";
        smt_poly(os, set.row_poly(d));
        os << "))\n";
    }
    // inputs through the controller
    if (uses_input && kappa) {
        for (std::size_t i = 0; i < kappa->kappa.size(); ++i) {
            os << "(declare-const u" << (i + 1) << " Real)\n";
            os << "(assert (= u" << (i + 1) << " ";
            ScalarExpression k = kappa->kappa[i];
            if (!needs_time) k = k.bind_time(entry.time.mid());
            smt_expr(os, k.root().get());
            os << "))\n";
        }
    }

    auto emit_pred = [&](const Predicate& p) {
        os << "(" << (p.strict ? ">" : ">=") << " ";
        ScalarExpression h = p.h;
        if (!needs_time) h = h.bind_time(entry.time.mid());
        smt_expr(os, h.root().get());
        os << " 0.0)";
    };
    auto emit_disjunct = [&](const std::vector<Predicate>& d) {
        if (d.empty()) { os << "true"; return; }
        if (d.size() == 1) { emit_pred(d[0]); return; }
        os << "(and";
        for (const auto& p : d) { os << " "; emit_pred(p); }
        os << ")";
    };
    os << "(assert (not ";
    if (atom.prop.disjuncts.empty()) {
        os << "false";
    } else if (atom.prop.disjuncts.size() == 1) {
        emit_disjunct(atom.prop.disjuncts[0]);
    } else {
        os << "(or";
        for (const auto& d : atom.prop.disjuncts) { os << " "; emit_disjunct(d); }
        os << ")";
    }
    os << "))\n";
    os << "(check-sat)\n";
    os << "(exit)\n";
    return os.str();
}

}  // namespace stlsynth
