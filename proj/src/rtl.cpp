#include "stlsynth/rtl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stlsynth {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
PropPtr pmk(PropNode n) { return std::make_shared<const PropNode>(std::move(n)); }
}

// ── Prop ────────────────────────────────────────────────────────────────────

Prop Prop::make_true() {
    PropNode n; n.kind = PropKind::True;
    return Prop(pmk(std::move(n)));
}
Prop Prop::make_false() { return negation(make_true()); }
Prop Prop::pred(ScalarExpression h, bool strict) {
    PropNode n; n.kind = PropKind::Pred; n.pred = std::move(h); n.strict = strict;
    return Prop(pmk(std::move(n)));
}
Prop Prop::negation(Prop p) {
    PropNode n; n.kind = PropKind::Not; n.a = p.ptr();
    return Prop(pmk(std::move(n)));
}
Prop Prop::conj(Prop a, Prop b) {
    PropNode n; n.kind = PropKind::And; n.a = a.ptr(); n.b = b.ptr();
    return Prop(pmk(std::move(n)));
}
Prop Prop::disj(Prop a, Prop b) {
    PropNode n; n.kind = PropKind::Or; n.a = a.ptr(); n.b = b.ptr();
    return Prop(pmk(std::move(n)));
}

namespace {

double pred_eval(const ScalarExpression& h, const EvalPoint& p,
                 const std::vector<CompiledExpr>* kappa) {
    if (h.references(ExprOp::Input)) {
        if (!kappa) throw std::runtime_error("predicate references u but no controller bound");
        std::vector<double> u;
        u.reserve(kappa->size());
        EvalPoint base{p.t, p.x, {}, p.w};
        for (const auto& k : *kappa) u.push_back(k.eval(base));
        EvalPoint full{p.t, p.x, {u.data(), u.size()}, p.w};
        return h.eval(full);
    }
    return h.eval(p);
}

}  // namespace

bool Prop::sat(const EvalPoint& p, const std::vector<CompiledExpr>* kappa) const {
    switch (n_->kind) {
        case PropKind::True: return true;
        case PropKind::Pred: {
            double v = pred_eval(n_->pred, p, kappa);
            return n_->strict ? v > 0.0 : v >= 0.0;
        }
        case PropKind::Not: return !Prop(n_->a).sat(p, kappa);
        case PropKind::And: return Prop(n_->a).sat(p, kappa) && Prop(n_->b).sat(p, kappa);
        case PropKind::Or: return Prop(n_->a).sat(p, kappa) || Prop(n_->b).sat(p, kappa);
    }
    return false;
}

double Prop::robustness(const EvalPoint& p, const std::vector<CompiledExpr>* kappa) const {
    switch (n_->kind) {
        case PropKind::True: return kInf;
        case PropKind::Pred: return pred_eval(n_->pred, p, kappa);
        case PropKind::Not: return -Prop(n_->a).robustness(p, kappa);
        case PropKind::And:
            return std::min(Prop(n_->a).robustness(p, kappa), Prop(n_->b).robustness(p, kappa));
        case PropKind::Or:
            return std::max(Prop(n_->a).robustness(p, kappa), Prop(n_->b).robustness(p, kappa));
    }
    return 0.0;
}

std::string Prop::str() const {
    switch (n_->kind) {
        case PropKind::True: return "true";
        case PropKind::Pred:
            return n_->pred.str() + (n_->strict ? " > 0" : " >= 0");
        case PropKind::Not: return "!(" + Prop(n_->a).str() + ")";
        case PropKind::And: return "(" + Prop(n_->a).str() + " & " + Prop(n_->b).str() + ")";
        case PropKind::Or: return "(" + Prop(n_->a).str() + " | " + Prop(n_->b).str() + ")";
    }
    return "?";
}

// ── DNF conversion ──────────────────────────────────────────────────────────

namespace {

// negation-normal form on the propositional layer: push Not onto predicates,
// flipping the comparison (!(h >= 0) == -h > 0).
Prop prop_nnf(const Prop& p, bool negated) {
    const PropNode& n = p.node();
    switch (n.kind) {
        case PropKind::True:
            return negated ? Prop::make_false() : Prop::make_true();
        case PropKind::Pred:
            if (!negated) return p;
            return Prop::pred(ScalarExpression::neg(n.pred), !n.strict);
        case PropKind::Not: {
            // Not(True) stands for false; keep it canonical under NNF
            if (n.a->kind == PropKind::True)
                return negated ? Prop::make_true() : Prop::make_false();
            return prop_nnf(Prop(n.a), !negated);
        }
        case PropKind::And: {
            auto l = prop_nnf(Prop(n.a), negated), r = prop_nnf(Prop(n.b), negated);
            return negated ? Prop::disj(l, r) : Prop::conj(l, r);
        }
        case PropKind::Or: {
            auto l = prop_nnf(Prop(n.a), negated), r = prop_nnf(Prop(n.b), negated);
            return negated ? Prop::conj(l, r) : Prop::disj(l, r);
        }
    }
    return p;
}

PropDnf dnf_of_nnf(const Prop& p) {
    const PropNode& n = p.node();
    switch (n.kind) {
        case PropKind::True:
            return PropDnf{{{}}};
        case PropKind::Pred:
            return PropDnf{{{Predicate{n.pred, n.strict}}}};
        case PropKind::Not:
            // only Not(True) == false survives NNF
            return PropDnf{};
        case PropKind::Or: {
            auto l = dnf_of_nnf(Prop(n.a)), r = dnf_of_nnf(Prop(n.b));
            for (auto& d : r.disjuncts) l.disjuncts.push_back(std::move(d));
            return l;
        }
        case PropKind::And: {
            auto l = dnf_of_nnf(Prop(n.a)), r = dnf_of_nnf(Prop(n.b));
            PropDnf out;
            for (const auto& dl : l.disjuncts)
                for (const auto& dr : r.disjuncts) {
                    auto d = dl;
                    d.insert(d.end(), dr.begin(), dr.end());
                    out.disjuncts.push_back(std::move(d));
                }
            return out;
        }
    }
    return PropDnf{};
}

}  // namespace

PropDnf to_dnf(const Prop& p) { return dnf_of_nnf(prop_nnf(p, false)); }

bool PropDnf::sat(const EvalPoint& p, const std::vector<CompiledExpr>* kappa) const {
    for (const auto& d : disjuncts) {
        bool all = true;
        for (const auto& pr : d) {
            double v = pred_eval(pr.h, p, kappa);
            if (!(pr.strict ? v > 0.0 : v >= 0.0)) { all = false; break; }
        }
        if (all) return true;
    }
    return false;
}

double PropDnf::robustness(const EvalPoint& p, const std::vector<CompiledExpr>* kappa) const {
    double best = -kInf;
    for (const auto& d : disjuncts) {
        double v = kInf;
        for (const auto& pr : d) v = std::min(v, pred_eval(pr.h, p, kappa));
        best = std::max(best, v);
    }
    return best;
}

bool PropDnf::references_input() const {
    for (const auto& d : disjuncts)
        for (const auto& pr : d)
            if (pr.h.references(ExprOp::Input)) return true;
    return false;
}

std::string PropDnf::str() const {
    if (is_false()) return "false";
    std::ostringstream os;
    for (std::size_t a = 0; a < disjuncts.size(); ++a) {
        if (a) os << " or ";
        const auto& d = disjuncts[a];
        if (d.empty()) { os << "true"; continue; }
        if (disjuncts.size() > 1 && d.size() > 1) os << "(";
        for (std::size_t b = 0; b < d.size(); ++b) {
            if (b) os << " & ";
            os << d[b].h.str() << (d[b].strict ? " > 0" : " >= 0");
        }
        if (disjuncts.size() > 1 && d.size() > 1) os << ")";
    }
    return os.str();
}

int NormalFormRtl::max_grid_index() const {
    int mx = 0;
    for (const auto& cl : conjuncts)
        for (const auto& at : cl.atoms) mx = std::max(mx, at.grid_index);
    return mx;
}

std::string NormalFormRtl::str() const {
    std::ostringstream os;
    double half = (c / Rational(2)).to_double();
    for (std::size_t i = 0; i < conjuncts.size(); ++i) {
        os << "conjunct " << (i + 1) << ": ";
        const auto& cl = conjuncts[i];
        for (std::size_t k = 0; k < cl.atoms.size(); ++k) {
            if (k) os << "  |  ";
            const auto& at = cl.atoms[k];
            os << "X[" << at.grid_index * half << "] A(" << at.prop.str() << ")";
        }
        os << "\n";
    }
    if (conjuncts.empty()) os << "(trivially satisfied: empty conjunction)\n";
    return os.str();
}

// ── Transformation ──────────────────────────────────────────────────────────

namespace {

// STL negation-normal form: push negations down to the propositional layer.
// Temporal operators dualize (G <-> F); negation over U leaves the fragment.
StlFormula stl_nnf(const StlFormula& f, bool neg) {
    const StlNode& n = f.node();
    switch (n.kind) {
        case StlKind::True:
            return neg ? StlFormula::pred(ScalarExpression::constant(-1.0), false)
                       : StlFormula::make_true();
        case StlKind::Pred:
            return neg ? StlFormula::pred(ScalarExpression::neg(n.pred), !n.strict)
                       : f;
        case StlKind::Not:
            return stl_nnf(StlFormula(n.lhs), !neg);
        case StlKind::And: {
            auto l = stl_nnf(StlFormula(n.lhs), neg), r = stl_nnf(StlFormula(n.rhs), neg);
            return neg ? StlFormula::disj(l, r) : StlFormula::conj(l, r);
        }
        case StlKind::Or: {
            auto l = stl_nnf(StlFormula(n.lhs), neg), r = stl_nnf(StlFormula(n.rhs), neg);
            return neg ? StlFormula::conj(l, r) : StlFormula::disj(l, r);
        }
        case StlKind::Next:
            return StlFormula::next(n.a, stl_nnf(StlFormula(n.lhs), neg));
        case StlKind::Eventually: {
            auto inner = stl_nnf(StlFormula(n.lhs), neg);
            return neg ? StlFormula::always(n.a, n.b, inner)
                       : StlFormula::eventually(n.a, n.b, inner);
        }
        case StlKind::Always: {
            auto inner = stl_nnf(StlFormula(n.lhs), neg);
            return neg ? StlFormula::eventually(n.a, n.b, inner)
                       : StlFormula::always(n.a, n.b, inner);
        }
        case StlKind::Until:
            if (neg)
                throw TransformError(
                    "negation over until is outside the supported fragment");
            return StlFormula::until(n.a, n.b, stl_nnf(StlFormula(n.lhs), false),
                                     stl_nnf(StlFormula(n.rhs), false));
    }
    return f;
}

bool is_propositional(const StlFormula& f) {
    const StlNode& n = f.node();
    switch (n.kind) {
        case StlKind::True:
        case StlKind::Pred:
            return true;
        case StlKind::Not:
            return is_propositional(StlFormula(n.lhs));
        case StlKind::And:
        case StlKind::Or:
            return is_propositional(StlFormula(n.lhs)) && is_propositional(StlFormula(n.rhs));
        default:
            return false;
    }
}

Prop to_prop(const StlFormula& f) {
    const StlNode& n = f.node();
    switch (n.kind) {
        case StlKind::True: return Prop::make_true();
        case StlKind::Pred: return Prop::pred(n.pred, n.strict);
        case StlKind::Not: return Prop::negation(to_prop(StlFormula(n.lhs)));
        case StlKind::And: return Prop::conj(to_prop(StlFormula(n.lhs)), to_prop(StlFormula(n.rhs)));
        case StlKind::Or: return Prop::disj(to_prop(StlFormula(n.lhs)), to_prop(StlFormula(n.rhs)));
        default:
            throw TransformError("temporal operator nested under a temporal operator "
                                 "is outside the supported fragment");
    }
}

using Cnf = std::vector<RtlClause>;

void drop_trivial(Cnf& cnf) {
    Cnf out;
    for (auto& clause : cnf) {
        bool clause_true = false;
        std::vector<RtlAtom> atoms;
        for (auto& at : clause.atoms) {
            if (at.prop.is_true()) { clause_true = true; break; }
            if (at.prop.is_false()) continue;  // cannot help the disjunction
            atoms.push_back(std::move(at));
        }
        if (clause_true) continue;
        if (atoms.empty()) {
            // unsatisfiable clause: keep a canonical false atom
            atoms.push_back(RtlAtom{0, PropDnf{}});
        }
        out.push_back(RtlClause{std::move(atoms)});
    }
    cnf = std::move(out);
}

Cnf shift(Cnf cnf, int entities) {
    for (auto& cl : cnf)
        for (auto& at : cl.atoms) at.grid_index += entities;
    return cnf;
}

Cnf cnf_and(Cnf a, Cnf b) {
    for (auto& cl : b) a.push_back(std::move(cl));
    return a;
}

Cnf cnf_or(const Cnf& a, const Cnf& b) {
    // distribute: (and_i C_i) or (and_j D_j) == and_{i,j} (C_i or D_j)
    if (a.empty()) return a;  // true or X == true
    if (b.empty()) return b;
    Cnf out;
    out.reserve(a.size() * b.size());
    for (const auto& ca : a)
        for (const auto& cb : b) {
            RtlClause cl = ca;
            cl.atoms.insert(cl.atoms.end(), cb.atoms.begin(), cb.atoms.end());
            out.push_back(std::move(cl));
        }
    return out;
}

struct Transformer {
    Rational c;
    Rational half;

    int entity(const Rational& tm) const {
        if (!tm.divisible_by(half))
            throw TransformError("time bound " + tm.str() +
                                 " is not a multiple of c/2 after transformation");
        return static_cast<int>(tm.exact_quotient(half));
    }

    RtlAtom atom(int j, const PropDnf& d) const { return RtlAtom{j, d}; }

    // always over [a,b]: psi at every entity of the window
    Cnf trans_always(const Rational& a, const Rational& b, const PropDnf& psi) const {
        int lo = entity(a), hi = entity(b);
        Cnf out;
        for (int j = lo; j <= hi; ++j) out.push_back(RtlClause{{atom(j, psi)}});
        return out;
    }

    // eventually over [a,b]: some whole entity of the window satisfies psi
    Cnf trans_eventually(const Rational& a, const Rational& b, const PropDnf& psi) const {
        int lo = entity(a), hi = entity(b);
        RtlClause cl;
        for (int j = lo; j <= hi; ++j) cl.atoms.push_back(atom(j, psi));
        return Cnf{std::move(cl)};
    }

    // until over [a,b] with propositional operands p, q. Staircase CNF over
    // witness entities A..B:
    //   p at entities 0..A-1
    //   (p|q) at A                      (q at A when A == B)
    //   for k = 1..B-A-1:  q@A | ... | q@(A+k-1) | (p at odd A+k, p|q at even)
    //   q@A | q@(A+1) | ... | q@B
    Cnf trans_until(const Rational& a, const Rational& b, const Prop& p_prop,
                    const Prop& q_prop) const {
        int A = entity(a), B = entity(b);
        PropDnf p = to_dnf(p_prop);
        PropDnf q = to_dnf(q_prop);
        PropDnf pq = to_dnf(Prop::disj(p_prop, q_prop));
        Cnf out;
        for (int u = 0; u < A; ++u) out.push_back(RtlClause{{atom(u, p)}});
        if (A == B) {
            out.push_back(RtlClause{{atom(A, q)}});
            return out;
        }
        out.push_back(RtlClause{{atom(A, pq)}});
        for (int k = 1; k < B - A; ++k) {
            RtlClause cl;
            for (int e = A; e < A + k; ++e) cl.atoms.push_back(atom(e, q));
            int e = A + k;
            cl.atoms.push_back(atom(e, e % 2 != 0 ? p : pq));
            out.push_back(std::move(cl));
        }
        RtlClause last;
        for (int e = A; e <= B; ++e) last.atoms.push_back(atom(e, q));
        out.push_back(std::move(last));
        return out;
    }

    Cnf trans(const StlFormula& f) const {
        const StlNode& n = f.node();
        if (is_propositional(f)) {
            PropDnf d = to_dnf(to_prop(f));
            if (d.is_true()) return {};
            return Cnf{RtlClause{{RtlAtom{0, std::move(d)}}}};
        }
        switch (n.kind) {
            case StlKind::And:
                return cnf_and(trans(StlFormula(n.lhs)), trans(StlFormula(n.rhs)));
            case StlKind::Or:
                return cnf_or(trans(StlFormula(n.lhs)), trans(StlFormula(n.rhs)));
            case StlKind::Next:
                return shift(trans(StlFormula(n.lhs)), entity(n.a));
            case StlKind::Always: {
                StlFormula inner(n.lhs);
                if (is_propositional(inner))
                    return trans_always(n.a, n.b, to_dnf(to_prop(inner)));
                if (n.a == n.b) return shift(trans(inner), entity(n.a));
                throw TransformError("always over a temporal subformula is outside "
                                     "the supported fragment");
            }
            case StlKind::Eventually: {
                StlFormula inner(n.lhs);
                if (n.a == n.b) return shift(trans(inner), entity(n.a));
                if (!is_propositional(inner))
                    throw TransformError("eventually over a temporal subformula is "
                                         "outside the supported fragment");
                return trans_eventually(n.a, n.b, to_dnf(to_prop(inner)));
            }
            case StlKind::Until: {
                StlFormula lhs(n.lhs), rhs(n.rhs);
                if (!is_propositional(lhs) || !is_propositional(rhs))
                    throw TransformError("until over temporal subformulae is outside "
                                         "the supported fragment");
                return trans_until(n.a, n.b, to_prop(lhs), to_prop(rhs));
            }
            default:
                throw TransformError("unsupported formula shape");
        }
    }
};

}  // namespace

NormalFormRtl stl_to_rtl(const StlFormula& phi, const Rational& c) {
    if (c.num <= 0) throw TransformError("c must be positive");
    if (!check_divisible(phi, c))
        throw TransformError("formula is not c-divisible for c = " + c.str());
    StlFormula nnf = stl_nnf(phi, false);
    Transformer tr{c, c / Rational(2)};
    Cnf cnf = tr.trans(nnf);
    drop_trivial(cnf);
    return NormalFormRtl{c, std::move(cnf)};
}

// ── Point-map semantics ─────────────────────────────────────────────────────

namespace {

const std::vector<std::vector<double>>& entry_at(const TimedPointMap& map, int j) {
    if (j < 0 || j >= static_cast<int>(map.entries.size()))
        throw std::out_of_range("point map has no entry at grid index " + std::to_string(j));
    return map.entries[j];
}

}  // namespace

bool model_check_rtl(const NormalFormRtl& phi, const TimedPointMap& map,
                     const RtlEvalContext& ctx) {
    for (const auto& cl : phi.conjuncts) {
        bool clause_ok = false;
        for (const auto& at : cl.atoms) {
            const auto& pts = entry_at(map, at.grid_index);
            double t = map.time_at(at.grid_index);
            bool all = true;
            for (const auto& x : pts) {
                EvalPoint p{t, {x.data(), x.size()}, {}, {}};
                if (!at.prop.sat(p, ctx.kappa)) { all = false; break; }
            }
            if (all) { clause_ok = true; break; }
        }
        if (!clause_ok) return false;
    }
    return true;
}

double rtl_robustness_points(const NormalFormRtl& phi, const TimedPointMap& map,
                             const RtlEvalContext& ctx) {
    double overall = kInf;
    for (const auto& cl : phi.conjuncts) {
        double clause_val = -kInf;
        for (const auto& at : cl.atoms) {
            const auto& pts = entry_at(map, at.grid_index);
            double t = map.time_at(at.grid_index);
            double inf_val = kInf;
            for (const auto& x : pts) {
                EvalPoint p{t, {x.data(), x.size()}, {}, {}};
                inf_val = std::min(inf_val, at.prop.robustness(p, ctx.kappa));
            }
            clause_val = std::max(clause_val, inf_val);
        }
        overall = std::min(overall, clause_val);
    }
    return overall;
}


// ── CompiledFormula ─────────────────────────────────────────────────────────

CompiledFormula::CompiledFormula(const NormalFormRtl& phi) {
    conjuncts_.resize(phi.conjuncts.size());
    for (std::size_t i = 0; i < phi.conjuncts.size(); ++i) {
        for (const auto& at : phi.conjuncts[i].atoms) {
            CAtom ca;
            ca.grid = at.grid_index;
            ca.is_true = at.prop.is_true();
            ca.is_false = at.prop.is_false();
            max_grid_ = std::max(max_grid_, at.grid_index);
            for (const auto& disj : at.prop.disjuncts) {
                std::vector<CPred> preds;
                for (const auto& pr : disj) {
                    CPred cp;
                    cp.tape = CompiledExpr(pr.h);
                    cp.wants_input = pr.h.references(ExprOp::Input);
                    any_input_ |= cp.wants_input;
                    preds.push_back(std::move(cp));
                }
                ca.dnf.push_back(std::move(preds));
            }
            conjuncts_[i].push_back(std::move(ca));
        }
    }
}

double CompiledFormula::robustness(
    const std::vector<std::vector<std::vector<double>>>& trajs, double half_c,
    const std::vector<CompiledExpr>* kappa) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (trajs.empty()) return inf;
    const int grids = static_cast<int>(trajs[0].size());
    if (max_grid_ >= grids)
        throw std::out_of_range("trajectories do not cover the formula horizon");

    // inputs once per (scenario, grid) point, lazily
    const int ns = static_cast<int>(trajs.size());
    thread_local std::vector<std::vector<double>> u_cache;
    thread_local std::vector<char> u_ready;
    if (any_input_ && kappa) {
        u_cache.assign(static_cast<std::size_t>(ns) * grids, {});
        u_ready.assign(static_cast<std::size_t>(ns) * grids, 0);
    }
    auto inputs_at = [&](int sc, int q) -> const std::vector<double>& {
        std::size_t key = static_cast<std::size_t>(sc) * grids + q;
        if (!u_ready[key]) {
            const auto& x = trajs[sc][q];
            EvalPoint p{half_c * q, {x.data(), x.size()}, {}, {}};
            auto& u = u_cache[key];
            u.clear();
            for (const auto& k : *kappa) u.push_back(k.eval(p));
            u_ready[key] = 1;
        }
        return u_cache[key];
    };

    double overall = inf;
    for (const auto& clause : conjuncts_) {
        double clause_val = -inf;
        for (const auto& atom : clause) {
            double inf_val;
            if (atom.is_true) {
                inf_val = inf;
            } else if (atom.is_false) {
                inf_val = -inf;
            } else {
                inf_val = inf;
                double t = half_c * atom.grid;
                for (int sc = 0; sc < ns; ++sc) {
                    const auto& x = trajs[sc][atom.grid];
                    double best = -inf;
                    for (const auto& disj : atom.dnf) {
                        double v = inf;
                        for (const auto& pr : disj) {
                            EvalPoint p{t, {x.data(), x.size()}, {}, {}};
                            if (pr.wants_input) {
                                const auto& u = inputs_at(sc, atom.grid);
                                p.u = {u.data(), u.size()};
                            }
                            v = std::min(v, pr.tape.eval(p));
                            if (v <= best) break;
                        }
                        best = std::max(best, v);
                    }
                    inf_val = std::min(inf_val, best);
                    if (inf_val <= clause_val && clause.size() == 1) break;
                }
            }
            clause_val = std::max(clause_val, inf_val);
        }
        overall = std::min(overall, clause_val);
    }
    return overall;
}

}  // namespace stlsynth
