#include "stlsynth/verify.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "stlsynth/gp.hpp"
#include "stlsynth/threadpool.hpp"

namespace stlsynth {

double smooth_max(const std::vector<double>& values, double beta) {
    // shift by the extremum for numerical stability
    double m = beta >= 0 ? *std::max_element(values.begin(), values.end())
                         : *std::min_element(values.begin(), values.end());
    double num = 0.0, den = 0.0;
    for (double v : values) {
        double e = std::exp(beta * (v - m));
        num += v * e;
        den += e;
    }
    return num / den;
}

// ── AtomEvaluator ───────────────────────────────────────────────────────────

AtomEvaluator::AtomEvaluator(const RtlAtom& atom, const ReachSequence& seq,
                             const Controller* kappa)
    : kappa_(kappa) {
    const ReachEntry& entry = seq.at(atom.grid_index);
    point_entry_ = entry.is_point;

    PolyZonotope set = entry.is_point
                           ? entry.set
                           : PolyZonotope::from_box(entry.box, /*first_id=*/seq.p0, nullptr);
    entry_factors_ = set.num_factors();
    int n = set.dim();
    rows_.reserve(n);
    for (int d = 0; d < n; ++d) rows_.push_back(set.row_poly(d));
    time_range_ = entry.time;

    bool needs_time_factor = false;
    bool references_time = false;
    for (const auto& disj : atom.prop.disjuncts)
        for (const auto& pr : disj)
            if (pr.h.references(ExprOp::Time) ||
                (pr.h.references(ExprOp::Input) && kappa &&
                 std::any_of(kappa->kappa.begin(), kappa->kappa.end(),
                             [](const ScalarExpression& k) {
                                 return k.references(ExprOp::Time);
                             })))
                references_time = true;
    if (references_time && !entry.is_point && time_range_.rad() > 0.0)
        needs_time_factor = true;

    FactorPoly time_poly;
    if (needs_time_factor) {
        time_factor_ = entry_factors_;
        ++entry_factors_;
        time_poly = poly_add(FactorPoly::constant(time_range_.mid()),
                             poly_scale(FactorPoly::factor(time_factor_), time_range_.rad()));
    } else {
        time_poly = FactorPoly::constant(time_range_.mid());
    }

    // input rows through the controller, when it is polynomial
    std::vector<FactorPoly> input_rows;
    bool inputs_poly = kappa != nullptr;
    if (kappa) {
        for (const auto& k : kappa->kappa)
            if (!k.is_polynomial()) inputs_poly = false;
        if (inputs_poly) {
            ComposeContext cctx;
            cctx.states = &rows_;
            cctx.time = &time_poly;
            cctx.trunc_order = 64;
            for (const auto& k : kappa->kappa) {
                auto r = compose_polynomial(k, cctx);
                // exact by construction at this order
                input_rows.push_back(std::move(r.poly));
            }
        }
    }

    for (const auto& disj : atom.prop.disjuncts) {
        std::vector<Pred> preds;
        for (const auto& pr : disj) {
            Pred p;
            p.strict = pr.strict;
            p.h = pr.h;
            bool wants_input = pr.h.references(ExprOp::Input);
            bool can_compose = pr.h.is_polynomial() && (!wants_input || inputs_poly);
            if (can_compose) {
                ComposeContext cctx;
                cctx.states = &rows_;
                cctx.inputs = input_rows.empty() ? nullptr : &input_rows;
                cctx.time = &time_poly;
                cctx.trunc_order = 64;
                auto r = compose_polynomial(pr.h, cctx);
                p.poly_path = true;
                p.poly = std::move(r.poly);
                p.poly_rem = r.remainder;
            } else {
                p.poly_path = false;
                p.tape = CompiledExpr(pr.h);
            }
            preds.push_back(std::move(p));
        }
        dnf_.push_back(std::move(preds));
    }

    // active dimensions: factors appearing in any composed poly or state row
    std::vector<bool> seen(entry_factors_, false);
    auto mark = [&](const FactorPoly& poly) {
        for (const auto& m : poly.terms)
            for (const auto& [id, k] : m.exps)
                if (id < entry_factors_) seen[id] = true;
    };
    bool any_fallback = false;
    for (const auto& disj : dnf_)
        for (const auto& pr : disj) {
            if (pr.poly_path) mark(pr.poly);
            else any_fallback = true;
        }
    if (any_fallback)
        for (const auto& r : rows_) mark(r);
    if (time_factor_ >= 0) seen[time_factor_] = true;
    for (int id = 0; id < entry_factors_; ++id)
        if (seen[id]) active_.push_back(id);

    sensitivity_.assign(active_.size(), 0.0);
    for (std::size_t d = 0; d < active_.size(); ++d) {
        int id = active_[d];
        auto weigh = [&](const FactorPoly& poly) {
            double w = 0.0;
            for (const auto& m : poly.terms)
                for (const auto& [fid, k] : m.exps)
                    if (fid == id) w += std::abs(m.coeff);
            return w;
        };
        for (const auto& disj : dnf_)
            for (const auto& pr : disj)
                if (pr.poly_path) sensitivity_[d] += weigh(pr.poly);
        if (any_fallback)
            for (const auto& r : rows_) sensitivity_[d] += weigh(r);
    }
}

std::vector<double> AtomEvaluator::expand(const std::vector<double>& alpha_compact) const {
    std::vector<double> full(entry_factors_, 0.0);
    for (std::size_t d = 0; d < active_.size(); ++d) full[active_[d]] = alpha_compact[d];
    return full;
}

double AtomEvaluator::value(const std::vector<double>& alpha_compact) const {
    return value_beta(alpha_compact, 0.0);
}

double AtomEvaluator::value_beta(const std::vector<double>& alpha_compact, double beta) const {
    std::vector<double> full = expand(alpha_compact);
    double t_val = time_range_.mid();
    if (time_factor_ >= 0) t_val = time_range_.mid() + time_range_.rad() * full[time_factor_];

    std::vector<double> x, u;
    auto need_states = [&] {
        if (!x.empty()) return;
        x.resize(rows_.size());
        for (std::size_t d = 0; d < rows_.size(); ++d) x[d] = rows_[d].eval(full);
        if (kappa_) {
            EvalPoint p{t_val, {x.data(), x.size()}, {}, {}};
            for (const auto& k : kappa_->tapes) u.push_back(k.eval(p));
        }
    };

    if (dnf_.empty()) return std::numeric_limits<double>::infinity();
    std::vector<double> disj_vals;
    disj_vals.reserve(dnf_.size());
    for (const auto& disj : dnf_) {
        std::vector<double> pred_vals;
        pred_vals.reserve(disj.size());
        for (const auto& pr : disj) {
            double hv;
            if (pr.poly_path) {
                hv = pr.poly.eval(full);
            } else {
                need_states();
                EvalPoint p{t_val, {x.data(), x.size()}, {u.data(), u.size()}, {}};
                hv = pr.tape.eval(p);
            }
            pred_vals.push_back(hv);
        }
        if (beta > 0.0) disj_vals.push_back(smooth_max(pred_vals, -beta));
        else disj_vals.push_back(*std::min_element(pred_vals.begin(), pred_vals.end()));
    }
    if (beta > 0.0) return smooth_max(disj_vals, beta);
    return *std::max_element(disj_vals.begin(), disj_vals.end());
}

Interval AtomEvaluator::bound(const std::vector<Interval>& box) const {
    auto factor_box = [&](int id) -> Interval {
        for (std::size_t d = 0; d < active_.size(); ++d)
            if (active_[d] == id) return box[d];
        return Interval(-1.0, 1.0);
    };
    Interval t_iv = time_range_;
    if (time_factor_ >= 0)
        t_iv = Interval(time_range_.mid()) + time_range_.rad() * factor_box(time_factor_);

    IntervalPoint ip;
    bool states_ready = false;
    auto need_states = [&] {
        if (states_ready) return;
        ip.t = t_iv;
        ip.x.resize(rows_.size());
        for (std::size_t d = 0; d < rows_.size(); ++d) ip.x[d] = rows_[d].interval(factor_box);
        if (kappa_) {
            IntervalPoint px;
            px.t = t_iv;
            px.x = ip.x;
            for (const auto& k : kappa_->kappa) ip.u.push_back(k.eval_interval(px));
        }
        states_ready = true;
    };

    Interval best;
    bool first = true;
    for (const auto& disj : dnf_) {
        Interval v;
        bool vfirst = true;
        for (const auto& pr : disj) {
            Interval hv;
            if (pr.poly_path) {
                hv = pr.poly.interval(factor_box) + pr.poly_rem;
            } else {
                need_states();
                hv = pr.tape.eval_interval(ip);
            }
            v = vfirst ? hv : min(v, hv);
            vfirst = false;
        }
        best = first ? v : max(best, v);
        first = false;
    }
    if (first) return Interval(std::numeric_limits<double>::infinity());
    return best;
}

// ── subscore (particle swarm) ───────────────────────────────────────────────

AtomScore subscore(const RtlAtom& atom, int conjunct, int position, const ReachSequence& seq,
                   const Controller* kappa, const VerifyConfig& cfg) {
    AtomEvaluator ev(atom, seq, kappa);
    const int dim = ev.dimension();
    AtomScore out;
    out.conjunct = conjunct;
    out.position = position;
    out.grid_index = atom.grid_index;

    if (dim == 0) {
        out.p_hat = ev.value({});
        out.alpha = ev.expand({});
        return out;
    }

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_alpha(dim, 0.0);

    for (int restart = 0; restart < std::max(1, cfg.restarts); ++restart) {
        std::mt19937_64 rng(mix_seed(cfg.seed, (conjunct + 1) * 1000003 + position, restart));
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const int swarm = cfg.swarm;
        std::vector<std::vector<double>> pos(swarm, std::vector<double>(dim));
        std::vector<std::vector<double>> vel(swarm, std::vector<double>(dim, 0.0));
        std::vector<std::vector<double>> pbest = pos;
        std::vector<double> pbest_val(swarm, std::numeric_limits<double>::infinity());
        for (int i = 0; i < swarm; ++i) {
            for (int d = 0; d < dim; ++d) pos[i][d] = U(rng);
            if (restart == 0 && i == 0) std::fill(pos[i].begin(), pos[i].end(), 0.0);
            if (restart == 0 && i == 1) std::fill(pos[i].begin(), pos[i].end(), 1.0);
            if (restart == 0 && i == 2) std::fill(pos[i].begin(), pos[i].end(), -1.0);
        }
        std::vector<double> gbest(dim, 0.0);
        double gbest_val = std::numeric_limits<double>::infinity();
        for (int it = 0; it < cfg.iterations; ++it) {
            for (int i = 0; i < swarm; ++i) {
                double v = ev.value_beta(pos[i], cfg.beta);
                if (v < pbest_val[i]) { pbest_val[i] = v; pbest[i] = pos[i]; }
                if (v < gbest_val) { gbest_val = v; gbest = pos[i]; }
            }
            const double w = 0.7298, c1 = 1.49618, c2 = 1.49618;
            for (int i = 0; i < swarm; ++i)
                for (int d = 0; d < dim; ++d) {
                    std::uniform_real_distribution<double> R(0.0, 1.0);
                    vel[i][d] = w * vel[i][d] + c1 * R(rng) * (pbest[i][d] - pos[i][d]) +
                                c2 * R(rng) * (gbest[d] - pos[i][d]);
                    pos[i][d] = std::clamp(pos[i][d] + vel[i][d], -1.0, 1.0);
                }
        }
        if (gbest_val < best_val) {
            best_val = gbest_val;
            best_alpha = gbest;
        }
    }

    out.p_hat = ev.value(best_alpha);  // exact value at the minimizer
    out.alpha = ev.expand(best_alpha);
    return out;
}

// ── aggregate / extract ─────────────────────────────────────────────────────

void aggregate(RobustnessReport& report) {
    double overall = std::numeric_limits<double>::infinity();
    report.worst_conjunct = -1;
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        double clause_best = -std::numeric_limits<double>::infinity();
        int clause_arg = -1;
        for (std::size_t k = 0; k < report.scores[i].size(); ++k) {
            if (report.scores[i][k].p_hat > clause_best) {
                clause_best = report.scores[i][k].p_hat;
                clause_arg = static_cast<int>(k);
            }
        }
        if (clause_best < overall) {
            overall = clause_best;
            report.worst_conjunct = static_cast<int>(i);
            report.worst_position = clause_arg;
        }
    }
    report.p_hat = report.scores.empty() ? std::numeric_limits<double>::infinity() : overall;
}

std::vector<double> extract_from_alpha(const std::vector<double>& alpha_full,
                                       const ReachSequence& seq) {
    std::vector<double> alpha_init(seq.p0, 0.0);
    for (int k = 0; k < seq.p0 && k < static_cast<int>(alpha_full.size()); ++k)
        alpha_init[k] = alpha_full[k];
    return seq.initial_point(alpha_init);
}

std::vector<double> extract_counterexample(const RobustnessReport& report,
                                           const ReachSequence& seq) {
    if (report.verdict != Verdict::Falsified)
        throw std::logic_error("counterexample extraction requires a falsified report");
    const AtomScore& worst = report.worst();
    if (!worst.witness.empty()) return extract_from_alpha(worst.witness, seq);
    // interval entries carry no initial-set factors, so their minimizers
    // project to the box center. A violated clause has every atom negative;
    // prefer the earliest negative point-entry atom: its projection carries
    // the least accumulated over-approximation (exact at grid index 0).
    const AtomScore* best = &worst;
    const AtomScore* candidate = nullptr;
    auto consider = [&](const AtomScore& sc) {
        if (sc.grid_index % 2 != 0 || sc.p_hat >= 0.0) return;
        if (!candidate || sc.grid_index < candidate->grid_index ||
            (sc.grid_index == candidate->grid_index && sc.p_hat < candidate->p_hat))
            candidate = &sc;
    };
    for (const auto& sc : report.scores[report.worst_conjunct]) consider(sc);
    if (!candidate)
        for (const auto& clause : report.scores)
            for (const auto& sc : clause) consider(sc);
    if (candidate) best = candidate;
    return extract_from_alpha(best->alpha, seq);
}

// ── certify (interval branch and bound) ─────────────────────────────────────

CertifyResult certify(const RtlAtom& atom, const ReachSequence& seq, const Controller* kappa,
                      const VerifyConfig& cfg) {
    AtomEvaluator ev(atom, seq, kappa);
    const int dim = ev.dimension();
    CertifyResult res;

    // when any predicate is strict the cleared test requires a strictly
    // positive lower bound (conservative for mixed atoms)
    bool any_strict = false;
    for (const auto& d : atom.prop.disjuncts)
        for (const auto& p : d) any_strict |= p.strict;

    struct Node {
        std::vector<Interval> box;
        double lb;
        int depth;
    };
    auto cleared = [&](const Interval& b) { return any_strict ? b.lo > 0.0 : b.lo >= 0.0; };

    if (dim == 0) {
        double v = ev.value({});
        if (any_strict ? v > 0.0 : v >= 0.0) res.outcome = AtomOutcome::Holds;
        else {
            res.outcome = AtomOutcome::Violated;
            res.witness = ev.expand({});
        }
        return res;
    }

    auto cmp = [](const Node& a, const Node& b) { return a.lb > b.lb; };
    std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);
    {
        Node root{std::vector<Interval>(dim, Interval(-1.0, 1.0)), 0.0, 0};
        Interval b = ev.bound(root.box);
        if (cleared(b)) {
            res.outcome = AtomOutcome::Holds;
            return res;
        }
        root.lb = b.lo;
        open.push(std::move(root));
    }

    int nodes = 0;
    double worst_lb = std::numeric_limits<double>::infinity();  // over dropped nodes
    while (!open.empty()) {
        if (++nodes > cfg.bb_max_nodes) break;
        Node node = open.top();
        open.pop();

        // direct falsification probe at the box center
        std::vector<double> center(dim);
        for (int d = 0; d < dim; ++d) center[d] = node.box[d].mid();
        double cv = ev.value(center);
        if (any_strict ? cv <= 0.0 : cv < 0.0) {
            res.outcome = AtomOutcome::Violated;
            res.witness = ev.expand(center);
            res.gap = -cv;
            return res;
        }

        if (node.depth >= cfg.bb_depth) {
            worst_lb = std::min(worst_lb, node.lb);
            continue;
        }

        // split the dimension with the largest width x sensitivity
        int split = 0;
        double best_w = -1.0;
        for (int d = 0; d < dim; ++d) {
            double w = node.box[d].width() * (ev.sensitivity()[d] + 1e-12);
            if (w > best_w) { best_w = w; split = d; }
        }
        for (int half = 0; half < 2; ++half) {
            Node child;
            child.box = node.box;
            double mid = node.box[split].mid();
            child.box[split] =
                half == 0 ? Interval(node.box[split].lo, mid) : Interval(mid, node.box[split].hi);
            child.depth = node.depth + 1;
            Interval b = ev.bound(child.box);
            if (cleared(b)) continue;
            if (b.hi < 0.0) {
                // certainly negative on the whole child: its center witnesses
                std::vector<double> w(dim);
                for (int d = 0; d < dim; ++d) w[d] = child.box[d].mid();
                double wv = ev.value(w);
                if (any_strict ? wv <= 0.0 : wv < 0.0) {
                    res.outcome = AtomOutcome::Violated;
                    res.witness = ev.expand(w);
                    res.gap = -wv;
                    return res;
                }
            }
            child.lb = b.lo;
            open.push(std::move(child));
        }
    }

    while (!open.empty()) {
        worst_lb = std::min(worst_lb, open.top().lb);
        open.pop();
    }
    if (worst_lb == std::numeric_limits<double>::infinity()) {
        // every box was cleared
        res.outcome = AtomOutcome::Holds;
        return res;
    }
    res.outcome = AtomOutcome::Unknown;
    res.gap = std::max(0.0, -worst_lb);
    return res;
}

// ── full pipeline ───────────────────────────────────────────────────────────

RobustnessReport verify_sequence(const NormalFormRtl& phi, const ReachSequence& seq,
                                 const Controller* kappa, const VerifyConfig& cfg) {
    RobustnessReport report;
    report.scores.resize(phi.conjuncts.size());
    std::vector<std::pair<int, int>> atoms;
    for (std::size_t i = 0; i < phi.conjuncts.size(); ++i) {
        report.scores[i].resize(phi.conjuncts[i].atoms.size());
        for (std::size_t k = 0; k < phi.conjuncts[i].atoms.size(); ++k)
            atoms.emplace_back(static_cast<int>(i), static_cast<int>(k));
    }
    parallel_for(static_cast<int>(atoms.size()), [&](int idx) {
        auto [i, k] = atoms[idx];
        report.scores[i][k] = subscore(phi.conjuncts[i].atoms[k], i, k, seq, kappa, cfg);
    });
    aggregate(report);

    if (report.scores.empty()) {
        report.verdict = Verdict::Certified;  // empty conjunction
        return report;
    }
    if (report.p_hat < 0.0) {
        report.verdict = Verdict::Falsified;
        return report;
    }

    // p_hat >= 0: attempt formal certification of every atom
    std::vector<CertifyResult> results(atoms.size());
    parallel_for(static_cast<int>(atoms.size()), [&](int idx) {
        auto [i, k] = atoms[idx];
        results[idx] = certify(phi.conjuncts[i].atoms[k], seq, kappa, cfg);
    });
    bool all_hold = true;
    bool any_clause_violated = false;
    double gap = 0.0;
    for (std::size_t idx = 0; idx < atoms.size(); ++idx) {
        auto [i, k] = atoms[idx];
        auto& sc = report.scores[i][k];
        sc.certify_outcome = results[idx].outcome;
        sc.certify_gap = results[idx].gap;
        sc.witness = results[idx].witness;
    }
    // clause semantics: a conjunct is certified when SOME atom holds
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        bool clause_holds = false;
        double clause_gap = std::numeric_limits<double>::infinity();
        bool clause_all_violated = true;
        for (const auto& sc : report.scores[i]) {
            if (sc.certify_outcome == AtomOutcome::Holds) clause_holds = true;
            if (sc.certify_outcome != AtomOutcome::Violated) clause_all_violated = false;
            clause_gap = std::min(clause_gap, sc.certify_gap);
        }
        if (!clause_holds) {
            all_hold = false;
            if (clause_all_violated) any_clause_violated = true;
            else gap = std::max(gap, clause_gap);
        }
    }
    report.residual_gap = gap;
    if (all_hold) {
        report.verdict = Verdict::Certified;
    } else if (any_clause_violated) {
        report.verdict = Verdict::Falsified;
        // steer extraction toward a violated clause's witness
        for (std::size_t i = 0; i < report.scores.size(); ++i) {
            bool all_viol = !report.scores[i].empty();
            for (const auto& sc : report.scores[i])
                if (sc.certify_outcome != AtomOutcome::Violated) all_viol = false;
            if (all_viol) {
                report.worst_conjunct = static_cast<int>(i);
                report.worst_position = 0;
                break;
            }
        }
    } else {
        report.verdict = Verdict::Inconclusive;
    }
    return report;
}

}  // namespace stlsynth
