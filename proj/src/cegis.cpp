#include "stlsynth/cegis.hpp"

#include <chrono>
#include <iostream>
#include <cmath>
#include <sstream>

#include "stlsynth/verify.hpp"

namespace stlsynth {

namespace {

constexpr double kBadFitness = -1e30;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string vec_str(const std::vector<double>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt(v[i]);
    }
    return s + ")";
}

}  // namespace

Synthesizer::Synthesizer(const ProblemSpec& spec, std::uint64_t seed)
    : spec_(spec), seed_(seed), rng_(seed) {
    phi_ = stl_to_rtl(spec.formula, spec.sys.c);
    horizon_ = phi_.horizon();
    if (spec.mode == ProblemSpec::Mode::ReferenceTracking) {
        // the kappa start tree references uff/xref terminals that only exist
        // after R1/R2; bind placeholders so the other targets are usable
        std::map<std::string, ScalarExpression> placeholders;
        for (int i = 1; i <= spec.sys.m; ++i)
            placeholders["uff" + std::to_string(i)] = ScalarExpression::constant(0.0);
        for (int i = 1; i <= spec.sys.n; ++i)
            placeholders["xref" + std::to_string(i)] = ScalarExpression::constant(0.0);
        base_grammar_ = spec.grammar(placeholders);
    } else {
        base_grammar_ = spec.grammar();
    }
    plan_ = make_sim_plan(spec_.sys, horizon_);
    cphi_ = CompiledFormula(phi_);
    half_c_ = (spec_.sys.c / Rational(2)).to_double();
}

double Synthesizer::robustness_fast(const Controller& kappa,
                                    const ScenarioSet& scenarios) const {
    thread_local std::vector<std::vector<std::vector<double>>> trajs;
    trajs.resize(scenarios.size());
    for (int i = 0; i < scenarios.size(); ++i)
        integrate_plan(plan_, kappa, scenarios[i].x0, scenarios[i].disturbance,
                       scenarios[i].error ? &*scenarios[i].error : nullptr, trajs[i]);
    return cphi_.robustness(trajs, half_c_, &kappa.tapes);
}

Grammar& Synthesizer::kappa_grammar() {
    if (!kappa_grammar_ready_) {
        if (spec_.mode == ProblemSpec::Mode::ReferenceTracking)
            throw std::logic_error("reference terminals not bound yet");
        kappa_grammar_ = base_grammar_;
        kappa_grammar_ready_ = true;
    }
    return kappa_grammar_;
}

DisturbanceRealization Synthesizer::random_disturbance(std::uint64_t stream) {
    DisturbanceRealization d;
    if (spec_.sys.l == 0) {
        d.compile();
        return d;
    }
    std::mt19937_64 rng(mix_seed(seed_, 0xD157, stream));
    auto ind = random_individual(base_grammar_, "omega", spec_.gp_omega.max_depth, rng);
    d.omega = phenotype(base_grammar_, ind.geno);
    if (static_cast<int>(d.omega.size()) != spec_.sys.l)
        throw std::invalid_argument("omega starting tree arity must equal the disturbance count");
    d.compile();
    return d;
}

std::optional<ErrorSignalModel> Synthesizer::random_error_signal(std::uint64_t stream) {
    if (!spec_.error_model ||
        base_grammar_.start_trees.find("sigma") == base_grammar_.start_trees.end())
        return std::nullopt;
    std::mt19937_64 rng(mix_seed(seed_, 0x516A, stream));
    auto ind = random_individual(base_grammar_, "sigma", spec_.gp_omega.max_depth, rng);
    ErrorSignalModel eps;
    eps.delta = delta_;
    eps.sigma = phenotype(base_grammar_, ind.geno);
    eps.compile();
    return eps;
}

ScenarioSet Synthesizer::initialize_scenarios() {
    ScenarioSet scenarios(spec_.ns);
    std::mt19937_64 rng(mix_seed(seed_, 0x1217, 0));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < spec_.ns; ++i) {
        Scenario sc;
        sc.x0.resize(spec_.sys.n);
        for (int d = 0; d < spec_.sys.n; ++d) {
            const Interval& iv = spec_.sys.init[d];
            sc.x0[d] = iv.lo + U(rng) * iv.width();
        }
        sc.disturbance = random_disturbance(i);
        sc.error = random_error_signal(i);
        scenarios.insert(std::move(sc));
    }
    return scenarios;
}

Controller Synthesizer::controller_from(const Individual& ind) const {
    Controller k;
    k.kappa = phenotype(kappa_grammar_ready_ ? kappa_grammar_ : base_grammar_, ind.geno);
    if (static_cast<int>(k.kappa.size()) != spec_.sys.m)
        throw std::invalid_argument("kappa starting tree arity must equal the input count");
    k.compile();
    return k;
}

double Synthesizer::scenario_robustness(const Controller& kappa, const Scenario& sc) const {
    try {
        ScenarioSet one(1);
        one.insert(sc);
        return robustness_fast(kappa, one);
    } catch (const DivergenceError&) {
        return kBadFitness;
    }
}

FitnessFn Synthesizer::kappa_fitness(const ScenarioSet& scenarios) {
    return [this, &scenarios](const Individual& ind) -> double {
        try {
            Controller k = controller_from(ind);
            double rob = robustness_fast(k, scenarios);
            return std::isfinite(rob) ? rob : (rob > 0 ? 1e30 : kBadFitness);
        } catch (const DivergenceError&) {
            return kBadFitness;
        }
    };
}

Synthesizer::Proposal Synthesizer::propose_controller(ScenarioSet& scenarios) {
    Proposal out;
    GpConfig cfg = spec_.gp_kappa;
    cfg.seed = mix_seed(seed_, 0xCA7, rng_());
    if (!kappa_pop_) kappa_pop_ = init_population(kappa_grammar(), "kappa", cfg, rng_);

    auto fitness = kappa_fitness(scenarios);
    for (int batch = 0; batch < spec_.a1a_cap; ++batch) {
        // A1.a: evolve the controller against the current scenario set
        Individual best = evolve_population(kappa_grammar(), *kappa_pop_, fitness, cfg, rng_);
        out.batches = batch + 1;
        out.generations += cfg.generations;
        out.individual = best;
        out.fitness = best.fitness;
        if (best.fitness <= 0.0) continue;  // repeat A1.a

        // A1.b: re-synthesize each scenario's disturbance against the winner
        Controller kappa = controller_from(best);
        bool all_positive = true;
        for (int i = 0; i < scenarios.size(); ++i) {
            Scenario updated = worst_case_disturbance(kappa, scenarios[i].x0);
            scenarios.replace(i, updated);
            double rob = scenario_robustness(kappa, scenarios[i]);
            if (rob <= 0.0) {
                all_positive = false;
                break;  // back to A1.a with the hardened scenario in place
            }
        }
        if (!all_positive) {
            // the scenario set changed: cached fitness values are stale
            for (auto& m : kappa_pop_->members) m.evaluated = false;
            kappa_pop_->has_best = false;
            continue;
        }
        out.positive = true;
        out.controller = std::move(kappa);
        out.fitness = best.fitness;
        return out;
    }
    out.positive = false;
    out.controller = controller_from(out.individual);
    return out;
}

Scenario Synthesizer::worst_case_disturbance(const Controller& kappa,
                                             const std::vector<double>& x0) {
    Scenario sc;
    sc.x0 = x0;
    sc.disturbance = DisturbanceRealization::zero(spec_.sys.l);
    sc.error = std::nullopt;
    if (spec_.sys.l == 0 &&
        (!spec_.error_model ||
         base_grammar_.start_trees.find("sigma") == base_grammar_.start_trees.end()))
        return sc;

    // combined disturbance + error-signal individual
    Grammar g = base_grammar_;
    std::vector<ScalarExpression> trees;
    bool has_omega = spec_.sys.l > 0;
    bool has_sigma = spec_.error_model &&
                     g.start_trees.find("sigma") != g.start_trees.end();
    if (has_omega) {
        const auto& ot = g.start_trees.at("omega");
        trees.insert(trees.end(), ot.begin(), ot.end());
    }
    if (has_sigma) {
        const auto& st = g.start_trees.at("sigma");
        trees.insert(trees.end(), st.begin(), st.end());
    }
    g.start_trees["disturbance"] = trees;

    GpConfig cfg = spec_.gp_omega;
    cfg.seed = mix_seed(seed_, 0x0E6A, rng_());

    auto fitness = [&](const Individual& ind) -> double {
        auto ph = phenotype(g, ind.geno);
        Scenario cand;
        cand.x0 = x0;
        std::size_t off = 0;
        if (has_omega) {
            cand.disturbance.omega.assign(ph.begin(), ph.begin() + spec_.sys.l);
            cand.disturbance.compile();
            off = spec_.sys.l;
        } else {
            cand.disturbance = DisturbanceRealization::zero(0);
        }
        if (has_sigma) {
            ErrorSignalModel eps;
            eps.delta = delta_;
            eps.sigma.assign(ph.begin() + off, ph.end());
            eps.compile();
            cand.error = std::move(eps);
        }
        double rob = scenario_robustness(kappa, cand);
        return rob <= kBadFitness ? 1e30 : -rob;  // maximize the violation
    };

    Individual best = evolve(g, "disturbance", fitness, cfg);
    auto ph = phenotype(g, best.geno);
    std::size_t off = 0;
    if (has_omega) {
        sc.disturbance.omega.assign(ph.begin(), ph.begin() + spec_.sys.l);
        sc.disturbance.compile();
        off = spec_.sys.l;
    }
    if (has_sigma) {
        ErrorSignalModel eps;
        eps.delta = delta_;
        eps.sigma.assign(ph.begin() + off, ph.end());
        eps.compile();
        sc.error = std::move(eps);
    }
    return sc;
}

std::vector<ScalarExpression> Synthesizer::synth_feedforward() {
    // R1: open-loop feedforward from the centroid, no disturbance
    std::vector<double> x0(spec_.sys.n);
    for (int d = 0; d < spec_.sys.n; ++d) x0[d] = spec_.sys.init[d].mid();
    GpConfig cfg = spec_.gp_uff;
    cfg.seed = mix_seed(seed_, 0x0FF, 1);

    auto fitness = [&](const Individual& ind) -> double {
        auto ph = phenotype(base_grammar_, ind.geno);
        Controller uff;
        uff.kappa = ph;
        uff.compile();
        Scenario nominal{x0, DisturbanceRealization::zero(spec_.sys.l), std::nullopt};
        return scenario_robustness(uff, nominal);
    };
    Individual best = evolve(base_grammar_, "uff", fitness, cfg);
    return phenotype(base_grammar_, best.geno);
}

std::vector<ScalarExpression> Synthesizer::fit_reference(
    const std::vector<ScalarExpression>& u_ff) {
    // R2: per-dimension fit of the nominal closed-form trajectory
    std::vector<double> x0(spec_.sys.n);
    for (int d = 0; d < spec_.sys.n; ++d) x0[d] = spec_.sys.init[d].mid();
    Controller uff;
    uff.kappa = u_ff;
    uff.compile();
    auto nominal = integrate_closed_loop(spec_.sys, uff, x0,
                                         DisturbanceRealization::zero(spec_.sys.l), nullptr,
                                         horizon_);
    double half = (spec_.sys.c / Rational(2)).to_double();

    std::vector<ScalarExpression> refs;
    for (int dim = 0; dim < spec_.sys.n; ++dim) {
        GpConfig cfg = spec_.gp_xref;
        cfg.seed = mix_seed(seed_, 0x0EF, dim);
        auto fitness = [&](const Individual& ind) -> double {
            auto ph = phenotype(base_grammar_, ind.geno);
            CompiledExpr tape(ph[0]);
            double err2 = 0.0;
            for (std::size_t q = 0; q < nominal.entries.size(); ++q) {
                EvalPoint p{half * q, {}, {}, {}};
                double e = nominal.entries[q][dim] - tape.eval(p);
                err2 += e * e;
            }
            return 1.0 / (1.0 + std::sqrt(err2));
        };
        Individual best = evolve(base_grammar_, "xref", fitness, cfg);
        refs.push_back(phenotype(base_grammar_, best.geno)[0]);
    }
    return refs;
}

SynthesisResult Synthesizer::synthesize() {
    SynthesisResult result;
    std::ostringstream log;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(spec_.problem_hash));
    log << "# synthesis log\n";
    log << "# problem " << spec_.name << " hash " << hash_hex << " seed " << seed_
        << " tool " << kToolVersion << "\n";

    if (spec_.mode == ProblemSpec::Mode::ReferenceTracking) {
        double t0 = now_seconds();
        result.u_ff = synth_feedforward();
        result.timings.feedforward = now_seconds() - t0;
        log << "[R1] u_ff =";
        for (const auto& e : result.u_ff) log << " " << e.str() << " ;";
        log << "\n";
        t0 = now_seconds();
        result.x_ref = fit_reference(result.u_ff);
        result.timings.reference = now_seconds() - t0;
        log << "[R2] x_ref =";
        for (const auto& e : result.x_ref) log << " " << e.str() << " ;";
        log << "\n";

        std::map<std::string, ScalarExpression> terminals;
        for (std::size_t i = 0; i < result.u_ff.size(); ++i)
            terminals["uff" + std::to_string(i + 1)] = result.u_ff[i];
        for (std::size_t i = 0; i < result.x_ref.size(); ++i)
            terminals["xref" + std::to_string(i + 1)] = result.x_ref[i];
        kappa_grammar_ = spec_.grammar(terminals);
        kappa_grammar_ready_ = true;
    }

    ScenarioSet scenarios = initialize_scenarios();
    log << "[init] scenarios = " << scenarios.size() << "\n";

    VerifyConfig vcfg = spec_.verify;
    vcfg.seed = mix_seed(seed_, 0xF0F0, 1);

    int a2_invocations = 0;
    for (int refinement = 0; refinement < spec_.max_refinements; ++refinement) {
        double t0 = now_seconds();
        Proposal prop = propose_controller(scenarios);
        result.timings.gp_kappa += now_seconds() - t0;
        result.total_generations += prop.generations;
        result.best_sim_fitness = prop.fitness;

        t0 = now_seconds();
        ReachSequence seq;
        bool reach_ok = true;
        std::string reach_msg;
        try {
            seq = reach_closed_loop(spec_.sys, prop.controller, horizon_, spec_.reach);
        } catch (const ReachError& e) {
            reach_ok = false;
            reach_msg = e.what();
        }
        result.timings.reach += now_seconds() - t0;
        ++a2_invocations;

        if (!reach_ok) {
            log << "[ref " << refinement << "] batches=" << prop.batches
                << " kappa_gens=" << prop.generations << " sim_fitness=" << fmt(prop.fitness)
                << " reach=failed\n";
            // harden the scenario set from the initial box center and retry
            double tc = now_seconds();
            Scenario cx = worst_case_disturbance(prop.controller, [&] {
                std::vector<double> mid(spec_.sys.n);
                for (int d = 0; d < spec_.sys.n; ++d) mid[d] = spec_.sys.init[d].mid();
                return mid;
            }());
            result.timings.counterexample += now_seconds() - tc;
            scenarios.insert(std::move(cx));
            for (auto& m : kappa_pop_->members) m.evaluated = false;
            kappa_pop_->has_best = false;
            result.controller = prop.controller;
            continue;
        }

        t0 = now_seconds();
        RobustnessReport report = verify_sequence(phi_, seq, &prop.controller, vcfg);
        result.timings.certification += now_seconds() - t0;

        result.controller = prop.controller;
        result.final_p_hat = report.p_hat;
        result.complexity_value = complexity(prop.individual.geno);

        if (progress_ && report.verdict == Verdict::Certified)
            *progress_ << "[ref " << refinement << "] fitness=" << fmt(prop.fitness)
                       << " p_hat=" << fmt(report.p_hat) << " certified" << std::endl;
        if (report.verdict == Verdict::Certified) {
            log << "[ref " << refinement << "] batches=" << prop.batches
                << " kappa_gens=" << prop.generations << " sim_fitness=" << fmt(prop.fitness)
                << " p_hat=" << fmt(report.p_hat) << " verdict=certified\n";
            result.verdict = SynthesisVerdict::Certified;
            result.refinements = a2_invocations - 1;
            result.final_report = std::move(report);
            log << "[done] verdict=certified refinements=" << result.refinements
                << " total_kappa_generations=" << result.total_generations
                << " complexity=" << result.complexity_value << "\n";
            log << "controller: " << result.controller.str() << "\n";
            result.log = log.str();
            return result;
        }
        if (report.verdict == Verdict::Inconclusive &&
            report.residual_gap <= spec_.verify.gap_accept) {
            log << "[ref " << refinement << "] batches=" << prop.batches
                << " kappa_gens=" << prop.generations << " sim_fitness=" << fmt(prop.fitness)
                << " p_hat=" << fmt(report.p_hat) << " verdict=certified-with-gap gap="
                << fmt(report.residual_gap) << "\n";
            result.verdict = SynthesisVerdict::CertifiedWithGap;
            result.residual_gap = report.residual_gap;
            result.refinements = a2_invocations - 1;
            result.final_report = std::move(report);
            log << "[done] verdict=certified-with-gap refinements=" << result.refinements
                << " total_kappa_generations=" << result.total_generations
                << " complexity=" << result.complexity_value << "\n";
            log << "controller: " << result.controller.str() << "\n";
            result.log = log.str();
            return result;
        }

        // falsified (or inconclusive with a large gap): extract and refine
        double tc = now_seconds();
        std::vector<double> x0;
        if (report.verdict == Verdict::Falsified) {
            x0 = extract_counterexample(report, seq);
        } else {
            x0 = extract_from_alpha(report.worst().witness.empty() ? report.worst().alpha
                                                                   : report.worst().witness,
                                    seq);
        }
        Scenario cx = worst_case_disturbance(prop.controller, x0);
        result.timings.gp_omega += now_seconds() - tc;

        tc = now_seconds();
        double target = report.p_hat;
        Scenario probe = cx;
        double new_delta = delta_;
        if (spec_.error_model && probe.error) {
            new_delta = fit_delta(
                target,
                [&](double d) {
                    probe.error->delta = d;
                    return scenario_robustness(prop.controller, probe);
                },
                spec_.delta_max);
        }
        result.timings.counterexample += now_seconds() - tc;

        log << "[ref " << refinement << "] batches=" << prop.batches
            << " kappa_gens=" << prop.generations << " sim_fitness=" << fmt(prop.fitness)
            << " p_hat=" << fmt(report.p_hat) << " verdict="
            << (report.verdict == Verdict::Falsified ? "falsified" : "inconclusive")
            << " cx=" << vec_str(x0) << " delta=" << fmt(new_delta) << "\n";
        if (progress_)
            *progress_ << "[ref " << refinement << "] fitness=" << fmt(prop.fitness)
                       << " p_hat=" << fmt(report.p_hat) << " refine -> cx=" << vec_str(x0)
                       << std::endl;

        delta_ = new_delta;
        if (cx.error) cx.error->delta = delta_;
        scenarios.insert(std::move(cx));
        // scenario set changed: invalidate cached fitness
        if (kappa_pop_) {
            for (auto& m : kappa_pop_->members) m.evaluated = false;
            kappa_pop_->has_best = false;
        }
    }

    result.verdict = SynthesisVerdict::Exhausted;
    result.refinements = a2_invocations - 1;
    log << "[done] verdict=exhausted refinements=" << result.refinements
        << " total_kappa_generations=" << result.total_generations << "\n";
    log << "controller: " << result.controller.str() << "\n";
    result.log = log.str();
    return result;
}

}  // namespace stlsynth
