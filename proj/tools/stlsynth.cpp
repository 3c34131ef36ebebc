// Batch front door: load a problem file, transform its formula, verify a
// given controller, run the full synthesis loop, or Monte-Carlo simulate a
// controller. Every output file embeds the seed, the problem hash and the
// tool version.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "stlsynth/cegis.hpp"
#include "stlsynth/threadpool.hpp"
#include "stlsynth/verify.hpp"

using namespace stlsynth;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitExhausted = 4;

struct CommonOpts {
    std::string problem_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int workers = 0;
    int max_refinements = -1;
    double reach_step = 0.0;
    double beta = 0.0;
    bool smt_export = false;
};

std::string hash_hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string stamp_comment(const ProblemSpec& spec, std::uint64_t seed) {
    return "# problem=" + spec.name + " hash=" + hash_hex(spec.problem_hash) +
           " seed=" + std::to_string(seed) + " version=" + kToolVersion + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

json stamp_json(const ProblemSpec& spec, std::uint64_t seed) {
    return json{{"problem", spec.name},
                {"problem_hash", hash_hex(spec.problem_hash)},
                {"seed", seed},
                {"version", kToolVersion}};
}

ProblemSpec load_with_overrides(const CommonOpts& opt) {
    ProblemSpec spec = load_problem(opt.problem_path);
    if (opt.max_refinements >= 0) spec.max_refinements = opt.max_refinements;
    if (opt.reach_step > 0.0) spec.reach.step = opt.reach_step;
    if (opt.beta > 0.0) spec.verify.beta = opt.beta;
    return spec;
}

Controller parse_controller_arg(const ProblemSpec& spec, std::string text) {
    // "(expr1, expr2)" or a single expression for m = 1
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    text = trim(text);
    std::vector<std::string> parts;
    if (!text.empty() && text.front() == '(' && text.back() == ')') {
        std::string body = text.substr(1, text.size() - 2);
        int depth = 0;
        std::string cur;
        for (char ch : body) {
            if (ch == '(') ++depth;
            if (ch == ')') --depth;
            if (ch == ',' && depth == 0) {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        parts.push_back(cur);
    } else {
        parts.push_back(text);
    }
    if (static_cast<int>(parts.size()) != spec.sys.m)
        throw std::invalid_argument("controller needs " + std::to_string(spec.sys.m) +
                                    " components");
    ExprLimits lim;
    lim.check = true;
    lim.n_states = spec.sys.n;
    Controller k;
    for (auto& p : parts) k.kappa.push_back(parse_expression(trim(p), lim));
    k.compile();
    return k;
}

json report_json(const RobustnessReport& rep) {
    json atoms = json::array();
    for (std::size_t i = 0; i < rep.scores.size(); ++i)
        for (std::size_t k = 0; k < rep.scores[i].size(); ++k) {
            const auto& sc = rep.scores[i][k];
            json a{{"conjunct", i},
                   {"position", k},
                   {"grid_index", sc.grid_index},
                   {"p_hat", sc.p_hat}};
            switch (sc.certify_outcome) {
                case AtomOutcome::Holds: a["certify"] = "holds"; break;
                case AtomOutcome::Violated: a["certify"] = "violated"; break;
                case AtomOutcome::Unknown: a["certify"] = "unknown"; break;
            }
            a["certify_gap"] = sc.certify_gap;
            atoms.push_back(std::move(a));
        }
    std::string verdict = rep.verdict == Verdict::Certified
                              ? "certified"
                              : rep.verdict == Verdict::Falsified ? "falsified"
                                                                  : "inconclusive";
    return json{{"p_hat", rep.p_hat},
                {"verdict", verdict},
                {"residual_gap", rep.residual_gap},
                {"atoms", std::move(atoms)}};
}

// Monte-Carlo closed-loop robustness draws
struct McResult {
    double min_robustness;
    int negative;
    std::vector<double> values;
};

McResult monte_carlo(const ProblemSpec& spec, const Controller& kappa, int draws,
                     std::uint64_t seed) {
    Synthesizer synth(spec, seed);
    Rational horizon = synth.formula_rtl().horizon();
    StlParseOptions sopt;
    McResult mc;
    mc.values.resize(draws);
    std::vector<CompiledExpr> ktapes = kappa.tapes;
    parallel_for(draws, [&](int i) {
        std::mt19937_64 rng(mix_seed(seed, 0x3C, i));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::vector<double> x0(spec.sys.n);
        for (int d = 0; d < spec.sys.n; ++d)
            x0[d] = spec.sys.init[d].lo + U(rng) * spec.sys.init[d].width();
        Synthesizer local(spec, seed);  // grammar access for disturbance draws
        auto w = local.random_disturbance(static_cast<std::uint64_t>(i) + 17);
        auto traj = integrate_closed_loop(spec.sys, kappa, x0, w, nullptr, horizon);
        SignalContext ctx;
        ctx.kappa = &ktapes;
        mc.values[i] = stl_robustness(traj, spec.formula, 0, ctx);
    });
    mc.min_robustness = *std::min_element(mc.values.begin(), mc.values.end());
    mc.negative = static_cast<int>(
        std::count_if(mc.values.begin(), mc.values.end(), [](double v) { return v < 0; }));
    return mc;
}

int cmd_transform(const CommonOpts& opt) {
    ProblemSpec spec;
    try {
        spec = load_with_overrides(opt);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    NormalFormRtl rtl;
    try {
        rtl = stl_to_rtl(spec.formula, spec.sys.c);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    std::string dump = stamp_comment(spec, opt.seed) + rtl.str();
    std::cout << dump;
    fs::create_directories(opt.out_dir);
    write_file(fs::path(opt.out_dir) / (spec.name + "_rtl.txt"), dump);
    return kExitOk;
}

int cmd_verify(const CommonOpts& opt, const std::string& controller_text) {
    ProblemSpec spec;
    Controller kappa;
    try {
        spec = load_with_overrides(opt);
        kappa = parse_controller_arg(spec, controller_text);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    fs::create_directories(opt.out_dir);
    try {
        auto rtl = stl_to_rtl(spec.formula, spec.sys.c);
        auto seq = reach_closed_loop(spec.sys, kappa, rtl.horizon(), spec.reach);
        write_file(fs::path(opt.out_dir) / (spec.name + "_reach.csv"),
                   stamp_comment(spec, opt.seed) + reach_csv(seq));
        VerifyConfig vcfg = spec.verify;
        vcfg.seed = opt.seed;
        auto report = verify_sequence(rtl, seq, &kappa, vcfg);

        json out = stamp_json(spec, opt.seed);
        out["controller"] = kappa.str();
        out["report"] = report_json(report);
        if (report.verdict == Verdict::Falsified) {
            auto x0 = extract_counterexample(report, seq);
            out["counterexample_x0"] = x0;
            std::cout << "verdict: falsified\ncounterexample x0 = [";
            for (std::size_t d = 0; d < x0.size(); ++d)
                std::cout << (d ? ", " : "") << x0[d];
            std::cout << "]\n";
        } else {
            std::cout << "verdict: "
                      << (report.verdict == Verdict::Certified ? "certified" : "inconclusive")
                      << " (p_hat = " << report.p_hat
                      << ", residual gap = " << report.residual_gap << ")\n";
        }
        if (opt.smt_export) {
            int idx = 0;
            for (std::size_t i = 0; i < rtl.conjuncts.size(); ++i)
                for (std::size_t k = 0; k < rtl.conjuncts[i].atoms.size(); ++k) {
                    std::string name = std::to_string(i) + "_" +
                                       std::to_string(rtl.conjuncts[i].atoms[k].grid_index) +
                                       "_" + std::to_string(k);
                    write_file(fs::path(opt.out_dir) /
                                   (spec.name + "_atom_" + name + ".smt2"),
                               export_smtlib(rtl.conjuncts[i].atoms[k], seq, &kappa, name));
                    ++idx;
                }
            out["smt_files"] = idx;
        }
        write_file(fs::path(opt.out_dir) / (spec.name + "_report.json"), out.dump(2) + "\n");
        return kExitOk;
    } catch (const ReachError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
}

int cmd_synth(const CommonOpts& opt) {
    ProblemSpec spec;
    try {
        spec = load_with_overrides(opt);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    fs::create_directories(opt.out_dir);
    Synthesizer synth(spec, opt.seed);
    synth.set_progress(&std::cerr);
    SynthesisResult res = synth.synthesize();

    write_file(fs::path(opt.out_dir) / (spec.name + "_synthesis_log.txt"), res.log);
    write_file(fs::path(opt.out_dir) / (spec.name + "_controller.txt"),
               stamp_comment(spec, opt.seed) + res.controller.str() + "\n");

    json out = stamp_json(spec, opt.seed);
    out["verdict"] = res.verdict == SynthesisVerdict::Certified ? "certified"
                     : res.verdict == SynthesisVerdict::CertifiedWithGap ? "certified_with_gap"
                                                                         : "exhausted";
    out["residual_gap"] = res.residual_gap;
    out["refinements"] = res.refinements;
    out["total_kappa_generations"] = res.total_generations;
    out["complexity"] = res.complexity_value;
    out["p_hat"] = res.final_p_hat;
    out["controller"] = res.controller.str();
    if (!res.u_ff.empty()) {
        std::vector<std::string> uff, xref;
        for (const auto& e : res.u_ff) uff.push_back(e.str());
        for (const auto& e : res.x_ref) xref.push_back(e.str());
        out["u_ff"] = uff;
        out["x_ref"] = xref;
    }
    out["timings_seconds"] = json{{"feedforward", res.timings.feedforward},
                                  {"reference", res.timings.reference},
                                  {"gp_kappa", res.timings.gp_kappa},
                                  {"gp_omega", res.timings.gp_omega},
                                  {"reach", res.timings.reach},
                                  {"counterexample", res.timings.counterexample},
                                  {"certification", res.timings.certification}};
    write_file(fs::path(opt.out_dir) / (spec.name + "_result.json"), out.dump(2) + "\n");

    std::cout << "verdict: " << out["verdict"].get<std::string>()
              << " refinements: " << res.refinements << "\ncontroller: "
              << res.controller.str() << "\n";
    return res.verdict == SynthesisVerdict::Exhausted ? kExitExhausted : kExitOk;
}

int cmd_simulate(const CommonOpts& opt, const std::string& controller_text, int draws) {
    ProblemSpec spec;
    Controller kappa;
    try {
        spec = load_with_overrides(opt);
        kappa = parse_controller_arg(spec, controller_text);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    fs::create_directories(opt.out_dir);
    try {
        auto mc = monte_carlo(spec, kappa, draws, opt.seed);
        std::ostringstream hist;
        hist << stamp_comment(spec, opt.seed) << "draw,robustness\n";
        hist.precision(12);
        for (int i = 0; i < draws; ++i) hist << i << "," << mc.values[i] << "\n";
        write_file(fs::path(opt.out_dir) / (spec.name + "_robustness.csv"), hist.str());

        // a few example trajectories for plotting
        Synthesizer synth(spec, opt.seed);
        Rational horizon = synth.formula_rtl().horizon();
        std::ostringstream tcsv;
        tcsv << stamp_comment(spec, opt.seed) << "trajectory,time";
        for (int d = 0; d < spec.sys.n; ++d) tcsv << ",x" << (d + 1);
        tcsv << "\n";
        double half = (spec.sys.c / Rational(2)).to_double();
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int k = 0; k < std::min(10, draws); ++k) {
            std::vector<double> x0(spec.sys.n);
            for (int d = 0; d < spec.sys.n; ++d)
                x0[d] = spec.sys.init[d].lo + U(rng) * spec.sys.init[d].width();
            auto w = synth.random_disturbance(k + 1);
            auto traj = integrate_closed_loop(spec.sys, kappa, x0, w, nullptr, horizon);
            for (std::size_t q = 0; q < traj.entries.size(); ++q) {
                tcsv << k << "," << half * q;
                for (int d = 0; d < spec.sys.n; ++d) tcsv << "," << traj.entries[q][d];
                tcsv << "\n";
            }
        }
        write_file(fs::path(opt.out_dir) / (spec.name + "_trajectories.csv"), tcsv.str());
        std::cout << "draws: " << draws << " min robustness: " << mc.min_robustness
                  << " negative: " << mc.negative << "\n";
        return kExitOk;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-form sampled-data controller synthesis for STL specifications"};
    app.require_subcommand(1);

    CommonOpts opt;
    std::string controller_text;
    int draws = 1000;

    auto add_common = [&](CLI::App* cmd, bool needs_problem = true) {
        if (needs_problem)
            cmd->add_option("problem", opt.problem_path, "problem file")->required();
        cmd->add_option("--seed", opt.seed, "master random seed");
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--workers", opt.workers, "worker threads (default: cores)");
        cmd->add_option("--max-refinements", opt.max_refinements, "override max refinements");
        cmd->add_option("--reach-step", opt.reach_step, "override reachability step");
        cmd->add_option("--beta", opt.beta, "smooth min/max parameter for the optimizer");
        cmd->add_flag("--smt-export", opt.smt_export, "write one SMT-LIB file per atom");
    };

    auto* transform = app.add_subcommand("transform", "print the normal-form RTL formula");
    add_common(transform);
    auto* verify = app.add_subcommand("verify", "reachability + certification of a controller");
    add_common(verify);
    verify->add_option("--controller", controller_text, "controller expression vector")
        ->required();
    auto* synth = app.add_subcommand("synth", "run the full synthesis loop");
    add_common(synth);
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo closed-loop robustness");
    add_common(simulate);
    simulate->add_option("--controller", controller_text, "controller expression vector")
        ->required();
    simulate->add_option("--draws", draws, "number of Monte-Carlo draws");

    CLI11_PARSE(app, argc, argv);
    if (opt.workers > 0) set_default_workers(opt.workers);

    try {
        if (app.got_subcommand(transform)) return cmd_transform(opt);
        if (app.got_subcommand(verify)) return cmd_verify(opt, controller_text);
        if (app.got_subcommand(synth)) return cmd_synth(opt);
        if (app.got_subcommand(simulate)) return cmd_simulate(opt, controller_text, draws);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
