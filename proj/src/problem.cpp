#include "stlsynth/problem.hpp"

#include <fstream>
#include <sstream>

#include "stlsynth/rtl.hpp"

namespace stlsynth {

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

struct ProblemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "[-0.5,0.5] [1,2]" -> box
Box parse_box(const std::string& text) {
    Box out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find('[', pos);
        if (open == std::string::npos) break;
        auto close = text.find(']', open);
        if (close == std::string::npos) throw ProblemError("unterminated interval: " + text);
        std::string body = text.substr(open + 1, close - open - 1);
        auto comma = body.find(',');
        if (comma == std::string::npos) throw ProblemError("interval needs a comma: " + body);
        double lo = std::stod(trim(body.substr(0, comma)));
        double hi = std::stod(trim(body.substr(comma + 1)));
        if (lo > hi) throw ProblemError("interval bounds out of order: " + body);
        out.emplace_back(lo, hi);
        pos = close + 1;
    }
    return out;
}

std::string box_str(const Box& b) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (i) os << " ";
        os << "[" << b[i].lo << "," << b[i].hi << "]";
    }
    return os.str();
}

// whole-word textual macro substitution, longest names first
std::string substitute_macros(std::string text,
                              const std::vector<std::pair<std::string, std::string>>& macros) {
    bool changed = true;
    int guard = 0;
    while (changed && guard++ < 16) {
        changed = false;
        for (const auto& [name, body] : macros) {
            std::size_t pos = 0;
            while ((pos = text.find(name, pos)) != std::string::npos) {
                bool left_ok = pos == 0 || !(std::isalnum(static_cast<unsigned char>(
                                                 text[pos - 1])) ||
                                             text[pos - 1] == '_');
                std::size_t end = pos + name.size();
                bool right_ok = end >= text.size() ||
                                !(std::isalnum(static_cast<unsigned char>(text[end])) ||
                                  text[end] == '_');
                if (left_ok && right_ok) {
                    text = text.substr(0, pos) + "(" + body + ")" + text.substr(end);
                    pos += body.size() + 2;
                    changed = true;
                } else {
                    pos = end;
                }
            }
        }
    }
    return text;
}

}  // namespace

Grammar ProblemSpec::grammar(const std::map<std::string, ScalarExpression>& terminals) const {
    ExprLimits lim;
    lim.check = true;
    lim.n_states = sys.n;
    lim.n_inputs = sys.m;
    lim.n_disturbances = sys.l;
    return parse_grammar(grammar_text, lim, terminals);
}

Rational ProblemSpec::horizon() const {
    auto rtl = stl_to_rtl(formula, sys.c);
    return rtl.horizon();
}

ProblemSpec parse_problem(const std::string& text) {
    ProblemSpec spec;
    spec.problem_hash = fnv1a(text);

    std::string section;
    std::vector<std::pair<std::string, std::string>> macros;
    std::vector<std::string> f_lines(64);
    std::ostringstream grammar_lines;

    std::map<std::string, std::string> kv;  // flattened "<section>.<key>" -> value

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        if (section == "grammar") {
            grammar_lines << line << "\n";
            continue;
        }
        auto eq = line.find('=');
        // the grammar section was handled; everywhere else lines are key = value
        if (eq == std::string::npos) {
            if (section.empty()) {
                // header: "version 1" / "name spacecraft"
                auto sp = line.find(' ');
                if (sp == std::string::npos) throw ProblemError("bad header line: " + line);
                std::string k = trim(line.substr(0, sp)), v = trim(line.substr(sp + 1));
                if (k == "version") spec.version = std::stoi(v);
                else if (k == "name") spec.name = v;
                else throw ProblemError("unknown header key: " + k);
                continue;
            }
            throw ProblemError("expected key = value: " + line);
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section == "formula" && key != "stl" && key != "input_box") {
            macros.emplace_back(key, value);
            continue;
        }
        kv[section + "." + key] = value;
    }

    auto get = [&](const std::string& k, const std::string& fallback = "",
                   bool required = false) -> std::string {
        auto it = kv.find(k);
        if (it != kv.end()) return it->second;
        if (required) throw ProblemError("missing required key: " + k);
        return fallback;
    };
    auto get_int = [&](const std::string& k, int fb) {
        auto v = get(k);
        return v.empty() ? fb : std::stoi(v);
    };
    auto get_double = [&](const std::string& k, double fb) {
        auto v = get(k);
        return v.empty() ? fb : std::stod(v);
    };

    // [system]
    spec.sys.n = get_int("system.states", 0);
    spec.sys.m = get_int("system.inputs", 0);
    spec.sys.l = get_int("system.disturbances", 0);
    if (spec.sys.n <= 0) throw ProblemError("system.states must be positive");
    ExprLimits lim;
    lim.check = true;
    lim.n_states = spec.sys.n;
    lim.n_inputs = spec.sys.m;
    lim.n_disturbances = spec.sys.l;
    for (int i = 1; i <= spec.sys.n; ++i) {
        std::string fi = get("system.f" + std::to_string(i), "", true);
        spec.sys.f.push_back(parse_expression(fi, lim));
    }
    spec.sys.init = parse_box(get("system.init", "", true));
    std::string omega_text = get("system.omega");
    spec.sys.omega = omega_text.empty() ? Box{} : parse_box(omega_text);
    spec.sys.eta = Rational::parse(get("system.eta", "", true));
    spec.sys.c = Rational::parse(get("system.c", "", true));
    spec.sys.validate();

    // [formula]
    std::string ib = get("formula.input_box");
    if (!ib.empty()) {
        spec.input_box = parse_box(ib);
        if (static_cast<int>(spec.input_box.size()) != spec.sys.m)
            throw ProblemError("input_box dimension must match the input count");
        std::ostringstream in_u;
        for (int i = 0; i < spec.sys.m; ++i) {
            if (i) in_u << " & ";
            in_u << "(u" << (i + 1) << " >= " << spec.input_box[i].lo << ") & (u" << (i + 1)
                 << " <= " << spec.input_box[i].hi << ")";
        }
        macros.emplace_back("in_U", in_u.str());
    }
    spec.stl_text = get("formula.stl", "", true);
    spec.stl_expanded = substitute_macros(spec.stl_text, macros);
    StlParseOptions sopt;
    sopt.limits = lim;
    sopt.have_c = true;
    sopt.c_value = spec.sys.c;
    spec.formula = parse_stl(spec.stl_expanded, sopt);
    if (!check_divisible(spec.formula, spec.sys.c))
        throw ProblemError("formula is not c-divisible for c = " + spec.sys.c.str());

    // [grammar]
    spec.grammar_text = grammar_lines.str();

    // [gp]
    auto fill_gp = [&](GpConfig& cfg, const std::string& tag, int ind_fb, int gen_fb,
                       int es_fb) {
        cfg.population = get_int("gp.individuals_" + tag, ind_fb);
        cfg.generations = get_int("gp.generations_" + tag, gen_fb);
        cfg.es_generations = get_int("gp.es_" + tag, es_fb);
        cfg.crossover_rate = get_double("gp.crossover", 0.2);
        cfg.mutation_rate = get_double("gp.mutation", 0.8);
        cfg.tournament = get_int("gp.tournament", 3);
        cfg.max_depth = get_int("gp.max_depth", 12);
        cfg.pareto_complexity = get("gp.pareto_complexity") == "on";
    };
    fill_gp(spec.gp_kappa, "kappa", 14, 5, 10);
    fill_gp(spec.gp_omega, "omega", 14, 3, 3);
    fill_gp(spec.gp_uff, "uff", 14, 30, 20);
    fill_gp(spec.gp_xref, "xref", 14, 10, 10);

    // [cegis]
    spec.ns = get_int("cegis.ns", 1);
    if (spec.ns < 1) throw ProblemError("cegis.ns must be >= 1");
    spec.max_refinements = get_int("cegis.max_refinements", 50);
    spec.a1a_cap = get_int("cegis.a1a_cap", 100);
    std::string mode = get("cegis.mode", "free");
    if (mode == "free") spec.mode = ProblemSpec::Mode::Free;
    else if (mode == "reference_tracking") spec.mode = ProblemSpec::Mode::ReferenceTracking;
    else throw ProblemError("unknown mode: " + mode);
    spec.error_model = get("cegis.error_model", "on") != "off";
    spec.delta_max = get_double("cegis.delta_max", 0.2);

    // [reach]
    spec.reach.step = get_double("reach.step", 0.01);
    spec.reach.taylor_order = get_int("reach.taylor_order", 4);
    spec.reach.poly_order = get_int("reach.poly_order", 4);
    spec.reach.max_gens_factor = get_int("reach.max_gens_factor", 20);

    // [verify]
    spec.verify.swarm = get_int("verify.swarm", 40);
    spec.verify.iterations = get_int("verify.iterations", 60);
    spec.verify.restarts = get_int("verify.restarts", 4);
    spec.verify.beta = get_double("verify.beta", 0.0);
    spec.verify.bb_depth = get_int("verify.bb_depth", 48);
    spec.verify.bb_max_nodes = get_int("verify.bb_max_nodes", 40000);
    spec.verify.bb_tol = get_double("verify.bb_tol", 0.001);
    spec.verify.gap_accept = get_double("verify.gap_accept", 0.05);

    // grammar must parse (reference-tracking targets bind terminals later)
    if (spec.mode == ProblemSpec::Mode::Free) {
        auto g = spec.grammar();
        if (g.start_trees.find("kappa") == g.start_trees.end())
            throw ProblemError("grammar must define `start kappa`");
    } else {
        std::map<std::string, ScalarExpression> placeholders;
        for (int i = 1; i <= spec.sys.m; ++i)
            placeholders["uff" + std::to_string(i)] = ScalarExpression::constant(0.0);
        for (int i = 1; i <= spec.sys.n; ++i)
            placeholders["xref" + std::to_string(i)] = ScalarExpression::constant(0.0);
        auto g = spec.grammar(placeholders);
        for (const char* t : {"kappa", "uff", "xref"})
            if (g.start_trees.find(t) == g.start_trees.end())
                throw ProblemError(std::string("reference-tracking grammar must define `start ") +
                                   t + "`");
    }
    return spec;
}

ProblemSpec load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open problem file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

std::string print_problem(const ProblemSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << "version " << spec.version << "\n";
    os << "name " << spec.name << "\n\n";
    os << "[system]\n";
    os << "states = " << spec.sys.n << "\n";
    os << "inputs = " << spec.sys.m << "\n";
    os << "disturbances = " << spec.sys.l << "\n";
    for (int i = 0; i < spec.sys.n; ++i)
        os << "f" << (i + 1) << " = " << spec.sys.f[i].str() << "\n";
    os << "init = " << box_str(spec.sys.init) << "\n";
    if (!spec.sys.omega.empty()) os << "omega = " << box_str(spec.sys.omega) << "\n";
    os << "eta = " << spec.sys.eta.str() << "\n";
    os << "c = " << spec.sys.c.str() << "\n\n";
    os << "[formula]\n";
    if (!spec.input_box.empty()) os << "input_box = " << box_str(spec.input_box) << "\n";
    os << "stl = " << spec.stl_expanded << "\n\n";
    os << "[grammar]\n" << spec.grammar_text << "\n";
    os << "[gp]\n";
    auto gp = [&](const GpConfig& c, const char* tag) {
        os << "individuals_" << tag << " = " << c.population << "\n";
        os << "generations_" << tag << " = " << c.generations << "\n";
        os << "es_" << tag << " = " << c.es_generations << "\n";
    };
    gp(spec.gp_kappa, "kappa");
    gp(spec.gp_omega, "omega");
    gp(spec.gp_uff, "uff");
    gp(spec.gp_xref, "xref");
    os << "crossover = " << spec.gp_kappa.crossover_rate << "\n";
    os << "mutation = " << spec.gp_kappa.mutation_rate << "\n";
    os << "tournament = " << spec.gp_kappa.tournament << "\n";
    os << "max_depth = " << spec.gp_kappa.max_depth << "\n\n";
    os << "[cegis]\n";
    os << "ns = " << spec.ns << "\n";
    os << "mode = "
       << (spec.mode == ProblemSpec::Mode::Free ? "free" : "reference_tracking") << "\n";
    os << "max_refinements = " << spec.max_refinements << "\n";
    os << "a1a_cap = " << spec.a1a_cap << "\n";
    os << "error_model = " << (spec.error_model ? "on" : "off") << "\n";
    os << "delta_max = " << spec.delta_max << "\n\n";
    os << "[reach]\n";
    os << "step = " << spec.reach.step << "\n";
    os << "taylor_order = " << spec.reach.taylor_order << "\n";
    os << "poly_order = " << spec.reach.poly_order << "\n";
    os << "max_gens_factor = " << spec.reach.max_gens_factor << "\n\n";
    os << "[verify]\n";
    os << "swarm = " << spec.verify.swarm << "\n";
    os << "iterations = " << spec.verify.iterations << "\n";
    os << "restarts = " << spec.verify.restarts << "\n";
    os << "bb_depth = " << spec.verify.bb_depth << "\n";
    os << "bb_max_nodes = " << spec.verify.bb_max_nodes << "\n";
    os << "bb_tol = " << spec.verify.bb_tol << "\n";
    os << "gap_accept = " << spec.verify.gap_accept << "\n";
    return os.str();
}

}  // namespace stlsynth
