#include "stlsynth/gp.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace stlsynth {

int Grammar::nt_id(const std::string& name) const {
    for (std::size_t i = 0; i < nt_names.size(); ++i)
        if (nt_names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown nonterminal: " + name);
}

bool Grammar::has_nt(const std::string& name) const {
    return std::find(nt_names.begin(), nt_names.end(), name) != nt_names.end();
}

namespace {

void collect_nt_refs(const ExprPtr& e, std::vector<int>& out) {
    if (!e) return;
    if (e->op == ExprOp::NtRef) out.push_back(e->index);
    collect_nt_refs(e->a, out);
    collect_nt_refs(e->b, out);
}

int count_rand(const ExprPtr& e) {
    if (!e) return 0;
    return (e->op == ExprOp::RandConst ? 1 : 0) + count_rand(e->a) + count_rand(e->b);
}

}  // namespace

void Grammar::finalize() {
    const int INF = 1 << 20;
    int n = static_cast<int>(nt_names.size());
    nt_min_depth.assign(n, INF);
    prod_min_depth.assign(n, {});
    for (int i = 0; i < n; ++i) prod_min_depth[i].assign(productions[i].size(), INF);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < productions[i].size(); ++p) {
                std::vector<int> refs;
                collect_nt_refs(productions[i][p].root(), refs);
                int depth = 1;
                for (int r : refs) depth = std::max(depth, 1 + nt_min_depth[r]);
                depth = std::min(depth, INF);
                if (depth < prod_min_depth[i][p]) { prod_min_depth[i][p] = depth; changed = true; }
            }
            int best = INF;
            for (int d : prod_min_depth[i]) best = std::min(best, d);
            if (best < nt_min_depth[i]) { nt_min_depth[i] = best; changed = true; }
        }
    }
    // every nonterminal reachable from a start tree must terminate
    std::vector<int> pending;
    for (const auto& [target, trees] : start_trees)
        for (const auto& t : trees) collect_nt_refs(t.root(), pending);
    std::vector<bool> seen(n, false);
    while (!pending.empty()) {
        int r = pending.back();
        pending.pop_back();
        if (seen[r]) continue;
        seen[r] = true;
        if (nt_min_depth[r] >= INF)
            throw std::invalid_argument("nonterminal '" + nt_names[r] +
                                        "' has no terminating derivation");
        if (productions[r].empty())
            throw std::invalid_argument("nonterminal '" + nt_names[r] + "' has no production");
        for (const auto& prod : productions[r]) collect_nt_refs(prod.root(), pending);
    }
}

namespace {

// split on a delimiter at paren depth zero
std::vector<std::string> split_top(const std::string& s, char delim) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char ch : s) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (ch == delim && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

Grammar parse_grammar(const std::string& text, const ExprLimits& limits,
                      const std::map<std::string, ScalarExpression>& terminals) {
    Grammar g;
    ExprLimits lim = limits;
    lim.allow_rand = true;

    struct PendingRule { std::string name; std::string rhs; };
    std::vector<PendingRule> rules;
    struct PendingStart { std::string target; std::string rhs; };
    std::vector<PendingStart> starts;

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("start ", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("start tree needs '=': " + line);
            starts.push_back({trim(line.substr(6, eq - 6)), trim(line.substr(eq + 1))});
            continue;
        }
        auto sep = line.find("::=");
        if (sep == std::string::npos)
            throw std::invalid_argument("grammar rule needs '::=': " + line);
        rules.push_back({trim(line.substr(0, sep)), trim(line.substr(sep + 3))});
    }

    for (const auto& r : rules) {
        if (std::find(g.nt_names.begin(), g.nt_names.end(), r.name) != g.nt_names.end())
            throw std::invalid_argument("duplicate nonterminal: " + r.name);
        g.nt_names.push_back(r.name);
    }
    g.productions.resize(g.nt_names.size());

    IdentResolver resolver = [&](const std::string& id, std::size_t) -> ScalarExpression {
        for (std::size_t i = 0; i < g.nt_names.size(); ++i)
            if (g.nt_names[i] == id) return ScalarExpression::nt_ref(static_cast<int>(i));
        auto it = terminals.find(id);
        if (it != terminals.end()) return it->second;
        return ScalarExpression();  // let the caller raise unknown-identifier
    };

    for (std::size_t ri = 0; ri < rules.size(); ++ri) {
        for (const auto& alt : split_top(rules[ri].rhs, '|')) {
            std::string a = trim(alt);
            if (a.empty()) throw std::invalid_argument("empty production for " + rules[ri].name);
            g.productions[ri].push_back(parse_expression(a, lim, resolver));
        }
    }

    for (const auto& st : starts) {
        std::string rhs = st.rhs;
        std::vector<std::string> comps;
        if (!rhs.empty() && rhs.front() == '(' && rhs.back() == ')') {
            comps = split_top(rhs.substr(1, rhs.size() - 2), ',');
        } else {
            comps = {rhs};
        }
        std::vector<ScalarExpression> trees;
        for (const auto& comp : comps) trees.push_back(parse_expression(trim(comp), lim, resolver));
        g.start_trees[st.target] = std::move(trees);
    }

    g.finalize();
    return g;
}

// ── genotype structure helpers ──────────────────────────────────────────────

int complexity(const Genotype& g) {
    int count = 0;
    std::function<void(const DerivationNode&)> rec = [&](const DerivationNode& n) {
        ++count;
        for (const auto& ch : n.children) rec(ch);
    };
    for (const auto& r : g.roots) rec(r);
    return count;
}

std::vector<double> get_constants(const Genotype& g) {
    std::vector<double> out = g.root_constants;
    std::function<void(const DerivationNode&)> rec = [&](const DerivationNode& n) {
        out.insert(out.end(), n.constants.begin(), n.constants.end());
        for (const auto& ch : n.children) rec(ch);
    };
    for (const auto& r : g.roots) rec(r);
    return out;
}

void set_constants(Genotype& g, const std::vector<double>& values) {
    std::size_t idx = 0;
    auto take = [&]() {
        if (idx >= values.size()) throw std::invalid_argument("constant vector too short");
        return values[idx++];
    };
    for (auto& v : g.root_constants) v = take();
    std::function<void(DerivationNode&)> rec = [&](DerivationNode& n) {
        for (auto& v : n.constants) v = take();
        for (auto& ch : n.children) rec(ch);
    };
    for (auto& r : g.roots) rec(r);
    if (idx != values.size()) throw std::invalid_argument("constant vector too long");
}

}  // namespace stlsynth
