#include "stlsynth/gp.hpp"

#include <stdexcept>

namespace stlsynth {

namespace {

struct TemplateSlots {
    std::vector<int> nts;   // nonterminal ids, DFS order
    int rand_count = 0;
};

TemplateSlots template_slots(const ExprPtr& e) {
    TemplateSlots s;
    std::function<void(const ExprPtr&)> rec = [&](const ExprPtr& n) {
        if (!n) return;
        if (n->op == ExprOp::NtRef) s.nts.push_back(n->index);
        if (n->op == ExprOp::RandConst) ++s.rand_count;
        rec(n->a);
        rec(n->b);
    };
    rec(e);
    return s;
}

}  // namespace

// ── random derivation ───────────────────────────────────────────────────────

namespace {

DerivationNode random_derivation(const Grammar& g, int nt, int budget, std::mt19937_64& rng) {
    if (budget < g.nt_min_depth[nt])
        throw std::runtime_error("grammar cannot terminate within the depth budget");
    // choose uniformly among productions that can still terminate
    std::vector<int> options;
    for (std::size_t p = 0; p < g.productions[nt].size(); ++p)
        if (g.prod_min_depth[nt][p] <= budget) options.push_back(static_cast<int>(p));
    int choice = options[rng() % options.size()];

    DerivationNode node;
    node.nt = nt;
    node.production = choice;
    TemplateSlots slots = template_slots(g.productions[nt][choice].root());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::function<void(const ExprPtr&)> draw = [&](const ExprPtr& e) {
        if (!e) return;
        if (e->op == ExprOp::RandConst)
            node.constants.push_back(e->sat_lo + (e->sat_hi - e->sat_lo) * unit(rng));
        draw(e->a);
        draw(e->b);
    };
    draw(g.productions[nt][choice].root());
    for (int child_nt : slots.nts)
        node.children.push_back(random_derivation(g, child_nt, budget - 1, rng));
    return node;
}

}  // namespace

Individual random_individual(const Grammar& g, const std::string& target, int max_depth,
                             std::mt19937_64& rng) {
    auto it = g.start_trees.find(target);
    if (it == g.start_trees.end())
        throw std::invalid_argument("grammar has no starting tree for target: " + target);
    Individual ind;
    ind.geno.target = target;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& tree : it->second) {
        TemplateSlots slots = template_slots(tree.root());
        std::function<void(const ExprPtr&)> draw = [&](const ExprPtr& e) {
            if (!e) return;
            if (e->op == ExprOp::RandConst)
                ind.geno.root_constants.push_back(e->sat_lo +
                                                  (e->sat_hi - e->sat_lo) * unit(rng));
            draw(e->a);
            draw(e->b);
        };
        draw(tree.root());
        for (int nt : slots.nts)
            ind.geno.roots.push_back(random_derivation(g, nt, max_depth, rng));
    }
    return ind;
}

// ── phenotype expansion ─────────────────────────────────────────────────────

namespace {

ScalarExpression expand_template(const ExprPtr& tmpl,
                                 const std::function<ScalarExpression()>& next_nt,
                                 const std::function<double()>& next_const) {
    using E = ScalarExpression;
    if (!tmpl) return E();
    switch (tmpl->op) {
        case ExprOp::NtRef: return next_nt();
        case ExprOp::RandConst: return E::constant(next_const());
        case ExprOp::Const: case ExprOp::Time: case ExprOp::State:
        case ExprOp::Input: case ExprOp::Disturb:
            return E(tmpl);
        case ExprOp::Neg: return E::neg(expand_template(tmpl->a, next_nt, next_const));
        case ExprOp::Sin: return E::sin(expand_template(tmpl->a, next_nt, next_const));
        case ExprOp::Cos: return E::cos(expand_template(tmpl->a, next_nt, next_const));
        case ExprOp::Tanh: return E::tanh(expand_template(tmpl->a, next_nt, next_const));
        case ExprOp::Sat:
            return E::saturate(expand_template(tmpl->a, next_nt, next_const), tmpl->sat_lo,
                               tmpl->sat_hi);
        case ExprOp::Recip: return E::recip(expand_template(tmpl->a, next_nt, next_const));
        case ExprOp::Add:
            return E::add(expand_template(tmpl->a, next_nt, next_const),
                          expand_template(tmpl->b, next_nt, next_const));
        case ExprOp::Mul:
            return E::mul(expand_template(tmpl->a, next_nt, next_const),
                          expand_template(tmpl->b, next_nt, next_const));
        case ExprOp::Pow:
            return E::pow(expand_template(tmpl->a, next_nt, next_const), tmpl->exponent);
    }
    return E(tmpl);
}

ScalarExpression expand_node(const Grammar& g, const DerivationNode& node) {
    const ScalarExpression& tmpl = g.productions[node.nt][node.production];
    std::size_t child_i = 0, const_i = 0;
    return expand_template(
        tmpl.root(),
        [&]() { return expand_node(g, node.children[child_i++]); },
        [&]() { return node.constants[const_i++]; });
}

}  // namespace

std::vector<ScalarExpression> phenotype(const Grammar& g, const Genotype& geno) {
    auto it = g.start_trees.find(geno.target);
    if (it == g.start_trees.end())
        throw std::invalid_argument("grammar has no starting tree for target: " + geno.target);
    std::vector<ScalarExpression> out;
    std::size_t root_i = 0, const_i = 0;
    for (const auto& tree : it->second) {
        out.push_back(expand_template(
            tree.root(),
            [&]() { return expand_node(g, geno.roots[root_i++]); },
            [&]() { return geno.root_constants[const_i++]; }));
    }
    return out;
}

// ── validation ──────────────────────────────────────────────────────────────

namespace {

bool valid_node(const Grammar& g, const DerivationNode& n, int budget) {
    if (budget <= 0) return false;
    if (n.nt < 0 || n.nt >= static_cast<int>(g.nt_names.size())) return false;
    if (n.production < 0 || n.production >= static_cast<int>(g.productions[n.nt].size()))
        return false;
    TemplateSlots slots = template_slots(g.productions[n.nt][n.production].root());
    if (slots.nts.size() != n.children.size()) return false;
    if (slots.rand_count != static_cast<int>(n.constants.size())) return false;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (n.children[i].nt != slots.nts[i]) return false;
        if (!valid_node(g, n.children[i], budget - 1)) return false;
    }
    return true;
}

}  // namespace

bool valid_derivation(const Grammar& g, const Genotype& geno, int max_depth) {
    auto it = g.start_trees.find(geno.target);
    if (it == g.start_trees.end()) return false;
    std::vector<int> expected;
    int expected_consts = 0;
    for (const auto& tree : it->second) {
        TemplateSlots s = template_slots(tree.root());
        expected.insert(expected.end(), s.nts.begin(), s.nts.end());
        expected_consts += s.rand_count;
    }
    if (expected.size() != geno.roots.size()) return false;
    if (expected_consts != static_cast<int>(geno.root_constants.size())) return false;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (geno.roots[i].nt != expected[i]) return false;
        if (!valid_node(g, geno.roots[i], max_depth)) return false;
    }
    return true;
}

// ── crossover / mutate ──────────────────────────────────────────────────────

namespace {

int node_depth(const DerivationNode& n) {
    int d = 1;
    for (const auto& ch : n.children) d = std::max(d, 1 + node_depth(ch));
    return d;
}

struct NodeRef {
    DerivationNode* node;
    int depth;  // depth of this node within its root (1-based)
};

void collect_nodes(DerivationNode& n, int depth, std::vector<NodeRef>& out) {
    out.push_back({&n, depth});
    for (auto& ch : n.children) collect_nodes(ch, depth + 1, out);
}

std::vector<NodeRef> all_nodes(Genotype& g) {
    std::vector<NodeRef> out;
    for (auto& r : g.roots) collect_nodes(r, 1, out);
    return out;
}

}  // namespace

std::pair<Individual, Individual> crossover(const Grammar& g, const Individual& a,
                                            const Individual& b, int max_depth,
                                            std::mt19937_64& rng) {
    Individual ca = a, cb = b;
    ca.evaluated = cb.evaluated = false;
    auto nodes_a = all_nodes(ca.geno);
    auto nodes_b = all_nodes(cb.geno);

    // nonterminals present in both
    std::vector<int> common;
    for (const auto& ra : nodes_a) {
        bool in_b = false;
        for (const auto& rb : nodes_b)
            if (rb.node->nt == ra.node->nt) { in_b = true; break; }
        if (in_b && std::find(common.begin(), common.end(), ra.node->nt) == common.end())
            common.push_back(ra.node->nt);
    }
    if (common.empty()) return {a, b};

    int nt = common[rng() % common.size()];
    std::vector<NodeRef> ca_nodes, cb_nodes;
    for (const auto& r : nodes_a)
        if (r.node->nt == nt) ca_nodes.push_back(r);
    for (const auto& r : nodes_b)
        if (r.node->nt == nt) cb_nodes.push_back(r);
    NodeRef na = ca_nodes[rng() % ca_nodes.size()];
    NodeRef nb = cb_nodes[rng() % cb_nodes.size()];

    // depth budget must hold on both sides after the swap
    if (na.depth - 1 + node_depth(*nb.node) > max_depth ||
        nb.depth - 1 + node_depth(*na.node) > max_depth)
        return {a, b};

    std::swap(*na.node, *nb.node);
    return {ca, cb};
}

Individual mutate(const Grammar& g, const Individual& a, int max_depth, std::mt19937_64& rng) {
    Individual out = a;
    out.evaluated = false;
    auto nodes = all_nodes(out.geno);
    if (nodes.empty()) return out;
    NodeRef pick = nodes[rng() % nodes.size()];
    int budget = max_depth - pick.depth + 1;
    *pick.node = [&] {
        // re-derive the selected nonterminal within the remaining budget
        if (budget < g.nt_min_depth[pick.node->nt]) budget = g.nt_min_depth[pick.node->nt];
        std::function<DerivationNode(int, int)> rederive = [&](int nt, int bud) {
            std::vector<int> options;
            for (std::size_t p = 0; p < g.productions[nt].size(); ++p)
                if (g.prod_min_depth[nt][p] <= bud) options.push_back(static_cast<int>(p));
            DerivationNode node;
            node.nt = nt;
            node.production = options[rng() % options.size()];
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            const ExprPtr& tmpl = g.productions[nt][node.production].root();
            std::function<void(const ExprPtr&)> draw = [&](const ExprPtr& e) {
                if (!e) return;
                if (e->op == ExprOp::RandConst)
                    node.constants.push_back(e->sat_lo + (e->sat_hi - e->sat_lo) * unit(rng));
                draw(e->a);
                draw(e->b);
            };
            draw(tmpl);
            TemplateSlots slots = template_slots(tmpl);
            for (int child : slots.nts) node.children.push_back(rederive(child, bud - 1));
            return node;
        };
        return rederive(pick.node->nt, budget);
    }();
    return out;
}

}  // namespace stlsynth
