#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stlsynth/expr.hpp"

namespace stlsynth {

// ── Grammar ─────────────────────────────────────────────────────────────────
// (N, S, P): nonterminals, starting trees (partial expression trees whose
// leaves may be nonterminal references or rand(lo,hi) constant placeholders)
// and production rules mapping each nonterminal to alternative partial trees.

struct Grammar {
    std::vector<std::string> nt_names;
    std::vector<std::vector<ScalarExpression>> productions;  // per nonterminal
    std::map<std::string, std::vector<ScalarExpression>> start_trees;  // per target

    std::vector<int> nt_min_depth;                    // derivation depth to terminate
    std::vector<std::vector<int>> prod_min_depth;

    int nt_id(const std::string& name) const;
    bool has_nt(const std::string& name) const;
    // computes min depths; throws if a reachable nonterminal cannot terminate
    void finalize();
};

// Parses a grammar section: one rule per line "name ::= alt | alt | ...",
// starting trees "start <target> = (tmpl, tmpl, ...)". Identifiers resolve to
// nonterminals, bound terminals (uff1, xref1, ...) or the usual variables.
Grammar parse_grammar(const std::string& text, const ExprLimits& limits,
                      const std::map<std::string, ScalarExpression>& terminals = {});

// ── Genotype ────────────────────────────────────────────────────────────────

struct DerivationNode {
    int nt = 0;
    int production = 0;
    std::vector<DerivationNode> children;   // one per nonterminal leaf, DFS order
    std::vector<double> constants;          // one per rand leaf, DFS order
};

struct Genotype {
    std::string target;
    std::vector<DerivationNode> roots;      // one per nonterminal leaf of the start trees
    std::vector<double> root_constants;     // one per rand leaf of the start trees
};

struct Individual {
    Genotype geno;
    double fitness = -std::numeric_limits<double>::infinity();
    bool evaluated = false;
    int rank = 0;  // pareto rank when complexity pressure is on
};

// number of nonterminal-labeled nodes in the genotype
int complexity(const Genotype& g);

// read the phenotype: one expression per start-tree component
std::vector<ScalarExpression> phenotype(const Grammar& g, const Genotype& geno);

// structural re-derivation check
bool valid_derivation(const Grammar& g, const Genotype& geno, int max_depth);

Individual random_individual(const Grammar& g, const std::string& target, int max_depth,
                             std::mt19937_64& rng);
std::pair<Individual, Individual> crossover(const Grammar& g, const Individual& a,
                                            const Individual& b, int max_depth,
                                            std::mt19937_64& rng);
Individual mutate(const Grammar& g, const Individual& a, int max_depth, std::mt19937_64& rng);

// constant-vector access for the evolution-strategy refinement
std::vector<double> get_constants(const Genotype& g);
void set_constants(Genotype& g, const std::vector<double>& values);

// ── Engine ──────────────────────────────────────────────────────────────────

struct GpConfig {
    int population = 14;
    int tournament = 3;
    double crossover_rate = 0.2;
    double mutation_rate = 0.8;
    int generations = 5;
    int es_generations = 10;
    int max_depth = 12;
    std::uint64_t seed = 1;
    bool pareto_complexity = false;

    void validate() const;
};

using FitnessFn = std::function<double(const Individual&)>;

struct Population {
    std::vector<Individual> members;
    Individual best;  // best-ever under plain fitness (elitism carrier)
    bool has_best = false;
};

Population init_population(const Grammar& g, const std::string& target, const GpConfig& cfg,
                           std::mt19937_64& rng);

// runs cfg.generations cycles in place; returns the best-ever individual
Individual evolve_population(const Grammar& g, Population& pop, const FitnessFn& fitness,
                             const GpConfig& cfg, std::mt19937_64& rng);

// convenience wrapper: fresh population, fresh rng from cfg.seed
Individual evolve(const Grammar& g, const std::string& target, const FitnessFn& fitness,
                  const GpConfig& cfg);

const Individual& tournament_select(const std::vector<Individual>& pop, int k,
                                    std::mt19937_64& rng, bool use_rank = false);

// diagonal (separable) covariance evolution strategy over the constant
// leaves; elitist, so the returned fitness never drops below the input's
Individual es_refine(const Grammar& g, const Individual& ind, const FitnessFn& fitness,
                     int generations, std::mt19937_64& rng);

// non-dominated sorting; both objectives maximized; rank 0 = front
std::vector<int> pareto_rank(const std::vector<std::pair<double, double>>& objectives);

// deterministic stream split for parallel per-individual randomness
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1) + 0xbf58476d1ce4e5b9ULL * (c + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace stlsynth
