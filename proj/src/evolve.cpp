#include <algorithm>
#include <stdexcept>

#include "stlsynth/gp.hpp"
#include "stlsynth/threadpool.hpp"

namespace stlsynth {

void GpConfig::validate() const {
    if (population < 1 || tournament < 1) throw std::invalid_argument("sizes must be >= 1");
    if (crossover_rate < 0 || crossover_rate > 1 || mutation_rate < 0 || mutation_rate > 1 ||
        crossover_rate + mutation_rate > 1.0 + 1e-12)
        throw std::invalid_argument("operator rates must lie in [0,1] and sum to at most 1");
    if (max_depth < 1) throw std::invalid_argument("max depth must be >= 1");
}

const Individual& tournament_select(const std::vector<Individual>& pop, int k,
                                    std::mt19937_64& rng, bool use_rank) {
    // uniform k-sample with replacement; ties keep the first-encountered max
    const Individual* best = nullptr;
    for (int i = 0; i < k; ++i) {
        const Individual& cand = pop[rng() % pop.size()];
        if (!best) { best = &cand; continue; }
        bool better;
        if (use_rank)
            better = cand.rank < best->rank ||
                     (cand.rank == best->rank && cand.fitness > best->fitness);
        else
            better = cand.fitness > best->fitness;
        if (better) best = &cand;
    }
    return *best;
}

Population init_population(const Grammar& g, const std::string& target, const GpConfig& cfg,
                           std::mt19937_64& rng) {
    cfg.validate();
    Population pop;
    pop.members.reserve(cfg.population);
    for (int i = 0; i < cfg.population; ++i)
        pop.members.push_back(random_individual(g, target, cfg.max_depth, rng));
    return pop;
}

namespace {

void evaluate_all(std::vector<Individual>& members, const FitnessFn& fitness) {
    std::vector<int> todo;
    for (std::size_t i = 0; i < members.size(); ++i)
        if (!members[i].evaluated) todo.push_back(static_cast<int>(i));
    parallel_for(static_cast<int>(todo.size()), [&](int k) {
        members[todo[k]].fitness = fitness(members[todo[k]]);
        members[todo[k]].evaluated = true;
    });
}

void assign_ranks(std::vector<Individual>& members) {
    std::vector<std::pair<double, double>> obj;
    obj.reserve(members.size());
    for (const auto& m : members)
        obj.emplace_back(m.fitness, -static_cast<double>(complexity(m.geno)));
    auto ranks = pareto_rank(obj);
    for (std::size_t i = 0; i < members.size(); ++i) members[i].rank = ranks[i];
}

}  // namespace

Individual evolve_population(const Grammar& g, Population& pop, const FitnessFn& fitness,
                             const GpConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    for (int gen = 0; gen < cfg.generations; ++gen) {
        evaluate_all(pop.members, fitness);

        // per-generation constant refinement, one deterministic stream each
        if (cfg.es_generations > 0) {
            std::uint64_t round = rng();  // advances the master stream once
            parallel_for(static_cast<int>(pop.members.size()), [&](int i) {
                std::mt19937_64 es_rng(mix_seed(cfg.seed, round, i));
                pop.members[i] =
                    es_refine(g, pop.members[i], fitness, cfg.es_generations, es_rng);
            });
        }

        for (const auto& m : pop.members) {
            if (!pop.has_best || m.fitness > pop.best.fitness) {
                pop.best = m;
                pop.has_best = true;
            }
        }
        if (cfg.pareto_complexity) assign_ranks(pop.members);

        // next generation: elite first, then tournament + operators
        std::vector<Individual> next;
        next.reserve(cfg.population);
        next.push_back(pop.best);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        while (static_cast<int>(next.size()) < cfg.population) {
            double r = unit(rng);
            if (r < cfg.crossover_rate) {
                const Individual& a =
                    tournament_select(pop.members, cfg.tournament, rng, cfg.pareto_complexity);
                const Individual& b =
                    tournament_select(pop.members, cfg.tournament, rng, cfg.pareto_complexity);
                auto [c1, c2] = crossover(g, a, b, cfg.max_depth, rng);
                next.push_back(std::move(c1));
                if (static_cast<int>(next.size()) < cfg.population)
                    next.push_back(std::move(c2));
            } else if (r < cfg.crossover_rate + cfg.mutation_rate) {
                const Individual& a =
                    tournament_select(pop.members, cfg.tournament, rng, cfg.pareto_complexity);
                next.push_back(mutate(g, a, cfg.max_depth, rng));
            } else {
                next.push_back(
                    tournament_select(pop.members, cfg.tournament, rng, cfg.pareto_complexity));
            }
        }
        pop.members = std::move(next);
    }
    evaluate_all(pop.members, fitness);
    for (const auto& m : pop.members) {
        if (!pop.has_best || m.fitness > pop.best.fitness) {
            pop.best = m;
            pop.has_best = true;
        }
    }
    return pop.best;
}

Individual evolve(const Grammar& g, const std::string& target, const FitnessFn& fitness,
                  const GpConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    Population pop = init_population(g, target, cfg, rng);
    return evolve_population(g, pop, fitness, cfg, rng);
}

}  // namespace stlsynth
