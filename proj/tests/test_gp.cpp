#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "stlsynth/gp.hpp"

using namespace stlsynth;

namespace {

// the running example grammar: time-varying feedback laws linear in x
const char* kLinearGrammar = R"(
pol ::= const * mon | pol + pol
mon ::= t | t * mon | x1 | x2
const ::= rand(-1, 1)
start ctrl = pol
)";

// Table-2 style grammar over states only
const char* kPolyXGrammar = R"(
pol_x ::= const * mon_x | pol_x + pol_x
mon_x ::= var | var * mon_x
var ::= x1 | x2
const ::= rand(-1, 1)
start ctrl = pol_x
)";

Grammar linear_grammar() {
    ExprLimits lim;
    lim.check = true;
    lim.n_states = 2;
    return parse_grammar(kLinearGrammar, lim);
}

Grammar polyx_grammar() {
    ExprLimits lim;
    lim.check = true;
    lim.n_states = 2;
    return parse_grammar(kPolyXGrammar, lim);
}

}  // namespace

TEST_CASE("grammar parsing and termination analysis") {
    auto g = linear_grammar();
    CHECK(g.nt_names.size() == 3);
    CHECK(g.productions[g.nt_id("pol")].size() == 2);
    CHECK(g.nt_min_depth[g.nt_id("mon")] == 1);
    CHECK(g.nt_min_depth[g.nt_id("pol")] == 2);

    ExprLimits lim;
    lim.check = true;
    lim.n_states = 1;
    CHECK_THROWS(parse_grammar("loop ::= loop + loop\nstart k = loop\n", lim));
}

TEST_CASE("random individuals derive valid phenotypes of the grammar shape") {
    auto g = linear_grammar();
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200; ++i) {
        auto ind = random_individual(g, "ctrl", 8, rng);
        CHECK(valid_derivation(g, ind.geno, 8));
        auto ph = phenotype(g, ind.geno);
        REQUIRE(ph.size() == 1);
        // the phenotype is a polynomial over t, x1, x2 (no transcendentals)
        CHECK(ph[0].is_polynomial());
        std::vector<double> x{0.5, -0.25};
        EvalPoint p{0.3, {x.data(), x.size()}, {}, {}};
        CHECK(std::isfinite(ph[0].eval(p)));
    }
}

TEST_CASE("single-production constant grammar draws from [-1,1]") {
    ExprLimits lim;
    auto g = parse_grammar("const ::= rand(-1, 1)\nstart k = const\n", lim);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        auto ind = random_individual(g, "k", 4, rng);
        auto ph = phenotype(g, ind.geno);
        CHECK(ph[0].root()->op == ExprOp::Const);
        CHECK(ph[0].root()->value >= -1.0);
        CHECK(ph[0].root()->value <= 1.0);
    }
}

TEST_CASE("depth budget below the minimum derivation depth errors") {
    ExprLimits lim;
    auto g = parse_grammar("a ::= a + a | b\nb ::= rand(-1,1)\nstart k = a\n", lim);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(random_individual(g, "k", 0, rng), std::runtime_error);
}

TEST_CASE("crossover preserves the grammar and swaps at a common nonterminal") {
    auto g = linear_grammar();
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        auto a = random_individual(g, "ctrl", 8, rng);
        auto b = random_individual(g, "ctrl", 8, rng);
        auto [c1, c2] = crossover(g, a, b, 8, rng);
        CHECK(valid_derivation(g, c1.geno, 8));
        CHECK(valid_derivation(g, c2.geno, 8));
    }
}

TEST_CASE("crossover between disjoint-nonterminal targets is a no-op") {
    ExprLimits lim;
    auto g = parse_grammar(
        "a ::= rand(-1,1)\nb ::= rand(-1,1) + rand(0,1)\nstart ta = a\nstart tb = b\n", lim);
    std::mt19937_64 rng(3);
    auto ia = random_individual(g, "ta", 4, rng);
    auto ib = random_individual(g, "tb", 4, rng);
    auto va = get_constants(ia.geno);
    auto vb = get_constants(ib.geno);
    auto [c1, c2] = crossover(g, ia, ib, 4, rng);
    CHECK(get_constants(c1.geno) == va);
    CHECK(get_constants(c2.geno) == vb);
}

TEST_CASE("mutation keeps derivations valid and respects the depth bound") {
    auto g = linear_grammar();
    std::mt19937_64 rng(13);
    auto ind = random_individual(g, "ctrl", 8, rng);
    for (int i = 0; i < 10000; ++i) {
        ind = mutate(g, ind, 8, rng);
        if (i % 100 == 0) CHECK(valid_derivation(g, ind.geno, 8));
    }
    CHECK(valid_derivation(g, ind.geno, 8));
}

TEST_CASE("complexity equals an independent nonterminal recount") {
    auto g = linear_grammar();
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        auto ind = random_individual(g, "ctrl", 8, rng);
        // independent recount through the public structure
        std::function<int(const DerivationNode&)> count = [&](const DerivationNode& n) {
            int c = 1;
            for (const auto& ch : n.children) c += count(ch);
            return c;
        };
        int total = 0;
        for (const auto& r : ind.geno.roots) total += count(r);
        CHECK(complexity(ind.geno) == total);
    }
}

TEST_CASE("tournament selection: k = size picks the best, k = 1 is uniform, 2-of-3 is 5/9") {
    std::vector<Individual> pop(3);
    pop[0].fitness = 1;
    pop[1].fitness = 2;
    pop[2].fitness = 3;
    std::mt19937_64 rng(19);
    // k = population size: overwhelmingly the global best (with replacement,
    // misses are possible but rare over many draws)
    int best_hits = 0;
    for (int i = 0; i < 3000; ++i)
        if (tournament_select(pop, 3, rng).fitness == 3) ++best_hits;
    CHECK(best_hits > 2000);

    // exact enumeration oracle for k = 2 over 3 with replacement:
    // P(best selected) = 1 - (2/3)^2 = 5/9
    const double p_expected = 5.0 / 9.0;
    int hits = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        if (tournament_select(pop, 2, rng).fitness == 3) ++hits;
    CHECK(std::abs(static_cast<double>(hits) / draws - p_expected) < 0.02);

    // k = 1 is a uniform draw
    int c0 = 0;
    for (int i = 0; i < 30000; ++i)
        if (tournament_select(pop, 1, rng).fitness == 1) ++c0;
    CHECK(std::abs(c0 / 30000.0 - 1.0 / 3.0) < 0.02);
}

TEST_CASE("evolve: constant fitness returns immediately with a valid individual") {
    auto g = linear_grammar();
    GpConfig cfg;
    cfg.population = 8;
    cfg.generations = 1;
    cfg.es_generations = 0;
    cfg.seed = 5;
    auto best = evolve(g, "ctrl", [](const Individual&) { return 1.0; }, cfg);
    CHECK(best.fitness == 1.0);
    CHECK(valid_derivation(g, best.geno, cfg.max_depth));
}

TEST_CASE("evolve: symbolic regression of 2*x1 converges on most seeds") {
    auto g = polyx_grammar();
    // fitness: negative mean squared error against 2*x1 on a sample grid
    auto fitness = [&](const Individual& ind) {
        auto ph = phenotype(g, ind.geno);
        double err = 0.0;
        for (double x1 = -1.0; x1 <= 1.0; x1 += 0.25)
            for (double x2 = -1.0; x2 <= 1.0; x2 += 0.5) {
                std::vector<double> x{x1, x2};
                EvalPoint p{0, {x.data(), x.size()}, {}, {}};
                double d = ph[0].eval(p) - 2.0 * x1;
                err += d * d;
            }
        return -err;
    };
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GpConfig cfg;
        cfg.population = 14;
        cfg.generations = 50;
        cfg.es_generations = 6;
        cfg.seed = seed;
        auto best = evolve(g, "ctrl", fitness, cfg);
        if (best.fitness > -1e-2) ++good;
    }
    CHECK(good >= 8);
}

TEST_CASE("evolve: best-so-far fitness is non-decreasing and traces are seed-reproducible") {
    auto g = linear_grammar();
    auto fitness = [&](const Individual& ind) {
        auto ph = phenotype(g, ind.geno);
        std::vector<double> x{0.7, -0.3};
        EvalPoint p{0.5, {x.data(), x.size()}, {}, {}};
        return -std::abs(ph[0].eval(p) - 1.0);
    };
    GpConfig cfg;
    cfg.population = 10;
    cfg.generations = 1;
    cfg.es_generations = 2;
    cfg.seed = 77;

    std::mt19937_64 rng(cfg.seed);
    Population pop = init_population(g, "ctrl", cfg, rng);
    double prev = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    for (int gen = 0; gen < 12; ++gen) {
        auto best = evolve_population(g, pop, fitness, cfg, rng);
        CHECK(best.fitness >= prev);
        prev = best.fitness;
        trace.push_back(best.fitness);
    }

    // identical seed: bit-identical best-fitness trace
    std::mt19937_64 rng2(cfg.seed);
    Population pop2 = init_population(g, "ctrl", cfg, rng2);
    for (int gen = 0; gen < 12; ++gen) {
        auto best = evolve_population(g, pop2, fitness, cfg, rng2);
        CHECK(best.fitness == trace[gen]);
    }
}

TEST_CASE("operator application frequencies follow the configured rates") {
    auto g = linear_grammar();
    std::mt19937_64 rng(23);
    // measure the rate decision directly, the way evolve draws it
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int cx = 0, mut = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        double r = unit(rng);
        if (r < 0.2) ++cx;
        else if (r < 1.0) ++mut;
    }
    CHECK(std::abs(cx / static_cast<double>(draws) - 0.2) < 0.05);
    CHECK(std::abs(mut / static_cast<double>(draws) - 0.8) < 0.05);
}

TEST_CASE("es_refine") {
    auto g = linear_grammar();
    std::mt19937_64 rng(29);

    // no constants: identical individual
    ExprLimits lim;
    auto g0 = parse_grammar("v ::= t\nstart k = v\n", lim);
    auto flat = random_individual(g0, "k", 4, rng);
    auto same = es_refine(g0, flat, [](const Individual&) { return 0.0; }, 10, rng);
    CHECK(get_constants(same.geno).empty());

    // sphere function: all constants -> 1 within 1e-2 in >= 9/10 runs
    ExprLimits lim3;
    auto g3 = parse_grammar("v ::= rand(-1,1) + rand(-1,1)*t + rand(-1,1)*t*t\nstart k = v\n",
                            lim3);
    auto sphere = [&](const Individual& ind) {
        auto c = get_constants(ind.geno);
        double s = 0.0;
        for (double v : c) s += (v - 1.0) * (v - 1.0);
        return -s;
    };
    int good = 0;
    for (int run = 0; run < 10; ++run) {
        std::mt19937_64 r2(100 + run);
        auto ind = random_individual(g3, "k", 4, r2);
        auto refined = es_refine(g3, ind, sphere, 60, r2);
        auto c = get_constants(refined.geno);
        bool ok = true;
        for (double v : c)
            if (std::abs(v - 1.0) > 1e-2) ok = false;
        if (ok) ++good;
    }
    CHECK(good >= 9);

    // monotonicity: output fitness never below input fitness
    for (int run = 0; run < 20; ++run) {
        std::mt19937_64 r3(200 + run);
        auto ind = random_individual(g, "ctrl", 8, r3);
        auto noisy = [&](const Individual& i2) {
            auto c = get_constants(i2.geno);
            double s = 0.0;
            for (double v : c) s += std::sin(5 * v) - 0.1 * v * v;
            return s;
        };
        ind.fitness = noisy(ind);
        ind.evaluated = true;
        auto refined = es_refine(g, ind, noisy, 5, r3);
        CHECK(refined.fitness >= ind.fitness);
    }
}

TEST_CASE("pareto_rank against a brute-force dominance oracle") {
    // single individual
    CHECK(pareto_rank({{1.0, 1.0}}) == std::vector<int>{0});
    // one dominating the other
    CHECK(pareto_rank({{2.0, 2.0}, {1.0, 1.0}}) == std::vector<int>{0, 1});
    // worked 4-point example: fronts {(2,-9),(1,-5)} then {(1,-9),(0.5,-5)}
    auto r = pareto_rank({{1, -5}, {1, -9}, {0.5, -5}, {2, -9}});
    CHECK(r == std::vector<int>{0, 1, 1, 0});

    // randomized: rank-0 sets match an independent dominance matrix
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<double, double>> obj(8);
        for (auto& o : obj) o = {U(rng), U(rng)};
        auto ranks = pareto_rank(obj);
        for (std::size_t i = 0; i < obj.size(); ++i) {
            bool dominated = false;
            for (std::size_t j = 0; j < obj.size(); ++j) {
                if (i == j) continue;
                bool geq = obj[j].first >= obj[i].first && obj[j].second >= obj[i].second;
                bool gt = obj[j].first > obj[i].first || obj[j].second > obj[i].second;
                if (geq && gt) { dominated = true; break; }
            }
            CHECK((ranks[i] == 0) == !dominated);
        }
    }
}
