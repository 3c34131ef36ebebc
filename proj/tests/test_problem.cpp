#include "doctest.h"

#include <filesystem>

#include "stlsynth/problem.hpp"
#include "stlsynth/rtl.hpp"

using namespace stlsynth;

namespace {
std::string problems_dir() {
    namespace fs = std::filesystem;
    for (auto p : {"problems", "../problems", "../../problems"})
        if (fs::exists(fs::path(p) / "spacecraft.prob")) return p;
    throw std::runtime_error("problems directory not found from the test working dir");
}
}  // namespace

TEST_CASE("all six shipped problem files load and validate") {
    for (const char* name : {"car", "constrained_car", "path_planning", "aircraft",
                             "platoon", "spacecraft"}) {
        INFO(name);
        auto spec = load_problem(problems_dir() + "/" + std::string(name) + ".prob");
        CHECK(spec.name == name);
        CHECK(spec.sys.n >= 3);
        CHECK(check_divisible(spec.formula, spec.sys.c));
        // the transformation succeeds and has a finite horizon
        auto rtl = stl_to_rtl(spec.formula, spec.sys.c);
        CHECK(rtl.max_grid_index() > 0);
        // the grammar parses with placeholder terminals
        if (spec.mode == ProblemSpec::Mode::Free) {
            CHECK(spec.grammar().start_trees.count("kappa") == 1);
        }
    }
}

TEST_CASE("benchmark transcription spot checks") {
    auto car = load_problem(problems_dir() + "/car.prob");
    CHECK(car.sys.n == 4);
    CHECK(car.sys.eta == Rational(1, 40));
    CHECK(car.sys.init[0].lo == doctest::Approx(19.9));
    CHECK(car.sys.init[0].hi == doctest::Approx(20.2));
    CHECK(car.sys.omega[1].hi == doctest::Approx(0.02));
    auto rtl = stl_to_rtl(car.formula, car.sys.c);
    // G[0,1] covers 41 grid entities, plus the singleton goal atom at 1 s
    CHECK(rtl.conjuncts.size() == 42);

    auto spacecraft = load_problem(problems_dir() + "/spacecraft.prob");
    CHECK(spacecraft.sys.m == 2);
    CHECK(spacecraft.input_box[0].lo == doctest::Approx(-5));
    auto srtl = stl_to_rtl(spacecraft.formula, spacecraft.sys.c);
    CHECK(srtl.max_grid_index() == 50);
    CHECK(srtl.conjuncts.size() == 52);

    auto aircraft = load_problem(problems_dir() + "/aircraft.prob");
    // the until bounds land on grid entities 72..80
    auto artl = stl_to_rtl(aircraft.formula, aircraft.sys.c);
    CHECK(artl.max_grid_index() == 80);
}

TEST_CASE("problem file round-trips through print and reparse") {
    auto car = load_problem(problems_dir() + "/car.prob");
    auto text = print_problem(car);
    auto again = parse_problem(text);
    CHECK(again.name == car.name);
    CHECK(again.sys.n == car.sys.n);
    CHECK(again.sys.eta == car.sys.eta);
    CHECK(again.sys.c == car.sys.c);
    CHECK(again.ns == car.ns);
    CHECK(again.mode == car.mode);
    CHECK(again.gp_kappa.population == car.gp_kappa.population);
    CHECK(again.gp_uff.generations == car.gp_uff.generations);
    for (int i = 0; i < car.sys.n; ++i) {
        CHECK(again.sys.init[i].lo == doctest::Approx(car.sys.init[i].lo));
        CHECK(again.sys.f[i].structurally_equal(car.sys.f[i]));
    }
    // the formulas transform to structurally equal sizes
    auto a = stl_to_rtl(car.formula, car.sys.c);
    auto b = stl_to_rtl(again.formula, again.sys.c);
    CHECK(a.conjuncts.size() == b.conjuncts.size());
}

TEST_CASE("problem errors are reported") {
    CHECK_THROWS(parse_problem("version 1\nname broken\n[system]\nstates = 0\n"));
    CHECK_THROWS(parse_problem(
        "version 1\nname broken\n[system]\nstates = 1\ninputs = 0\ndisturbances = 0\n"
        "f1 = x2\ninit = [0,1]\neta = 0.1\nc = 0.2\n[formula]\nstl = x1 >= 0\n"));
    // formula not divisible by c
    CHECK_THROWS(parse_problem(
        "version 1\nname broken\n[system]\nstates = 1\ninputs = 0\ndisturbances = 0\n"
        "f1 = -x1\ninit = [0,1]\neta = 0.1\nc = 0.2\n[formula]\nstl = G[0,0.3](x1 >= 0)\n"
        "[grammar]\nk ::= rand(-1,1)\nstart kappa = k\n"));
}

TEST_CASE("fnv1a hash is stable") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") != fnv1a("b"));
}
