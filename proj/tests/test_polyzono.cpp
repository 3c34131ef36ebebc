#include "doctest.h"

#include <random>

#include "stlsynth/polyzono.hpp"

using namespace stlsynth;

namespace {

PolyZonotope worked_example() {
    // G = [(2,0),(1,1)], E = [[1,2]] (one factor)
    Eigen::MatrixXd G(2, 2);
    G << 2, 1,
         0, 1;
    Eigen::MatrixXi E(1, 2);
    E << 1, 2;
    return PolyZonotope(G, E);
}

PolyZonotope random_pz(std::mt19937_64& rng, int n, int p, int h) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::MatrixXd G(n, h);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < h; ++j) G(i, j) = U(rng);
    Eigen::MatrixXi E(p, h);
    for (int k = 0; k < p; ++k)
        for (int j = 0; j < h; ++j) E(k, j) = static_cast<int>(rng() % 3);
    return PolyZonotope(G, E);
}

}  // namespace

TEST_CASE("pz_point on the worked example") {
    auto z = worked_example();
    Eigen::VectorXd a1 = z.point_at({1.0});
    CHECK(a1(0) == doctest::Approx(3.0));
    CHECK(a1(1) == doctest::Approx(1.0));
    Eigen::VectorXd a0 = z.point_at({0.0});
    CHECK(a0(0) == doctest::Approx(0.0));
    CHECK(a0(1) == doctest::Approx(0.0));
    Eigen::VectorXd am = z.point_at({-1.0});
    CHECK(am(0) == doctest::Approx(-1.0));
    CHECK(am(1) == doctest::Approx(1.0));

    CHECK_THROWS_AS(z.point_at({}), std::invalid_argument);
}

TEST_CASE("pz_point reduces to the zonotope combination when E is identity") {
    Eigen::MatrixXd G(2, 3);
    G << 1, 0, 0.5,
         0, 2, 0.5;
    Eigen::MatrixXi E = Eigen::MatrixXi::Identity(3, 3);
    PolyZonotope z(G, E);
    std::vector<double> alpha{0.3, -0.7, 1.0};
    Eigen::VectorXd p = z.point_at(alpha);
    CHECK(p(0) == doctest::Approx(0.3 * 1 + 0.5));
    CHECK(p(1) == doctest::Approx(-0.7 * 2 + 0.5));
}

TEST_CASE("pz_enclosure worked example and scaling") {
    auto z = worked_example();
    Box b = z.enclosure();
    CHECK(b[0].lo == doctest::Approx(-2.0));
    CHECK(b[0].hi == doctest::Approx(3.0));
    CHECK(b[1].lo == doctest::Approx(0.0));
    CHECK(b[1].hi == doctest::Approx(1.0));

    // scaling G by 2 scales the box by 2
    Eigen::MatrixXd M = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    auto z2 = z;
    z2.apply_linear(M);
    Box b2 = z2.enclosure();
    CHECK(b2[0].lo == doctest::Approx(-4.0));
    CHECK(b2[0].hi == doctest::Approx(6.0));
    CHECK(b2[1].hi == doctest::Approx(2.0));

    // pure offset column gives a degenerate box
    PolyZonotope pt = PolyZonotope::point((Eigen::VectorXd(2) << 1.5, -2.5).finished());
    Box bp = pt.enclosure();
    CHECK(bp[0].lo == doctest::Approx(1.5));
    CHECK(bp[0].hi == doctest::Approx(1.5));
    CHECK(bp[1].lo == doctest::Approx(-2.5));
}

TEST_CASE("random points stay inside the enclosure") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> A(-1.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        auto z = random_pz(rng, 3, 4, 6);
        Box b = z.enclosure();
        for (int s = 0; s < 30; ++s) {
            std::vector<double> alpha(4);
            for (auto& a : alpha) a = A(rng);
            Eigen::VectorXd p = z.point_at(alpha);
            for (int d = 0; d < 3; ++d) {
                CHECK(p(d) >= b[d].lo - 1e-9);
                CHECK(p(d) <= b[d].hi + 1e-9);
            }
        }
    }
}

TEST_CASE("identity linear map leaves the set unchanged") {
    std::mt19937_64 rng(6);
    auto z = random_pz(rng, 2, 3, 5);
    auto z2 = z;
    z2.apply_linear(Eigen::MatrixXd::Identity(2, 2));
    std::uniform_real_distribution<double> A(-1.0, 1.0);
    for (int s = 0; s < 50; ++s) {
        std::vector<double> alpha(3);
        for (auto& a : alpha) a = A(rng);
        CHECK((z.point_at(alpha) - z2.point_at(alpha)).norm() == doctest::Approx(0.0));
    }
}

TEST_CASE("exact polynomial map: squaring doubles the exponent") {
    Eigen::MatrixXd G(1, 1);
    G << 1;
    Eigen::MatrixXi E(1, 1);
    E << 1;
    PolyZonotope z(G, E);
    int next_id = 1;
    auto q = std::vector<ScalarExpression>{
        ScalarExpression::pow(ScalarExpression::state(1), 2)};
    auto z2 = pz_exact_poly_map(q, z, 4, next_id);
    REQUIRE(z2.num_gens() == 1);
    CHECK(z2.generators()(0, 0) == doctest::Approx(1.0));
    REQUIRE(z2.exponents()[0].size() == 1);
    CHECK(z2.exponents()[0][0].second == 2);
}

TEST_CASE("exact polynomial map: bilinear product matches a dense grid") {
    // 2-factor zonotope, map (x1, x2) -> x1 * x2: exact at order 2
    Eigen::MatrixXd G(2, 3);
    G << 0.2, 1.0, 0.0,
         -0.1, 0.0, 0.5;
    Eigen::MatrixXi E(2, 3);
    E << 0, 1, 0,
         0, 0, 1;
    PolyZonotope z(G, E);
    int next_id = 2;
    auto q = std::vector<ScalarExpression>{
        ScalarExpression::mul(ScalarExpression::state(1), ScalarExpression::state(2))};
    auto zq = pz_exact_poly_map(q, z, 2, next_id);
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
            std::vector<double> alpha{-1.0 + 0.1 * i, -1.0 + 0.1 * j};
            Eigen::VectorXd orig = z.point_at(alpha);
            Eigen::VectorXd img = zq.point_at(alpha);
            CHECK(img(0) == doctest::Approx(orig(0) * orig(1)).epsilon(1e-12));
        }
}

TEST_CASE("truncation order below 1 is rejected") {
    auto z = worked_example();
    int next_id = 1;
    auto q = std::vector<ScalarExpression>{ScalarExpression::state(1)};
    CHECK_THROWS_AS(pz_exact_poly_map(q, z, 0, next_id), std::invalid_argument);
}

TEST_CASE("duplicate exponent columns are merged on every construction") {
    Eigen::MatrixXd G(1, 3);
    G << 1, 2, 4;
    Eigen::MatrixXi E(1, 3);
    E << 1, 1, 2;  // first two columns share the exponent
    PolyZonotope z(G, E);
    CHECK(z.num_gens() == 2);
    CHECK(z.point_at({1.0})(0) == doctest::Approx(7.0));
    CHECK(z.point_at({-1.0})(0) == doctest::Approx(1.0));

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto zz = random_pz(rng, 2, 3, 8);
        int next = zz.num_factors();
        zz.minkowski_box(Box{Interval(-0.1, 0.1), Interval(0.0)}, next);
        zz.apply_linear(Eigen::MatrixXd::Random(2, 2));
        // exponent columns unique after the operations
        auto exps = zz.exponents();
        for (std::size_t i = 0; i < exps.size(); ++i)
            for (std::size_t j = i + 1; j < exps.size(); ++j) CHECK(exps[i] != exps[j]);
    }
}

TEST_CASE("minkowski box adds fresh independent factors") {
    auto z = worked_example();
    int next = z.num_factors();
    z.minkowski_box(Box{Interval(-0.5, 0.5), Interval(1.0, 2.0)}, next);
    CHECK(next == 3);  // one fresh factor per non-degenerate dim
    Box b = z.enclosure();
    CHECK(b[0].lo == doctest::Approx(-2.5));
    CHECK(b[0].hi == doctest::Approx(3.5));
    CHECK(b[1].lo == doctest::Approx(1.0));
    CHECK(b[1].hi == doctest::Approx(3.0));
}

TEST_CASE("order reduction keeps initial-set factors and stays sound") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> A(-1.0, 1.0);
    auto z = random_pz(rng, 2, 2, 4);  // factors 0,1 are "initial"
    int next = 2;
    for (int i = 0; i < 6; ++i)
        z.minkowski_box(Box{Interval(-0.05, 0.05), Interval(-0.05, 0.05)}, next);
    auto before = z;
    z.reduce_order(5, /*protected_below_id=*/2, next);
    CHECK(z.num_gens() <= 5 + 2);  // budget plus the box just added
    // containment: sampled points of the original lie in the reduced enclosure
    Box b = z.enclosure();
    for (int s = 0; s < 200; ++s) {
        std::vector<double> alpha(before.num_factors());
        for (auto& a : alpha) a = A(rng);
        Eigen::VectorXd p = before.point_at(alpha);
        for (int d = 0; d < 2; ++d) {
            CHECK(p(d) >= b[d].lo - 1e-9);
            CHECK(p(d) <= b[d].hi + 1e-9);
        }
    }
    // initial factors still present
    auto active = z.active_factors();
    CHECK(std::find(active.begin(), active.end(), 0) != active.end());
    CHECK(std::find(active.begin(), active.end(), 1) != active.end());
}

TEST_CASE("from_box skips degenerate dimensions") {
    Box b{Interval(0.9, 1.1), Interval(55.0, 55.0), Interval(-1.0, 1.0)};
    std::vector<int> dims;
    auto z = PolyZonotope::from_box(b, 0, &dims);
    CHECK(dims == std::vector<int>{0, 2});
    CHECK(z.num_factors() == 2);
    Box e = z.enclosure();
    CHECK(e[1].lo == doctest::Approx(55.0));
    CHECK(e[1].hi == doctest::Approx(55.0));
}
