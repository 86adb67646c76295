#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "volterra_games/position.hpp"

using namespace volterra_games;
using Catch::Approx;

TEST_CASE("reconstruct_w with zero generator returns the free term") {
    auto grid = MasterGrid::uniform(1.0, 8);
    auto kernel = make_fractional_kernel({0.5});
    FreeTerm y = [](double tau) { return Vec::Constant(1, std::sin(tau) + 2.0); };
    Mat w = reconstruct_w(Mat::Zero(1, 5), kernel, grid, y, 5);
    for (int j = 0; j <= 5; ++j)
        CHECK(w(0, j) == Approx(std::sin(grid.nodes[j]) + 2.0).epsilon(1e-15));
}

TEST_CASE("reconstruct_w ode kernel integrates a constant generator exactly") {
    auto grid = MasterGrid::uniform(2.0, 16);
    auto kernel = make_ode_kernel(2, 0.5);
    Vec v(2);
    v << 0.7, -1.3;
    FreeTerm y = [](double tau) {
        Vec r(2);
        r << tau, 1.0;
        return r;
    };
    Mat ell(2, 10);
    for (int i = 0; i < 10; ++i) ell.col(i) = v;
    Mat w = reconstruct_w(ell, kernel, grid, y, 10);
    for (int j = 0; j <= 10; ++j) {
        const double tau = grid.nodes[j];
        CHECK(w(0, j) == Approx(tau + v(0) * tau).margin(1e-14));
        CHECK(w(1, j) == Approx(1.0 + v(1) * tau).margin(1e-14));
    }
}

TEST_CASE("reconstruct_w fractional kernel matches the Riemann-Liouville closed form") {
    // ell = 1, y = 0, order 1/2: w(tau) = tau^(1/2) / Gamma(3/2)
    auto grid = MasterGrid::uniform(1.0, 64);
    auto kernel = make_fractional_kernel({0.5});
    FreeTerm y = constant_free_term(Vec::Zero(1));
    Mat w = reconstruct_w(Mat::Ones(1, 64), kernel, grid, y, 64);
    for (int j = 0; j <= 64; ++j) {
        const double want = std::sqrt(grid.nodes[j]) / std::tgamma(1.5);
        CHECK(w(0, j) == Approx(want).margin(1e-12));
    }
}

TEST_CASE("reconstruct_w is bitwise stable") {
    auto grid = MasterGrid::uniform(1.0, 12);
    auto kernel = make_fractional_kernel({0.4, 0.9});
    FreeTerm y = constant_free_term(Vec::Ones(2));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat ell(2, 7);
    for (int i = 0; i < 7; ++i)
        for (int r = 0; r < 2; ++r) ell(r, i) = u(rng);
    Mat w1 = reconstruct_w(ell, kernel, grid, y, 7);
    Mat w2 = reconstruct_w(ell, kernel, grid, y, 7);
    CHECK((w1.array() == w2.array()).all());
}

TEST_CASE("extend_a from the initial position is the free term") {
    auto grid = MasterGrid::uniform(1.0, 10);
    auto kernel = make_fractional_kernel({0.6});
    FreeTerm y = [](double tau) { return Vec::Constant(1, std::cos(tau)); };
    auto p0 = initial_position(kernel, grid, y);
    Mat a = extend_a(p0, kernel, grid, y);
    for (int j = 0; j <= 10; ++j)
        CHECK(a(0, j) == Approx(std::cos(grid.nodes[j])).epsilon(1e-15));
}

TEST_CASE("extend_a ode kernel continues constantly") {
    auto grid = MasterGrid::uniform(1.0, 10);
    auto kernel = make_ode_kernel(1, 0.5);
    FreeTerm y = constant_free_term(Vec::Constant(1, 0.5));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat ell(1, 4);
    for (int i = 0; i < 4; ++i) ell(0, i) = u(rng);
    auto pos = make_position(ell, kernel, grid, y, 4);
    Mat a = extend_a(pos, kernel, grid, y);
    for (int j = 4; j <= 10; ++j) CHECK(a(0, j) == Approx(pos.w(0, 4)).margin(1e-14));
}

TEST_CASE("extension semigroup: re-wrapping an extension reproduces it") {
    auto grid = MasterGrid::uniform(1.0, 16);
    std::mt19937_64 rng(13);
    for (const KernelSpec& kernel :
         {make_fractional_kernel({0.5}), make_ode_kernel(1, 0.3),
          make_fractional_kernel({0.7})}) {
        FreeTerm y = constant_free_term(Vec::Constant(1, 1.0));
        auto pos = random_gk_position(kernel, grid, y, {1, 1.0}, 5, rng);
        Mat a = extend_a(pos, kernel, grid, y);
        for (int tp : {5, 9, 16}) {
            Position snap;
            snap.t_index = tp;
            snap.ell = Mat::Zero(kernel.n, tp);
            snap.ell.leftCols(5) = pos.ell;
            snap.w = a.leftCols(tp + 1);
            Mat a2 = extend_a(snap, kernel, grid, y);
            CHECK((a2 - a).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("dist basics and hand computation") {
    auto grid = MasterGrid::uniform(1.0, 4);
    auto kernel = make_ode_kernel(1, 0.5);
    FreeTerm y = constant_free_term(Vec::Constant(1, 1.0));

    Mat e1(1, 2);
    e1 << 1.0, 1.0;
    auto p1 = make_position(e1, kernel, grid, y, 2);
    CHECK(dist(p1, p1, grid) == 0.0);

    Mat e2(1, 3);
    e2 << 1.0, 1.0, -2.0;
    auto p2 = make_position(e2, kernel, grid, y, 3);
    CHECK(dist(p1, p2, grid) == Approx(dist(p2, p1, grid)));

    // same generator on shared cells: w1 = 1 + tau on [0, 0.5];
    // w2 continues with ell = -2: w2(0.75) = 1.5 - 0.5 = 1.0.
    // clamped comparison: |t1 - t2| = 0.25; node tau = 0.75 and tau = 1 compare
    // w1(0.5) = 1.5 against w2(0.75) = 1.0 -> max difference 0.5.
    CHECK(dist(p1, p2, grid) == Approx(0.25 + 0.5).epsilon(1e-14));
}

TEST_CASE("dist satisfies the triangle inequality on random triples") {
    auto grid = MasterGrid::uniform(1.0, 12);
    auto kernel = make_fractional_kernel({0.5});
    FreeTerm y = constant_free_term(Vec::Constant(1, 1.0));
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> ti(0, 12);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = random_gk_position(kernel, grid, y, {2, 1.0}, ti(rng), rng);
        auto b = random_gk_position(kernel, grid, y, {2, 1.0}, ti(rng), rng);
        auto c = random_gk_position(kernel, grid, y, {2, 1.0}, ti(rng), rng);
        CHECK(dist(a, c, grid) <= dist(a, b, grid) + dist(b, c, grid) + 1e-12);
    }
}

TEST_CASE("in_Gk thresholds and monotonicity") {
    auto grid = MasterGrid::uniform(1.0, 4);
    auto kernel = make_ode_kernel(1, 0.5);
    FreeTerm y = constant_free_term(Vec::Constant(1, 1.0));
    const double c = 1.0;

    auto zero = make_position(Mat::Zero(1, 3), kernel, grid, y, 3);
    for (int k = 1; k <= 4; ++k) CHECK(in_Gk(zero, {k, c}));

    // one cell exactly at 2 c (1 + ||w||): outside G_1, inside G_2
    Mat ell(1, 1);
    ell(0, 0) = 2.0 * c * (1.0 + 1.0);
    auto p = make_position(ell, kernel, grid, y, 1);
    CHECK(!in_Gk(p, {1, c}));
    CHECK(in_Gk(p, {2, c}));

    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 60; ++trial) {
        auto q = random_gk_position(kernel, grid, y, {1, c}, 4, rng);
        CHECK(in_Gk(q, {1, c}));
        CHECK(in_Gk(q, {2, c}));  // monotone in k
    }
}
