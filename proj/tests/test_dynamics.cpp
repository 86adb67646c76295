#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "volterra_games/dynamics.hpp"

using namespace volterra_games;
using Catch::Approx;

namespace {

// extended-precision series, independent of the library path
long double ml_oracle(long double alpha, long double z, int terms = 400) {
    long double sum = 0.0L, power = 1.0L;
    for (int k = 0; k < terms; ++k) {
        sum += power / std::tgamma(alpha * k + 1.0L);
        power *= z;
    }
    return sum;
}

std::vector<Vec> constant_controls(double value, int cells) {
    return std::vector<Vec>(cells, Vec::Constant(1, value));
}

GameSpec pursuit_game(double T = 1.0, double x0 = 1.0, double alpha_prime = 0.5) {
    return make_linear_pursuit_game(make_ode_kernel(1, alpha_prime), T, x0,
                                    scalar_grid({-1.0, 0.0, 1.0}),
                                    scalar_grid({-0.5, 0.0, 0.5}));
}

}  // namespace

TEST_CASE("zero dynamics reproduces the free continuation") {
    auto grid = MasterGrid::uniform(1.0, 16);
    auto kernel = make_fractional_kernel({0.5});
    GameSpec g;
    g.n = 1;
    g.kernel = kernel;
    g.y = [](double tau) { return Vec::Constant(1, std::cos(tau)); };
    g.f = [](double, const Vec&, const Vec&, const Vec&) { return Vec::Zero(1); };
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x.col(x.cols() - 1).norm(); };
    g.P_grid = g.Q_grid = {Vec::Zero(1)};
    g.c = 1e-6;
    g.u_star = g.v_star = Vec::Zero(1);

    std::mt19937_64 rng(2);
    auto pos = random_gk_position(kernel, grid, g.y, {1, 1.0}, 6, rng);
    Mat a = extend_a(pos, kernel, grid, g.y);
    auto m = solve_motion(g, grid, pos, constant_controls(0.0, 10), constant_controls(0.0, 10));
    CHECK((m.x - a).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ode kernel with state-free dynamics is exact") {
    auto grid = MasterGrid::uniform(1.0, 8);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);
    auto m = solve_motion(game, grid, pos, constant_controls(1.0, 8), constant_controls(0.5, 8));
    for (int j = 0; j <= 8; ++j)
        CHECK(m.x(0, j) == Approx(1.0 + 1.5 * grid.nodes[j]).margin(1e-12));

    // motion invariants
    CHECK((m.x.leftCols(1) - pos.w).cwiseAbs().maxCoeff() == 0.0);
    Mat wr = reconstruct_w(m.ell, game.kernel, grid, game.y, 8);
    CHECK((wr - m.x).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("fractional linear benchmark converges to the Mittag-Leffler solution") {
    const double alpha = 0.5, lambda = -1.0, T = 1.0;
    const double exact = static_cast<double>(ml_oracle(alpha, lambda * std::pow(T, alpha)));
    double prev_err = 1e9;
    for (int cells : {128, 256, 512}) {
        auto grid = MasterGrid::uniform(T, cells);
        auto game = make_fractional_linear_game(make_fractional_kernel({alpha}), T, 1.0, lambda);
        auto pos = initial_position(game.kernel, grid, game.y);
        auto m = solve_motion(game, grid, pos, std::vector<Vec>(cells, Vec::Zero(1)),
                              std::vector<Vec>(cells, Vec::Zero(1)));
        const double err = std::abs(m.x(0, cells) - exact);
        CHECK(err < prev_err);  // monotone refinement
        prev_err = err;
        if (cells == 512) CHECK(err / std::abs(exact) < 1e-3);
    }
}

TEST_CASE("motion reconstruct invariant holds for nonlinear dynamics") {
    auto grid = MasterGrid::uniform(1.0, 32);
    GameSpec g;
    g.n = 1;
    g.kernel = make_fractional_kernel({0.6});
    g.y = constant_free_term(Vec::Constant(1, 0.5));
    g.f = [](double tau, const Vec& x, const Vec& u, const Vec& v) {
        return Vec::Constant(1, std::sin(x(0)) + 0.2 * std::cos(tau) + u(0) - v(0));
    };
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x(0, x.cols() - 1); };
    g.P_grid = scalar_grid({-1.0, 1.0});
    g.Q_grid = scalar_grid({-0.3, 0.3});
    g.c = 2.5;
    g.u_star = g.P_grid.front();
    g.v_star = g.Q_grid.front();

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> pick(0, 1);
    std::vector<Vec> u, v;
    for (int i = 0; i < 32; ++i) {
        u.push_back(g.P_grid[pick(rng)]);
        v.push_back(g.Q_grid[pick(rng)]);
    }
    auto pos = initial_position(g.kernel, grid, g.y);
    auto m = solve_motion(g, grid, pos, u, v);

    Mat wr = reconstruct_w(m.ell, g.kernel, grid, g.y, 32);
    CHECK((wr - m.x).cwiseAbs().maxCoeff() < 1e-10);

    // recorded generator equals f at the recorded states (right node per cell)
    for (int i = 0; i < 32; ++i) {
        Vec want = g.f(grid.nodes[i + 1], m.x.col(i + 1), m.u_rec[i], m.v_rec[i]);
        CHECK((m.ell.col(i) - want).norm() == 0.0);
    }
}

TEST_CASE("semigroup property across random kernels, controls, splits") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ua(0.3, 0.9);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int trial = 0; trial < 20; ++trial) {
        KernelSpec kernel;
        switch (trial % 3) {
            case 0: kernel = make_ode_kernel(1, ua(rng)); break;
            case 1: kernel = make_fractional_kernel({ua(rng)}); break;
            default: kernel = make_counterexample_kernel(0.4, 1.0); break;
        }
        GameSpec g;
        g.n = 1;
        g.kernel = kernel;
        g.y = constant_free_term(Vec::Constant(1, 1.0));
        g.f = [](double, const Vec& x, const Vec& u, const Vec& v) {
            return Vec::Constant(1, std::tanh(x(0)) + u(0) + 0.5 * v(0));
        };
        g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
        g.sigma = [](const Mat& x, const MasterGrid&) { return x(0, x.cols() - 1); };
        g.P_grid = scalar_grid({-1.0, 0.0, 1.0});
        g.Q_grid = scalar_grid({-1.0, 0.0, 1.0});
        g.c = 2.5;
        g.u_star = g.P_grid.front();
        g.v_star = g.Q_grid.front();

        auto grid = MasterGrid::uniform(1.0, 24);
        const int t = trial % 6;
        auto pos = random_gk_position(kernel, grid, g.y, {1, g.c}, t, rng);
        std::vector<Vec> u, v;
        for (int i = t; i < 24; ++i) {
            u.push_back(g.P_grid[pick(rng)]);
            v.push_back(g.Q_grid[pick(rng)]);
        }
        std::uniform_int_distribution<int> split(t, 24);
        CHECK(check_semigroup(g, grid, pos, u, v, t) == 0.0);
        CHECK(check_semigroup(g, grid, pos, u, v, 24) == 0.0);
        CHECK(check_semigroup(g, grid, pos, u, v, split(rng)) <= 1e-9);
    }
}

TEST_CASE("motions started in G_1 stay in G_1") {
    auto grid = MasterGrid::uniform(1.0, 16);
    auto game = pursuit_game();  // c = 1.5 dominates |u + v|
    std::mt19937_64 rng(121);
    auto pos = random_gk_position(game.kernel, grid, game.y, {1, game.c}, 4, rng);
    REQUIRE(in_Gk(pos, {1, game.c}));
    auto m = solve_motion(game, grid, pos, constant_controls(1.0, 12), constant_controls(0.5, 12));
    for (int j = 4; j <= 16; ++j) CHECK(in_Gk(position_from_motion(m, j), {1, game.c}));
}

TEST_CASE("identical inputs give bitwise-identical motions") {
    auto grid = MasterGrid::uniform(1.0, 20);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<Vec> u, v;
    for (int i = 0; i < 20; ++i) {
        u.push_back(game.P_grid[pick(rng)]);
        v.push_back(game.Q_grid[pick(rng)]);
    }
    auto m1 = solve_motion(game, grid, pos, u, v);
    auto m2 = solve_motion(game, grid, pos, u, v);
    CHECK((m1.x.array() == m2.x.array()).all());
    CHECK((m1.ell.array() == m2.ell.array()).all());
}

TEST_CASE("solver failures are loud") {
    auto grid = MasterGrid::uniform(1.0, 4);
    GameSpec g;
    g.n = 1;
    g.kernel = make_ode_kernel(1, 0.5);
    g.y = constant_free_term(Vec::Constant(1, 1.0));
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x(0, x.cols() - 1); };
    g.P_grid = g.Q_grid = {Vec::Zero(1)};
    g.c = 1.0;
    g.u_star = g.v_star = Vec::Zero(1);
    auto pos = initial_position(g.kernel, grid, g.y);

    g.f = [](double, const Vec& x, const Vec&, const Vec&) { return -5.0 * x; };  // contraction factor -1.25
    CHECK_THROWS_WITH(solve_motion(g, grid, pos, constant_controls(0, 4), constant_controls(0, 4)),
                      Catch::Matchers::ContainsSubstring("Picard"));

    g.f = [](double, const Vec& x, const Vec&, const Vec&) {
        return Vec::Constant(1, std::numeric_limits<double>::quiet_NaN());
    };
    CHECK_THROWS_WITH(solve_motion(g, grid, pos, constant_controls(0, 4), constant_controls(0, 4)),
                      Catch::Matchers::ContainsSubstring("not finite"));

    CHECK_THROWS_AS(solve_motion(g, grid, pos, constant_controls(0, 3), constant_controls(0, 4)),
                    std::invalid_argument);
}

TEST_CASE("cost functional closed cases") {
    auto grid = MasterGrid::uniform(1.0, 8);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);
    auto m = solve_motion(game, grid, pos, constant_controls(-1.0, 8), constant_controls(0.5, 8));

    // chi = 0, sigma = |x(T)|
    CHECK(cost_J(game, grid, m) == Approx(std::abs(1.0 - 0.5)).margin(1e-12));

    GameSpec timer = game;
    timer.chi = [](double, const Vec&, const Vec&, const Vec&) { return 1.0; };
    timer.sigma = [](const Mat&, const MasterGrid&) { return 0.0; };
    CHECK(cost_J(timer, grid, m) == Approx(1.0).margin(1e-14));

    Motion tail = solve_motion(timer, grid, position_from_motion(m, 2),
                               constant_controls(-1.0, 6), constant_controls(0.5, 6));
    CHECK(cost_J(timer, grid, tail) == Approx(1.0 - grid.nodes[2]).margin(1e-14));
}

TEST_CASE("quadratic running cost matches a midpoint oracle") {
    const int cells = 256;
    auto grid = MasterGrid::uniform(1.0, cells);
    auto game = pursuit_game(1.0, /*x0=*/8.0);
    game.chi = [](double, const Vec& x, const Vec&, const Vec&) { return x.squaredNorm(); };
    game.sigma = [](const Mat&, const MasterGrid&) { return 0.0; };
    auto pos = initial_position(game.kernel, grid, game.y);
    auto m = solve_motion(game, grid, pos, constant_controls(1.0, cells),
                          constant_controls(0.5, cells));

    // x(tau) = 8 + 1.5 tau; 10^6-panel midpoint quadrature of x^2
    const int panels = 1'000'000;
    long double oracle = 0.0L;
    for (int i = 0; i < panels; ++i) {
        const long double tau = (i + 0.5L) / panels;
        const long double x = 8.0L + 1.5L * tau;
        oracle += x * x / panels;
    }
    CHECK(cost_J(game, grid, m) ==
          Approx(static_cast<double>(oracle)).epsilon(1e-3));
}

TEST_CASE("cost is additive across a time split") {
    auto grid = MasterGrid::uniform(1.0, 16);
    auto game = pursuit_game();
    game.chi = [](double tau, const Vec& x, const Vec& u, const Vec& v) {
        return x.squaredNorm() + 0.1 * tau + 0.05 * u(0) * v(0);
    };
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<Vec> u, v;
    for (int i = 0; i < 16; ++i) {
        u.push_back(game.P_grid[pick(rng)]);
        v.push_back(game.Q_grid[pick(rng)]);
    }
    auto pos = initial_position(game.kernel, grid, game.y);
    auto whole = solve_motion(game, grid, pos, u, v);

    const int split = 7;
    auto mid = position_from_motion(whole, split);
    auto tail = solve_motion(game, grid, mid, std::vector<Vec>(u.begin() + split, u.end()),
                             std::vector<Vec>(v.begin() + split, v.end()));
    const double lhs = cost_J(game, grid, whole);
    const double rhs = stage_cost(game, grid, whole, 0, split) + cost_J(game, grid, tail);
    CHECK(lhs == Approx(rhs).margin(1e-12));
}

TEST_CASE("a priori bound diagnostics") {
    auto grid = MasterGrid::uniform(1.0, 64);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);

    auto m0 = solve_motion(game, grid, pos, constant_controls(0.0, 64),
                           constant_controls(0.0, 64));
    auto rep = check_apriori_bound(m0, game, grid);
    CHECK(rep.ok);

    // saturating dynamics with the declared growth constant tight
    GameSpec sat = game;
    sat.c = 1.0;
    sat.f = [](double, const Vec& x, const Vec&, const Vec&) -> Vec {
        return x / (1.0 + x.norm());
    };
    auto ms = solve_motion(sat, grid, pos, constant_controls(0.0, 64),
                           constant_controls(0.0, 64));
    CHECK(check_apriori_bound(ms, sat, grid).ok);

    // understated c: the check reports a violation instead of asserting
    GameSpec lying = game;
    lying.c = 0.01;
    lying.f = [](double, const Vec&, const Vec&, const Vec&) { return Vec::Constant(1, 10.0); };
    auto ml = solve_motion(lying, grid, pos, constant_controls(0.0, 64),
                           constant_controls(0.0, 64));
    auto bad = check_apriori_bound(ml, lying, grid);
    CHECK(!bad.ok);
    CHECK(bad.sup_norm > bad.bound);
}
