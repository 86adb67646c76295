#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "volterra_games/value.hpp"

using namespace volterra_games;
using Catch::Approx;

namespace {

GameSpec pursuit_game(double T = 1.0, double x0 = 1.0) {
    return make_linear_pursuit_game(make_ode_kernel(1, 0.5), T, x0,
                                    scalar_grid({-1.0, 0.0, 1.0}),
                                    scalar_grid({-0.5, 0.0, 0.5}));
}

// Independent oracle for the pursuit benchmark: the ODE update is the closed
// form x + (u + v) h, so no Volterra machinery is involved.
double pursuit_oracle(double x, int step, int steps, double h, bool lower) {
    if (step == steps) return std::abs(x);
    const double us[] = {-1.0, 0.0, 1.0};
    const double vs[] = {-0.5, 0.0, 0.5};
    double outer = lower ? -1e300 : 1e300;
    if (lower) {  // max over v of min over u
        for (double v : vs) {
            double inner = 1e300;
            for (double u : us)
                inner = std::min(inner, pursuit_oracle(x + (u + v) * h, step + 1, steps, h, lower));
            outer = std::max(outer, inner);
        }
    } else {
        for (double u : us) {
            double inner = -1e300;
            for (double v : vs)
                inner = std::max(inner, pursuit_oracle(x + (u + v) * h, step + 1, steps, h, lower));
            outer = std::min(outer, inner);
        }
    }
    return outer;
}

}  // namespace

TEST_CASE("boundary condition: partition at the horizon returns sigma") {
    auto grid = MasterGrid::uniform(1.0, 4);
    auto game = pursuit_game();
    auto pos0 = initial_position(game.kernel, grid, game.y);
    auto m = solve_motion(game, grid, pos0, std::vector<Vec>(4, Vec::Constant(1, 1.0)),
                          std::vector<Vec>(4, Vec::Constant(1, 0.5)));
    auto posT = position_from_motion(m, 4);
    auto part = make_partition(grid, {4});
    CHECK(tree_value(game, grid, posT, part, Side::Lower) ==
          game.sigma(posT.w, grid));
}

TEST_CASE("degenerate maximizer: v-independent game has equal sides") {
    auto grid = MasterGrid::uniform(1.0, 4);
    GameSpec g = pursuit_game();
    g.f = [](double, const Vec&, const Vec& u, const Vec&) -> Vec {
        return Vec::Constant(1, u(0));
    };
    g.chi = [](double, const Vec& x, const Vec& u, const Vec&) {
        return 0.1 * x.squaredNorm() + 0.01 * u(0) * u(0);
    };
    auto pos = initial_position(g.kernel, grid, g.y);
    auto part = uniform_partition(grid, 0, 4);
    const double lo = tree_value(g, grid, pos, part, Side::Lower);
    const double hi = tree_value(g, grid, pos, part, Side::Upper);
    CHECK(lo == hi);  // inner optimization is degenerate, orders coincide
}

TEST_CASE("ODE pursuit benchmark: 4 steps give value 1/2 on both sides") {
    auto grid = MasterGrid::uniform(1.0, 4);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);
    auto part = uniform_partition(grid, 0, 4);

    const double want_lo = pursuit_oracle(1.0, 0, 4, 0.25, true);
    const double want_hi = pursuit_oracle(1.0, 0, 4, 0.25, false);
    CHECK(want_lo == Approx(0.5).margin(1e-15));
    CHECK(want_hi == Approx(0.5).margin(1e-15));

    const double lo = tree_value(game, grid, pos, part, Side::Lower);
    const double hi = tree_value(game, grid, pos, part, Side::Upper);
    CHECK(lo == Approx(0.5).margin(1e-9));
    CHECK(hi == Approx(0.5).margin(1e-9));
    CHECK(lo <= hi + 1e-9);
}

TEST_CASE("refinement keeps the pursuit value pinned at 1/2") {
    auto game = pursuit_game();
    double prev_err = 1e300;
    for (int steps : {2, 4, 6}) {
        auto grid = MasterGrid::uniform(1.0, steps);
        auto pos = initial_position(game.kernel, grid, game.y);
        auto part = uniform_partition(grid, 0, steps);
        const double lo = tree_value(game, grid, pos, part, Side::Lower);
        const double want = pursuit_oracle(1.0, 0, steps, 1.0 / steps, true);
        CHECK(lo == Approx(want).margin(1e-12));
        const double err = std::abs(lo - 0.5);
        CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
}

TEST_CASE("one-step DPP composition is bitwise consistent") {
    auto grid = MasterGrid::uniform(1.0, 4);
    auto game = pursuit_game();
    game.chi = [](double tau, const Vec& x, const Vec& u, const Vec& v) {
        return 0.2 * x.squaredNorm() + 0.1 * tau + 0.03 * u(0) - 0.02 * v(0);
    };
    auto pos = initial_position(game.kernel, grid, game.y);
    auto part = uniform_partition(grid, 0, 4);

    const double direct = tree_value(game, grid, pos, part, Side::Lower);

    // manual outer step composed with the library value on the suffix
    TreeValue suffix(game, grid, part, Side::Lower);
    double outer = -1e300;
    for (const Vec& v : game.Q_grid) {
        double inner = 1e300;
        for (const Vec& u : game.P_grid) {
            std::vector<Vec> useq(1, u), vseq(1, v);
            Position child = solve_motion_to(game, grid, pos, useq, vseq);
            double stage = game.chi(grid.nodes[0], child.w.col(0), u, v) * grid.step(0);
            inner = std::min(inner, stage + suffix.value(child));
        }
        outer = std::max(outer, inner);
    }
    CHECK(outer == direct);
}

TEST_CASE("value sandwich holds on random games") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> uc(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        GameSpec g;
        g.n = 1;
        g.kernel = (trial % 2) ? make_ode_kernel(1, 0.5) : make_fractional_kernel({0.6});
        g.y = constant_free_term(Vec::Constant(1, uc(rng)));
        const double a = uc(rng), b = uc(rng), c = 0.5 * uc(rng);
        g.f = [a, b, c](double, const Vec& x, const Vec& u, const Vec& v) -> Vec {
            return Vec::Constant(1, a * u(0) + b * v(0) + c * std::tanh(x(0)) + c * u(0) * v(0));
        };
        g.chi = [b](double, const Vec& x, const Vec& u, const Vec&) {
            return 0.1 * x.squaredNorm() + 0.05 * b * u(0);
        };
        g.sigma = [](const Mat& x, const MasterGrid&) { return x(0, x.cols() - 1); };
        g.P_grid = scalar_grid({-1.0, 1.0});
        g.Q_grid = scalar_grid({-1.0, 0.0, 1.0});
        g.c = 3.0;
        g.u_star = g.P_grid.front();
        g.v_star = g.Q_grid.front();

        auto grid = MasterGrid::uniform(1.0, 6);
        auto pos = initial_position(g.kernel, grid, g.y);
        auto part = uniform_partition(grid, 0, 3);
        const double lo = tree_value(g, grid, pos, part, Side::Lower);
        const double hi = tree_value(g, grid, pos, part, Side::Upper);
        CHECK(lo <= hi + 1e-9);
    }
}

TEST_CASE("value_gap_study: separable game closes, bilinear game does not") {
    auto gridp = MasterGrid::uniform(1.0, 12);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, gridp, game.y);
    std::vector<PartitionSpec> parts{uniform_partition(gridp, 0, 2),
                                     uniform_partition(gridp, 0, 4),
                                     uniform_partition(gridp, 0, 6)};
    auto study = value_gap_study(game, gridp, pos, parts);
    REQUIRE(study.rows.size() == 3);
    for (const auto& row : study.rows) CHECK(row.gap() <= 1e-9);
    CHECK(study.gap_nonincreasing);

    auto bil = make_bilinear_game(make_ode_kernel(1, 0.5), 1.0, 0.0, scalar_grid({-1.0, 1.0}),
                                  scalar_grid({-1.0, 1.0}));
    auto posb = initial_position(bil.kernel, gridp, bil.y);
    auto studyb = value_gap_study(bil, gridp, posb, parts);
    for (const auto& row : studyb.rows) CHECK(row.gap() > 0.1);
}

TEST_CASE("single-step partition reduces to the static minimax") {
    auto grid = MasterGrid::uniform(1.0, 2);
    auto game = make_bilinear_game(make_ode_kernel(1, 0.5), 1.0, 0.25, scalar_grid({-1.0, 1.0}),
                                   scalar_grid({-1.0, 1.0}));
    auto pos = initial_position(game.kernel, grid, game.y);
    auto part = make_partition(grid, {0, 2});

    // direct one-shot enumeration: x(T) = x0 + u v
    double lo = -1e300, hi = 1e300;
    for (double v : {-1.0, 1.0}) {
        double inner = 1e300;
        for (double u : {-1.0, 1.0}) inner = std::min(inner, 0.25 + u * v);
        lo = std::max(lo, inner);
    }
    for (double u : {-1.0, 1.0}) {
        double inner = -1e300;
        for (double v : {-1.0, 1.0}) inner = std::max(inner, 0.25 + u * v);
        hi = std::min(hi, inner);
    }
    CHECK(tree_value(game, grid, pos, part, Side::Lower) == Approx(lo).margin(1e-12));
    CHECK(tree_value(game, grid, pos, part, Side::Upper) == Approx(hi).margin(1e-12));
}

TEST_CASE("node budget failures carry statistics") {
    auto grid = MasterGrid::uniform(1.0, 8);
    auto game = pursuit_game();
    auto pos = initial_position(game.kernel, grid, game.y);
    auto part = uniform_partition(grid, 0, 8);
    try {
        tree_value(game, grid, pos, part, Side::Lower, {}, /*budget=*/100);
        FAIL("expected BudgetExceeded");
    } catch (const BudgetExceeded& e) {
        CHECK(e.expansions > 100);
        CHECK(std::string(e.what()).find("budget") != std::string::npos);
    }
}

TEST_CASE("hj residual vanishes for the frozen game") {
    auto grid = MasterGrid::uniform(1.0, 8);
    GameSpec g = pursuit_game();
    g.f = [](double, const Vec&, const Vec&, const Vec&) { return Vec::Zero(1); };
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    std::function<double(const Position&)> oracle = [&](const Position& p) {
        Mat a = extend_a(p, g.kernel, grid, g.y);
        return g.sigma(a, grid);
    };
    std::mt19937_64 rng(8);
    std::vector<Position> probes;
    for (int i = 0; i < 5; ++i)
        probes.push_back(random_gk_position(g.kernel, grid, g.y, {1, g.c}, i, rng));
    auto stats = hj_residual_probe(g, grid, oracle, probes, 0.25);
    CHECK(stats.max_abs == Approx(0.0).margin(1e-14));
}

TEST_CASE("hj residual self-convergence on the pursuit game") {
    auto game = pursuit_game();
    game.chi = [](double, const Vec& x, const Vec&, const Vec&) {
        return 0.1 * x.squaredNorm();
    };
    auto grid = MasterGrid::uniform(1.0, 16);
    auto part = uniform_partition(grid, 0, 4);  // 4-step value oracle
    TreeValue oracle_tree(game, grid, part, Side::Lower, {}, 10'000'000);
    std::function<double(const Position&)> oracle = [&](const Position& p) {
        return oracle_tree.value(p);
    };

    auto pos = initial_position(game.kernel, grid, game.y);
    std::vector<Position> probes{pos};
    double prev = 1e300;
    for (double dt : {0.25, 0.125, 0.0625}) {
        auto stats = hj_residual_probe(game, grid, oracle, probes, dt);
        CHECK(stats.max_abs <= prev + 1e-12);
        prev = stats.max_abs;
    }
}

TEST_CASE("hj probe one step from the horizon unfolds sigma") {
    auto game = pursuit_game();
    auto grid = MasterGrid::uniform(1.0, 4);
    auto part = uniform_partition(grid, 0, 4);
    TreeValue tv(game, grid, part, Side::Lower);
    std::function<double(const Position&)> oracle = [&](const Position& p) {
        return tv.value(p);
    };
    std::mt19937_64 rng(12);
    auto probe = random_gk_position(game.kernel, grid, game.y, {1, game.c}, 3, rng);
    auto stats = hj_residual_probe(game, grid, oracle, std::vector<Position>{probe}, 0.25);

    // chi = 0: the dt-term must equal [sigma(frozen extension) - phi] / dt
    Position frozen;
    frozen.t_index = 4;
    frozen.ell = Mat::Zero(1, 4);
    frozen.ell.leftCols(3) = probe.ell;
    frozen.w = extend_a(probe, game.kernel, grid, game.y);
    const double want = (game.sigma(frozen.w, grid) - tv.value(probe)) / 0.25;
    CHECK(stats.rows[0].dt_term == Approx(want).margin(1e-12));
}
