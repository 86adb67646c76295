#pragma once

// Game data: dynamics f, running cost chi, terminal functional sigma, finite
// control grids standing in for the compact sets P and Q, and the Hamiltonians
// built from h(tau, x, u, v, s) = <s, f> + chi.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "volterra_games/position.hpp"

namespace volterra_games {

struct GameSpec {
    int n = 1;
    double T = 1.0;
    KernelSpec kernel;
    FreeTerm y;
    std::function<Vec(double, const Vec&, const Vec&, const Vec&)> f;     ///< (tau, x, u, v)
    std::function<double(double, const Vec&, const Vec&, const Vec&)> chi;
    std::function<double(const Mat&, const MasterGrid&)> sigma;           ///< full node samples
    std::vector<Vec> P_grid;
    std::vector<Vec> Q_grid;
    double c = 1.0;  ///< growth constant: ||f|| <= c (1 + ||x||)
    Vec u_star;      ///< formal terminal controls
    Vec v_star;
};

inline void validate_game(const GameSpec& game) {
    if (game.P_grid.empty() || game.Q_grid.empty())
        throw std::invalid_argument("GameSpec: control grids must be nonempty");
    if (!(game.c > 0.0)) throw std::invalid_argument("GameSpec: growth constant must be positive");
    if (!game.f || !game.chi || !game.sigma || !game.y)
        throw std::invalid_argument("GameSpec: f, chi, sigma, y must all be set");
}

/// Probe the declared growth bound ||f|| <= c (1 + ||x||) on random samples.
/// Returns the worst ratio ||f|| / (c (1 + ||x||)); anything <= 1 is conforming.
inline double probe_growth_bound(const GameSpec& game, std::mt19937_64& rng,
                                 int samples = 200, double x_radius = 5.0) {
    std::uniform_real_distribution<double> ut(0.0, game.T), ux(-x_radius, x_radius);
    std::uniform_int_distribution<std::size_t> pu(0, game.P_grid.size() - 1),
        qv(0, game.Q_grid.size() - 1);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        Vec x(game.n);
        for (int r = 0; r < game.n; ++r) x(r) = ux(rng);
        const Vec& u = game.P_grid[pu(rng)];
        const Vec& v = game.Q_grid[qv(rng)];
        const double num = game.f(ut(rng), x, u, v).norm();
        worst = std::max(worst, num / (game.c * (1.0 + x.norm())));
    }
    return worst;
}

inline double hamiltonian_h(const GameSpec& game, double tau, const Vec& x, const Vec& u,
                            const Vec& v, const Vec& s) {
    return s.dot(game.f(tau, x, u, v)) + game.chi(tau, x, u, v);
}

struct HamiltonianValue {
    double lower = 0.0;  ///< max over Q of min over P
    double upper = 0.0;  ///< min over P of max over Q
    double gap() const { return upper - lower; }
};

/// Exhaustive enumeration over the control grids.
inline HamiltonianValue hamiltonians(const GameSpec& game, double tau, const Vec& x,
                                     const Vec& s) {
    HamiltonianValue out;
    out.lower = -std::numeric_limits<double>::infinity();
    out.upper = std::numeric_limits<double>::infinity();
    for (const Vec& v : game.Q_grid) {
        double inner = std::numeric_limits<double>::infinity();
        for (const Vec& u : game.P_grid)
            inner = std::min(inner, hamiltonian_h(game, tau, x, u, v, s));
        out.lower = std::max(out.lower, inner);
    }
    for (const Vec& u : game.P_grid) {
        double inner = -std::numeric_limits<double>::infinity();
        for (const Vec& v : game.Q_grid)
            inner = std::max(inner, hamiltonian_h(game, tau, x, u, v, s));
        out.upper = std::min(out.upper, inner);
    }
    return out;
}

struct IsaacsSample {
    double tau;
    Vec x;
    Vec s;
};

struct IsaacsReport {
    double max_gap = 0.0;
    double min_gap = 0.0;
    std::size_t samples = 0;
    bool pass = false;
};

inline IsaacsReport check_isaacs(const GameSpec& game, std::span<const IsaacsSample> samples,
                                 double isaacs_tol = 1e-9) {
    if (samples.empty()) throw std::invalid_argument("check_isaacs: sample list is empty");
    IsaacsReport rep;
    rep.samples = samples.size();
    rep.max_gap = -std::numeric_limits<double>::infinity();
    rep.min_gap = std::numeric_limits<double>::infinity();
    for (const auto& smp : samples) {
        const double g = hamiltonians(game, smp.tau, smp.x, smp.s).gap();
        rep.max_gap = std::max(rep.max_gap, g);
        rep.min_gap = std::min(rep.min_gap, g);
    }
    rep.pass = rep.max_gap <= isaacs_tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Builtin game families
// ---------------------------------------------------------------------------

inline std::vector<Vec> scalar_grid(const std::vector<double>& values) {
    std::vector<Vec> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(Vec::Constant(1, v));
    return out;
}

/// Scalar pursuit: dx = u + v, terminal cost |x(T)|, optional running cost weight
/// on x^2. Growth constant is the largest |u + v| on the grids (f is state-free).
inline GameSpec make_linear_pursuit_game(KernelSpec kernel, double T, double x0,
                                         std::vector<Vec> P_grid, std::vector<Vec> Q_grid,
                                         double chi_weight = 0.0) {
    GameSpec g;
    g.n = 1;
    g.T = T;
    g.kernel = std::move(kernel);
    g.y = constant_free_term(Vec::Constant(1, x0));
    g.f = [](double, const Vec&, const Vec& u, const Vec& v) -> Vec {
        return Vec::Constant(1, u(0) + v(0));
    };
    g.chi = [chi_weight](double, const Vec& x, const Vec&, const Vec&) {
        return chi_weight * x.squaredNorm();
    };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x.col(x.cols() - 1).norm(); };
    g.P_grid = std::move(P_grid);
    g.Q_grid = std::move(Q_grid);
    double c = 0.0;
    for (const Vec& u : g.P_grid)
        for (const Vec& v : g.Q_grid) c = std::max(c, std::abs(u(0) + v(0)));
    g.c = std::max(c, 1e-6);
    g.u_star = g.P_grid.front();
    g.v_star = g.Q_grid.front();
    validate_game(g);
    return g;
}

/// Scalar bilinear interaction: dx = u * v, terminal cost x(T). Violates the
/// Isaacs condition on sign-symmetric grids.
inline GameSpec make_bilinear_game(KernelSpec kernel, double T, double x0,
                                   std::vector<Vec> P_grid, std::vector<Vec> Q_grid) {
    GameSpec g;
    g.n = 1;
    g.T = T;
    g.kernel = std::move(kernel);
    g.y = constant_free_term(Vec::Constant(1, x0));
    g.f = [](double, const Vec&, const Vec& u, const Vec& v) -> Vec {
        return Vec::Constant(1, u(0) * v(0));
    };
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x(0, x.cols() - 1); };
    g.P_grid = std::move(P_grid);
    g.Q_grid = std::move(Q_grid);
    double c = 0.0;
    for (const Vec& u : g.P_grid)
        for (const Vec& v : g.Q_grid) c = std::max(c, std::abs(u(0) * v(0)));
    g.c = std::max(c, 1e-6);
    g.u_star = g.P_grid.front();
    g.v_star = g.Q_grid.front();
    validate_game(g);
    return g;
}

/// Uncontrolled linear dynamics f = lambda x with singleton control grids;
/// the Mittag-Leffler benchmark when paired with a fractional kernel.
inline GameSpec make_fractional_linear_game(KernelSpec kernel, double T, double x0,
                                            double lambda) {
    GameSpec g;
    g.n = kernel.n;
    g.T = T;
    g.kernel = std::move(kernel);
    g.y = constant_free_term(Vec::Constant(g.n, x0));
    g.f = [lambda](double, const Vec& x, const Vec&, const Vec&) -> Vec { return lambda * x; };
    g.chi = [](double, const Vec&, const Vec&, const Vec&) { return 0.0; };
    g.sigma = [](const Mat& x, const MasterGrid&) { return x.col(x.cols() - 1).norm(); };
    g.P_grid = {Vec::Zero(1)};
    g.Q_grid = {Vec::Zero(1)};
    g.c = std::max(std::abs(lambda), 1e-6);
    g.u_star = g.P_grid.front();
    g.v_star = g.Q_grid.front();
    validate_game(g);
    return g;
}

}  // namespace volterra_games
