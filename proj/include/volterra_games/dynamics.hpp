#pragma once

// Controlled motions of the Volterra system
//   x(tau) = a(tau; t, w(.)) + integral over [t, tau] of K(tau, xi) f(xi, x, u, v)
// solved node by node with implicit product Euler: generators are frozen per
// cell at the cell's right node, and the diagonal cell is resolved by Picard
// iteration. Kernel cell integrals are exact, so a piecewise-constant f is
// reproduced without quadrature error.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "volterra_games/game.hpp"

namespace volterra_games {

struct SolverOptions {
    double picard_tol = 1e-12;
    int picard_cap = 100;
};

struct Motion {
    Position start;
    Mat x;    ///< n x (N + 1), nodes of [0, T]
    Mat ell;  ///< n x N; history generator before t, recorded f values after
    std::vector<Vec> u_rec;  ///< per cell, empty before the start time
    std::vector<Vec> v_rec;
};

/// Wraps the motion history up to a node as a Position.
inline Position position_from_motion(const Motion& m, int node_index) {
    Position p;
    p.t_index = node_index;
    p.ell = m.ell.leftCols(node_index);
    p.w = m.x.leftCols(node_index + 1);
    return p;
}

namespace detail {

/// Forward product-Euler sweep over nodes (t, end]; x and ell arrive prefilled
/// with the start history plus free continuation and leave holding the motion.
inline void advance_motion(const GameSpec& game, const MasterGrid& grid, int t, int end,
                           std::span<const Vec> u_seq, std::span<const Vec> v_seq, Mat& x,
                           Mat& ell, const SolverOptions& opts) {
    const KernelSpec& kernel = game.kernel;
    for (int j = t + 1; j <= end; ++j) {
        const double tau = grid.nodes[j];
        Vec base = x.col(j);  // a(tau; t, w(.)) before this sweep touches it
        for (int i = t; i < j - 1; ++i)
            base += kernel.cell_integral(tau, grid.nodes[i], grid.nodes[i + 1]) * ell.col(i);

        const Mat W = kernel.cell_integral(tau, grid.nodes[j - 1], tau);
        const Vec& u = u_seq[j - 1 - t];
        const Vec& v = v_seq[j - 1 - t];
        Vec xj = x.col(j - 1);  // predictor
        bool converged = false;
        for (int it = 0; it < opts.picard_cap; ++it) {
            const Vec fx = game.f(tau, xj, u, v);
            if (!fx.allFinite())
                throw std::runtime_error("solve_motion: f is not finite at node " +
                                         std::to_string(j));
            Vec xn = base + W * fx;
            const double diff = (xn - xj).norm();
            xj = std::move(xn);
            if (diff <= opts.picard_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw std::runtime_error("solve_motion: Picard iteration stalled at node " +
                                     std::to_string(j));
        x.col(j) = xj;
        ell.col(j - 1) = game.f(tau, xj, u, v);
    }
}

}  // namespace detail

inline Motion solve_motion(const GameSpec& game, const MasterGrid& grid, const Position& pos,
                           std::span<const Vec> u_seq, std::span<const Vec> v_seq,
                           const SolverOptions& opts = {}) {
    const int N = grid.cell_count();
    const int t = pos.t_index;
    if (static_cast<int>(u_seq.size()) != N - t || static_cast<int>(v_seq.size()) != N - t)
        throw std::invalid_argument("solve_motion: control cell counts must match [t, T]");

    Motion m;
    m.start = pos;
    m.x = extend_a(pos, game.kernel, grid, game.y);
    m.ell = Mat::Zero(game.kernel.n, N);
    m.ell.leftCols(t) = pos.ell;
    detail::advance_motion(game, grid, t, N, u_seq, v_seq, m.x, m.ell, opts);
    m.u_rec.resize(N);
    m.v_rec.resize(N);
    for (int i = t; i < N; ++i) {
        m.u_rec[i] = u_seq[i - t];
        m.v_rec[i] = v_seq[i - t];
    }
    return m;
}

/// Partial solve: advances the position by exactly u_seq.size() cells and
/// returns the wrapped history. The workhorse of the game-tree recursions.
inline Position solve_motion_to(const GameSpec& game, const MasterGrid& grid,
                                const Position& pos, std::span<const Vec> u_seq,
                                std::span<const Vec> v_seq, const SolverOptions& opts = {}) {
    const int t = pos.t_index;
    const int end = t + static_cast<int>(u_seq.size());
    if (end > grid.cell_count() || u_seq.size() != v_seq.size())
        throw std::invalid_argument("solve_motion_to: control cells exceed the grid");

    Mat x(game.kernel.n, end + 1);
    {
        Mat a = extend_a(pos, game.kernel, grid, game.y);
        x = a.leftCols(end + 1);
    }
    Mat ell = Mat::Zero(game.kernel.n, end);
    ell.leftCols(t) = pos.ell;
    detail::advance_motion(game, grid, t, end, u_seq, v_seq, x, ell, opts);
    Position out;
    out.t_index = end;
    out.ell = std::move(ell);
    out.w = std::move(x);
    return out;
}

/// Left-endpoint rectangle rule for the running cost over node range [from, to).
inline double stage_cost(const GameSpec& game, const MasterGrid& grid, const Motion& m,
                         int from_node, int to_node) {
    double acc = 0.0;
    for (int i = from_node; i < to_node; ++i)
        acc += game.chi(grid.nodes[i], m.x.col(i), m.u_rec[i], m.v_rec[i]) * grid.step(i);
    return acc;
}

/// Cost functional: sigma over the full trajectory plus the running cost
/// accumulated from the motion's start time.
inline double cost_J(const GameSpec& game, const MasterGrid& grid, const Motion& m) {
    return game.sigma(m.x, grid) + stage_cost(game, grid, m, m.start.t_index, grid.cell_count());
}

/// Solves once over [t, T], then re-solves through an intermediate wrap at the
/// split node; returns the max node-wise deviation between the two runs.
inline double check_semigroup(const GameSpec& game, const MasterGrid& grid, const Position& pos,
                              std::span<const Vec> u_seq, std::span<const Vec> v_seq,
                              int split_index, const SolverOptions& opts = {}) {
    const int t = pos.t_index;
    if (split_index < t || split_index > grid.cell_count())
        throw std::invalid_argument("check_semigroup: split must lie in [t, T]");

    Motion whole = solve_motion(game, grid, pos, u_seq, v_seq, opts);

    const std::size_t head = static_cast<std::size_t>(split_index - t);
    Position mid = solve_motion_to(game, grid, pos, u_seq.subspan(0, head),
                                   v_seq.subspan(0, head), opts);
    Motion second = solve_motion(game, grid, mid, u_seq.subspan(head), v_seq.subspan(head), opts);

    double dev = 0.0;
    for (int j = 0; j <= grid.cell_count(); ++j)
        dev = std::max(dev, (whole.x.col(j) - second.x.col(j)).norm());
    return dev;
}

struct AprioriReport {
    double sup_norm = 0.0;
    double bound = 0.0;
    double slack = 1e-6;
    bool ok = false;
};

/// Diagnostic against the Gronwall/Mittag-Leffler a priori estimate; reports,
/// does not assert.
inline AprioriReport check_apriori_bound(const Motion& m, const GameSpec& game,
                                         const MasterGrid& grid, double slack = 1e-6,
                                         const SpecialFnConfig& cfg = {}) {
    AprioriReport rep;
    rep.slack = slack;
    for (int j = 0; j <= grid.cell_count(); ++j)
        rep.sup_norm = std::max(rep.sup_norm, m.x.col(j).norm());
    double y_sup = 0.0;
    for (double tau : grid.nodes) y_sup = std::max(y_sup, game.y(tau).norm());
    const double kappa = kappa_star_or_compute(game.kernel, grid.nodes);
    rep.bound = gronwall_bound(y_sup, kappa, game.c, game.kernel.alpha, grid.T(), cfg);
    rep.ok = rep.sup_norm <= rep.bound + slack;
    return rep;
}

}  // namespace volterra_games
