#pragma once

// Positions (t, w(.)) of the hereditary system, carried by their generator
// ell: a piecewise-constant n-vector per master-grid cell on [0, t). The
// history w is reconstructed from ell through the kernel, never the other way
// around; the inverse (first-kind) problem is deliberately not solved.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "volterra_games/kernel.hpp"

namespace volterra_games {

struct MasterGrid {
    std::vector<double> nodes;  ///< strictly ascending, nodes.front() == 0, nodes.back() == T

    static MasterGrid uniform(double T, int cells) {
        if (!(T > 0.0)) throw std::invalid_argument("MasterGrid: horizon must be positive");
        if (cells < 1) throw std::invalid_argument("MasterGrid: need at least one cell");
        MasterGrid g;
        g.nodes.resize(cells + 1);
        for (int i = 0; i <= cells; ++i) g.nodes[i] = T * i / cells;
        g.nodes.back() = T;
        return g;
    }

    static MasterGrid from_nodes(std::vector<double> nodes) {
        detail::validate_ascending_grid(nodes);
        if (nodes.front() != 0.0)
            throw std::invalid_argument("MasterGrid: first node must be 0");
        MasterGrid g;
        g.nodes = std::move(nodes);
        return g;
    }

    double T() const { return nodes.back(); }
    int cell_count() const { return static_cast<int>(nodes.size()) - 1; }
    int node_count() const { return static_cast<int>(nodes.size()); }
    double step(int i) const { return nodes[i + 1] - nodes[i]; }

    /// Exact node lookup; throws if t is not a node.
    int index_of(double t, double tol = 1e-12) const {
        for (int i = 0; i < node_count(); ++i)
            if (std::abs(nodes[i] - t) <= tol) return i;
        throw std::invalid_argument("MasterGrid: time is not a grid node");
    }
};

using FreeTerm = std::function<Vec(double)>;

inline FreeTerm constant_free_term(const Vec& y0) {
    return [y0](double) { return y0; };
}

struct Position {
    int t_index = 0;
    Mat ell;  ///< n x t_index, generator per cell of [0, t)
    Mat w;    ///< n x (t_index + 1), history at nodes of [0, t]

    double t(const MasterGrid& grid) const { return grid.nodes[t_index]; }
    int dim() const { return static_cast<int>(w.rows()); }
};

/// History at every node up to t_index:
/// w(tau_j) = y(tau_j) + sum over cells i < j of (cell integral of K) ell_i.
inline Mat reconstruct_w(const Mat& ell, const KernelSpec& kernel, const MasterGrid& grid,
                         const FreeTerm& y, int t_index) {
    if (t_index < 0 || t_index > grid.cell_count())
        throw std::out_of_range("reconstruct_w: t_index out of range");
    if (ell.cols() != t_index)
        throw std::invalid_argument("reconstruct_w: ell must have exactly t_index cells");
    Mat w(kernel.n, t_index + 1);
    for (int j = 0; j <= t_index; ++j) {
        const double tau = grid.nodes[j];
        Vec acc = y(tau);
        for (int i = 0; i < j; ++i)
            acc += kernel.cell_integral(tau, grid.nodes[i], grid.nodes[i + 1]) * ell.col(i);
        w.col(j) = acc;
    }
    return w;
}

inline Position make_position(Mat ell, const KernelSpec& kernel, const MasterGrid& grid,
                              const FreeTerm& y, int t_index) {
    Position p;
    p.t_index = t_index;
    p.w = reconstruct_w(ell, kernel, grid, y, t_index);
    p.ell = std::move(ell);
    return p;
}

/// The position (0, y(0)); ell is formally empty.
inline Position initial_position(const KernelSpec& kernel, const MasterGrid& grid,
                                 const FreeTerm& y) {
    return make_position(Mat(kernel.n, 0), kernel, grid, y, 0);
}

/// Extension a(.; t, w(.)): the trajectory on the whole horizon with the
/// forcing switched off after t. Equals w on [0, t].
inline Mat extend_a(const Position& pos, const KernelSpec& kernel, const MasterGrid& grid,
                    const FreeTerm& y) {
    const int N = grid.cell_count();
    Mat a(kernel.n, N + 1);
    a.leftCols(pos.t_index + 1) = pos.w;
    for (int j = pos.t_index + 1; j <= N; ++j) {
        const double tau = grid.nodes[j];
        Vec acc = y(tau);
        for (int i = 0; i < pos.t_index; ++i)
            acc += kernel.cell_integral(tau, grid.nodes[i], grid.nodes[i + 1]) * pos.ell.col(i);
        a.col(j) = acc;
    }
    return a;
}

/// Metric on the position space:
/// |t - t'| + max over master nodes tau of ||w(tau ^ t) - w'(tau ^ t')||.
inline double dist(const Position& p1, const Position& p2, const MasterGrid& grid) {
    if (p1.w.rows() != p2.w.rows())
        throw std::invalid_argument("dist: positions have different state dimension");
    double m = 0.0;
    for (int j = 0; j < grid.node_count(); ++j) {
        const int j1 = std::min(j, p1.t_index);
        const int j2 = std::min(j, p2.t_index);
        m = std::max(m, (p1.w.col(j1) - p2.w.col(j2)).norm());
    }
    return std::abs(p1.t(grid) - p2.t(grid)) + m;
}

struct GkParams {
    int k = 1;
    double c = 1.0;
};

/// Membership in the invariant set: ||ell_i|| <= k c (1 + ||w|| at the cell's
/// left node) for every cell.
inline bool in_Gk(const Position& pos, const GkParams& params) {
    if (params.k < 1 || !(params.c > 0.0))
        throw std::invalid_argument("in_Gk: need k >= 1 and c > 0");
    const double kc = static_cast<double>(params.k) * params.c;
    for (int i = 0; i < pos.t_index; ++i)
        if (pos.ell.col(i).norm() > kc * (1.0 + pos.w.col(i).norm())) return false;
    return true;
}

/// Random G_k position whose generator keeps one sign and at least half the
/// admissible magnitude on every cell. Pairs built with opposite signs are
/// well separated, which conditions gradient diagnostics.
inline Position random_drift_position(const KernelSpec& kernel, const MasterGrid& grid,
                                      const FreeTerm& y, const GkParams& params, int t_index,
                                      double sign, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.5, 1.0);
    const double kc = static_cast<double>(params.k) * params.c;
    const double unit = sign / std::sqrt(static_cast<double>(kernel.n));
    Mat ell(kernel.n, t_index);
    Mat w(kernel.n, t_index + 1);
    w.col(0) = y(grid.nodes[0]);
    for (int i = 0; i < t_index; ++i) {
        ell.col(i) = Vec::Constant(kernel.n, unit * mag(rng) * kc * (1.0 + w.col(i).norm()));
        const double tau = grid.nodes[i + 1];
        Vec acc = y(tau);
        for (int p = 0; p <= i; ++p)
            acc += kernel.cell_integral(tau, grid.nodes[p], grid.nodes[p + 1]) * ell.col(p);
        w.col(i + 1) = acc;
    }
    Position pos;
    pos.t_index = t_index;
    pos.ell = std::move(ell);
    pos.w = std::move(w);
    return pos;
}

/// Random position in G_k at a given node: generators are sampled cell by cell
/// inside the admissible ball, so membership holds by construction.
inline Position random_gk_position(const KernelSpec& kernel, const MasterGrid& grid,
                                   const FreeTerm& y, const GkParams& params, int t_index,
                                   std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> mag(0.0, 1.0);
    const double kc = static_cast<double>(params.k) * params.c;
    Mat ell(kernel.n, t_index);
    Mat w(kernel.n, t_index + 1);
    w.col(0) = y(grid.nodes[0]);
    for (int i = 0; i < t_index; ++i) {
        Vec dir(kernel.n);
        for (int r = 0; r < kernel.n; ++r) dir(r) = unit(rng);
        if (dir.norm() > 0.0) dir.normalize();
        ell.col(i) = dir * (mag(rng) * kc * (1.0 + w.col(i).norm()));
        const double tau = grid.nodes[i + 1];
        Vec acc = y(tau);
        for (int p = 0; p <= i; ++p)
            acc += kernel.cell_integral(tau, grid.nodes[p], grid.nodes[p + 1]) * ell.col(p);
        w.col(i + 1) = acc;
    }
    Position pos;
    pos.t_index = t_index;
    pos.ell = std::move(ell);
    pos.w = std::move(w);
    return pos;
}

}  // namespace volterra_games
