#pragma once

// Lower/upper game values by backward induction on the tree of piecewise-
// constant control choices over a partition. No position-space gridding:
// hereditary dynamics makes states history-dependent, so the recursion runs
// on the exact reachable tree, memoized by the generator history (positions
// with bitwise-equal ell are the same position).

#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "volterra_games/dynamics.hpp"

namespace volterra_games {

struct PartitionSpec {
    std::vector<int> node_indices;  ///< ascending master-node indices; back() is the horizon

    int steps() const { return static_cast<int>(node_indices.size()) - 1; }
    double diameter(const MasterGrid& grid) const {
        double d = 0.0;
        for (std::size_t j = 0; j + 1 < node_indices.size(); ++j)
            d = std::max(d, grid.nodes[node_indices[j + 1]] - grid.nodes[node_indices[j]]);
        return d;
    }
};

inline PartitionSpec make_partition(const MasterGrid& grid, std::vector<int> node_indices) {
    if (node_indices.size() < 1)
        throw std::invalid_argument("make_partition: need at least one node");
    for (std::size_t j = 0; j + 1 < node_indices.size(); ++j)
        if (!(node_indices[j] < node_indices[j + 1]))
            throw std::invalid_argument("make_partition: indices must ascend");
    if (node_indices.front() < 0 || node_indices.back() != grid.cell_count())
        throw std::invalid_argument("make_partition: partition must end at the horizon");
    PartitionSpec p;
    p.node_indices = std::move(node_indices);
    return p;
}

/// Splits the cells of [start, T] into the given number of steps, as evenly as
/// the master grid allows.
inline PartitionSpec uniform_partition(const MasterGrid& grid, int start_index, int steps) {
    const int cells = grid.cell_count() - start_index;
    if (steps < 1 || cells < steps)
        throw std::invalid_argument("uniform_partition: need at least one cell per step");
    std::vector<int> idx(steps + 1);
    for (int j = 0; j <= steps; ++j)
        idx[j] = start_index + (cells * j) / steps;
    return make_partition(grid, std::move(idx));
}

enum class Side { Lower, Upper };

struct ValueEstimate {
    double lower = 0.0;
    double upper = 0.0;
    PartitionSpec partition;
    long node_count = 0;
    double gap() const { return upper - lower; }
};

class BudgetExceeded : public std::runtime_error {
  public:
    long expansions;
    explicit BudgetExceeded(long used)
        : std::runtime_error("tree value: node budget exceeded after " + std::to_string(used) +
                             " expansions"),
          expansions(used) {}
};

struct TreeStats {
    long expansions = 0;  ///< successor positions constructed
    long memo_hits = 0;
};

/// Backward-induction value oracle over one partition and one informational
/// order. Reusable across queries: any position whose time lies on the
/// partition (or between two of its nodes) can be evaluated, and bitwise-equal
/// histories share one memo entry.
class TreeValue {
  public:
    TreeValue(const GameSpec& game, const MasterGrid& grid, PartitionSpec partition, Side side,
              SolverOptions opts = {}, long budget = 2'000'000)
        : game_(game), grid_(grid), partition_(std::move(partition)), side_(side), opts_(opts),
          budget_(budget) {
        validate_game(game_);
    }

    double value(const Position& pos) { return solve(pos); }

    const TreeStats& stats() const { return stats_; }
    Side side() const { return side_; }
    const PartitionSpec& partition() const { return partition_; }

  private:
    std::string key_of(const Position& pos) const {
        std::string key(sizeof(int) + sizeof(double) * pos.ell.size(), '\0');
        std::memcpy(key.data(), &pos.t_index, sizeof(int));
        if (pos.ell.size() > 0)
            std::memcpy(key.data() + sizeof(int), pos.ell.data(),
                        sizeof(double) * pos.ell.size());
        return key;
    }

    int next_node_after(int t_index) const {
        for (int idx : partition_.node_indices)
            if (idx > t_index) return idx;
        throw std::invalid_argument("TreeValue: position lies at or beyond the horizon");
    }

    double solve(const Position& pos) {
        if (pos.t_index == grid_.cell_count()) return game_.sigma(pos.w, grid_);

        const std::string key = key_of(pos);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (auto it = memo_.find(key); it != memo_.end()) {
                ++stats_.memo_hits;
                return it->second;
            }
        }

        const int next = next_node_after(pos.t_index);
        const int cells = next - pos.t_index;
        const std::size_t nu = game_.P_grid.size();
        const std::size_t nv = game_.Q_grid.size();
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stats_.expansions += static_cast<long>(nu * nv);
            if (stats_.expansions > budget_) throw BudgetExceeded(stats_.expansions);
        }

        // stage value for every control pair on this step
        std::vector<double> vals(nu * nv);
        for (std::size_t iu = 0; iu < nu; ++iu) {
            std::vector<Vec> useq(cells, game_.P_grid[iu]);
            for (std::size_t iv = 0; iv < nv; ++iv) {
                std::vector<Vec> vseq(cells, game_.Q_grid[iv]);
                Position child = solve_motion_to(game_, grid_, pos, useq, vseq, opts_);
                double stage = 0.0;
                for (int i = pos.t_index; i < next; ++i)
                    stage += game_.chi(grid_.nodes[i], child.w.col(i), game_.P_grid[iu],
                                       game_.Q_grid[iv]) *
                             grid_.step(i);
                vals[iu * nv + iv] = stage + solve(child);
            }
        }

        double result;
        if (side_ == Side::Lower) {  // max over v of min over u
            result = -std::numeric_limits<double>::infinity();
            for (std::size_t iv = 0; iv < nv; ++iv) {
                double inner = std::numeric_limits<double>::infinity();
                for (std::size_t iu = 0; iu < nu; ++iu)
                    inner = std::min(inner, vals[iu * nv + iv]);
                result = std::max(result, inner);
            }
        } else {  // min over u of max over v
            result = std::numeric_limits<double>::infinity();
            for (std::size_t iu = 0; iu < nu; ++iu) {
                double inner = -std::numeric_limits<double>::infinity();
                for (std::size_t iv = 0; iv < nv; ++iv)
                    inner = std::max(inner, vals[iu * nv + iv]);
                result = std::min(result, inner);
            }
        }

        std::lock_guard<std::mutex> lock(mutex_);
        memo_.emplace(std::move(key), result);
        return result;
    }

    const GameSpec& game_;
    const MasterGrid& grid_;
    PartitionSpec partition_;
    Side side_;
    SolverOptions opts_;
    long budget_;
    TreeStats stats_;
    std::unordered_map<std::string, double> memo_;
    std::mutex mutex_;
};

/// One-shot tree value from a position whose time is the partition start.
inline double tree_value(const GameSpec& game, const MasterGrid& grid, const Position& pos,
                         const PartitionSpec& partition, Side side,
                         const SolverOptions& opts = {}, long budget = 2'000'000) {
    if (pos.t_index != partition.node_indices.front())
        throw std::invalid_argument("tree_value: position must sit at the partition start");
    TreeValue tv(game, grid, partition, side, opts, budget);
    return tv.value(pos);
}

struct ValueGapStudy {
    std::vector<ValueEstimate> rows;
    bool gap_nonincreasing = true;  ///< along the given partition order
};

inline ValueGapStudy value_gap_study(const GameSpec& game, const MasterGrid& grid,
                                     const Position& pos,
                                     std::span<const PartitionSpec> partitions,
                                     const SolverOptions& opts = {}, long budget = 2'000'000) {
    ValueGapStudy study;
    for (const auto& part : partitions) {
        ValueEstimate est;
        est.partition = part;
        TreeValue lo(game, grid, part, Side::Lower, opts, budget);
        TreeValue hi(game, grid, part, Side::Upper, opts, budget);
        est.lower = lo.value(pos);
        est.upper = hi.value(pos);
        est.node_count = lo.stats().expansions + hi.stats().expansions;
        if (!study.rows.empty() && est.gap() > study.rows.back().gap() + 1e-12)
            study.gap_nonincreasing = false;
        study.rows.push_back(std::move(est));
    }
    return study;
}

struct HjProbeRow {
    double t = 0.0;
    double dt_term = 0.0;      ///< forward difference along the frozen extension
    double hamiltonian = 0.0;  ///< from directional estimates of <grad phi, f>
    double residual = 0.0;
    double order_gap = 0.0;    ///< minimax vs maximin of the directional Hamiltonian
};

struct HjResidualStats {
    std::vector<HjProbeRow> rows;
    double max_abs = 0.0;
    double mean_abs = 0.0;
};

/// Finite-difference probe of the path-dependent Hamilton-Jacobi equation:
/// the time derivative is read along the frozen extension (generator zero, so
/// the gradient term vanishes there), directional derivatives come from
/// constant-control motions, and the Hamiltonian is assembled from them.
inline HjResidualStats hj_residual_probe(const GameSpec& game, const MasterGrid& grid,
                                         const std::function<double(const Position&)>& oracle,
                                         std::span<const Position> probes, double dt,
                                         const SolverOptions& opts = {}) {
    HjResidualStats stats;
    for (const Position& pos : probes) {
        const double t = pos.t(grid);
        const int target = grid.index_of(t + dt);
        const int cells = target - pos.t_index;
        if (cells < 1) throw std::invalid_argument("hj_residual_probe: dt below grid step");

        const double phi0 = oracle(pos);

        Position frozen;
        frozen.t_index = target;
        frozen.ell = Mat::Zero(game.kernel.n, target);
        frozen.ell.leftCols(pos.t_index) = pos.ell;
        frozen.w = extend_a(pos, game.kernel, grid, game.y).leftCols(target + 1);
        const double dt_term = (oracle(frozen) - phi0) / dt;

        const std::size_t nu = game.P_grid.size(), nv = game.Q_grid.size();
        std::vector<double> hvals(nu * nv);
        for (std::size_t iu = 0; iu < nu; ++iu) {
            std::vector<Vec> useq(cells, game.P_grid[iu]);
            for (std::size_t iv = 0; iv < nv; ++iv) {
                std::vector<Vec> vseq(cells, game.Q_grid[iv]);
                Position child = solve_motion_to(game, grid, pos, useq, vseq, opts);
                const double directional = (oracle(child) - phi0) / dt - dt_term;
                hvals[iu * nv + iv] =
                    directional +
                    game.chi(t, pos.w.col(pos.t_index), game.P_grid[iu], game.Q_grid[iv]);
            }
        }
        double lower = -std::numeric_limits<double>::infinity();
        for (std::size_t iv = 0; iv < nv; ++iv) {
            double inner = std::numeric_limits<double>::infinity();
            for (std::size_t iu = 0; iu < nu; ++iu) inner = std::min(inner, hvals[iu * nv + iv]);
            lower = std::max(lower, inner);
        }
        double upper = std::numeric_limits<double>::infinity();
        for (std::size_t iu = 0; iu < nu; ++iu) {
            double inner = -std::numeric_limits<double>::infinity();
            for (std::size_t iv = 0; iv < nv; ++iv) inner = std::max(inner, hvals[iu * nv + iv]);
            upper = std::min(upper, inner);
        }

        HjProbeRow row;
        row.t = t;
        row.dt_term = dt_term;
        row.hamiltonian = lower;
        row.residual = dt_term + lower;
        row.order_gap = upper - lower;
        stats.rows.push_back(row);
        stats.max_abs = std::max(stats.max_abs, std::abs(row.residual));
        stats.mean_abs += std::abs(row.residual);
    }
    if (!stats.rows.empty()) stats.mean_abs /= static_cast<double>(stats.rows.size());
    return stats;
}

}  // namespace volterra_games
