#pragma once

// Feedback strategies by extremal aiming: the smoothed values rho_eps^-/+
// pick a reference position among tree-reachable candidates, the coinvariant
// gradient of mu_eps at that reference supplies the aiming direction, and the
// control is the corresponding extremum of h over the control grids.
//
// A strategy only ever sees the Position at a partition node; the adversary
// may see the full history plus the announced control.

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "volterra_games/lyapunov.hpp"
#include "volterra_games/value.hpp"

namespace volterra_games {

enum class RhoSign { Minus, Plus };

struct StrategyParams {
    double epsilon = 0.5;
    NuParams nu_params;
    PartitionSpec value_partition;  ///< root partition used by the internal value oracle
    int candidate_cap = 500;
    Side oracle_side = Side::Lower;  ///< either side is licensed under Isaacs; gap is reported
    long budget = 2'000'000;
};

/// argmin over P of max over Q of h(tau, x, u, v, s); ties take the lowest
/// grid index.
inline Vec extremal_control_u(const GameSpec& game, double tau, const Vec& x, const Vec& s) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t iu = 0; iu < game.P_grid.size(); ++iu) {
        double inner = -std::numeric_limits<double>::infinity();
        for (const Vec& v : game.Q_grid)
            inner = std::max(inner, hamiltonian_h(game, tau, x, game.P_grid[iu], v, s));
        if (inner < best) {
            best = inner;
            arg = iu;
        }
    }
    return game.P_grid[arg];
}

/// argmax over Q of min over P of h(tau, x, u, v, s); ties take the lowest
/// grid index.
inline Vec extremal_control_v(const GameSpec& game, double tau, const Vec& x, const Vec& s) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t iv = 0; iv < game.Q_grid.size(); ++iv) {
        double inner = std::numeric_limits<double>::infinity();
        for (const Vec& u : game.P_grid)
            inner = std::min(inner, hamiltonian_h(game, tau, x, u, game.Q_grid[iv], s));
        if (inner > best) {
            best = inner;
            arg = iv;
        }
    }
    return game.Q_grid[arg];
}

/// Shared state for strategy evaluation: the tree-value oracle, the candidate
/// sets of tree-reachable positions per time node, and their extensions.
/// Thread-safe; all caches are keyed by bitwise generator histories.
class StrategyContext {
  public:
    StrategyContext(const GameSpec& game, const MasterGrid& grid, StrategyParams params,
                    SolverOptions opts = {})
        : game_(game), grid_(grid), params_(std::move(params)), opts_(opts),
          oracle_(game, grid, params_.value_partition, params_.oracle_side, opts,
                  params_.budget),
          root_(initial_position(game.kernel, grid, game.y)) {
        if (params_.value_partition.node_indices.front() != 0)
            throw std::invalid_argument("StrategyContext: value partition must start at 0");
    }

    const GameSpec& game() const { return game_; }
    const StrategyParams& params() const { return params_; }
    double root_value() { return oracle_.value(root_); }
    TreeValue& oracle() { return oracle_; }

    /// Smoothed value and its reference position. The current history w is
    /// always a candidate and wins ties, with its diagonal nu term short-
    /// circuited to the exact zero.
    std::pair<double, Position> rho_eps(const Position& pos, RhoSign sign) {
        const double eps = params_.epsilon;
        const Mat a_w = extend_a(pos, game_.kernel, grid_, game_.y);

        double best = oracle_.value(pos);
        Position best_pos = pos;

        const auto& [cands, exts] = candidates_at(pos.t_index);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (same_history(cands[i], pos)) continue;
            const double nu_val = nu_from_extensions(a_w, exts[i], params_.nu_params, grid_);
            const double rho_hat = oracle_.value(cands[i]);
            const double score =
                (sign == RhoSign::Minus) ? rho_hat + nu_val / eps : rho_hat - nu_val / eps;
            const bool improves = (sign == RhoSign::Minus) ? score < best : score > best;
            if (improves) {
                best = score;
                best_pos = cands[i];
            }
        }
        return {best, best_pos};
    }

    /// First player's extremal-aiming strategy U0_eps.
    Vec strategy_U0(const Position& pos) {
        if (pos.t_index >= grid_.cell_count())
            throw std::invalid_argument("strategy_U0: position at the horizon");
        auto [value, ref] = rho_eps(pos, RhoSign::Minus);
        Vec s = aiming_direction(pos, ref);
        return extremal_control_u(game_, pos.t(grid_), pos.w.col(pos.t_index), s);
    }

    /// Second player's extremal-aiming strategy V0_eps.
    Vec strategy_V0(const Position& pos) {
        if (pos.t_index >= grid_.cell_count())
            throw std::invalid_argument("strategy_V0: position at the horizon");
        auto [value, ref] = rho_eps(pos, RhoSign::Plus);
        Vec s = -aiming_direction(pos, ref);
        return extremal_control_v(game_, pos.t(grid_), pos.w.col(pos.t_index), s);
    }

  private:
    static bool same_history(const Position& a, const Position& b) {
        return a.t_index == b.t_index && a.ell.size() == b.ell.size() &&
               (a.ell.array() == b.ell.array()).all();
    }

    Vec aiming_direction(const Position& pos, const Position& ref) {
        if (same_history(ref, pos)) return Vec::Zero(game_.kernel.n);
        const Mat a1 = extend_a(pos, game_.kernel, grid_, game_.y);
        const Mat a2 = extend_a(ref, game_.kernel, grid_, game_.y);
        GradMu g = grad_mu_from_extensions(pos.t_index, a1, a2, params_.nu_params, game_.kernel,
                                           grid_);
        return g.vector / params_.epsilon;
    }

    using Level = std::pair<std::vector<Position>, std::vector<Mat>>;

    /// Tree-reachable positions at a time node under piecewise-constant
    /// controls on the value partition, deduplicated by generator history and
    /// capped by deterministic stride subsampling. Each level builds on the
    /// previous (already capped) one.
    const Level& candidates_at(int t_index) {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        return candidates_at_locked(t_index);
    }

    const Level& candidates_at_locked(int t_index) {
        if (auto it = levels_.find(t_index); it != levels_.end()) return it->second;

        Level level;
        if (t_index == 0) {
            level.first.push_back(root_);
        } else {
            int prev = 0;
            for (int idx : params_.value_partition.node_indices)
                if (idx < t_index) prev = std::max(prev, idx);
            const Level& base = candidates_at_locked(prev);
            const int cells = t_index - prev;
            std::vector<Position> next;
            for (const Position& parent : base.first) {
                for (const Vec& u : game_.P_grid) {
                    std::vector<Vec> useq(cells, u);
                    for (const Vec& v : game_.Q_grid) {
                        std::vector<Vec> vseq(cells, v);
                        Position child = solve_motion_to(game_, grid_, parent, useq, vseq, opts_);
                        bool dup = false;
                        for (const Position& seen : next)
                            if (same_history(seen, child)) {
                                dup = true;
                                break;
                            }
                        if (!dup) next.push_back(std::move(child));
                    }
                }
            }
            if (static_cast<int>(next.size()) > params_.candidate_cap) {
                std::vector<Position> capped;
                capped.reserve(params_.candidate_cap);
                const double stride =
                    static_cast<double>(next.size()) / params_.candidate_cap;
                for (int k = 0; k < params_.candidate_cap; ++k)
                    capped.push_back(next[static_cast<std::size_t>(k * stride)]);
                next = std::move(capped);
            }
            level.first = std::move(next);
        }
        for (const Position& p : level.first)
            level.second.push_back(extend_a(p, game_.kernel, grid_, game_.y));
        return levels_.emplace(t_index, std::move(level)).first->second;
    }

    const GameSpec& game_;
    const MasterGrid& grid_;
    StrategyParams params_;
    SolverOptions opts_;
    TreeValue oracle_;
    Position root_;
    std::map<int, Level> levels_;  // node-based: references stay valid across inserts
    std::recursive_mutex mutex_;
};

enum class LawSide { First, Second };

struct LawRun {
    Motion motion;
    double J = 0.0;
    LawSide strategy_side = LawSide::First;
    PartitionSpec partition;
    std::string adversary_id;
};

/// Adversary interface: sees the position and the announced control of the
/// strategy side (the worst case), answers with its own control for the step.
using Adversary = std::function<Vec(const Position&, const Vec& announced)>;

/// Open-loop adversary: a fixed control per partition step.
inline Adversary open_loop_adversary(const PartitionSpec& partition, std::vector<Vec> controls) {
    if (controls.size() != static_cast<std::size_t>(partition.steps()))
        throw std::invalid_argument("open_loop_adversary: one control per step required");
    return [partition, controls = std::move(controls)](const Position& pos, const Vec&) -> Vec {
        for (std::size_t j = 0; j + 1 < partition.node_indices.size(); ++j)
            if (partition.node_indices[j] == pos.t_index) return controls[j];
        throw std::invalid_argument("open_loop_adversary: query off the partition");
    };
}

/// Step-by-step control law: at each partition node the strategy reads the
/// history, its control is held on the step, the adversary answers, and the
/// motion advances on master cells.
inline LawRun run_control_law(const GameSpec& game, const MasterGrid& grid, LawSide side,
                              const std::function<Vec(const Position&)>& strategy,
                              const PartitionSpec& partition, const Adversary& adversary,
                              const std::string& adversary_id = "",
                              const SolverOptions& opts = {}) {
    const auto& idx = partition.node_indices;
    Position pos = initial_position(game.kernel, grid, game.y);
    if (idx.front() != 0)
        throw std::invalid_argument("run_control_law: partition must start at 0");

    std::vector<Vec> u_cells(grid.cell_count()), v_cells(grid.cell_count());
    for (int j = 0; j + 1 < static_cast<int>(idx.size()); ++j) {
        Vec u, v;
        if (side == LawSide::First) {
            u = strategy(pos);
            v = adversary(pos, u);
        } else {
            v = strategy(pos);
            u = adversary(pos, v);
        }
        const int cells = idx[j + 1] - idx[j];
        std::vector<Vec> useq(cells, u), vseq(cells, v);
        for (int i = idx[j]; i < idx[j + 1]; ++i) {
            u_cells[i] = u;
            v_cells[i] = v;
        }
        pos = solve_motion_to(game, grid, pos, useq, vseq, opts);
    }

    LawRun run;
    run.motion.start = initial_position(game.kernel, grid, game.y);
    run.motion.x = pos.w;
    run.motion.ell = pos.ell;
    run.motion.u_rec = std::move(u_cells);
    run.motion.v_rec = std::move(v_cells);
    run.J = cost_J(game, grid, run.motion);
    run.strategy_side = side;
    run.partition = partition;
    run.adversary_id = adversary_id;
    return run;
}

struct ZetaCell {
    double epsilon = 0.0;
    double diameter = 0.0;
    LawSide side = LawSide::First;
    double guarantee = 0.0;  ///< sup J for the first player, inf J for the second
    double rho_hat = 0.0;
    double zeta = 0.0;
    bool pass = false;
    std::vector<double> run_costs;  ///< per adversary path, enumeration order
};

struct ZetaReport {
    std::vector<ZetaCell> cells;
    std::map<int, double> smallest_passing_epsilon;  ///< per partition index; -1 if none
    double oracle_gap = 0.0;  ///< max lower/upper gap of rho_hat over the partitions
};

namespace detail {

inline std::vector<std::vector<Vec>> control_paths(const std::vector<Vec>& grid_vals, int steps) {
    std::vector<std::vector<Vec>> paths{{}};
    for (int j = 0; j < steps; ++j) {
        std::vector<std::vector<Vec>> next;
        next.reserve(paths.size() * grid_vals.size());
        for (const auto& p : paths)
            for (const Vec& g : grid_vals) {
                auto q = p;
                q.push_back(g);
                next.push_back(std::move(q));
            }
        paths = std::move(next);
    }
    return paths;
}

template <typename Fn>
inline void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> cursor{0};
    const std::size_t workers = std::min(static_cast<std::size_t>(jobs), count);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Sweeps (epsilon, partition) cells: for each, the first player's law under
/// U0_eps is played against every open-loop adversary path (exhaustive sup),
/// and symmetrically for the second player (inf). Pass/fail is judged against
/// the tree value of the same partition.
inline ZetaReport zeta_optimality_experiment(const GameSpec& game, const MasterGrid& grid,
                                             double zeta, std::span<const double> eps_list,
                                             std::span<const PartitionSpec> partitions,
                                             std::optional<double> alpha_prime = std::nullopt,
                                             int candidate_cap = 500, long budget = 2'000'000,
                                             const SolverOptions& opts = {}, int jobs = 1) {
    ZetaReport report;
    for (std::size_t pi = 0; pi < partitions.size(); ++pi) {
        const PartitionSpec& part = partitions[pi];
        const Position root = initial_position(game.kernel, grid, game.y);
        const double rho_lo = tree_value(game, grid, root, part, Side::Lower, opts, budget);
        const double rho_hi = tree_value(game, grid, root, part, Side::Upper, opts, budget);
        report.oracle_gap = std::max(report.oracle_gap, rho_hi - rho_lo);
        const double rho_hat = rho_lo;

        const auto v_paths = detail::control_paths(game.Q_grid, part.steps());
        const auto u_paths = detail::control_paths(game.P_grid, part.steps());

        double best_eps = -1.0;
        for (double eps : eps_list) {
            StrategyParams sp;
            sp.epsilon = eps;
            sp.nu_params = NuParams::make(game.kernel.alpha, grid.T(), eps, alpha_prime);
            sp.value_partition = part;
            sp.candidate_cap = candidate_cap;
            sp.budget = budget;
            StrategyContext ctx(game, grid, sp, opts);
            ctx.root_value();  // warm the oracle before parallel runs

            ZetaCell ucell;
            ucell.epsilon = eps;
            ucell.diameter = part.diameter(grid);
            ucell.side = LawSide::First;
            ucell.rho_hat = rho_hat;
            ucell.zeta = zeta;
            ucell.run_costs.assign(v_paths.size(), 0.0);
            detail::parallel_for(v_paths.size(), jobs, [&](std::size_t i) {
                auto adv = open_loop_adversary(part, v_paths[i]);
                auto run = run_control_law(
                    game, grid, LawSide::First,
                    [&ctx](const Position& p) { return ctx.strategy_U0(p); }, part, adv,
                    "v-path-" + std::to_string(i), opts);
                ucell.run_costs[i] = run.J;
            });
            ucell.guarantee = *std::max_element(ucell.run_costs.begin(), ucell.run_costs.end());
            ucell.pass = ucell.guarantee <= rho_hat + zeta;

            ZetaCell vcell = ucell;
            vcell.side = LawSide::Second;
            vcell.run_costs.assign(u_paths.size(), 0.0);
            detail::parallel_for(u_paths.size(), jobs, [&](std::size_t i) {
                auto adv = open_loop_adversary(part, u_paths[i]);
                auto run = run_control_law(
                    game, grid, LawSide::Second,
                    [&ctx](const Position& p) { return ctx.strategy_V0(p); }, part, adv,
                    "u-path-" + std::to_string(i), opts);
                vcell.run_costs[i] = run.J;
            });
            vcell.guarantee = *std::min_element(vcell.run_costs.begin(), vcell.run_costs.end());
            vcell.pass = vcell.guarantee >= rho_hat - zeta;

            if (best_eps < 0.0 && ucell.pass && vcell.pass) best_eps = eps;
            report.cells.push_back(std::move(ucell));
            report.cells.push_back(std::move(vcell));
        }
        report.smallest_passing_epsilon[static_cast<int>(pi)] = best_eps;
    }
    return report;
}

/// One-shot helpers mirroring the free-function surface.
inline std::pair<double, Position> rho_eps(const GameSpec& game, const MasterGrid& grid,
                                           const Position& pos, const StrategyParams& params,
                                           RhoSign sign, const SolverOptions& opts = {}) {
    StrategyContext ctx(game, grid, params, opts);
    return ctx.rho_eps(pos, sign);
}

inline Vec strategy_U0(const GameSpec& game, const MasterGrid& grid, const Position& pos,
                       const StrategyParams& params, const SolverOptions& opts = {}) {
    StrategyContext ctx(game, grid, params, opts);
    return ctx.strategy_U0(pos);
}

inline Vec strategy_V0(const GameSpec& game, const MasterGrid& grid, const Position& pos,
                       const StrategyParams& params, const SolverOptions& opts = {}) {
    StrategyContext ctx(game, grid, params, opts);
    return ctx.strategy_V0(pos);
}

}  // namespace volterra_games
