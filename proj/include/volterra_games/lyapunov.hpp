#pragma once

// Lyapunov-Krasovskii machinery: the functional nu_eps over pairs of
// positions, the derived functional mu_eps with its coinvariant gradient, and
// the numerical checks of their structural properties.
//
// Both integrals average the continuous part of the integrand over the cell
// endpoints (it is continuous up to and including the horizon) and integrate
// the singular weight exactly. Constant integrands are reproduced without
// error, so the diagonal identity nu(p, p) = 0 holds at roundoff level and C1
// cancels the telescoped tail weight.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "volterra_games/game.hpp"
#include "volterra_games/numerics.hpp"
#include "volterra_games/position.hpp"

namespace volterra_games {

/// Midpoint of the lower half of the admissible interval (0, (1-alpha) ^ (alpha/2)).
inline double default_alpha_prime(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("default_alpha_prime: alpha must lie in (0, 1)");
    return 0.5 * std::min(1.0 - alpha, 0.5 * alpha);
}

struct NuParams {
    double epsilon = 1.0;
    double alpha = 0.5;
    double alpha_prime = 0.125;
    double q = 4.0 / 3.0;        ///< 2 / (2 - alpha)
    double C1 = 0.0;             ///< 1 + T^(1-p) / (1-p), p the tail exponent
    double T = 1.0;

    double tail_exponent() const { return (1.0 - alpha - alpha_prime) * q; }
    double eps_sq() const { return std::pow(epsilon, 2.0 / (q - 1.0)); }   ///< eps^(2/(q-1))
    double eps_q() const { return std::pow(epsilon, q / (q - 1.0)); }      ///< eps^(q/(q-1))

    static NuParams make(double alpha, double T, double epsilon,
                         std::optional<double> alpha_prime = std::nullopt) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("NuParams: alpha must lie in (0, 1)");
        if (!(epsilon > 0.0 && epsilon <= 1.0))
            throw std::invalid_argument("NuParams: epsilon must lie in (0, 1]");
        if (!(T > 0.0)) throw std::invalid_argument("NuParams: horizon must be positive");
        NuParams p;
        p.epsilon = epsilon;
        p.alpha = alpha;
        p.alpha_prime = alpha_prime.value_or(default_alpha_prime(alpha));
        if (!(p.alpha_prime > 0.0 && p.alpha_prime < std::min(1.0 - alpha, 0.5 * alpha)))
            throw std::invalid_argument("NuParams: alpha_prime outside (0, (1-alpha) ^ (alpha/2))");
        p.q = 2.0 / (2.0 - alpha);
        p.T = T;
        const double tail = (1.0 - alpha - p.alpha_prime) * p.q;
        if (!(p.q > 1.0 && p.q < 2.0) || !(tail < 1.0))
            throw std::invalid_argument("NuParams: derived exponents out of range");
        p.C1 = 1.0 + std::pow(T, 1.0 - tail) / (1.0 - tail);
        return p;
    }
};

namespace detail {

inline double nu_integrand(double eps_sq, double q_half, const Vec& diff) {
    return std::pow(eps_sq + diff.squaredNorm(), q_half);
}

}  // namespace detail

/// nu_eps from precomputed extensions (node samples over the full horizon).
inline double nu_from_extensions(const Mat& a1, const Mat& a2, const NuParams& params,
                                 const MasterGrid& grid) {
    const double eps_sq = params.eps_sq();
    const double q_half = 0.5 * params.q;
    const int N = grid.cell_count();
    double value = detail::nu_integrand(eps_sq, q_half, Vec(a1.col(N) - a2.col(N)));
    const auto weights = tail_singular_weights(grid.nodes, params.tail_exponent());
    double right = detail::nu_integrand(eps_sq, q_half, Vec(a1.col(0) - a2.col(0)));
    for (int i = 0; i < N; ++i) {
        const double left = right;
        right = detail::nu_integrand(eps_sq, q_half, Vec(a1.col(i + 1) - a2.col(i + 1)));
        value += weights[i] * 0.5 * (left + right);
    }
    return value - params.C1 * params.eps_q();
}

/// Lyapunov-Krasovskii functional nu_eps((t, w), (tau, r)).
inline double nu(const Position& p1, const Position& p2, const NuParams& params,
                 const KernelSpec& kernel, const MasterGrid& grid, const FreeTerm& y) {
    const Mat a1 = extend_a(p1, kernel, grid, y);
    const Mat a2 = extend_a(p2, kernel, grid, y);
    return nu_from_extensions(a1, a2, params, grid);
}

struct GradMu {
    Vec vector;
    double t_derivative = 0.0;  ///< identically zero
};

/// Coinvariant gradient of mu_eps^(reference) at the target position, from
/// precomputed extensions. t_index is the target's time node, which must lie
/// strictly before the horizon.
inline GradMu grad_mu_from_extensions(int t_index, const Mat& a1, const Mat& a2,
                                      const NuParams& params, const KernelSpec& kernel,
                                      const MasterGrid& grid) {
    const int N = grid.cell_count();
    if (t_index >= N)
        throw std::invalid_argument("grad_mu: target position must lie before the horizon");
    const double t = grid.nodes[t_index];
    const double T = grid.nodes[N];
    const double eps_sq = params.eps_sq();
    const double power = 1.0 - 0.5 * params.q;  // exponent of the denominator

    GradMu g;
    g.vector = Vec::Zero(kernel.n);
    g.t_derivative = 0.0;

    const Vec dT = a1.col(N) - a2.col(N);
    const Mat K_Tt = kernel.kstar(T, t) / std::pow(T - t, 1.0 - kernel.alpha);
    g.vector += params.q * (K_Tt.transpose() * dT) / std::pow(eps_sq + dT.squaredNorm(), power);

    const auto weights = double_singular_weights(grid.nodes, t_index, kernel.alpha,
                                                 params.tail_exponent());
    auto integrand = [&](int i) -> Vec {
        const Vec d = a1.col(i) - a2.col(i);
        return params.q * (kernel.kstar(grid.nodes[i], t).transpose() * d) /
               std::pow(eps_sq + d.squaredNorm(), power);
    };
    Vec right = integrand(t_index);
    for (int i = t_index; i < N; ++i) {
        const Vec left = right;
        right = integrand(i + 1);
        g.vector += weights[i - t_index] * 0.5 * (left + right);
    }
    return g;
}

/// Coinvariant gradient of mu_eps^(reference)(target).
inline GradMu grad_mu(const Position& target, const Position& reference, const NuParams& params,
                      const KernelSpec& kernel, const MasterGrid& grid, const FreeTerm& y) {
    const Mat a1 = extend_a(target, kernel, grid, y);
    const Mat a2 = extend_a(reference, kernel, grid, y);
    return grad_mu_from_extensions(target.t_index, a1, a2, params, kernel, grid);
}

struct CiGradientRow {
    double dt = 0.0;
    double finite_difference = 0.0;
    double directional = 0.0;  ///< <grad mu, probe_ell>
    double abs_error = 0.0;
    double rel_error = 0.0;
};

struct CiGradientReport {
    std::vector<CiGradientRow> rows;
    std::vector<double> error_ratios;  ///< successive abs-error ratios
    double final_rel_error = 0.0;
};

/// Compares the finite difference of mu_eps along a constant-generator
/// extension against the analytic directional derivative. The time derivative
/// of mu_eps is identically zero, so the quotient isolates the gradient term.
inline CiGradientReport check_ci_gradient(const Position& target, const Position& reference,
                                          const NuParams& params, const KernelSpec& kernel,
                                          const MasterGrid& grid, const FreeTerm& y,
                                          const Vec& probe_ell, std::span<const double> dt_list) {
    CiGradientReport report;
    const double mu0 = nu(target, reference, params, kernel, grid, y);
    const GradMu g = grad_mu(target, reference, params, kernel, grid, y);
    const double directional = g.vector.dot(probe_ell);
    const Mat a2 = extend_a(reference, kernel, grid, y);

    for (double dt : dt_list) {
        const int target_idx = grid.index_of(target.t(grid) + dt);
        Mat ell_ext(kernel.n, target_idx);
        ell_ext.leftCols(target.t_index) = target.ell;
        for (int i = target.t_index; i < target_idx; ++i) ell_ext.col(i) = probe_ell;
        Position moved = make_position(std::move(ell_ext), kernel, grid, y, target_idx);
        const Mat a1 = extend_a(moved, kernel, grid, y);
        const double mu1 = nu_from_extensions(a1, a2, params, grid);

        CiGradientRow row;
        row.dt = dt;
        row.finite_difference = (mu1 - mu0) / dt;
        row.directional = directional;
        row.abs_error = std::abs(row.finite_difference - directional);
        row.rel_error = row.abs_error / std::max(std::abs(directional), 1e-12);
        report.rows.push_back(row);
    }
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i) {
        const double denom = std::max(report.rows[i].abs_error, 1e-300);
        report.error_ratios.push_back(report.rows[i + 1].abs_error / denom);
    }
    if (!report.rows.empty()) report.final_rel_error = report.rows.back().rel_error;
    return report;
}

struct NuBoundsPerEpsilon {
    double epsilon = 0.0;
    double c2_hat = 0.0;       ///< Lemma (b) ratio maximum
    double c3_hat = 0.0;       ///< gradient bound ratio maximum
    double c3_pair_hat = 0.0;  ///< antisymmetric-sum ratio maximum
};

struct NuBoundsReport {
    std::vector<NuBoundsPerEpsilon> per_epsilon;
    double c2_hat = 0.0;
    double c3_hat = 0.0;
    double c3_pair_hat = 0.0;
    double c2_spread = 1.0;  ///< max/min of per-epsilon c2_hat
    bool finite = true;
};

/// Empirical constants for the norm and gradient bounds of nu_eps over sampled
/// position pairs. The pairs are expected to lie in G_1; times must stay at or
/// below theta for the gradient parts.
inline NuBoundsReport check_nu_bounds(std::span<const std::pair<Position, Position>> pairs,
                                      const KernelSpec& kernel, const MasterGrid& grid,
                                      const FreeTerm& y, double theta,
                                      std::span<const double> epsilons,
                                      std::optional<double> alpha_prime = std::nullopt) {
    if (pairs.empty()) throw std::invalid_argument("check_nu_bounds: no sample pairs");
    const double T = grid.T();
    if (!(theta > 0.0 && theta < T))
        throw std::invalid_argument("check_nu_bounds: theta must lie in (0, T)");
    const int theta_idx = grid.index_of(theta);
    const double ab = std::min(kernel.alpha, kernel.beta);

    NuBoundsReport report;
    const auto lhs_weights = tail_singular_weights(grid.nodes, 1.0 - kernel.alpha);

    for (double eps : epsilons) {
        const NuParams params = NuParams::make(kernel.alpha, T, eps, alpha_prime);
        NuBoundsPerEpsilon row;
        row.epsilon = eps;
        for (const auto& [A, B] : pairs) {
            const Mat a1 = extend_a(A, kernel, grid, y);
            const Mat a2 = extend_a(B, kernel, grid, y);
            const double nu_val = nu_from_extensions(a1, a2, params, grid);
            const double base = nu_val + params.C1 * params.eps_q();

            double lhs = (a1.col(grid.cell_count()) - a2.col(grid.cell_count())).norm();
            for (int i = 0; i < grid.cell_count(); ++i)
                lhs += lhs_weights[i] * (a1.col(i) - a2.col(i)).norm();
            row.c2_hat = std::max(row.c2_hat, lhs / std::pow(base, 1.0 / params.q));

            if (A.t_index <= theta_idx) {
                const GradMu g1 = grad_mu_from_extensions(A.t_index, a1, a2, params, kernel, grid);
                row.c3_hat = std::max(row.c3_hat, g1.vector.norm() /
                                                      std::pow(base, (params.q - 1.0) / params.q));
                if (B.t_index <= theta_idx && B.t_index != A.t_index) {
                    const GradMu g2 =
                        grad_mu_from_extensions(B.t_index, a2, a1, params, kernel, grid);
                    const double gap = std::abs(A.t(grid) - B.t(grid));
                    row.c3_pair_hat = std::max(
                        row.c3_pair_hat, (g1.vector + g2.vector).norm() / std::pow(gap, ab));
                }
            }
        }
        report.finite = report.finite && std::isfinite(row.c2_hat) && std::isfinite(row.c3_hat) &&
                        std::isfinite(row.c3_pair_hat);
        report.c2_hat = std::max(report.c2_hat, row.c2_hat);
        report.c3_hat = std::max(report.c3_hat, row.c3_hat);
        report.c3_pair_hat = std::max(report.c3_pair_hat, row.c3_pair_hat);
        report.per_epsilon.push_back(row);
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : report.per_epsilon) {
        lo = std::min(lo, row.c2_hat);
        hi = std::max(hi, row.c2_hat);
    }
    report.c2_spread = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
    return report;
}

}  // namespace volterra_games
