#pragma once

// Special functions and singularity-exact quadrature weights.
//
// Everything here integrates power-law weights in closed form per grid cell,
// so piecewise-constant integrands are handled without ever sampling a
// singular factor at its singularity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#if defined(__GNUC__) && !defined(__clang__) && __has_include(<quadmath.h>)
#include <quadmath.h>
#define VOLTERRA_GAMES_HAVE_QUADMATH 1
#endif

namespace volterra_games {

struct SpecialFnConfig {
    double series_tol = 1e-14;
    int max_terms = 2000;
};

namespace detail {

inline void validate_special_fn_config(const SpecialFnConfig& cfg) {
    if (!(cfg.series_tol > 0.0))
        throw std::invalid_argument("SpecialFnConfig: series_tol must be positive");
    if (cfg.max_terms < 50)
        throw std::invalid_argument("SpecialFnConfig: max_terms must be at least 50");
}

inline void validate_ascending_grid(std::span<const double> grid) {
    if (grid.size() < 2)
        throw std::invalid_argument("grid must have at least two nodes");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            throw std::invalid_argument("grid must be strictly ascending");
}

}  // namespace detail

namespace detail {

#ifdef VOLTERRA_GAMES_HAVE_QUADMATH
using ml_accum = __float128;
inline ml_accum ml_gamma(double x) { return tgammaq(static_cast<__float128>(x)); }
#else
using ml_accum = long double;
inline ml_accum ml_gamma(double x) { return std::tgamma(static_cast<long double>(x)); }
#endif

}  // namespace detail

/// Mittag-Leffler function E_alpha(z) = sum_k z^k / Gamma(alpha k + 1),
/// summed directly with term-ratio stopping. Accumulation runs in extended
/// precision; the alternating series for z < 0 cancels up to ~8 digits at
/// z = -10, which plain double summation cannot absorb.
inline double mittag_leffler(double alpha, double z, const SpecialFnConfig& cfg = {}) {
    detail::validate_special_fn_config(cfg);
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("mittag_leffler: alpha must lie in (0, 1]");
    if (!std::isfinite(z))
        throw std::domain_error("mittag_leffler: z must be finite");

    if (z == 0.0) return 1.0;

    using detail::ml_accum;
    ml_accum sum = 1;  // k = 0 term
    ml_accum power = 1;
    const ml_accum zq = z;
    bool prev_small = false;
    for (int k = 1; k <= cfg.max_terms; ++k) {
        power *= zq;
        const double gamma_arg = alpha * k + 1.0;
        ml_accum term;
        if (gamma_arg < 1700.0) {
            term = power / detail::ml_gamma(gamma_arg);
        } else {
            // far tail, beyond extended-precision gamma range; log-space is
            // plenty accurate for terms this far out
            const long double lt =
                k * std::log(std::abs(static_cast<long double>(z))) - std::lgamma(gamma_arg);
            term = static_cast<ml_accum>(std::exp(lt));
            if (z < 0.0 && (k & 1)) term = -term;
        }
        sum += term;
        const double dsum = static_cast<double>(sum);
        if (!std::isfinite(dsum))
            throw std::runtime_error("mittag_leffler: series overflowed at term " +
                                     std::to_string(k));
        const double dterm = std::abs(static_cast<double>(term));
        const bool small = dterm <= cfg.series_tol * std::abs(dsum);
        if (small && prev_small && k >= 4) return dsum;
        prev_small = small;
    }
    throw std::runtime_error("mittag_leffler: no convergence within " +
                             std::to_string(cfg.max_terms) + " terms");
}

/// A priori bound from the generalized Gronwall inequality:
/// N = (1 + y_sup) E_alpha(Gamma(alpha) kappa_star c T^alpha) - 1.
inline double gronwall_bound(double y_sup, double kappa_star, double c, double alpha,
                             double T, const SpecialFnConfig& cfg = {}) {
    if (y_sup < 0.0 || kappa_star < 0.0 || c < 0.0 || T < 0.0)
        throw std::domain_error("gronwall_bound: arguments must be nonnegative");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("gronwall_bound: alpha must lie in (0, 1)");
    const double arg = std::tgamma(alpha) * kappa_star * c * std::pow(T, alpha);
    return (1.0 + y_sup) * mittag_leffler(alpha, arg, cfg) - 1.0;
}

/// Per-cell integrals of (tau - xi)^(alpha-1) over the cells left of
/// tau = grid[target_index]. weights[i] covers [grid[i], grid[i+1]].
struct SingularWeights {
    std::vector<double> grid;
    std::size_t target_index = 0;
    double exponent = 1.0;
    std::vector<double> weights;
};

inline SingularWeights singular_weights(std::span<const double> grid,
                                        std::size_t target_index, double alpha) {
    detail::validate_ascending_grid(grid);
    if (target_index < 1 || target_index >= grid.size())
        throw std::out_of_range("singular_weights: target_index out of range");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("singular_weights: alpha must lie in (0, 1]");

    const double tau = grid[target_index];
    SingularWeights out;
    out.grid.assign(grid.begin(), grid.end());
    out.target_index = target_index;
    out.exponent = alpha;
    out.weights.resize(target_index);
    for (std::size_t i = 0; i < target_index; ++i)
        out.weights[i] =
            (std::pow(tau - grid[i], alpha) - std::pow(tau - grid[i + 1], alpha)) / alpha;
    return out;
}

/// Per-cell integrals of the two-sided weight
///   (xi - t)^(alpha-1) (T - xi)^(-tail_exponent)
/// over [grid[i], grid[i+1]] for i >= left_index, with t = grid[left_index]
/// and T = grid.back(). Computed through the incomplete Beta function, so the
/// boundary cells carry their singular mass exactly.
inline std::vector<double> double_singular_weights(std::span<const double> grid,
                                                   std::size_t left_index, double alpha,
                                                   double tail_exponent) {
    detail::validate_ascending_grid(grid);
    if (left_index + 1 >= grid.size())
        throw std::out_of_range("double_singular_weights: left_index out of range");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("double_singular_weights: alpha must lie in (0, 1]");
    if (!(tail_exponent < 1.0))
        throw std::domain_error("double_singular_weights: tail_exponent must be < 1");

    const double t = grid[left_index];
    const double T = grid.back();
    const std::size_t cells = grid.size() - 1 - left_index;
    std::vector<double> weights(cells);

    if (tail_exponent == 0.0) {
        // reduces to the left-singular weight alone
        for (std::size_t i = 0; i < cells; ++i) {
            const double a = grid[left_index + i];
            const double b = grid[left_index + i + 1];
            weights[i] = (std::pow(b - t, alpha) - std::pow(a - t, alpha)) / alpha;
        }
        return weights;
    }

    const double L = T - t;
    const double b_param = 1.0 - tail_exponent;
    const double scale = std::pow(L, alpha - tail_exponent);
    double prev = 0.0;  // incomplete beta at the left edge of the current cell
    for (std::size_t i = 0; i < cells; ++i) {
        const double s = std::clamp((grid[left_index + i + 1] - t) / L, 0.0, 1.0);
        const double cur = (s >= 1.0) ? boost::math::beta(alpha, b_param)
                                      : boost::math::beta(alpha, b_param, s);
        weights[i] = scale * (cur - prev);
        prev = cur;
    }
    return weights;
}

/// Per-cell integrals of the tail weight (T - xi)^(-p) over every cell of the
/// grid, T = grid.back(). Requires p < 1.
inline std::vector<double> tail_singular_weights(std::span<const double> grid, double p) {
    detail::validate_ascending_grid(grid);
    if (!(p < 1.0)) throw std::domain_error("tail_singular_weights: exponent must be < 1");
    const double T = grid.back();
    const double e = 1.0 - p;
    std::vector<double> weights(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        weights[i] = (std::pow(T - grid[i], e) - std::pow(T - grid[i + 1], e)) / e;
    return weights;
}

}  // namespace volterra_games
