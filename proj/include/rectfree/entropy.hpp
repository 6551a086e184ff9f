#pragma once

/**
 * Rectangular microstates entropy of one simple element a of type (k,l),
 * from the law μ of aa* on the smaller side. With α = min(ρ_k,ρ_l) and
 * β = max(ρ_k,ρ_l),
 *
 *   χ(a) = α²Σ(μ) + (β−α)α∫log x dμ + αβ(log(π/α) + 1) + α²/4
 *          − α²∫_{(β−α)/α}^{β/α} x log x dx,
 *
 * which splits as χ = −J(μ) + C(α,β) with the large-deviation rate
 * J(ν) = −α²Σ(ν) − (αβ − α²)∫log x dν. Families that are free with
 * amalgamation add their entropies. Values live in ExtReal so that atomic
 * laws give −∞ (and J gives +∞) without float infinities.
 */

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "rectfree/error.hpp"
#include "rectfree/measures.hpp"

namespace rectfree {

/// Law μ of aa* with the weights α = min(ρ_k,ρ_l) ≤ β = max(ρ_k,ρ_l).
struct EntropyInput {
    GridMeasure mu;
    double alpha;
    double beta;

    /// Orders the two block weights; the square case k = l passes ρ_k twice.
    static EntropyInput from_rho(GridMeasure mu, double rho_k, double rho_l) {
        return EntropyInput{std::move(mu), std::min(rho_k, rho_l), std::max(rho_k, rho_l)};
    }
};

namespace detail {

inline void check_weights(double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta <= 1.0) || !(alpha <= beta))
        throw PreconditionError("entropy weights need 0 < alpha <= beta <= 1 (alpha=" + std::to_string(alpha) +
                                ", beta=" + std::to_string(beta) + ")");
    if (alpha != beta && alpha + beta > 1.0 + 1e-12)
        throw PreconditionError("weights of two distinct blocks must satisfy alpha + beta <= 1");
}

inline void check_nonnegative_support(const GridMeasure& mu) {
    if (mu.support().first < 0.0) throw PreconditionError("the law of aa* must be supported in [0,inf)");
}

/// x²/2·log x − x²/4, an antiderivative of x log x with value 0 at 0.
inline double xlogx_antiderivative(double x) {
    return x == 0.0 ? 0.0 : x * x / 2.0 * std::log(x) - x * x / 4.0;
}

}  // namespace detail

/// χ for one simple element; −∞ when Σ(μ) = −∞, or ∫log x dμ = −∞ with β > α.
inline ExtReal chi_single(const EntropyInput& in, int resolution = kDefaultCells) {
    detail::check_weights(in.alpha, in.beta);
    detail::check_nonnegative_support(in.mu);
    const double a = in.alpha, b = in.beta;
    const ExtReal sigma = in.mu.log_energy(resolution);
    const ExtReal logm = (b > a) ? in.mu.log_moment() : ExtReal(0.0);
    const double tail = detail::xlogx_antiderivative(b / a) - detail::xlogx_antiderivative((b - a) / a);
    const double constant = a * b * (std::log(std::numbers::pi / a) + 1.0) + a * a / 4.0 - a * a * tail;
    return (a * a) * sigma + ((b - a) * a) * logm + ExtReal(constant);
}

/// J(ν) = −ρ_k²Σ(ν) − (ρ_kρ_l − ρ_k²)∫log x dν, for ρ_k ≤ ρ_l; +∞ for atoms.
inline ExtReal rate_J(const GridMeasure& nu, double rho_k, double rho_l, int resolution = kDefaultCells) {
    if (!(rho_k > 0.0) || !(rho_k <= rho_l)) throw PreconditionError("rate_J needs 0 < rho_k <= rho_l");
    detail::check_nonnegative_support(nu);
    const ExtReal sigma = nu.log_energy(resolution);
    const ExtReal logm = rho_l > rho_k ? nu.log_moment() : ExtReal(0.0);
    return (-rho_k * rho_k) * sigma + (-(rho_k * rho_l - rho_k * rho_k)) * logm;
}

/**
 * C(ρ_k,ρ_l) = ρ_kρ_l(log π + 1 − log ρ_k) + ρ_k²/4 − ρ_k²∫_{ρ_l/ρ_k−1}^{ρ_l/ρ_k} t log t dt.
 * The integral is evaluated by quadrature on every call, independently of
 * the antiderivative used by chi_single.
 */
inline double rate_constant_C(double rho_k, double rho_l) {
    if (!(rho_k > 0.0) || !(rho_k <= rho_l)) throw PreconditionError("rate_constant_C needs 0 < rho_k <= rho_l");
    const double top = rho_l / rho_k, bottom = top - 1.0;
    const double integral = detail::de_integrate01([&](double u, double uc) {
        const double t = u <= 0.5 ? bottom + u : top - uc;
        return t == 0.0 ? 0.0 : t * std::log(t);
    });
    return rho_k * rho_l * (std::log(std::numbers::pi) + 1.0 - std::log(rho_k)) + rho_k * rho_k / 4.0 -
           rho_k * rho_k * integral;
}

/**
 * A(μ_c) − A(μ) with A(μ) = Σ(μ) + (ρ_l/ρ_k − 1)∫log x dμ and μ_c the
 * MP(ρ_l/ρ_k) law dilated to mean c. Nonnegative, and 0 only at μ = μ_c,
 * for every μ with mean at most c.
 */
inline ExtReal maximizer_gap(const GridMeasure& mu, double rho_k, double rho_l, double c,
                             int resolution = kDefaultCells) {
    if (!(rho_k > 0.0) || !(rho_k <= rho_l)) throw PreconditionError("maximizer_gap needs 0 < rho_k <= rho_l");
    if (!(c > 0.0)) throw PreconditionError("mean cap must be positive");
    detail::check_nonnegative_support(mu);
    const double mean = mu.mean();
    if (mean > c * (1.0 + 1e-12))
        throw PreconditionError("mean constraint violated: mean " + std::to_string(mean) + " > cap " +
                                std::to_string(c));
    const double lambda = rho_l / rho_k;
    auto A = [&](const GridMeasure& nu) {
        const ExtReal logm = lambda > 1.0 ? nu.log_moment() : ExtReal(0.0);
        return nu.log_energy(resolution) + (lambda - 1.0) * logm;
    };
    return A(GridMeasure::mp(lambda, c / lambda)) - A(mu);
}

/// Entropy of a family free with amalgamation: the sum of the members' entropies.
inline ExtReal chi_free_family(const std::vector<EntropyInput>& inputs, int resolution = kDefaultCells) {
    if (inputs.empty()) throw PreconditionError("chi_free_family needs at least one input");
    ExtReal total(0.0);
    for (const auto& in : inputs) total = total + chi_single(in, resolution);
    return total;
}

/**
 * χ(f(a)) for f strictly increasing with f(0) = 0, where f acts on the
 * polar part: the law of f(a)f(a)* is the image of μ under t ↦ f(√t)².
 */
inline ExtReal chi_functional_calculus(const EntropyInput& in, const MonotoneMap& f,
                                       int resolution = kDefaultCells) {
    if (std::abs(f(0.0)) > 1e-14) throw PreconditionError("functional calculus needs f(0) = 0");
    detail::check_nonnegative_support(in.mu);
    const auto [lo, hi] = in.mu.support();
    f.check_increasing_on(std::sqrt(lo), std::sqrt(hi));
    const MonotoneMap g = compose(MonotoneMap::power(2.0), compose(f, MonotoneMap::power(0.5)));
    return chi_single(EntropyInput{pushforward_increasing(in.mu, g), in.alpha, in.beta}, resolution);
}

}  // namespace rectfree
