#ifndef ATTNSENSE_DIVERGENCE_HPP
#define ATTNSENSE_DIVERGENCE_HPP

// Closed-form divergences between diagonal Gaussians, and a quadrature
// reference used to check them.

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "attnsense/errors.hpp"
#include "attnsense/gaussian.hpp"

namespace attnsense {

enum class MidpointRule {
    average_sigma,     // sigma_M = (sigma_p + sigma_q) / 2
    average_variance,  // sigma_M = sqrt((sigma_p^2 + sigma_q^2) / 2)
};

template <typename Scalar>
struct BasicDivergenceConfig {
    Scalar sigma_floor = Scalar(1e-6);
    MidpointRule midpoint = MidpointRule::average_sigma;
};

using DivergenceConfig = BasicDivergenceConfig<double>;

namespace detail {

template <typename Scalar>
void require_same_dim(const BasicGaussianSummary<Scalar>& p, const BasicGaussianSummary<Scalar>& q) {
    if (p.mu.size() != q.mu.size() || p.sigma.size() != p.mu.size() || q.sigma.size() != q.mu.size())
        throw ContractError("dimension mismatch: " + std::to_string(p.mu.size()) + " vs " +
                            std::to_string(q.mu.size()));
}

template <typename Scalar>
void require_valid(const BasicDivergenceConfig<Scalar>& cfg) {
    if (!(cfg.sigma_floor > Scalar(0)))
        throw ContractError("sigma_floor must be positive");
}

// Pairwise (cascade) summation of term(0) + ... + term(n-1) in long double.
template <typename Term>
long double pairwise_sum(Eigen::Index begin, Eigen::Index end, const Term& term) {
    constexpr Eigen::Index block = 16;
    if (end - begin <= block) {
        long double acc = 0.0L;
        for (Eigen::Index i = begin; i < end; ++i) acc += static_cast<long double>(term(i));
        return acc;
    }
    const Eigen::Index mid = begin + (end - begin) / 2;
    return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

// One-dimensional KL(N(mu_a, s_a^2) || N(mu_b, s_b^2)) with s_a, s_b > 0.
// Written as 0.5*x*(x+2) - log1p(x) + 0.5*z^2 with x = s_a/s_b - 1 so that
// equal arguments give exactly zero.
template <typename Scalar>
Scalar kl_1d(Scalar mu_a, Scalar s_a, Scalar mu_b, Scalar s_b) {
    using std::log1p;
    const Scalar x = s_a / s_b - Scalar(1);
    const Scalar z = (mu_a - mu_b) / s_b;
    return Scalar(0.5) * x * (x + Scalar(2)) - log1p(x) + Scalar(0.5) * z * z;
}

template <typename Scalar>
Scalar midpoint_sigma(Scalar s_p, Scalar s_q, MidpointRule rule) {
    using std::sqrt;
    if (rule == MidpointRule::average_variance) return sqrt((s_p * s_p + s_q * s_q) / Scalar(2));
    return (s_p + s_q) / Scalar(2);
}

}  // namespace detail

/// KL(p || q) for diagonal Gaussians, summed over channels. Standard
/// deviations below cfg.sigma_floor are raised to the floor first.
template <typename Scalar>
Scalar kl_diag_gauss(const BasicGaussianSummary<Scalar>& p, const BasicGaussianSummary<Scalar>& q,
                     const BasicDivergenceConfig<Scalar>& cfg = {}) {
    detail::require_same_dim(p, q);
    detail::require_valid(cfg);
    using std::max;
    const Scalar floor = cfg.sigma_floor;
    const long double sum = detail::pairwise_sum(0, p.dim(), [&](Eigen::Index i) {
        return detail::kl_1d(p.mu[i], max(p.sigma[i], floor), q.mu[i], max(q.sigma[i], floor));
    });
    return static_cast<Scalar>(sum);
}

/// Gaussian midpoint M with averaged means and (by default) averaged
/// standard deviations.
template <typename Scalar>
BasicGaussianSummary<Scalar> midpoint(const BasicGaussianSummary<Scalar>& p, const BasicGaussianSummary<Scalar>& q,
                                      MidpointRule rule = MidpointRule::average_sigma) {
    detail::require_same_dim(p, q);
    using Vector = typename BasicGaussianSummary<Scalar>::Vector;
    Vector mu = (p.mu + q.mu) / Scalar(2);
    Vector sigma;
    if (rule == MidpointRule::average_variance)
        sigma = ((p.sigma.array().square() + q.sigma.array().square()) / Scalar(2)).sqrt().matrix();
    else
        sigma = (p.sigma + q.sigma) / Scalar(2);
    return {std::move(mu), std::move(sigma)};
}

/// Jensen-Shannon divergence with a Gaussian midpoint:
/// 0.5 * (KL(p || M) + KL(q || M)), M built from the floored inputs.
/// Symmetric in its arguments bit-for-bit.
template <typename Scalar>
Scalar jsd(const BasicGaussianSummary<Scalar>& p, const BasicGaussianSummary<Scalar>& q,
           const BasicDivergenceConfig<Scalar>& cfg = {}) {
    detail::require_same_dim(p, q);
    detail::require_valid(cfg);
    using std::max;
    const Scalar floor = cfg.sigma_floor;
    const long double sum = detail::pairwise_sum(0, p.dim(), [&](Eigen::Index i) {
        const Scalar sp = max(p.sigma[i], floor);
        const Scalar sq = max(q.sigma[i], floor);
        const Scalar mu_m = (p.mu[i] + q.mu[i]) / Scalar(2);
        const Scalar s_m = detail::midpoint_sigma(sp, sq, cfg.midpoint);
        return detail::kl_1d(p.mu[i], sp, mu_m, s_m) + detail::kl_1d(q.mu[i], sq, mu_m, s_m);
    });
    return static_cast<Scalar>(sum / 2.0L);
}

/// Quadrature settings for kl_numeric_oracle. Each channel is integrated
/// over mu_p +/- half_width_sigmas * sigma_p, where the integrand lives.
struct IntegrationGrid {
    double half_width_sigmas = 12.0;
    int intervals = 4096;  // composite Simpson, rounded up to even
};

/// Reference KL(p || q) by composite Simpson integration of
/// p(x) * (log p(x) - log q(x)) per channel. Intended for small d.
template <typename Scalar>
Scalar kl_numeric_oracle(const BasicGaussianSummary<Scalar>& p, const BasicGaussianSummary<Scalar>& q,
                         const IntegrationGrid& grid = {}, const BasicDivergenceConfig<Scalar>& cfg = {}) {
    detail::require_same_dim(p, q);
    detail::require_valid(cfg);
    if (grid.intervals < 2 || !(grid.half_width_sigmas > 0)) throw ContractError("invalid integration grid");
    using std::exp;
    using std::log;
    using std::max;
    const long double log_sqrt_2pi = 0.5L * std::log(2.0L * std::numbers::pi_v<long double>);
    const int intervals = grid.intervals + (grid.intervals % 2);

    long double total = 0.0L;
    for (Eigen::Index c = 0; c < p.dim(); ++c) {
        const long double mp = p.mu[c], mq = q.mu[c];
        const long double sp = max(p.sigma[c], cfg.sigma_floor);
        const long double sq = max(q.sigma[c], cfg.sigma_floor);
        const long double lo = mp - grid.half_width_sigmas * sp;
        const long double h = 2.0L * grid.half_width_sigmas * sp / intervals;
        auto integrand = [&](long double x) {
            const long double zp = (x - mp) / sp;
            const long double zq = (x - mq) / sq;
            const long double log_p = -0.5L * zp * zp - std::log(sp) - log_sqrt_2pi;
            const long double log_q = -0.5L * zq * zq - std::log(sq) - log_sqrt_2pi;
            return std::exp(log_p) * (log_p - log_q);
        };
        long double acc = integrand(lo) + integrand(lo + intervals * h);
        for (int k = 1; k < intervals; ++k) acc += (k % 2 ? 4.0L : 2.0L) * integrand(lo + k * h);
        total += acc * h / 3.0L;
    }
    return static_cast<Scalar>(total);
}

}  // namespace attnsense

#endif  // ATTNSENSE_DIVERGENCE_HPP
