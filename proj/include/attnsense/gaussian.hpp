#ifndef ATTNSENSE_GAUSSIAN_HPP
#define ATTNSENSE_GAUSSIAN_HPP

#include <Eigen/Core>

namespace attnsense {

/// Per-channel mean and standard deviation of one attention projection,
/// read as a diagonal Gaussian. Both vectors have the same length d.
template <typename Scalar>
struct BasicGaussianSummary {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector mu;
    Vector sigma;

    BasicGaussianSummary() = default;
    BasicGaussianSummary(Vector mean, Vector stddev) : mu(std::move(mean)), sigma(std::move(stddev)) {}

    Eigen::Index dim() const { return mu.size(); }

    bool operator==(const BasicGaussianSummary& other) const {
        return mu.size() == other.mu.size() && sigma.size() == other.sigma.size() &&
               mu == other.mu && sigma == other.sigma;
    }
};

using GaussianSummary = BasicGaussianSummary<double>;

}  // namespace attnsense

#endif  // ATTNSENSE_GAUSSIAN_HPP
