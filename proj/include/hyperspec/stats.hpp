#pragma once

#include <Eigen/Core>

#include <cmath>

namespace hyperspec::stats {

template <typename Derived>
typename Derived::Scalar mean(const Eigen::DenseBase<Derived>& x) {
    return x.mean();
}

/// Sample variance with the n-1 denominator.
template <typename Derived>
typename Derived::Scalar sample_variance(const Eigen::DenseBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const auto n = x.size();
    if (n < 2) return Scalar(0);
    const Scalar m = x.mean();
    return (x.derived().array() - m).square().sum() / Scalar(n - 1);
}

template <typename Derived>
typename Derived::Scalar sample_stddev(const Eigen::DenseBase<Derived>& x) {
    using std::sqrt;
    return sqrt(sample_variance(x));
}

template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar sample_covariance(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y) {
    using Scalar = typename DerivedX::Scalar;
    const auto n = x.size();
    if (n < 2) return Scalar(0);
    return ((x.derived().array() - x.mean()) * (y.derived().array() - y.mean())).sum() / Scalar(n - 1);
}

}  // namespace hyperspec::stats
