#include "densesvm/errors.hpp"
#include "densesvm/tuner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace densesvm::tuner {

struct GpPosterior::Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd weights;  // (K + noise I)^-1 (y - mean)
};

GpPosterior::GpPosterior(std::vector<std::vector<double>> unit_points, std::vector<double> values, double noise,
                         double length_scale)
    : points_(std::move(unit_points)), noise_(noise), length_scale_(length_scale) {
    const std::size_t n = points_.size();
    if (n == 0) throw InvalidData("gaussian process needs at least one observation");
    if (values.size() != n) throw DimError("observation values do not match points");
    if (!(noise >= 0.0)) throw InvalidData("noise must be non-negative");
    if (!(length_scale > 0.0)) throw InvalidData("length scale must be positive");

    if (noise == 0.0)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (points_[i] == points_[j]) throw SingularGram("duplicate observation points with zero noise");

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    prior_mean_ = mean;
    signal_variance_ = std::max(var, 1e-6);

    Eigen::MatrixXd k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernel(points_[i], points_[j]);
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    k.diagonal().array() += noise;

    factor_ = std::make_unique<Factor>();
    factor_->llt.compute(k);
    if (factor_->llt.info() != Eigen::Success) throw SingularGram("gram matrix is not positive definite");
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = values[i] - mean;
    factor_->weights = factor_->llt.solve(y);
}

GpPosterior::~GpPosterior() = default;
GpPosterior::GpPosterior(GpPosterior&&) noexcept = default;
GpPosterior& GpPosterior::operator=(GpPosterior&&) noexcept = default;

double GpPosterior::kernel(std::span<const double> a, std::span<const double> b) const {
    double d2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
    return signal_variance_ * std::exp(-0.5 * d2 / (length_scale_ * length_scale_));
}

Prediction GpPosterior::predict(std::span<const double> unit_point) const {
    const std::size_t n = points_.size();
    Eigen::VectorXd ks(n);
    for (std::size_t i = 0; i < n; ++i) ks(static_cast<Eigen::Index>(i)) = kernel(points_[i], unit_point);
    Prediction p;
    p.mean = prior_mean_ + ks.dot(factor_->weights);
    const Eigen::VectorXd v = factor_->llt.matrixL().solve(ks);
    p.variance = std::max(0.0, signal_variance_ - v.squaredNorm());
    return p;
}

GpPosterior gp_posterior(const SearchSpace& space, const std::vector<Observation>& observations, double noise,
                         double length_scale) {
    std::vector<std::vector<double>> pts;
    std::vector<double> vals;
    for (const auto& o : observations) {
        pts.push_back(space.to_unit(o.point));
        vals.push_back(o.value);
    }
    return GpPosterior(std::move(pts), std::move(vals), noise, length_scale);
}

}  // namespace densesvm::tuner
