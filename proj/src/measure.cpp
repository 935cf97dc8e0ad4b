#include "bh/measure.hpp"

#include <cmath>
#include <numbers>

#include "bh/errors.hpp"

namespace bh {

GaussianMeasure::GaussianMeasure(Vec mean, Mat covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
    throw DimensionMismatch("measure covariance does not match mean dimension");
  if (mean_.size() == 0) throw DimensionMismatch("measure must have positive dimension");
  if (!is_symmetric(covariance_, 1e-12)) throw NonSpd("measure covariance is not symmetric", 0);
  chol_ = cholesky_lower(covariance_, "measure covariance is not positive definite");
}

GaussianMeasure GaussianMeasure::standard(Eigen::Index dim) {
  return GaussianMeasure(Vec::Zero(dim), Mat::Identity(dim, dim));
}

GaussianMeasure GaussianMeasure::scalar(double mean, double variance) {
  return GaussianMeasure(Vec::Constant(1, mean), Mat::Constant(1, 1, variance));
}

Vec GaussianMeasure::to_standard(const Vec& x) const {
  return chol_.triangularView<Eigen::Lower>().solve(x - mean_);
}

Vec GaussianMeasure::from_standard(const Vec& xi) const { return mean_ + chol_ * xi; }

Mat GaussianMeasure::information() const {
  const Mat linv = chol_.triangularView<Eigen::Lower>().solve(Mat::Identity(dim(), dim()));
  return linv.transpose() * linv;
}

double GaussianMeasure::log_density(const Vec& x) const {
  const Vec xi = to_standard(x);
  const double logdet = 2.0 * chol_.diagonal().array().log().sum();
  return -0.5 * xi.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi);
}

}  // namespace bh
