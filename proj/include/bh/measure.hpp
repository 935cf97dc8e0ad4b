#pragma once

#include "bh/linalg.hpp"

namespace bh {

/// Gaussian N(mean, covariance) used as the inner-product measure. The
/// Cholesky factor is computed once on construction and is the only square
/// root of the covariance used anywhere in the library.
class GaussianMeasure {
 public:
  GaussianMeasure(Vec mean, Mat covariance);

  static GaussianMeasure standard(Eigen::Index dim);
  static GaussianMeasure scalar(double mean, double variance);

  Eigen::Index dim() const noexcept { return mean_.size(); }
  const Vec& mean() const noexcept { return mean_; }
  const Mat& covariance() const noexcept { return covariance_; }
  const Mat& cholesky() const noexcept { return chol_; }

  /// xi = L^{-1} (x - mean)
  Vec to_standard(const Vec& x) const;
  /// x = mean + L xi
  Vec from_standard(const Vec& xi) const;
  /// covariance^{-1}
  Mat information() const;
  double log_density(const Vec& x) const;

 private:
  Vec mean_;
  Mat covariance_;
  Mat chol_;
};

}  // namespace bh
