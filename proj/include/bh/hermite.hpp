#pragma once

#include <functional>
#include <vector>

#include "bh/bayes.hpp"

namespace bh {

/// Probabilist's Hermite polynomial He_n via H_{n+1} = xi H_n - n H_{n-1}.
double hermite_poly(int n, double xi);

/// k-th derivative of He_n: n!/(n-k)! He_{n-k}.
double hermite_poly_derivative(int n, int k, double xi);

/// n! in floating point; log-gamma beyond n = 20.
double factorial(int n);

/// Orthonormal exponentiated-Hermite basis h_1..h_M on R under N(mu, sigma^2):
/// h_n(x) = exp(-He_n((x - mu)/sigma) / sqrt(n!)). Ordered by degree.
class HermiteBasis1D {
 public:
  HermiteBasis1D(int m, GaussianMeasure measure);

  int size() const noexcept { return m_; }
  const GaussianMeasure& measure() const noexcept { return measure_; }
  double mean() const { return measure_.mean()(0); }
  double stddev() const { return measure_.cholesky()(0, 0); }

  /// h_n for 1 <= n <= M.
  const BayesElement& element(int n) const;
  const std::vector<BayesElement>& elements() const noexcept { return elements_; }

 private:
  int m_;
  GaussianMeasure measure_;
  std::vector<BayesElement> elements_;
};

/// The n-th basis function (1-based).
BayesElement basis_element(int n, const HermiteBasis1D& basis);

/// alpha_n = <h_n, p> under the basis measure (inner-product route).
Vec coordinates(const BayesElement& p, const HermiteBasis1D& basis, const QuadratureSpec& spec);

/// alpha_n = sigma^n / sqrt(n!) E[d^n phi / dx^n]; `phi_derivative(n, x)` returns
/// the n-th derivative of phi. Kept as a cross-check on the quadrature route.
Vec coordinates_by_derivatives(const std::function<double(int, double)>& phi_derivative,
                               const HermiteBasis1D& basis, const QuadratureSpec& spec);

/// sum_m alpha_m . h_m.
BayesElement reconstruct(const Vec& alpha, const HermiteBasis1D& basis);

/// Tensor Hermite basis on R^N: all products prod_k He_{n_k}(xi_k)/sqrt(n_k!)
/// with 0 <= n_k <= M except the all-zero product, in Kronecker order (the
/// first variable is the most significant digit). xi = L^{-1}(x - mu).
class HermiteBasisND {
 public:
  HermiteBasisND(int m, int n, GaussianMeasure measure);

  int order() const noexcept { return m_; }
  int dim() const noexcept { return n_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(elements_.size()); }
  const GaussianMeasure& measure() const noexcept { return measure_; }
  const std::vector<std::vector<int>>& multi_indices() const noexcept { return indices_; }
  const std::vector<BayesElement>& elements() const noexcept { return elements_; }

 private:
  int m_;
  int n_;
  GaussianMeasure measure_;
  std::vector<std::vector<int>> indices_;
  std::vector<BayesElement> elements_;
};

inline constexpr int kMaxHermiteNDOrder = 3;
inline constexpr int kMaxHermiteNDDim = 3;

HermiteBasisND multivariate_basis(int m, int n, const GaussianMeasure& measure);

}  // namespace bh
