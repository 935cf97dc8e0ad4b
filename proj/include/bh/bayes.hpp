#pragma once

#include <functional>
#include <vector>

#include "bh/linalg.hpp"
#include "bh/measure.hpp"
#include "bh/quadrature.hpp"

namespace bh {

/// A member of the Bayes space B^2, held as its negative log phi(x); the
/// element is c * exp(-phi(x)) for an unspecified constant c. Elements are
/// immutable and cheap to share across threads.
///
/// Gradient and Hessian callbacks are optional. When absent, central finite
/// differences are substituted.
class BayesElement {
 public:
  using Phi = std::function<double(const Vec&)>;
  using Grad = std::function<Vec(const Vec&)>;
  using Hess = std::function<Mat(const Vec&)>;

  BayesElement(Eigen::Index dim, Phi phi, Grad grad = {}, Hess hess = {});

  /// The zero vector: any constant function (phi = 0).
  static BayesElement zero(Eigen::Index dim);
  /// phi = 1/2 (x - mean)^T info (x - mean); info may be indefinite.
  static BayesElement quadratic(Vec mean, Mat info);
  static BayesElement gaussian(const GaussianMeasure& g);
  static BayesElement gaussian(double mean, double variance);

  Eigen::Index dim() const noexcept { return dim_; }
  double phi(const Vec& x) const { return phi_(x); }
  /// ln p(x) up to a constant, i.e. -phi(x).
  double log_value(const Vec& x) const { return -phi_(x); }

  bool has_gradient() const noexcept { return static_cast<bool>(grad_); }
  bool has_hessian() const noexcept { return static_cast<bool>(hess_); }

  /// d phi / dx (analytic when available).
  Vec gradient(const Vec& x) const;
  /// d^2 phi / dx dx^T (analytic when available).
  Mat hessian(const Vec& x) const;

  const Phi& phi_fn() const noexcept { return phi_; }
  const Grad& grad_fn() const noexcept { return grad_; }
  const Hess& hess_fn() const noexcept { return hess_; }

 private:
  Eigen::Index dim_;
  Phi phi_;
  Grad grad_;
  Hess hess_;
};

/// p (+) q: pointwise product, i.e. phi_p + phi_q.
BayesElement add(const BayesElement& p, const BayesElement& q);
/// a . p: powering, i.e. a * phi_p.
BayesElement scale(double a, const BayesElement& p);
/// p (-) q = p (+) (-1) . q.
BayesElement subtract(const BayesElement& p, const BayesElement& q);

inline BayesElement operator+(const BayesElement& p, const BayesElement& q) { return add(p, q); }
inline BayesElement operator-(const BayesElement& p, const BayesElement& q) {
  return subtract(p, q);
}
inline BayesElement operator*(double a, const BayesElement& p) { return scale(a, p); }

/// Sum of a_m . b_m over a list of elements.
BayesElement linear_combination(const Vec& coefficients, const std::vector<BayesElement>& elements);

/// Equivalence up to the additive constant in phi, tested on 64 points
/// drawn (deterministically) from `sample_measure`.
bool equivalent(const BayesElement& p, const BayesElement& q,
                const GaussianMeasure& sample_measure, double tol = 1e-8);

struct Normalized {
  /// c with c^{-1} = integral of exp(-phi).
  double constant = 0.0;
  /// ln of the integral of exp(-phi).
  double log_partition = 0.0;
  std::function<double(const Vec&)> density;
};

/// Normalization operator. `spec` must be a grid rule; the integral is the
/// trapezoid rule on it. Throws NotNormalizable when the mass does not decay
/// inside the grid.
Normalized normalize(const BayesElement& p, const QuadratureSpec& spec);

/// <p, q>_nu = E[ln p ln q] - E[ln p] E[ln q], evaluated in centered form.
double inner_product(const BayesElement& p, const BayesElement& q, const NodeSet& nodes);
double inner_product(const BayesElement& p, const BayesElement& q, const GaussianMeasure& nu,
                     const QuadratureSpec& spec);

/// I(p) = 1/2 <p, p>.
double information(const BayesElement& p, const NodeSet& nodes);
double information(const BayesElement& p, const GaussianMeasure& nu, const QuadratureSpec& spec);

/// I(p (-) q); symmetric, zero iff p and q are equivalent.
double divergence(const BayesElement& p, const BayesElement& q, const NodeSet& nodes);
double divergence(const BayesElement& p, const BayesElement& q, const GaussianMeasure& nu,
                  const QuadratureSpec& spec);

/// Central-difference stochastic derivative
/// (1/(2 step)) . (p(.|theta + step) (-) p(.|theta - step)).
BayesElement stochastic_derivative(const std::function<BayesElement(double)>& family,
                                   double theta, double step);

/// ln b_m evaluated at every node: rows are nodes, columns are elements.
Mat log_values(const std::vector<BayesElement>& elements, const NodeSet& nodes);

/// Weighted covariance between columns of `a` and columns of `b`.
Mat weighted_covariance(const Mat& a, const Mat& b, const Vec& weights);

}  // namespace bh
