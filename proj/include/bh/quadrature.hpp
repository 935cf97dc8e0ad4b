#pragma once

#include <functional>
#include <vector>

#include "bh/linalg.hpp"
#include "bh/measure.hpp"

namespace bh {

enum class RuleKind { gauss_hermite, grid };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// How an expectation is discretized.
///
/// gauss_hermite: tensor-product probabilist Gauss-Hermite rule, mapped onto a
/// Gaussian measure with x = mean + L xi.
/// grid: tensor-product trapezoid rule on `grid_bounds`. Under a measure the
/// weights are the trapezoid weights times the measure density, renormalized.
struct QuadratureSpec {
  RuleKind kind = RuleKind::gauss_hermite;
  int nodes_per_dim = 20;
  std::vector<Interval> grid_bounds;
  /// Relative mass allowed at the edge of a grid before an element is
  /// declared not normalizable on it.
  double tolerance = 1e-10;

  static QuadratureSpec gauss_hermite(int nodes);
  static QuadratureSpec grid(std::vector<Interval> bounds, int nodes);
  /// Grid over mean +/- half_width standard deviations in every dimension.
  static QuadratureSpec grid_around(const GaussianMeasure& nu, double half_width = 8.0,
                                    int nodes = 2001);

  void validate() const;
};

inline constexpr int kMaxGaussHermiteNodes = 64;
inline constexpr Eigen::Index kMaxTensorDim = 8;
inline constexpr double kMaxTensorNodes = 2.0e6;

struct GaussHermiteRule {
  Vec nodes;
  Vec weights;
};

/// Probabilist Gauss-Hermite rule: sum_i w_i f(xi_i) ~ E[f(xi)], xi ~ N(0,1).
GaussHermiteRule gauss_hermite_rule(int n);

/// Discrete measure: columns of `points` with weights summing to one (or,
/// for Lebesgue grids, trapezoid weights).
struct NodeSet {
  Mat points;
  Vec weights;

  Eigen::Index size() const noexcept { return weights.size(); }
  Eigen::Index dim() const noexcept { return points.rows(); }
};

/// Nodes and probability weights representing `nu` under `spec`.
NodeSet measure_nodes(const GaussianMeasure& nu, const QuadratureSpec& spec);

/// Trapezoid nodes with plain (Lebesgue) weights over the spec's grid bounds.
NodeSet lebesgue_grid(const QuadratureSpec& spec);

/// Probability weights proportional to exp(-phi) on a Lebesgue grid. Points
/// where phi is +inf get zero weight. Throws NotNormalizable when the mass
/// does not decay at the grid boundary.
NodeSet density_nodes(const std::function<double(const Vec&)>& phi, const QuadratureSpec& spec);

/// ln of the integral of exp(-phi) over the spec's grid, with the same
/// boundary-decay check as density_nodes.
double log_partition(const std::function<double(const Vec&)>& phi, const QuadratureSpec& spec);

using ScalarFn = std::function<double(const Vec&)>;

/// E[f] under a discrete node set. Non-finite f at any node raises
/// EvaluationFailure naming the node.
double expect(const ScalarFn& f, const NodeSet& nodes);
double expect(const ScalarFn& f, const GaussianMeasure& nu, const QuadratureSpec& spec);

/// Vector- and matrix-valued expectations with the same node discipline.
Vec expect_vector(const std::function<Vec(const Vec&)>& f, const NodeSet& nodes);
Mat expect_matrix(const std::function<Mat(const Vec&)>& f, const NodeSet& nodes);

/// Rule choice for a 1D integrand with a pole at `pole`. Gauss-Hermite is kept
/// when the pole is at least 6 sigma away and every node stays within nine
/// tenths of the mean-to-pole distance; otherwise a trapezoid grid on
/// mean +/- 8 sigma, clipped to the same nine tenths on the pole side.
QuadratureSpec rule_avoiding_pole(const GaussianMeasure& nu, double pole,
                                  const QuadratureSpec& preferred, int grid_nodes = 4001);

/// Both sides of E[H_n(xi) f(xi)] = E[d^n f / dxi^n] under N(0,1).
struct SteinSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

SteinSides stein_check(const std::function<double(double)>& f,
                       const std::function<double(double)>& nth_derivative, int n,
                       const QuadratureSpec& spec);

/// Single recurrence step: E[H_{n+1} f] against E[H_n f'].
SteinSides stein_step_check(const std::function<double(double)>& f,
                            const std::function<double(double)>& derivative, int n,
                            const QuadratureSpec& spec);

/// Multivariate form: E[prod_k H_{n_k}(xi_k) f] against E[mixed derivative].
SteinSides stein_check_nd(const ScalarFn& f, const ScalarFn& mixed_derivative,
                          const std::vector<int>& orders, const QuadratureSpec& spec);

/// Finite-difference n-th derivative (central stencil), for integrands without
/// analytic derivatives.
double finite_difference_derivative(const std::function<double(double)>& f, double x, int n,
                                    double step = 1e-2);

}  // namespace bh
