#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bh/bayes.hpp"
#include "bh/gaussian_subspace.hpp"

namespace bh {

using Coordinates = Vec;

/// <b_m, b_n> under the node set.
Mat gram(const std::vector<BayesElement>& basis, const NodeSet& nodes);
Mat gram(const std::vector<BayesElement>& basis, const GaussianMeasure& nu,
         const QuadratureSpec& spec);

/// Solves G x = rhs for a Gram matrix. Cholesky first; on failure a symmetric
/// eigen-solve with eigenvalues floored at 1e-12 of the largest. More than one
/// floored eigenvalue raises SingularGram.
Vec solve_gram(const Mat& g, const Vec& rhs);

/// alpha* = <b,b>^{-1} <b,p>.
Coordinates project(const BayesElement& p, const std::vector<BayesElement>& basis,
                    const NodeSet& nodes);
Coordinates project(const BayesElement& p, const std::vector<BayesElement>& basis,
                    const GaussianMeasure& nu, const QuadratureSpec& spec);

/// sum_m alpha_m . b_m
BayesElement reconstruct(const Coordinates& alpha, const std::vector<BayesElement>& basis);

/// Kernel sum_{m,n} K_mn b_m><b_n acting by K (x) p = sum_m b_m sum_n K_mn <b_n, p>.
struct OuterProduct {
  std::vector<BayesElement> basis;
  Mat weights;
};

/// The projection kernel b><b,b>^{-1}<b under the node set.
OuterProduct projection_kernel(const std::vector<BayesElement>& basis, const NodeSet& nodes);
BayesElement kernel_apply(const OuterProduct& kernel, const BayesElement& p, const NodeSet& nodes);
BayesElement kernel_apply(const std::vector<BayesElement>& basis, const GaussianMeasure& nu,
                          const BayesElement& p, const QuadratureSpec& spec);

/// KL(q || p) with both densities normalized on the grid `spec`.
double kl(const BayesElement& q, const BayesElement& p, const QuadratureSpec& spec);

/// d KL(q(alpha) || p) / d alpha = -<b, p (-) q>_q with q = reconstruct(alpha).
Vec kl_gradient(const Coordinates& alpha, const std::vector<BayesElement>& basis,
                const BayesElement& p, const QuadratureSpec& spec);

enum class HessianForm {
  /// <b_m,b_n>_q + <-b_mn + E[ln b_n] b_m + E[ln b_m] b_n, p (-) q>_q
  symmetric,
  /// (1 - KL) I_alpha - <b_n, (ln b_m - E ln b_m) (p (-) q)>_q on normalized densities
  fisher,
};

Mat kl_hessian(const Coordinates& alpha, const std::vector<BayesElement>& basis,
               const BayesElement& p, const QuadratureSpec& spec,
               HessianForm form = HessianForm::symmetric);

/// Derivative of <p, q>_nu along ln nu -> ln nu + t ln b_n, nu given by its
/// node set: <p, f q>_nu - E_nu[ln q] <b_n, p>_nu with f = ln b_n - E_nu ln b_n.
double measure_derivative_ip(const BayesElement& p, const BayesElement& q,
                             const BayesElement& direction, const NodeSet& nu);

/// J^T <b,b> J.
Mat fim(const std::vector<BayesElement>& basis, const NodeSet& nodes, const Mat& jacobian);
Mat fim(const std::vector<BayesElement>& basis, const GaussianMeasure& nu, const Mat& jacobian,
        const QuadratureSpec& spec);

enum class SubspaceKind { hermite, gaussian };

struct IterateOptions {
  SubspaceKind subspace = SubspaceKind::gaussian;
  /// Hermite basis size; ignored for the Gaussian subspace.
  int order = 2;
  /// Rule for the per-step expectations under the Gaussian measure.
  QuadratureSpec spec = QuadratureSpec::gauss_hermite(20);
  /// Per-measure rule choice; overrides `spec` when set.
  std::function<QuadratureSpec(const GaussianMeasure&)> rule;
  int max_iters = 50;
  double tol = 1e-8;
  /// Replace the Gram (Fisher) step by a full Newton step on KL.
  bool full_newton = false;
  /// Record KL and I(p (-) q) per step (1D only).
  bool report = true;
  /// Grid for KL reporting, the Newton Hessian, and non-Gaussian measure
  /// updates: nodes spanning mean +/- half_width standard deviations of both
  /// the initial and the current measure.
  int report_nodes = 2001;
  double report_half_width = 8.0;
};

struct IterationStep {
  Coordinates alpha;
  /// Measure the step was computed under.
  GaussianMeasure measure;
  /// Measure for the next step.
  GaussianMeasure next_measure;
  double step_norm = 0.0;
  /// KL(estimate || p); NaN when not reported.
  double kl = 0.0;
  /// I(p (-) estimate) under `measure`; NaN when not reported.
  double divergence = 0.0;
};

struct IterationTrace {
  std::vector<IterationStep> steps;
  bool converged = false;
  /// Some reported KL value exceeded its predecessor.
  bool kl_non_monotone = false;
  /// Set when the run stopped on an error; the steps so far are kept.
  std::string error;

  std::size_t size() const noexcept { return steps.size(); }
  const GaussianMeasure& final_measure() const { return steps.back().next_measure; }
};

/// Basis for one step of iterate() under `measure`.
std::vector<BayesElement> subspace_basis(SubspaceKind kind, int order,
                                         const GaussianMeasure& measure);

/// Iterative projection of p onto a Hermite or Gaussian subspace, with the
/// measure re-set to the estimate (or to its Gaussian projection) each step.
/// The Gaussian subspace takes coordinates from expected derivatives; the
/// Hermite subspace from inner products.
IterationTrace iterate(const BayesElement& p, const GaussianMeasure& init,
                       const IterateOptions& opts);

}  // namespace bh
