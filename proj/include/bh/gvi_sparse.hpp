#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "bh/bayes.hpp"

namespace bh {

using SparseMat = Eigen::SparseMatrix<double>;

/// One term phi_k of phi = sum_k phi_k, acting on the variables `indices`
/// (strictly increasing). `local` is defined on R^{|indices|}.
struct Factor {
  std::string type;
  std::vector<int> indices;
  std::vector<double> params;
  BayesElement local;
  /// Gauss-Newton curvature J^T W J at a point; empty means use the Hessian.
  BayesElement::Hess gn_hessian;
};

/// (x_i - mean)^2 / (2 var)
Factor prior_factor(int i, double mean, double var);
/// (x_j - x_i - u)^2 / (2 var), i < j
Factor odometry_factor(int i, int j, double u, double var);
/// (r - sqrt((x_j - x_i)^2 + d^2))^2 / (2 var): range to a point offset
/// laterally by d from the line of motion.
Factor range_factor(int i, int j, double r, double var, double d);
/// (z - f b / x_i)^2 / (2 var)
Factor stereo_factor(int i, double z, double f, double b, double var);

/// Builders for factor types by name, used when reading graphs from text.
class FactorRegistry {
 public:
  using Builder = std::function<Factor(const std::vector<int>&, const std::vector<double>&)>;

  /// prior, odom, range and stereo.
  static FactorRegistry with_builtins();

  void add(const std::string& type, int arity, int num_params, Builder builder);
  bool contains(const std::string& type) const { return types_.count(type) != 0; }
  int arity(const std::string& type) const;
  int num_params(const std::string& type) const;
  Factor build(const std::string& type, const std::vector<int>& indices,
               const std::vector<double>& params) const;

 private:
  struct Entry {
    int arity;
    int num_params;
    Builder builder;
  };
  std::map<std::string, Entry> types_;
};

class FactorGraph {
 public:
  explicit FactorGraph(int num_vars);

  int num_vars() const noexcept { return num_vars_; }
  const std::vector<Factor>& factors() const noexcept { return factors_; }

  void add(Factor f);
  /// Every variable is touched by some factor.
  void validate() const;

  /// phi = sum_k phi_k as one element over R^N.
  BayesElement joint() const;

  /// Symbolic fill: the diagonal plus every pair sharing a factor.
  SparseMat pattern() const;

  /// Largest |i - j| over the fill pattern.
  int bandwidth() const;

 private:
  int num_vars_;
  std::vector<Factor> factors_;
};

/// Line-oriented text form:
///   VAR n
///   FACTOR <type> <index>... <param>...
/// Blank lines and lines starting with '#' are ignored. The number of indices
/// and parameters is fixed per type by the registry.
FactorGraph read_factor_graph(std::istream& in, const FactorRegistry& registry);
void write_factor_graph(std::ostream& out, const FactorGraph& graph);

/// Joint Gaussian estimate in information form with a fixed sparsity pattern.
struct GaussianState {
  Vec mean;
  SparseMat info;

  /// Full pattern.
  static GaussianState dense(Vec mean, const Mat& info);
  /// Pattern of `graph`; entries of `info` outside it must be zero.
  static GaussianState on_graph(const FactorGraph& graph, Vec mean, const Mat& info);

  Mat dense_info() const { return Mat(info); }
  Mat covariance() const;
};

/// info+ = E_q[d2 phi], info+ dmu = -E_q[d phi], mean+ = mean + dmu, with q
/// the current state. Throws NonSpd naming the leading minor.
GaussianState gvi_step_dense(const BayesElement& p, const GaussianState& state,
                             const QuadratureSpec& spec);

struct FactorExpectation {
  Vec g;
  Mat h;
};

struct Marginal {
  Vec mean;
  Mat cov;
};

inline constexpr int kMaxFactorSize = 4;

/// E[d phi_k] and E[d2 phi_k] under the factor's marginal.
FactorExpectation factor_expectations(const Factor& factor, const Marginal& marginal,
                                      const QuadratureSpec& spec = QuadratureSpec::gauss_hermite(10));

struct Assembled {
  Vec g;
  SparseMat h;
};

/// g = sum P_k^T g_k, H = sum P_k^T H_k P_k on the graph's pattern.
Assembled assemble(const FactorGraph& graph, const std::vector<FactorExpectation>& parts);

enum class LinearRoute { automatic, sweep, dense };

/// Blocks of info^{-1} on each factor's variables. The sweep route needs a
/// block-tridiagonal pattern for the given block size and touches only
/// those blocks; the dense route inverts.
std::vector<Marginal> marginals_for_factors(const GaussianState& state, const FactorGraph& graph,
                                            LinearRoute route = LinearRoute::automatic,
                                            int block = 1);

/// Solves H x = rhs, by block-tridiagonal elimination or dense Cholesky.
Vec solve_information(const SparseMat& h, const Vec& rhs, LinearRoute route = LinearRoute::automatic,
                      int block = 1);

struct GviOptions {
  QuadratureSpec spec = QuadratureSpec::gauss_hermite(10);
  LinearRoute marginal_route = LinearRoute::automatic;
  LinearRoute solve_route = LinearRoute::automatic;
  int block = 1;
  /// Step scaling applied to dmu only.
  double damping = 1.0;
  double tol = 1e-8;
  int max_iters = 50;
};

struct GviStep {
  Vec mean;
  SparseMat info;
  double step_norm = 0.0;
  bool damped = false;
};

struct GviTrace {
  std::vector<GviStep> steps;
  bool converged = false;
  std::string error;

  std::size_t size() const noexcept { return steps.size(); }
};

/// Factor-wise Gaussian variational inference: marginals, per-factor
/// expectations, assembly, solve.
GviTrace gvi_sparse_solve(const FactorGraph& graph, const GaussianState& init,
                          const GviOptions& opts = {});

/// Gauss-Newton MAP baseline: curvature and gradient evaluated at the mean
/// instead of expected under q.
GviTrace gauss_newton(const FactorGraph& graph, const GaussianState& init,
                      const GviOptions& opts = {});

}  // namespace bh
