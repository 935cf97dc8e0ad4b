#include "bh/gvi_sparse.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "bh/errors.hpp"

namespace bh {

namespace {

Mat difference_hessian(double h) {
  Mat m(2, 2);
  m << h, -h, -h, h;
  return m;
}

Vec difference_gradient(double g) {
  Vec v(2);
  v << -g, g;
  return v;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

Factor prior_factor(int i, double mean, double var) {
  require_positive(var, "prior variance");
  Factor f{"prior", {i}, {mean, var}, BayesElement::gaussian(mean, var), {}};
  f.gn_hessian = [var](const Vec&) { return Mat::Constant(1, 1, 1.0 / var).eval(); };
  return f;
}

Factor odometry_factor(int i, int j, double u, double var) {
  require_positive(var, "odometry variance");
  if (!(i < j)) throw ConfigError("odometry factor needs i < j");
  BayesElement local(
      2,
      [u, var](const Vec& x) {
        const double r = x(1) - x(0) - u;
        return 0.5 * r * r / var;
      },
      [u, var](const Vec& x) { return difference_gradient((x(1) - x(0) - u) / var); },
      [var](const Vec&) { return difference_hessian(1.0 / var); });
  Factor f{"odom", {i, j}, {u, var}, local, {}};
  f.gn_hessian = [var](const Vec&) { return difference_hessian(1.0 / var); };
  return f;
}

Factor range_factor(int i, int j, double r, double var, double d) {
  require_positive(var, "range variance");
  require_positive(d, "range lateral offset");
  if (i == j) throw ConfigError("range factor needs two distinct variables");
  const int a = std::min(i, j);
  const int b = std::max(i, j);
  BayesElement local(
      2,
      [r, var, d](const Vec& x) {
        const double dx = x(1) - x(0);
        const double res = r - std::sqrt(dx * dx + d * d);
        return 0.5 * res * res / var;
      },
      [r, var, d](const Vec& x) {
        const double dx = x(1) - x(0);
        const double s = std::sqrt(dx * dx + d * d);
        return difference_gradient(-(r - s) * (dx / s) / var);
      },
      [r, var, d](const Vec& x) {
        const double dx = x(1) - x(0);
        const double s = std::sqrt(dx * dx + d * d);
        const double j1 = dx / s;
        return difference_hessian((j1 * j1 - (r - s) * d * d / (s * s * s)) / var);
      });
  Factor f{"range", {a, b}, {r, var, d}, local, {}};
  f.gn_hessian = [var, d](const Vec& x) {
    const double dx = x(1) - x(0);
    const double j1 = dx / std::sqrt(dx * dx + d * d);
    return difference_hessian(j1 * j1 / var);
  };
  return f;
}

Factor stereo_factor(int i, double z, double f, double b, double var) {
  require_positive(var, "stereo variance");
  const double c = f * b;
  BayesElement local(
      1,
      [z, c, var](const Vec& x) {
        const double res = z - c / x(0);
        return 0.5 * res * res / var;
      },
      [z, c, var](const Vec& x) {
        const double res = z - c / x(0);
        return Vec::Constant(1, res * c / (x(0) * x(0)) / var).eval();
      },
      [z, c, var](const Vec& x) {
        const double x2 = x(0) * x(0);
        const double jac = c / x2;
        const double res = z - c / x(0);
        return Mat::Constant(1, 1, (jac * jac - 2.0 * res * c / (x2 * x(0))) / var).eval();
      });
  Factor out{"stereo", {i}, {z, f, b, var}, local, {}};
  out.gn_hessian = [c, var](const Vec& x) {
    const double jac = c / (x(0) * x(0));
    return Mat::Constant(1, 1, jac * jac / var).eval();
  };
  return out;
}

FactorRegistry FactorRegistry::with_builtins() {
  FactorRegistry r;
  r.add("prior", 1, 2, [](const std::vector<int>& i, const std::vector<double>& p) {
    return prior_factor(i[0], p[0], p[1]);
  });
  r.add("odom", 2, 2, [](const std::vector<int>& i, const std::vector<double>& p) {
    return odometry_factor(i[0], i[1], p[0], p[1]);
  });
  r.add("range", 2, 3, [](const std::vector<int>& i, const std::vector<double>& p) {
    return range_factor(i[0], i[1], p[0], p[1], p[2]);
  });
  r.add("stereo", 1, 4, [](const std::vector<int>& i, const std::vector<double>& p) {
    return stereo_factor(i[0], p[0], p[1], p[2], p[3]);
  });
  return r;
}

void FactorRegistry::add(const std::string& type, int arity, int num_params, Builder builder) {
  if (type.empty() || type.find_first_of(" \t\n") != std::string::npos)
    throw ConfigError("factor type names must be single tokens");
  if (arity < 1 || arity > kMaxFactorSize || num_params < 0)
    throw ConfigError("factor type '" + type + "' has an invalid arity");
  types_[type] = Entry{arity, num_params, std::move(builder)};
}

int FactorRegistry::arity(const std::string& type) const {
  const auto it = types_.find(type);
  if (it == types_.end()) throw ConfigError("unknown factor type '" + type + "'");
  return it->second.arity;
}

int FactorRegistry::num_params(const std::string& type) const {
  const auto it = types_.find(type);
  if (it == types_.end()) throw ConfigError("unknown factor type '" + type + "'");
  return it->second.num_params;
}

Factor FactorRegistry::build(const std::string& type, const std::vector<int>& indices,
                             const std::vector<double>& params) const {
  const auto it = types_.find(type);
  if (it == types_.end()) throw ConfigError("unknown factor type '" + type + "'");
  if (static_cast<int>(indices.size()) != it->second.arity ||
      static_cast<int>(params.size()) != it->second.num_params)
    throw ConfigError("factor '" + type + "' takes " + std::to_string(it->second.arity) +
                      " indices and " + std::to_string(it->second.num_params) + " parameters");
  Factor f = it->second.builder(indices, params);
  f.type = type;
  return f;
}

FactorGraph::FactorGraph(int num_vars) : num_vars_(num_vars) {
  if (num_vars < 1) throw ConfigError("a factor graph needs at least one variable");
}

void FactorGraph::add(Factor f) {
  if (f.indices.empty() || static_cast<int>(f.indices.size()) > kMaxFactorSize)
    throw ConfigError("factor '" + f.type + "' must touch between 1 and 4 variables");
  for (std::size_t k = 0; k < f.indices.size(); ++k) {
    if (f.indices[k] < 0 || f.indices[k] >= num_vars_)
      throw ConfigError("factor '" + f.type + "' index " + std::to_string(f.indices[k]) +
                        " is out of range");
    if (k > 0 && f.indices[k] <= f.indices[k - 1])
      throw ConfigError("factor '" + f.type + "' indices must be strictly increasing");
  }
  if (f.local.dim() != static_cast<Eigen::Index>(f.indices.size()))
    throw DimensionMismatch("factor '" + f.type + "' local dimension does not match its indices");
  factors_.push_back(std::move(f));
}

void FactorGraph::validate() const {
  std::vector<bool> seen(static_cast<std::size_t>(num_vars_), false);
  for (const auto& f : factors_)
    for (int i : f.indices) seen[static_cast<std::size_t>(i)] = true;
  for (int i = 0; i < num_vars_; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw ConfigError("variable " + std::to_string(i) + " is not touched by any factor");
}

namespace {

Vec gather(const Vec& x, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(idx[k]);
  return out;
}

}  // namespace

BayesElement FactorGraph::joint() const {
  const std::vector<Factor> fs = factors_;
  const Eigen::Index n = num_vars_;
  return BayesElement(
      n,
      [fs](const Vec& x) {
        double acc = 0.0;
        for (const auto& f : fs) acc += f.local.phi(gather(x, f.indices));
        return acc;
      },
      [fs, n](const Vec& x) {
        Vec g = Vec::Zero(n);
        for (const auto& f : fs) {
          const Vec gk = f.local.gradient(gather(x, f.indices));
          for (std::size_t a = 0; a < f.indices.size(); ++a)
            g(f.indices[a]) += gk(static_cast<Eigen::Index>(a));
        }
        return g;
      },
      [fs, n](const Vec& x) {
        Mat h = Mat::Zero(n, n);
        for (const auto& f : fs) {
          const Mat hk = f.local.hessian(gather(x, f.indices));
          for (std::size_t a = 0; a < f.indices.size(); ++a)
            for (std::size_t b = 0; b < f.indices.size(); ++b)
              h(f.indices[a], f.indices[b]) +=
                  hk(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
        return h;
      });
}

SparseMat FactorGraph::pattern() const {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < num_vars_; ++i) t.emplace_back(i, i, 0.0);
  for (const auto& f : factors_)
    for (int a : f.indices)
      for (int b : f.indices) t.emplace_back(a, b, 0.0);
  SparseMat m(num_vars_, num_vars_);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

int FactorGraph::bandwidth() const {
  int bw = 0;
  for (const auto& f : factors_) bw = std::max(bw, f.indices.back() - f.indices.front());
  return bw;
}

FactorGraph read_factor_graph(std::istream& in, const FactorRegistry& registry) {
  std::string line;
  int lineno = 0;
  std::optional<FactorGraph> graph;
  auto fail = [&lineno](const std::string& msg) {
    throw ConfigError("factor graph line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head) || head[0] == '#') continue;
    if (head == "VAR") {
      if (graph) fail("VAR given twice");
      long n = 0;
      if (!(ss >> n) || n < 1) fail("VAR needs a positive count");
      graph.emplace(static_cast<int>(n));
    } else if (head == "FACTOR") {
      if (!graph) fail("FACTOR before VAR");
      std::string type;
      if (!(ss >> type)) fail("FACTOR needs a type");
      if (!registry.contains(type)) fail("unknown factor type '" + type + "'");
      std::vector<int> idx(static_cast<std::size_t>(registry.arity(type)));
      for (auto& i : idx)
        if (!(ss >> i)) fail("missing index for '" + type + "'");
      std::vector<double> params(static_cast<std::size_t>(registry.num_params(type)));
      for (auto& p : params)
        if (!(ss >> p)) fail("missing parameter for '" + type + "'");
      std::string extra;
      if (ss >> extra) fail("unexpected token '" + extra + "'");
      try {
        graph->add(registry.build(type, idx, params));
      } catch (const ConfigError& e) {
        fail(e.what());
      }
    } else {
      fail("unknown record '" + head + "'");
    }
  }
  if (!graph) throw ConfigError("factor graph has no VAR record");
  return *graph;
}

void write_factor_graph(std::ostream& out, const FactorGraph& graph) {
  out << "VAR " << graph.num_vars() << "\n";
  char buf[32];
  for (const auto& f : graph.factors()) {
    out << "FACTOR " << f.type;
    for (int i : f.indices) out << ' ' << i;
    for (double p : f.params) {
      std::snprintf(buf, sizeof buf, "%.17g", p);
      out << ' ' << buf;
    }
    out << "\n";
  }
}

namespace {

SparseMat dense_to_pattern(const Mat& info, const SparseMat& pattern) {
  SparseMat m = pattern;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) it.valueRef() = info(it.row(), it.col());
  return m;
}

}  // namespace

GaussianState GaussianState::dense(Vec mean, const Mat& info) {
  if (info.rows() != mean.size() || info.cols() != mean.size())
    throw DimensionMismatch("state information does not match the mean");
  return {std::move(mean), info.sparseView(0.0, 0.0)};
}

GaussianState GaussianState::on_graph(const FactorGraph& graph, Vec mean, const Mat& info) {
  if (mean.size() != graph.num_vars() || info.rows() != mean.size() || info.cols() != mean.size())
    throw DimensionMismatch("state does not match the graph size");
  const SparseMat pat = graph.pattern();
  SparseMat m = dense_to_pattern(info, pat);
  if ((Mat(m) - info).cwiseAbs().maxCoeff() != 0.0)
    throw ConfigError("state information has entries outside the graph's fill pattern");
  return {std::move(mean), m};
}

Mat GaussianState::covariance() const {
  const Mat l = cholesky_lower(dense_info(), "state information is not positive definite");
  const Mat linv = l.triangularView<Eigen::Lower>().solve(Mat::Identity(l.rows(), l.cols()));
  return linv.transpose() * linv;
}

GaussianState gvi_step_dense(const BayesElement& p, const GaussianState& state,
                             const QuadratureSpec& spec) {
  if (p.dim() != state.mean.size()) throw DimensionMismatch("gvi_step_dense: dimensions differ");
  const GaussianMeasure q(state.mean, state.covariance());
  const NodeSet nodes = measure_nodes(q, spec);
  const Vec g = expect_vector([&](const Vec& x) { return p.gradient(x); }, nodes);
  Mat h = expect_matrix([&](const Vec& x) { return p.hessian(x); }, nodes);
  h = 0.5 * (h + h.transpose());
  const Mat l = cholesky_lower(h, "updated information is not positive definite");
  const Vec dmu = -l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(g));
  return GaussianState::dense(state.mean + dmu, h);
}

FactorExpectation factor_expectations(const Factor& factor, const Marginal& marginal,
                                      const QuadratureSpec& spec) {
  const auto k = static_cast<Eigen::Index>(factor.indices.size());
  if (k > kMaxFactorSize) throw ConfigError("factor expectations are capped at 4 variables");
  if (marginal.mean.size() != k || marginal.cov.rows() != k)
    throw DimensionMismatch("marginal does not match factor '" + factor.type + "'");
  const NodeSet nodes = measure_nodes(GaussianMeasure(marginal.mean, marginal.cov), spec);
  FactorExpectation e;
  e.g = expect_vector([&](const Vec& x) { return factor.local.gradient(x); }, nodes);
  e.h = expect_matrix([&](const Vec& x) { return factor.local.hessian(x); }, nodes);
  e.h = 0.5 * (e.h + e.h.transpose());
  return e;
}

Assembled assemble(const FactorGraph& graph, const std::vector<FactorExpectation>& parts) {
  if (parts.size() != graph.factors().size())
    throw DimensionMismatch("assemble: one expectation per factor is required");
  Assembled out{Vec::Zero(graph.num_vars()), graph.pattern()};
  for (std::size_t f = 0; f < parts.size(); ++f) {
    const auto& idx = graph.factors()[f].indices;
    const auto& part = parts[f];
    if (part.g.size() != static_cast<Eigen::Index>(idx.size()))
      throw DimensionMismatch("assemble: expectation size does not match factor");
    for (std::size_t a = 0; a < idx.size(); ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      out.g(idx[a]) += part.g(ia);
      for (std::size_t b = 0; b < idx.size(); ++b)
        out.h.coeffRef(idx[a], idx[b]) += part.h(ia, static_cast<Eigen::Index>(b));
    }
  }
  return out;
}

namespace {

bool block_tridiagonal(const SparseMat& h, int block) {
  if (block < 1 || h.rows() % block != 0) return false;
  for (int k = 0; k < h.outerSize(); ++k)
    for (SparseMat::InnerIterator it(h, k); it; ++it)
      if (std::abs(it.row() / block - it.col() / block) > 1) return false;
  return true;
}

bool use_sweep(const SparseMat& h, LinearRoute route, int block) {
  if (route == LinearRoute::dense) return false;
  const bool ok = block_tridiagonal(h, block);
  if (route == LinearRoute::sweep && !ok)
    throw ConfigError("the sweep route needs a block-tridiagonal information pattern");
  return ok;
}

// Forward elimination S_1 = D_1, S_{k+1} = D_{k+1} - B_k S_k^{-1} B_k^T with
// B_k the (k+1, k) block.
struct Sweep {
  int block = 1;
  std::vector<Mat> b;
  std::vector<Eigen::LLT<Mat>> s;
};

Sweep forward_sweep(const SparseMat& h, int block) {
  const auto nb = static_cast<int>(h.rows() / block);
  Sweep sw;
  sw.block = block;
  Mat prev_b;
  for (int k = 0; k < nb; ++k) {
    Mat d = Mat(h.block(k * block, k * block, block, block));
    if (k > 0) {
      const Mat& bk = sw.b.back();
      d -= bk * sw.s.back().solve(bk.transpose());
    }
    try {
      cholesky_lower(d, "information is not positive definite");
    } catch (const NonSpd& e) {
      throw NonSpd("information is not positive definite", k * block + e.pivot());
    }
    sw.s.emplace_back(d);
    if (k + 1 < nb) sw.b.push_back(Mat(h.block((k + 1) * block, k * block, block, block)));
  }
  return sw;
}

Mat dense_covariance(const SparseMat& h) {
  const Mat l = cholesky_lower(Mat(h), "information is not positive definite");
  const Mat linv = l.triangularView<Eigen::Lower>().solve(Mat::Identity(l.rows(), l.cols()));
  return linv.transpose() * linv;
}

}  // namespace

std::vector<Marginal> marginals_for_factors(const GaussianState& state, const FactorGraph& graph,
                                            LinearRoute route, int block) {
  if (state.mean.size() != graph.num_vars())
    throw DimensionMismatch("state does not match the graph size");
  std::function<double(int, int)> cov;
  Mat full;
  std::vector<Mat> diag;
  std::vector<Mat> lower;
  if (use_sweep(state.info, route, block)) {
    const Sweep sw = forward_sweep(state.info, block);
    const auto nb = static_cast<int>(sw.s.size());
    diag.resize(static_cast<std::size_t>(nb));
    lower.resize(static_cast<std::size_t>(std::max(nb - 1, 0)));
    const Mat eye = Mat::Identity(block, block);
    diag.back() = sw.s.back().solve(eye);
    // Sigma_{k+1,k} = -Sigma_{k+1} B_k S_k^{-1};
    // Sigma_k = S_k^{-1} - S_k^{-1} B_k^T Sigma_{k+1,k}.
    for (int k = nb - 2; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      const Mat sinv = sw.s[ku].solve(eye);
      lower[ku] = -diag[ku + 1] * sw.b[ku] * sinv;
      diag[ku] = sinv - sinv * sw.b[ku].transpose() * lower[ku];
    }
    cov = [&diag, &lower, block](int i, int j) {
      const int bi = i / block;
      const int bj = j / block;
      if (bi == bj) return diag[static_cast<std::size_t>(bi)](i % block, j % block);
      if (bi == bj + 1) return lower[static_cast<std::size_t>(bj)](i % block, j % block);
      if (bj == bi + 1) return lower[static_cast<std::size_t>(bi)](j % block, i % block);
      throw ConfigError("requested covariance entry outside the block-tridiagonal band");
    };
  } else {
    full = dense_covariance(state.info);
    cov = [&full](int i, int j) { return full(i, j); };
  }
  std::vector<Marginal> out;
  out.reserve(graph.factors().size());
  for (const auto& f : graph.factors()) {
    const auto k = static_cast<Eigen::Index>(f.indices.size());
    Marginal m{gather(state.mean, f.indices), Mat(k, k)};
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        m.cov(a, b) = cov(f.indices[static_cast<std::size_t>(a)], f.indices[static_cast<std::size_t>(b)]);
    m.cov = 0.5 * (m.cov + m.cov.transpose());
    out.push_back(std::move(m));
  }
  return out;
}

Vec solve_information(const SparseMat& h, const Vec& rhs, LinearRoute route, int block) {
  if (rhs.size() != h.rows()) throw DimensionMismatch("solve_information: size mismatch");
  if (!use_sweep(h, route, block)) {
    const Mat l = cholesky_lower(Mat(h), "information is not positive definite");
    return l.transpose().triangularView<Eigen::Upper>().solve(
        l.triangularView<Eigen::Lower>().solve(rhs));
  }
  const Sweep sw = forward_sweep(h, block);
  const auto nb = static_cast<int>(sw.s.size());
  std::vector<Vec> y(static_cast<std::size_t>(nb));
  for (int k = 0; k < nb; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    y[ku] = rhs.segment(k * block, block);
    if (k > 0) y[ku] -= sw.b[ku - 1] * sw.s[ku - 1].solve(y[ku - 1]);
  }
  Vec x(h.rows());
  Vec next;
  for (int k = nb - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    Vec r = y[ku];
    if (k + 1 < nb) r -= sw.b[ku].transpose() * next;
    next = sw.s[ku].solve(r);
    x.segment(k * block, block) = next;
  }
  return x;
}

namespace {

template <typename Parts>
GviTrace run(const FactorGraph& graph, const GaussianState& init, const GviOptions& opts,
             Parts&& parts) {
  if (opts.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(opts.tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ConfigError("damping must be in (0, 1]");
  if (init.mean.size() != graph.num_vars() || init.info.rows() != graph.num_vars())
    throw DimensionMismatch("initial state does not match the graph size");
  graph.validate();
  GviTrace trace;
  GaussianState state = init;
  for (int it = 0; it < opts.max_iters; ++it) {
    try {
      const Assembled a = assemble(graph, parts(state));
      const Vec dmu = -solve_information(a.h, a.g, opts.solve_route, opts.block);
      if (!dmu.allFinite()) throw NumericalError("non-finite mean update");
      state = GaussianState{state.mean + opts.damping * dmu, a.h};
      trace.steps.push_back({state.mean, state.info, dmu.norm(), opts.damping != 1.0});
      if (dmu.norm() < opts.tol) {
        trace.converged = true;
        break;
      }
    } catch (const NumericalError& e) {
      trace.error = e.what();
      break;
    }
  }
  return trace;
}

}  // namespace

GviTrace gvi_sparse_solve(const FactorGraph& graph, const GaussianState& init,
                          const GviOptions& opts) {
  return run(graph, init, opts, [&](const GaussianState& s) {
    const auto margs = marginals_for_factors(s, graph, opts.marginal_route, opts.block);
    std::vector<FactorExpectation> parts;
    parts.reserve(margs.size());
    for (std::size_t f = 0; f < margs.size(); ++f)
      parts.push_back(factor_expectations(graph.factors()[f], margs[f], opts.spec));
    return parts;
  });
}

GviTrace gauss_newton(const FactorGraph& graph, const GaussianState& init, const GviOptions& opts) {
  return run(graph, init, opts, [&](const GaussianState& s) {
    std::vector<FactorExpectation> parts;
    parts.reserve(graph.factors().size());
    for (const auto& f : graph.factors()) {
      const Vec x = gather(s.mean, f.indices);
      parts.push_back({f.local.gradient(x), f.gn_hessian ? f.gn_hessian(x) : f.local.hessian(x)});
    }
    return parts;
  });
}

}  // namespace bh
