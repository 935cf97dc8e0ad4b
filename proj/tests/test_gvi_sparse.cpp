#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bh/errors.hpp"
#include "bh/experiments.hpp"
#include "bh/gvi_sparse.hpp"
#include "graphs.hpp"
#include "support.hpp"

using namespace bh;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Dense GVI iterations on the joint element, as the reference route.
std::vector<GaussianState> dense_route(const FactorGraph& g, GaussianState s, int iters,
                                       const QuadratureSpec& spec) {
  std::vector<GaussianState> out;
  const BayesElement joint = g.joint();
  for (int i = 0; i < iters; ++i) {
    s = gvi_step_dense(joint, s, spec);
    out.push_back(s);
  }
  return out;
}

// Tridiagonal SPD information for an n-chain.
Mat chain_info(std::mt19937_64& rng, int n) {
  Mat h = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) h(i, i) = oracle::uniform(rng, 2.5, 4.0);
  for (int i = 0; i + 1 < n; ++i) h(i, i + 1) = h(i + 1, i) = oracle::uniform(rng, -1, 1);
  return h;
}

FactorGraph chain_graph(int n) {
  FactorGraph g(n);
  g.add(prior_factor(0, 0.0, 1.0));
  for (int i = 0; i + 1 < n; ++i) g.add(odometry_factor(i, i + 1, 1.0, 0.5));
  return g;
}

}  // namespace

TEST_CASE("factor constructors and their derivatives") {
  const auto p = prior_factor(3, 2.0, 4.0);
  CHECK(p.indices == std::vector<int>{3});
  CHECK(p.local.phi(Vec::Constant(1, 4.0)) == doctest::Approx(0.5));

  const auto o = odometry_factor(1, 2, 1.0, 0.25);
  CHECK(o.local.phi(vec2(0.0, 1.5)) == doctest::Approx(0.5));

  const auto r = range_factor(4, 2, 3.0, 0.01, 1.0);
  CHECK(r.indices == std::vector<int>{2, 4});
  const auto s = stereo_factor(0, 1.7, 400, 0.1, 0.09);
  CHECK(s.local.phi(Vec::Constant(1, 20.0)) == doctest::Approx(std::pow(1.7 - 2.0, 2) / 0.18));

  std::mt19937_64 rng(79);
  for (const Factor* f : {&o, &r}) {
    for (int t = 0; t < 5; ++t) {
      const Vec x = oracle::random_vector(rng, 2, 3.0);
      CHECK(oracle::max_abs(f->local.gradient(x) - oracle::fd_gradient(f->local.phi_fn(), x)) < 1e-5);
      const Mat h = oracle::fd_jacobian([&](const Vec& y) { return f->local.gradient(y); }, x);
      CHECK(oracle::max_abs(f->local.hessian(x) - h) < 1e-4 * (1 + oracle::max_abs(h)));
    }
  }
  for (double x : {5.0, 20.0, 31.0}) {
    const Vec v = Vec::Constant(1, x);
    CHECK(std::abs(s.local.gradient(v)(0) - oracle::fd_gradient(s.local.phi_fn(), v)(0)) < 1e-6);
    const Mat h = oracle::fd_jacobian([&](const Vec& y) { return s.local.gradient(y); }, v);
    CHECK(std::abs(s.local.hessian(v)(0, 0) - h(0, 0)) < 1e-6 * (1 + std::abs(h(0, 0))));
  }

  CHECK_THROWS_AS(prior_factor(0, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(odometry_factor(2, 1, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(range_factor(1, 1, 1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(range_factor(0, 1, 1.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(stereo_factor(0, 1.0, 1.0, 1.0, -1.0), ConfigError);
}

TEST_CASE("graph construction checks") {
  FactorGraph g(3);
  CHECK_THROWS_AS(g.add(prior_factor(3, 0.0, 1.0)), ConfigError);
  Factor bad = odometry_factor(0, 1, 1.0, 1.0);
  bad.indices = {1, 0};
  CHECK_THROWS_AS(g.add(bad), ConfigError);
  bad.indices = {0, 1, 2};
  CHECK_THROWS_AS(g.add(bad), DimensionMismatch);
  g.add(odometry_factor(0, 1, 1.0, 1.0));
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.add(prior_factor(2, 0.0, 1.0));
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS(FactorGraph(0), ConfigError);
  CHECK(chain_graph(6).bandwidth() == 1);
}

TEST_CASE("factor expectations") {
  const auto p = prior_factor(0, 2.0, 4.0);
  const auto e = factor_expectations(p, Marginal{Vec::Constant(1, 3.0), Mat::Constant(1, 1, 0.7)});
  CHECK(e.g(0) == doctest::Approx(0.25));
  CHECK(e.h(0, 0) == doctest::Approx(0.25));

  const auto o = odometry_factor(0, 1, 1.0, 0.5);
  Mat cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  const auto eo = factor_expectations(o, Marginal{vec2(0.0, 2.0), cov});
  CHECK(oracle::max_abs(eo.h - 2.0 * (Mat(2, 2) << 1, -1, -1, 1).finished()) < 1e-12);
  CHECK(oracle::max_abs(eo.g - vec2(-2.0, 2.0)) < 1e-12);

  CHECK_THROWS_AS(factor_expectations(o, Marginal{Vec::Zero(1), Mat::Identity(1, 1)}), DimensionMismatch);
}

TEST_CASE("assembly scatters onto the graph pattern") {
  std::mt19937_64 rng(83);
  const auto g = graphs::random_graph(rng, 6, 5);
  std::vector<FactorExpectation> parts;
  Vec g_dense = Vec::Zero(6);
  Mat h_dense = Mat::Zero(6, 6);
  for (const auto& f : g.factors()) {
    const int k = static_cast<int>(f.indices.size());
    const Mat a = oracle::random_matrix(rng, k, k);
    FactorExpectation e{oracle::random_vector(rng, k), a + a.transpose()};
    Mat p = Mat::Zero(k, 6);
    for (int i = 0; i < k; ++i) p(i, f.indices[static_cast<std::size_t>(i)]) = 1.0;
    g_dense += p.transpose() * e.g;
    h_dense += p.transpose() * e.h * p;
    parts.push_back(e);
  }
  const auto as = assemble(g, parts);
  CHECK((as.g - g_dense).norm() < 1e-12);
  CHECK(oracle::max_abs(Mat(as.h) - h_dense) < 1e-12);
  CHECK(as.h.nonZeros() == g.pattern().nonZeros());
  parts.pop_back();
  CHECK_THROWS_AS(assemble(g, parts), DimensionMismatch);

  // A chain assembles to a tridiagonal pattern.
  const auto c = chain_graph(5);
  CHECK(c.pattern().nonZeros() == 5 + 2 * 4);
}

TEST_CASE("marginals by sweep and by inversion") {
  std::mt19937_64 rng(89);
  SUBCASE("diagonal information") {
    FactorGraph g(3);
    for (int i = 0; i < 3; ++i) g.add(prior_factor(i, 0.0, 1.0));
    Mat info = Vec::LinSpaced(3, 1.0, 3.0).asDiagonal();
    const auto m = marginals_for_factors(GaussianState::on_graph(g, Vec::Zero(3), info), g);
    for (int i = 0; i < 3; ++i) CHECK(m[static_cast<std::size_t>(i)].cov(0, 0) == doctest::Approx(1.0 / (i + 1)));
  }
  SUBCASE("chains of several lengths") {
    for (int n : {3, 50}) {
      const auto g = chain_graph(n);
      const auto s = GaussianState::on_graph(g, oracle::random_vector(rng, n), chain_info(rng, n));
      const Mat cov = s.dense_info().inverse();
      const auto sweep = marginals_for_factors(s, g, LinearRoute::sweep);
      const auto dense = marginals_for_factors(s, g, LinearRoute::dense);
      for (std::size_t f = 0; f < g.factors().size(); ++f) {
        CHECK(oracle::max_abs(sweep[f].cov - dense[f].cov) < 1e-10);
        CHECK((sweep[f].mean - dense[f].mean).norm() == 0.0);
        const auto& idx = g.factors()[f].indices;
        CHECK(std::abs(sweep[f].cov(0, 0) - cov(idx[0], idx[0])) < 1e-10);
      }
    }
  }
  SUBCASE("block size two") {
    // Pairs (0,1), (2,3), (4,5) coupled to their neighbours.
    FactorGraph g(6);
    for (int i = 0; i < 6; ++i) g.add(prior_factor(i, 0.0, 1.0));
    for (int i = 0; i + 1 < 6; ++i) g.add(odometry_factor(i, i + 1, 1.0, 1.0));
    g.add(odometry_factor(0, 3, 1.0, 1.0));
    g.add(odometry_factor(2, 5, 1.0, 1.0));
    const SparseMat pat = g.pattern();
    Mat h = Mat::Zero(6, 6);
    for (int k = 0; k < pat.outerSize(); ++k)
      for (SparseMat::InnerIterator it(pat, k); it; ++it)
        h(it.row(), it.col()) = it.row() == it.col() ? 4.0 : -0.5;
    const auto s = GaussianState::on_graph(g, Vec::Zero(6), h);
    CHECK_THROWS_AS(marginals_for_factors(s, g, LinearRoute::sweep, 1), ConfigError);
    const auto sweep = marginals_for_factors(s, g, LinearRoute::sweep, 2);
    const auto dense = marginals_for_factors(s, g, LinearRoute::dense);
    for (std::size_t f = 0; f < g.factors().size(); ++f) CHECK(oracle::max_abs(sweep[f].cov - dense[f].cov) < 1e-12);
  }
}

TEST_CASE("linear solves") {
  std::mt19937_64 rng(97);
  const Mat h = chain_info(rng, 30);
  const Vec b = oracle::random_vector(rng, 30);
  const SparseMat hs = h.sparseView();
  const Vec xs = solve_information(hs, b, LinearRoute::sweep);
  const Vec xd = solve_information(hs, b, LinearRoute::dense);
  CHECK((h * xs - b).norm() < 1e-12);
  CHECK((xs - xd).norm() < 1e-12);
  CHECK_THROWS_AS(solve_information(hs, Vec::Zero(3)), DimensionMismatch);

  Mat bad = Mat::Identity(3, 3);
  bad(2, 2) = -1.0;
  try {
    solve_information(bad.sparseView(), Vec::Ones(3), LinearRoute::sweep);
    FAIL("expected NonSpd");
  } catch (const NonSpd& e) {
    CHECK(e.pivot() == 2);
  }
}

TEST_CASE("dense GVI step") {
  // Quadratic phi: one step is the exact posterior from any start.
  Mat p(2, 2);
  p << 2.0, 0.6, 0.6, 1.0;
  const auto target = BayesElement::quadratic(vec2(1.0, -2.0), p);
  const auto s = gvi_step_dense(target, GaussianState::dense(vec2(5.0, 5.0), Mat::Identity(2, 2)),
                                QuadratureSpec::gauss_hermite(3));
  CHECK((s.mean - vec2(1.0, -2.0)).norm() < 1e-12);
  CHECK(oracle::max_abs(s.dense_info() - p) < 1e-12);

  Mat n(2, 2);
  n << 1.0, 0.0, 0.0, -1.0;
  try {
    gvi_step_dense(BayesElement::quadratic(Vec::Zero(2), n), GaussianState::dense(Vec::Zero(2), Mat::Identity(2, 2)),
                   QuadratureSpec::gauss_hermite(3));
    FAIL("expected NonSpd");
  } catch (const NonSpd& e) {
    CHECK(e.pivot() == 1);
  }
  CHECK_THROWS_AS(gvi_step_dense(target, GaussianState::dense(Vec::Zero(3), Mat::Identity(3, 3)),
                                 QuadratureSpec::gauss_hermite(3)),
                  DimensionMismatch);
}

TEST_CASE("dense GVI step matches a Simpson oracle on a nonlinear toy") {
  // phi = |f(x)|^2 / 2 with f = (x0^2 - x1, x0 + sin(x1) / 2).
  auto f = [](double a, double b) { return vec2(a * a - b, a + 0.5 * std::sin(b)); };
  auto jac = [](double a, double b) { return (Mat(2, 2) << 2 * a, -1.0, 1.0, 0.5 * std::cos(b)).finished(); };
  auto grad = [&](double a, double b) -> Vec { return jac(a, b).transpose() * f(a, b); };
  auto hess = [&](double a, double b) -> Mat {
    const Mat j = jac(a, b);
    const Vec r = f(a, b);
    Mat h = j.transpose() * j;
    h(0, 0) += 2 * r(0);
    h(1, 1) += -0.5 * std::sin(b) * r(1);
    return h;
  };
  const BayesElement p(
      2, [&](const Vec& x) { return 0.5 * f(x(0), x(1)).squaredNorm(); },
      [=](const Vec& x) { return grad(x(0), x(1)); }, [=](const Vec& x) { return hess(x(0), x(1)); });
  Mat cov(2, 2);
  cov << 0.3, 0.1, 0.1, 0.2;
  const Vec mean = vec2(0.5, 0.2);
  const auto s = gvi_step_dense(p, GaussianState::dense(mean, cov.inverse()), QuadratureSpec::gauss_hermite(20));

  // Oracle: 2D Simpson in whitened coordinates.
  const Mat l = cov.llt().matrixL();
  const int n = 400;
  const double lim = 9.0;
  const double h = 2 * lim / n;
  Vec eg = Vec::Zero(2);
  Mat eh = Mat::Zero(2, 2);
  for (int i = 0; i <= n; ++i) {
    const double wi = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    for (int j = 0; j <= n; ++j) {
      const double wj = (j == 0 || j == n) ? 1 : (j % 2 ? 4 : 2);
      const Vec xi = vec2(-lim + i * h, -lim + j * h);
      const Vec x = mean + l * xi;
      const double w = wi * wj * h * h / 9.0 * std::exp(-0.5 * xi.squaredNorm()) / (2 * oracle::kPi);
      eg += w * grad(x(0), x(1));
      eh += w * hess(x(0), x(1));
    }
  }
  CHECK(oracle::max_abs(s.dense_info() - eh) < 1e-8);
  CHECK((s.mean - (mean - eh.ldlt().solve(eg))).norm() < 1e-8);
}

TEST_CASE("sparse GVI equals the dense route per iteration") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 3; ++trial) {
    const auto g = graphs::quartic_chain(rng, 6);
    const auto init = graphs::prior_state(g);
    GviOptions o;
    o.max_iters = 6;
    o.tol = 1e-300;
    const auto sparse = gvi_sparse_solve(g, init, o);
    REQUIRE(sparse.error.empty());
    const auto dense = dense_route(g, init, 6, QuadratureSpec::gauss_hermite(3));
    for (std::size_t i = 0; i < sparse.size(); ++i) {
      CHECK((sparse.steps[i].mean - dense[i].mean).norm() < 1e-10);
      CHECK(oracle::max_abs(Mat(sparse.steps[i].info) - dense[i].dense_info()) < 1e-10);
    }
  }
}

TEST_CASE("joint and factor-accumulated projections agree on random graphs") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial;
    const auto g = graphs::random_graph(rng, n, n);
    const auto init = graphs::prior_state(g, 2.0);
    GviOptions o;
    o.max_iters = 1;
    const auto sparse = gvi_sparse_solve(g, init, o);
    REQUIRE(sparse.error.empty());
    const auto dense = gvi_step_dense(g.joint(), init, QuadratureSpec::gauss_hermite(3));
    CHECK((sparse.steps[0].mean - dense.mean).norm() < 1e-10);
    CHECK(oracle::max_abs(Mat(sparse.steps[0].info) - dense.dense_info()) < 1e-10);
  }
}

TEST_CASE("linear-Gaussian chains are solved in one iteration") {
  std::mt19937_64 rng(107);
  const auto g = chain_graph(12);
  const Mat p = g.joint().hessian(Vec::Zero(12));
  const Vec grad0 = g.joint().gradient(Vec::Zero(12));
  const Vec exact = -p.ldlt().solve(grad0);
  const auto init = GaussianState::on_graph(g, oracle::random_vector(rng, 12, 5.0), Mat::Identity(12, 12));
  for (auto solver : {&gvi_sparse_solve, &gauss_newton}) {
    const auto t = solver(g, init, GviOptions{});
    REQUIRE(t.error.empty());
    CHECK(t.converged);
    CHECK(t.size() == 2);
    CHECK((t.steps[0].mean - exact).norm() < 1e-10);
    CHECK(oracle::max_abs(Mat(t.steps[0].info) - p) < 1e-10);
  }
}

TEST_CASE("sparsity pattern is fixed across iterations") {
  std::mt19937_64 rng(109);
  auto prob = make_slam_problem(SlamConfig{}, rng);
  const auto t = gvi_sparse_solve(prob.graph, prob.init);
  REQUIRE(t.error.empty());
  const auto nnz = prob.graph.pattern().nonZeros();
  for (const auto& s : t.steps) CHECK(s.info.nonZeros() == nnz);
}

TEST_CASE("solver options") {
  const auto g = chain_graph(4);
  const auto init = GaussianState::on_graph(g, Vec::Zero(4), Mat::Identity(4, 4));
  GviOptions o;
  o.damping = 0.5;
  const auto t = gvi_sparse_solve(g, init, o);
  CHECK(t.steps[0].damped);
  CHECK(t.converged);
  o.damping = 0.0;
  CHECK_THROWS_AS(gvi_sparse_solve(g, init, o), ConfigError);
  o = GviOptions{};
  o.max_iters = 0;
  CHECK_THROWS_AS(gvi_sparse_solve(g, init, o), ConfigError);
  o = GviOptions{};
  o.tol = 0.0;
  CHECK_THROWS_AS(gvi_sparse_solve(g, init, o), ConfigError);
  CHECK_THROWS_AS(gvi_sparse_solve(g, GaussianState::dense(Vec::Zero(3), Mat::Identity(3, 3))), DimensionMismatch);

  Mat off = Mat::Identity(4, 4);
  off(0, 3) = off(3, 0) = 0.1;
  CHECK_THROWS_AS(GaussianState::on_graph(g, Vec::Zero(4), off), ConfigError);
}

TEST_CASE("non-positive curvature is reported in the trace") {
  // A range factor alone, with the two variables far closer than the range:
  // the expected curvature is negative.
  FactorGraph g(2);
  g.add(prior_factor(0, 0.0, 1e6));
  g.add(range_factor(0, 1, 10.0, 0.01, 1.0));
  const auto t = gvi_sparse_solve(g, GaussianState::on_graph(g, vec2(0.0, 0.1), Mat::Identity(2, 2) * 100.0));
  CHECK_FALSE(t.error.empty());
  CHECK_FALSE(t.converged);
}

TEST_CASE("single-variable stereo graph matches the dense step") {
  StereoProblem sp;
  sp.z = 1.7;
  FactorGraph g(1);
  g.add(prior_factor(0, sp.prior_mean, sp.prior_var));
  g.add(stereo_factor(0, sp.z, sp.focal, sp.baseline, sp.meas_var));
  GviOptions o;
  o.spec = QuadratureSpec::gauss_hermite(20);
  o.max_iters = 8;
  o.tol = 1e-300;
  const GaussianState init = GaussianState::dense(Vec::Constant(1, 22.0), Mat::Constant(1, 1, 0.25));
  const auto sparse = gvi_sparse_solve(g, init, o);
  REQUIRE(sparse.error.empty());
  const auto dense = dense_route(g, init, 8, QuadratureSpec::gauss_hermite(20));
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    CHECK(std::abs(sparse.steps[i].mean(0) - dense[i].mean(0)) < 1e-10);
    CHECK(std::abs(sparse.steps[i].info.coeff(0, 0) - dense[i].dense_info()(0, 0)) < 1e-10);
  }
}

TEST_CASE("SLAM chain: sweep and dense linear algebra agree, and both converge") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 3; ++trial) {
    auto prob = make_slam_problem(SlamConfig{}, rng);
    GviOptions a;
    a.marginal_route = LinearRoute::automatic;
    GviOptions d;
    d.marginal_route = LinearRoute::dense;
    d.solve_route = LinearRoute::dense;
    const auto ta = gvi_sparse_solve(prob.graph, prob.init, a);
    const auto td = gvi_sparse_solve(prob.graph, prob.init, d);
    REQUIRE(ta.error.empty());
    REQUIRE(ta.size() == td.size());
    CHECK(ta.converged);
    CHECK(ta.size() <= 10);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK((ta.steps[i].mean - td.steps[i].mean).norm() < 1e-9);
    const auto gn = gauss_newton(prob.graph, prob.init, a);
    CHECK(gn.error.empty());
  }
}

TEST_CASE("factor graph text round trip") {
  std::mt19937_64 rng(127);
  const auto prob = make_slam_problem(SlamConfig{}, rng);
  std::ostringstream out;
  write_factor_graph(out, prob.graph);
  std::istringstream in("# written by the test\n\n" + out.str());
  const auto back = read_factor_graph(in, FactorRegistry::with_builtins());
  std::ostringstream again;
  write_factor_graph(again, back);
  CHECK(out.str() == again.str());
  CHECK(back.num_vars() == prob.graph.num_vars());
  for (int t = 0; t < 5; ++t) {
    const Vec x = prob.truth + oracle::random_vector(rng, prob.graph.num_vars(), 0.1);
    CHECK(back.joint().phi(x) == prob.graph.joint().phi(x));
  }
}

TEST_CASE("factor graph text errors") {
  const auto reg = FactorRegistry::with_builtins();
  auto parse = [&](const std::string& s) {
    std::istringstream in(s);
    return read_factor_graph(in, reg);
  };
  CHECK_NOTHROW(parse("VAR 2\nFACTOR prior 0 0 1\nFACTOR odom 0 1 1 0.5\n"));
  CHECK_THROWS_AS(parse(""), ConfigError);
  CHECK_THROWS_AS(parse("FACTOR prior 0 0 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nVAR 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR bogus 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR prior 0 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR prior 0 0 1 7\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR prior 5 0 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR odom 1 0 1 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nFACTOR prior 0 0 -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("VAR 2\nEDGE 0 1\n"), ConfigError);
  try {
    parse("VAR 2\n# comment\nFACTOR prior 0 0\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("custom factor types through the registry") {
  auto reg = FactorRegistry::with_builtins();
  reg.add("quartic2", 2, 4, [](const std::vector<int>& i, const std::vector<double>& p) {
    return graphs::quartic_factor(i, vec2(p[0], p[1]), p[2], p[3], 0.1);
  });
  CHECK(reg.contains("quartic2"));
  CHECK(reg.arity("quartic2") == 2);
  CHECK(reg.num_params("quartic2") == 4);
  std::istringstream in("VAR 2\nFACTOR prior 0 0 1\nFACTOR quartic2 0 1 -1 1 0.5 2\n");
  const auto g = read_factor_graph(in, reg);
  REQUIRE(g.factors().size() == 2);
  CHECK(g.factors()[1].type == "quartic2");
  CHECK_THROWS(reg.arity("nope"));
}
