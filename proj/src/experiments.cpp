#include "bh/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bh/errors.hpp"
#include "bh/hermite.hpp"

namespace bh {

using Json = nlohmann::ordered_json;

BayesElement StereoProblem::prior() const { return BayesElement::gaussian(prior_mean, prior_var); }

BayesElement StereoProblem::measurement() const {
  return stereo_factor(0, z, focal, baseline, meas_var).local;
}

BayesElement StereoProblem::posterior() const { return prior() + measurement(); }

GaussianMeasure StereoProblem::prior_measure() const {
  return GaussianMeasure::scalar(prior_mean, prior_var);
}

double stereo_measurement(double x_true, double focal, double baseline, double meas_var,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(meas_var));
  return focal * baseline / x_true + noise(rng);
}

QuadratureSpec stereo_rule(const GaussianMeasure& measure, int nodes) {
  return rule_avoiding_pole(measure, 0.0, QuadratureSpec::gauss_hermite(nodes));
}

SlamProblem make_slam_problem(const SlamConfig& cfg, std::mt19937_64& rng) {
  const int np = cfg.poses;
  const int nl = cfg.landmarks;
  std::normal_distribution<double> unit(0.0, 1.0);
  Vec truth(np + nl);
  truth(0) = std::sqrt(cfg.pose_prior_var) * unit(rng);
  for (int t = 1; t < np; ++t) truth(t) = truth(t - 1) + cfg.step + std::sqrt(cfg.odom_var) * unit(rng);
  const double span = cfg.step * (np - 1);
  std::vector<double> nominal(static_cast<std::size_t>(nl));
  for (int j = 0; j < nl; ++j) {
    nominal[static_cast<std::size_t>(j)] = (j + 0.5) * span / nl;
    truth(np + j) = nominal[static_cast<std::size_t>(j)] + std::sqrt(cfg.landmark_prior_var) * unit(rng);
  }

  FactorGraph graph(np + nl);
  graph.add(prior_factor(0, 0.0, cfg.pose_prior_var));
  for (int t = 0; t + 1 < np; ++t) graph.add(odometry_factor(t, t + 1, cfg.step, cfg.odom_var));
  for (int j = 0; j < nl; ++j)
    graph.add(prior_factor(np + j, nominal[static_cast<std::size_t>(j)], cfg.landmark_prior_var));

  // Dead-reckoning pose means and variances.
  Vec mean(np + nl);
  Vec var(np + nl);
  for (int t = 0; t < np; ++t) {
    mean(t) = cfg.step * t;
    var(t) = cfg.pose_prior_var + cfg.odom_var * t;
  }
  for (int j = 0; j < nl; ++j) {
    mean(np + j) = nominal[static_cast<std::size_t>(j)];
    var(np + j) = cfg.landmark_prior_var;
  }
  // Each landmark starts from its best-conditioned observation: the one with
  // the largest along-track offset.
  std::vector<double> best(static_cast<std::size_t>(nl), -1.0);
  for (int t = 0; t < np; ++t) {
    for (int j = 0; j < nl; ++j) {
      const double dx = truth(np + j) - truth(t);
      if (std::abs(dx) > cfg.max_range) continue;
      double along = 0.0;
      double offset_var = 0.0;
      if (cfg.linear) {
        const double y = dx + std::sqrt(cfg.range_var) * unit(rng);
        graph.add(odometry_factor(t, np + j, y, cfg.range_var));
        along = std::abs(y);
        offset_var = cfg.range_var;
        if (along > best[static_cast<std::size_t>(j)]) mean(np + j) = mean(t) + y;
      } else {
        const double r = std::sqrt(dx * dx + cfg.lateral * cfg.lateral) +
                         std::sqrt(cfg.range_var) * unit(rng);
        graph.add(range_factor(t, np + j, r, cfg.range_var, cfg.lateral));
        along = std::sqrt(std::max(r * r - cfg.lateral * cfg.lateral, 0.0));
        const double slope = along > 0.0 ? r / along : std::numeric_limits<double>::infinity();
        offset_var = cfg.range_var * slope * slope;
        if (along > best[static_cast<std::size_t>(j)])
          mean(np + j) = mean(t) + (dx >= 0.0 ? along : -along);
      }
      if (along > best[static_cast<std::size_t>(j)]) {
        best[static_cast<std::size_t>(j)] = along;
        var(np + j) = std::min(cfg.landmark_prior_var, var(t) + offset_var);
      }
    }
  }

  // Dead-reckoning information for the poses; landmarks independent. Both
  // deflated by the inflation factor.
  Mat info = Mat::Zero(np + nl, np + nl);
  info(0, 0) = 1.0 / cfg.pose_prior_var;
  for (int t = 0; t + 1 < np; ++t) {
    const double w = 1.0 / cfg.odom_var;
    info(t, t) += w;
    info(t + 1, t + 1) += w;
    info(t, t + 1) -= w;
    info(t + 1, t) -= w;
  }
  for (int j = 0; j < nl; ++j) info(np + j, np + j) = 1.0 / var(np + j);
  info /= cfg.init_inflation;
  GaussianState init = GaussianState::on_graph(graph, mean, info);
  return {std::move(graph), std::move(truth), std::move(init)};
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  if (used != value.size() || !std::isfinite(v))
    throw ConfigError("'" + key + "' expects a finite number, got '" + value + "'");
  return v;
}

long parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  return static_cast<long>(v);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  auto num = [&] { return parse_double(key, value); };
  auto integer = [&] { return parse_int(key, value); };
  if (key == "out") {
    if (value.empty()) throw ConfigError("'out' must not be empty");
    out_dir = value;
  } else if (key == "seed") {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("'seed' expects an unsigned integer, got '" + value + "'");
    try {
      seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("'seed' is out of range");
    }
  } else if (key == "nodes") {
    nodes = static_cast<int>(integer());
  } else if (key == "max_iters") {
    max_iters = static_cast<int>(integer());
  } else if (key == "tol") {
    tol = num();
  } else if (key == "basis") {
    basis = static_cast<int>(integer());
  } else if (key == "z") {
    z = num();
  } else if (key == "prior_mean") {
    stereo.prior_mean = num();
  } else if (key == "prior_var") {
    stereo.prior_var = num();
  } else if (key == "focal") {
    stereo.focal = num();
  } else if (key == "baseline") {
    stereo.baseline = num();
  } else if (key == "meas_var") {
    stereo.meas_var = num();
  } else if (key == "x_true") {
    x_true = num();
  } else if (key == "shifted_mean") {
    shifted_mean = num();
  } else if (key == "shifted_var") {
    shifted_var = num();
  } else if (key == "poses") {
    slam.poses = static_cast<int>(integer());
  } else if (key == "landmarks") {
    slam.landmarks = static_cast<int>(integer());
  } else if (key == "step") {
    slam.step = num();
  } else if (key == "pose_prior_var") {
    slam.pose_prior_var = num();
  } else if (key == "odom_var") {
    slam.odom_var = num();
  } else if (key == "landmark_prior_var") {
    slam.landmark_prior_var = num();
  } else if (key == "range_var") {
    slam.range_var = num();
  } else if (key == "lateral") {
    slam.lateral = num();
  } else if (key == "max_range") {
    slam.max_range = num();
  } else if (key == "init_inflation") {
    slam.init_inflation = num();
  } else if (key == "linear") {
    if (value == "true" || value == "1")
      slam.linear = true;
    else if (value == "false" || value == "0")
      slam.linear = false;
    else
      throw ConfigError("'linear' expects true or false");
  } else if (key == "trials") {
    trials = static_cast<int>(integer());
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set(t.substr(0, eq), t.substr(eq + 1));
  }
}

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("'") + name + "' must be positive");
  };
  if (nodes < 1 || nodes > kMaxGaussHermiteNodes) throw ConfigError("'nodes' must be in 1..64");
  if (max_iters < 1 || max_iters > 1000) throw ConfigError("'max_iters' must be in 1..1000");
  positive(tol, "tol");
  if (basis != 0 && (basis < 2 || basis > 10)) throw ConfigError("'basis' must be in 2..10");
  positive(stereo.prior_var, "prior_var");
  positive(stereo.focal, "focal");
  positive(stereo.baseline, "baseline");
  positive(stereo.meas_var, "meas_var");
  positive(shifted_var, "shifted_var");
  positive(x_true, "x_true");
  if (!(stereo.prior_mean > 0.0)) throw ConfigError("'prior_mean' must be positive (depth)");
  if (slam.poses < 2 || slam.poses > 200) throw ConfigError("'poses' must be in 2..200");
  if (slam.landmarks < 0 || slam.landmarks > 100) throw ConfigError("'landmarks' must be in 0..100");
  positive(slam.step, "step");
  positive(slam.pose_prior_var, "pose_prior_var");
  positive(slam.odom_var, "odom_var");
  positive(slam.landmark_prior_var, "landmark_prior_var");
  positive(slam.range_var, "range_var");
  positive(slam.lateral, "lateral");
  positive(slam.max_range, "max_range");
  positive(slam.init_inflation, "init_inflation");
  if (trials < 1 || trials > 100000) throw ConfigError("'trials' must be in 1..100000");
}

StereoProblem ExperimentConfig::resolved_stereo() const {
  StereoProblem s = stereo;
  s.z = z ? *z : stereo_measurement(x_true, s.focal, s.baseline, s.meas_var, seed);
  return s;
}

IterateOptions stereo_iterate_options(const ExperimentConfig& cfg, int order) {
  IterateOptions o;
  o.subspace = SubspaceKind::hermite;
  o.order = order;
  o.max_iters = cfg.max_iters;
  o.tol = cfg.tol;
  const int nodes = cfg.nodes;
  o.spec = QuadratureSpec::gauss_hermite(nodes);
  o.rule = [nodes](const GaussianMeasure& m) { return stereo_rule(m, nodes); };
  return o;
}

namespace {

namespace fs = std::filesystem;

struct Column {
  std::string name;
  std::vector<double> values;
};

void write_csv(const fs::path& path, const std::vector<Column>& cols) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
  out << "\n";
  std::size_t rows = 0;
  for (const auto& c : cols) rows = std::max(rows, c.values.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ",";
      if (r < cols[c].values.size()) out << fmt(cols[c].values[r]);
    }
    out << "\n";
  }
}

std::string write_summary(const fs::path& dir, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(dir / "summary.json");
  if (!out) throw ConfigError("cannot write summary in '" + dir.string() + "'");
  out << text;
  return text;
}

fs::path prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir + "'");
  return dir;
}

Json stereo_echo(const ExperimentConfig& cfg, const StereoProblem& s) {
  Json j;
  j["seed"] = cfg.seed;
  j["nodes"] = cfg.nodes;
  j["prior_mean"] = s.prior_mean;
  j["prior_var"] = s.prior_var;
  j["focal"] = s.focal;
  j["baseline"] = s.baseline;
  j["meas_var"] = s.meas_var;
  j["x_true"] = cfg.x_true;
  j["z"] = s.z;
  return j;
}

// Emission grid: mean +/- 8 sigma of the prior, 2001 points.
QuadratureSpec emission_grid(const StereoProblem& s) {
  return QuadratureSpec::grid_around(s.prior_measure(), 8.0, 2001);
}

std::vector<double> grid_points(const QuadratureSpec& grid) {
  const NodeSet g = lebesgue_grid(grid);
  std::vector<double> xs(static_cast<std::size_t>(g.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) xs[static_cast<std::size_t>(i)] = g.points(0, i);
  return xs;
}

std::vector<double> sampled_density(const BayesElement& p, const QuadratureSpec& grid) {
  const Normalized n = normalize(p, grid);
  std::vector<double> out;
  for (double x : grid_points(grid)) out.push_back(n.density(Vec::Constant(1, x)));
  return out;
}

GaussianMeasure gaussian_from_hermite(const Coordinates& alpha, const GaussianMeasure& measure) {
  if (!(alpha(1) > 0.0))
    throw MeasureInvalid("projection has a non-positive quadratic coordinate");
  const IndefGaussian g =
      from_coordinates({alpha.head(1), alpha.segment(1, 1)}, measure);
  return g.measure();
}

}  // namespace

std::string run_stereo_project(const ExperimentConfig& cfg) {
  const fs::path dir = prepare(cfg);
  const StereoProblem s = cfg.resolved_stereo();
  const BayesElement post = s.posterior();
  const QuadratureSpec grid = emission_grid(s);
  std::vector<Column> cols{{"x", grid_points(grid)},
                           {"prior", sampled_density(s.prior(), grid)},
                           {"posterior", sampled_density(post, grid)}};
  Json summary;
  summary["experiment"] = "stereo-project";
  summary["config"] = stereo_echo(cfg, s);
  Json projections = Json::array();
  const std::vector<std::pair<std::string, GaussianMeasure>> measures{
      {"prior_measure", s.prior_measure()},
      {"shifted_measure", GaussianMeasure::scalar(cfg.shifted_mean, cfg.shifted_var)}};
  std::vector<double> kls;
  for (const auto& [name, nu] : measures) {
    const QuadratureSpec spec = stereo_rule(nu, cfg.nodes);
    const NodeSet nodes = measure_nodes(nu, spec);
    const std::vector<BayesElement> basis = HermiteBasis1D(2, nu).elements();
    const Coordinates alpha = project(post, basis, nodes);
    const GaussianMeasure q = gaussian_from_hermite(alpha, nu);
    const BayesElement qe = BayesElement::gaussian(q);
    const double k = kl(qe, post, grid);
    kls.push_back(k);
    Json j;
    j["name"] = name;
    j["measure_mean"] = nu.mean()(0);
    j["measure_var"] = nu.covariance()(0, 0);
    j["mean"] = q.mean()(0);
    j["var"] = q.covariance()(0, 0);
    j["kl"] = k;
    j["divergence"] = divergence(post, qe, nodes);
    projections.push_back(j);
    cols.push_back({"projection_" + name, sampled_density(qe, grid)});
  }
  write_csv(dir / "densities.csv", cols);
  summary["projections"] = projections;
  summary["shifted_kl_smaller"] = kls[1] < kls[0];
  return write_summary(dir, summary);
}

namespace {

Json trace_json(const IterationTrace& t) {
  Json j;
  j["iterations"] = t.size();
  j["converged"] = t.converged;
  j["kl_non_monotone"] = t.kl_non_monotone;
  j["error"] = t.error;
  Json kl = Json::array();
  for (const auto& s : t.steps) kl.push_back(s.kl);
  j["kl"] = kl;
  if (!t.steps.empty()) {
    const double last = t.steps.back().kl;
    j["final_kl"] = last;
    j["final_mean"] = t.final_measure().mean()(0);
    j["final_var"] = t.final_measure().covariance()(0, 0);
    int plateau = 0;
    for (std::size_t i = t.size(); i-- > 0;) {
      if (std::abs(t.steps[i].kl - last) > 0.01 * std::abs(last)) break;
      plateau = static_cast<int>(i) + 1;
    }
    j["plateau_iteration"] = plateau;
  }
  return j;
}

}  // namespace

std::string run_stereo_iterate(const ExperimentConfig& cfg) {
  const fs::path dir = prepare(cfg);
  const StereoProblem s = cfg.resolved_stereo();
  const BayesElement post = s.posterior();
  const IterationTrace t = iterate(post, s.prior_measure(), stereo_iterate_options(cfg, 2));
  const QuadratureSpec grid = emission_grid(s);

  std::vector<Column> series{{"iteration", {}}, {"kl", {}},   {"divergence", {}},
                             {"step_norm", {}}, {"mean", {}}, {"var", {}}};
  std::vector<Column> dens{{"x", grid_points(grid)}, {"posterior", sampled_density(post, grid)}};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& st = t.steps[i];
    series[0].values.push_back(static_cast<double>(i + 1));
    series[1].values.push_back(st.kl);
    series[2].values.push_back(st.divergence);
    series[3].values.push_back(st.step_norm);
    series[4].values.push_back(st.next_measure.mean()(0));
    series[5].values.push_back(st.next_measure.covariance()(0, 0));
    dens.push_back({"estimate_" + std::to_string(i + 1),
                    sampled_density(BayesElement::gaussian(st.next_measure), grid)});
  }
  write_csv(dir / "kl.csv", series);
  write_csv(dir / "densities.csv", dens);
  Json summary;
  summary["experiment"] = "stereo-iterate";
  summary["config"] = stereo_echo(cfg, s);
  summary["trace"] = trace_json(t);
  const std::string text = write_summary(dir, summary);
  if (!t.error.empty()) throw NumericalError(t.error);
  return text;
}

std::string run_hermite_sweep(const ExperimentConfig& cfg) {
  const fs::path dir = prepare(cfg);
  const StereoProblem s = cfg.resolved_stereo();
  const BayesElement post = s.posterior();
  const GaussianMeasure nu = s.prior_measure();
  const QuadratureSpec spec = stereo_rule(nu, cfg.nodes);
  const NodeSet nodes = measure_nodes(nu, spec);
  const QuadratureSpec grid = emission_grid(s);
  const int top = cfg.basis ? cfg.basis : 6;

  Column ms{"M", {}};
  Column div{"divergence", {}};
  std::vector<Column> dens{{"x", grid_points(grid)}, {"posterior", sampled_density(post, grid)}};
  Json skipped = Json::array();
  for (int m = 2; m <= top; ++m) {
    const std::vector<BayesElement> basis = HermiteBasis1D(m, nu).elements();
    const BayesElement q = reconstruct(project(post, basis, nodes), basis);
    ms.values.push_back(m);
    div.values.push_back(divergence(post, q, nodes));
    try {
      dens.push_back({"projection_M" + std::to_string(m), sampled_density(q, grid)});
    } catch (const NotNormalizable&) {
      skipped.push_back(m);
    }
  }
  const std::vector<BayesElement> g = gaussian_basis(nu).elements();
  const double gaussian_div = divergence(post, reconstruct(project(post, g, nodes), g), nodes);
  write_csv(dir / "sweep.csv", {ms, div});
  write_csv(dir / "densities.csv", dens);

  bool decreasing = true;
  for (std::size_t i = 1; i < div.values.size(); ++i)
    decreasing = decreasing && div.values[i] < div.values[i - 1];
  Json summary;
  summary["experiment"] = "hermite-sweep";
  summary["config"] = stereo_echo(cfg, s);
  summary["divergence"] = div.values;
  summary["gaussian_subspace_divergence"] = gaussian_div;
  summary["strictly_decreasing"] = decreasing;
  summary["ratio_last_to_first"] = div.values.back() / div.values.front();
  summary["not_normalizable"] = skipped;
  return write_summary(dir, summary);
}

std::string run_hermite_iterate(const ExperimentConfig& cfg) {
  const fs::path dir = prepare(cfg);
  const StereoProblem s = cfg.resolved_stereo();
  const BayesElement post = s.posterior();
  const int high = cfg.basis ? cfg.basis : 4;
  const IterationTrace low_t = iterate(post, s.prior_measure(), stereo_iterate_options(cfg, 2));
  const IterationTrace high_t = iterate(post, s.prior_measure(), stereo_iterate_options(cfg, high));

  const std::string high_name = "kl_M" + std::to_string(high);
  std::vector<Column> cols{{"iteration", {}}, {"kl_M2", {}}, {high_name, {}}};
  const std::size_t rows = std::max(low_t.size(), high_t.size());
  for (std::size_t i = 0; i < rows; ++i) {
    cols[0].values.push_back(static_cast<double>(i + 1));
    cols[1].values.push_back(i < low_t.size() ? low_t.steps[i].kl
                                              : std::numeric_limits<double>::quiet_NaN());
    cols[2].values.push_back(i < high_t.size() ? high_t.steps[i].kl
                                               : std::numeric_limits<double>::quiet_NaN());
  }
  write_csv(dir / "kl.csv", cols);
  Json summary;
  summary["experiment"] = "hermite-iterate";
  summary["config"] = stereo_echo(cfg, s);
  summary["M2"] = trace_json(low_t);
  summary["M" + std::to_string(high)] = trace_json(high_t);
  if (!low_t.steps.empty() && !high_t.steps.empty())
    summary["higher_order_kl_smaller"] = high_t.steps.back().kl < low_t.steps.back().kl;
  const std::string text = write_summary(dir, summary);
  if (!low_t.error.empty()) throw NumericalError(low_t.error);
  if (!high_t.error.empty()) throw NumericalError(high_t.error);
  return text;
}

std::string run_gvi_demo(const ExperimentConfig& cfg) {
  const fs::path dir = prepare(cfg);
  std::mt19937_64 rng(cfg.seed);
  GviOptions opts;
  opts.max_iters = cfg.max_iters;
  opts.tol = cfg.tol;

  long inside = 0;
  long total = 0;
  int worst_iters = 0;
  int failures = 0;
  Column trial_col{"trial", {}};
  Column iters_col{"iterations", {}};
  Column frac_col{"contained_fraction", {}};
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const SlamProblem prob = make_slam_problem(cfg.slam, rng);
    const GviTrace t = gvi_sparse_solve(prob.graph, prob.init, opts);
    if (!t.error.empty() || !t.converged) ++failures;
    worst_iters = std::max(worst_iters, static_cast<int>(t.size()));
    if (t.steps.empty()) continue;
    const GaussianState fin{t.steps.back().mean, t.steps.back().info};
    const Mat cov = fin.covariance();
    int in_trial = 0;
    for (Eigen::Index i = 0; i < fin.mean.size(); ++i)
      if (std::abs(fin.mean(i) - prob.truth(i)) <= 3.0 * std::sqrt(cov(i, i))) ++in_trial;
    inside += in_trial;
    total += fin.mean.size();
    trial_col.values.push_back(trial);
    iters_col.values.push_back(static_cast<double>(t.size()));
    frac_col.values.push_back(static_cast<double>(in_trial) / static_cast<double>(fin.mean.size()));

    if (trial != 0) continue;
    // Detailed outputs for the first trial.
    const GviTrace gn = gauss_newton(prob.graph, prob.init, opts);
    {
      std::ofstream g(dir / "graph.txt");
      write_factor_graph(g, prob.graph);
    }
    Mat gn_cov = Mat::Constant(fin.mean.size(), fin.mean.size(),
                               std::numeric_limits<double>::quiet_NaN());
    Vec gn_mean = Vec::Constant(fin.mean.size(), std::numeric_limits<double>::quiet_NaN());
    if (!gn.steps.empty()) {
      gn_mean = gn.steps.back().mean;
      gn_cov = GaussianState{gn_mean, gn.steps.back().info}.covariance();
    }
    std::vector<Column> est{{"index", {}},      {"is_landmark", {}}, {"truth", {}},
                            {"esgvi_mean", {}}, {"esgvi_sd", {}},    {"esgvi_error", {}},
                            {"gn_mean", {}},    {"gn_sd", {}},       {"gn_error", {}}};
    for (Eigen::Index i = 0; i < fin.mean.size(); ++i) {
      est[0].values.push_back(static_cast<double>(i));
      est[1].values.push_back(i >= cfg.slam.poses ? 1.0 : 0.0);
      est[2].values.push_back(prob.truth(i));
      est[3].values.push_back(fin.mean(i));
      est[4].values.push_back(std::sqrt(cov(i, i)));
      est[5].values.push_back(fin.mean(i) - prob.truth(i));
      est[6].values.push_back(gn_mean(i));
      est[7].values.push_back(std::sqrt(gn_cov(i, i)));
      est[8].values.push_back(gn_mean(i) - prob.truth(i));
    }
    write_csv(dir / "estimates.csv", est);
    std::vector<Column> tr{{"iteration", {}}, {"esgvi_step_norm", {}}, {"gn_step_norm", {}}};
    const std::size_t rows = std::max(t.size(), gn.size());
    for (std::size_t i = 0; i < rows; ++i) {
      tr[0].values.push_back(static_cast<double>(i + 1));
      tr[1].values.push_back(i < t.size() ? t.steps[i].step_norm
                                          : std::numeric_limits<double>::quiet_NaN());
      tr[2].values.push_back(i < gn.size() ? gn.steps[i].step_norm
                                           : std::numeric_limits<double>::quiet_NaN());
    }
    write_csv(dir / "trace.csv", tr);
  }
  write_csv(dir / "trials.csv", {trial_col, iters_col, frac_col});

  Json summary;
  summary["experiment"] = "gvi-demo";
  Json c;
  c["seed"] = cfg.seed;
  c["trials"] = cfg.trials;
  c["poses"] = cfg.slam.poses;
  c["landmarks"] = cfg.slam.landmarks;
  c["odom_var"] = cfg.slam.odom_var;
  c["range_var"] = cfg.slam.range_var;
  c["lateral"] = cfg.slam.lateral;
  c["max_range"] = cfg.slam.max_range;
  c["linear"] = cfg.slam.linear;
  c["max_iters"] = cfg.max_iters;
  c["tol"] = cfg.tol;
  summary["config"] = c;
  summary["containment_3sigma"] = total ? static_cast<double>(inside) / static_cast<double>(total)
                                        : 0.0;
  summary["max_iterations"] = worst_iters;
  summary["unconverged_trials"] = failures;
  return write_summary(dir, summary);
}

}  // namespace bh
