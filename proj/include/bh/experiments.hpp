#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "bh/gvi_sparse.hpp"
#include "bh/variational.hpp"

namespace bh {

/// Depth estimation from a single disparity measurement z = f b / x + n.
struct StereoProblem {
  double prior_mean = 20.0;
  double prior_var = 9.0;
  double focal = 400.0;
  double baseline = 0.1;
  double meas_var = 0.09;
  double z = 0.0;

  BayesElement prior() const;
  BayesElement measurement() const;
  BayesElement posterior() const;
  GaussianMeasure prior_measure() const;
};

/// z = f b / x_true + n with n drawn from a seeded generator.
double stereo_measurement(double x_true, double focal, double baseline, double meas_var,
                          std::uint64_t seed);

/// Gauss-Hermite with `nodes` per dimension, falling back to a grid when the
/// measure is too close to the pole at x = 0.
QuadratureSpec stereo_rule(const GaussianMeasure& measure, int nodes);

/// Synthetic 1D SLAM chain: poses move along a line with odometry, landmarks
/// sit off the line by `lateral` and are observed by range.
struct SlamConfig {
  int poses = 20;
  int landmarks = 5;
  double step = 1.0;
  double pose_prior_var = 0.01;
  double odom_var = 0.0025;
  double landmark_prior_var = 4.0;
  double range_var = 0.01;
  double lateral = 1.0;
  double max_range = 6.0;
  /// Initial covariance is the dead-reckoning covariance times this factor.
  double init_inflation = 4.0;
  /// Replace range factors by linear relative-position factors.
  bool linear = false;
};

struct SlamProblem {
  FactorGraph graph;
  Vec truth;
  GaussianState init;
};

/// Draws truth from the priors and noise from `rng`, then builds the graph
/// and a dead-reckoning initial state. Each landmark starts from the range
/// observed at the largest along-track offset, with the side of the line
/// taken as known.
SlamProblem make_slam_problem(const SlamConfig& cfg, std::mt19937_64& rng);

/// Run parameters for the CLI experiments. Everything here has a flag or a
/// config-file key of the same name.
struct ExperimentConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int nodes = 20;
  int max_iters = 10;
  double tol = 1e-8;
  int basis = 0;  // 0 means the experiment's default
  std::optional<double> z;

  StereoProblem stereo;
  double x_true = 22.0;
  double shifted_mean = 24.0;
  double shifted_var = 4.0;

  SlamConfig slam;
  int trials = 500;

  /// Applies `key = value` settings; unknown keys and bad values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  void validate() const;
  /// The stereo problem with z resolved from the seed unless overridden.
  StereoProblem resolved_stereo() const;
};

/// Each run writes CSV series and summary.json into cfg.out_dir and returns
/// the summary text.
std::string run_stereo_project(const ExperimentConfig& cfg);
std::string run_stereo_iterate(const ExperimentConfig& cfg);
std::string run_hermite_sweep(const ExperimentConfig& cfg);
std::string run_hermite_iterate(const ExperimentConfig& cfg);
std::string run_gvi_demo(const ExperimentConfig& cfg);

/// Options shared by stereo-iterate and hermite-iterate.
IterateOptions stereo_iterate_options(const ExperimentConfig& cfg, int order);

}  // namespace bh
