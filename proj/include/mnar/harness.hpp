#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mnar/matrix.hpp"

namespace mnar {

// One experiment: a data model, sampling parameters, estimator list, and a
// trial budget. Loaded from strict JSON (unknown keys are rejected).
struct ExperimentConfig {
  std::string model;  // coherent | partition | general | from_files
  int m = 0;
  int n = 0;
  int d = 0;
  double a = 0.1;  // partition diagonal boost
  double b = 0.8;  // partition block-value range
  double sigma_q = 0.0;
  double sigma_p = 0.0;
  double p_row = -1.0;  // unset unless nonnegative
  double p_col = -1.0;
  int t_row = -1;  // unset: defaults to round(m * p_row)
  int t_col = -1;
  double design_eps = 0.01;
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> estimators;  // subset of passive, active, lll22
  std::string output_path;
  std::string input_dir;  // pair directory, model == from_files only
};

struct TrialResult {
  int trial = 0;
  std::string estimator;
  double max_sq = 0.0;
  double mse = 0.0;
  double wall_time_ms = 0.0;
  double ridge_used = 0.0;
  std::string error;     // empty on success
  double max_sq_norm = 0.0;  // metrics on the normalized scale
  double mse_norm = 0.0;

  bool ok() const { return error.empty(); }
};

struct SummaryStats {
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

// Per-estimator order statistics (linear interpolation between ranks) of
// each metric, computed over successful trials.
struct EstimatorSummary {
  SummaryStats max_sq;
  SummaryStats mse;
  int trials_ok = 0;
  int trials_failed = 0;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Expands a config file containing an optional
//   "sweep": {"field": <scalar field>, "values": [...]}
// into one config per value, with the swept value appended to the output
// path stem. A file without a sweep yields exactly one config.
std::vector<ExperimentConfig> load_config_sweep(const std::string& path);

// Runs trials (trial t uses seed + t throughout) and returns one row per
// (trial, estimator) in trial-major order. Estimator failures are recorded
// in the row's error field, never thrown. Trials may run on `threads`
// workers; outputs do not depend on the schedule.
std::vector<TrialResult> run_experiment(const ExperimentConfig& config,
                                        int threads = 1);

std::map<std::string, EstimatorSummary> summarize(
    const std::vector<TrialResult>& results);

// Header: trial,estimator,max_sq,mse,wall_time_ms,ridge_used,error,
// max_sq_norm,mse_norm.
void write_results_csv(const std::vector<TrialResult>& results,
                       const std::string& path);

// Interpolated percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

// Worker count from the environment (MNAR_THREADS), defaulting to 1.
int default_threads();

}  // namespace mnar
