#include "mnar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "mnar/design.hpp"
#include "mnar/errors.hpp"
#include "mnar/estimator.hpp"
#include "mnar/linalg.hpp"
#include "mnar/sampling.hpp"
#include "mnar/transfer.hpp"

namespace mnar {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "model",     "m",       "n",          "d",           "a",
    "b",         "sigma_q", "sigma_p",    "p_row",       "p_col",
    "t_row",     "t_col",   "design_eps", "trials",      "seed",
    "estimators", "output_path", "input_dir", "sweep"};

const std::set<std::string> kEstimators = {"passive", "active", "lll22"};

ExperimentConfig config_from_json(const json& j) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!kKnownKeys.count(key)) {
      throw ParameterError("config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig c;
  c.model = j.at("model").get<std::string>();
  if (c.model != "coherent" && c.model != "partition" && c.model != "general" &&
      c.model != "from_files") {
    throw ParameterError("config: model must be one of coherent, partition, "
                         "general, from_files (got '" + c.model + "')");
  }
  c.m = j.value("m", 0);
  c.n = j.value("n", 0);
  c.d = j.value("d", 0);
  c.a = j.value("a", 0.1);
  c.b = j.value("b", 0.8);
  c.sigma_q = j.value("sigma_q", 0.0);
  c.sigma_p = j.value("sigma_p", 0.0);
  c.p_row = j.value("p_row", -1.0);
  c.p_col = j.value("p_col", -1.0);
  c.t_row = j.value("t_row", -1);
  c.t_col = j.value("t_col", -1);
  c.design_eps = j.value("design_eps", 0.01);
  c.trials = j.value("trials", 1);
  c.seed = j.value("seed", std::uint64_t{0});
  c.estimators = j.value("estimators", std::vector<std::string>{});
  c.output_path = j.value("output_path", std::string{});
  c.input_dir = j.value("input_dir", std::string{});

  if (c.d < 1) throw ParameterError("config: field 'd' must be positive");
  if (c.trials < 1) throw ParameterError("config: field 'trials' must be >= 1");
  if (c.model != "from_files") {
    if (c.model == "coherent") {
      if (c.n < 1) throw ParameterError("config: field 'n' must be positive");
      c.m = c.n;
    } else if (c.m < 1 || c.n < 1) {
      throw ParameterError("config: fields 'm' and 'n' must be positive");
    }
  } else if (c.input_dir.empty()) {
    throw ParameterError("config: field 'input_dir' required for from_files");
  }
  if (c.estimators.empty()) {
    throw ParameterError("config: field 'estimators' must be nonempty");
  }
  for (const auto& name : c.estimators) {
    if (!kEstimators.count(name)) {
      throw ParameterError("config: unknown estimator '" + name + "'");
    }
  }
  const bool needs_passive =
      std::count(c.estimators.begin(), c.estimators.end(), "passive") ||
      std::count(c.estimators.begin(), c.estimators.end(), "lll22");
  const bool needs_active =
      std::count(c.estimators.begin(), c.estimators.end(), "active") > 0;
  if (needs_passive && !(c.p_row >= 0.0 && c.p_row <= 1.0 && c.p_col >= 0.0 &&
                         c.p_col <= 1.0)) {
    throw ParameterError(
        "config: fields 'p_row'/'p_col' must lie in [0, 1] for the passive "
        "and lll22 estimators");
  }
  if (needs_active && c.t_row < 1 &&
      !(c.p_row >= 0.0 && c.p_row <= 1.0 && c.p_col >= 0.0 && c.p_col <= 1.0)) {
    throw ParameterError(
        "config: the active estimator needs 't_row'/'t_col' or valid "
        "'p_row'/'p_col' to derive budgets");
  }
  if (c.sigma_q < 0.0) throw ParameterError("config: field 'sigma_q' < 0");
  if (c.sigma_p < 0.0) throw ParameterError("config: field 'sigma_p' < 0");
  if (!(c.design_eps > 0.0)) {
    throw ParameterError("config: field 'design_eps' must be positive");
  }
  return c;
}

std::string sanitize(std::string message) {
  for (char& ch : message) {
    if (ch == ',' || ch == '\n') ch = ';';
  }
  return message;
}

double scale_guard(double s) { return s > 0.0 ? s : 1.0; }

struct TrialContext {
  const ExperimentConfig& config;
  const TransferPair* shared_pair;  // reused for from_files
};

void run_trial(const TrialContext& ctx, int trial,
               std::vector<TrialResult>& rows) {
  const ExperimentConfig& cfg = ctx.config;
  const std::uint64_t seed_t = cfg.seed + static_cast<std::uint64_t>(trial);

  TransferPair generated;
  const TransferPair* pair = nullptr;
  if (cfg.model == "coherent") {
    generated = gen_coherent(cfg.n, cfg.d, seed_t);
    pair = &generated;
  } else if (cfg.model == "partition") {
    generated = gen_partition(cfg.m, cfg.n, cfg.d, cfg.a, cfg.b, seed_t);
    pair = &generated;
  } else if (cfg.model == "general") {
    generated = gen_general(cfg.m, cfg.n, cfg.d, ShiftSpec{}, seed_t);
    pair = &generated;
  } else {
    pair = ctx.shared_pair;
  }
  const int m = static_cast<int>(pair->P.rows());
  const int n = static_cast<int>(pair->P.cols());

  // Source observation (full support, optional additive noise), then the
  // shared normalization by its largest entry. Estimation runs on the
  // normalized scale; primary metrics are reported on the original scale.
  const Matrix source_obs =
      mask_source_mcar(pair->P, 1.0, cfg.sigma_p, seed_t);
  const double scale = scale_guard(norm_max(source_obs));
  const Matrix source_norm = source_obs / scale;

  const bool wants_passive =
      std::count(cfg.estimators.begin(), cfg.estimators.end(), "passive") > 0;
  const bool wants_lll22 =
      std::count(cfg.estimators.begin(), cfg.estimators.end(), "lll22") > 0;

  // Drawn once and shared by the passive estimator and the baseline so both
  // see the same data, and so results do not depend on which estimators run.
  ObservationSet passive_obs_norm;
  std::string passive_obs_error;
  if (wants_passive || wants_lll22) {
    try {
      const RowColMask mask =
          passive_mask(m, n, cfg.p_row, cfg.p_col, seed_t);
      passive_obs_norm = observe_passive(pair->Q, mask, cfg.sigma_q, seed_t);
      passive_obs_norm.masked /= scale;
    } catch (const std::exception& e) {
      passive_obs_error = e.what();
    }
  }

  SpectralFeatures features;
  std::string features_error;
  try {
    features = extract_features(source_norm, cfg.d);
  } catch (const std::exception& e) {
    features_error = e.what();
  }

  for (const auto& name : cfg.estimators) {
    TrialResult row;
    row.trial = trial;
    row.estimator = name;
    const auto started = std::chrono::steady_clock::now();
    try {
      Matrix qhat_norm;
      double ridge = 0.0;
      if (name == "passive") {
        if (!features_error.empty()) throw DataError(features_error);
        if (!passive_obs_error.empty()) throw DataError(passive_obs_error);
        const ThetaEstimate theta =
            fit_theta_product(features, passive_obs_norm);
        ridge = theta.ridge_used;
        qhat_norm = predict(features, theta);
      } else if (name == "active") {
        if (!features_error.empty()) throw DataError(features_error);
        const int t_row =
            cfg.t_row > 0
                ? cfg.t_row
                : static_cast<int>(std::lround(m * cfg.p_row));
        const int t_col =
            cfg.t_col > 0
                ? cfg.t_col
                : static_cast<int>(std::lround(n * cfg.p_col));
        const Design rho =
            frank_wolfe_design(features.Uhat, cfg.design_eps, 10000);
        const Design zeta =
            frank_wolfe_design(features.Vhat, cfg.design_eps, 10000);
        const ActiveSample sample =
            active_draw(rho.weights, zeta.weights, t_row, t_col, seed_t);
        ObservationSet obs = observe_active(pair->Q, sample, cfg.sigma_q, seed_t);
        for (auto& rec : obs.records) rec.value /= scale;
        const ThetaEstimate theta = fit_theta_product(features, obs);
        ridge = theta.ridge_used;
        qhat_norm = predict(features, theta);
      } else {  // lll22
        if (!passive_obs_error.empty()) throw DataError(passive_obs_error);
        const auto [w_p, w_q] =
            estimate_lll22_weights(source_norm, passive_obs_norm, cfg.d);
        qhat_norm = baseline_lll22(source_norm, passive_obs_norm, cfg.d, w_p, w_q);
      }
      const Metrics norm_metrics = metrics(qhat_norm, pair->Q / scale);
      const Metrics orig_metrics = metrics(Matrix(qhat_norm * scale), pair->Q);
      row.max_sq = orig_metrics.max_sq;
      row.mse = orig_metrics.mse;
      row.max_sq_norm = norm_metrics.max_sq;
      row.mse_norm = norm_metrics.mse;
      row.ridge_used = ridge;
    } catch (const std::exception& e) {
      row.error = sanitize(e.what());
      row.max_sq = row.mse = row.max_sq_norm = row.mse_norm =
          std::numeric_limits<double>::quiet_NaN();
    }
    const auto finished = std::chrono::steady_clock::now();
    row.wall_time_ms =
        std::chrono::duration<double, std::milli>(finished - started).count();
    rows.push_back(std::move(row));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::vector<ExperimentConfig> load_config_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.contains("sweep")) {
    return {config_from_json(j)};
  }
  const json sweep = j.at("sweep");
  if (!sweep.contains("field") || !sweep.contains("values")) {
    throw ParameterError("config: sweep needs 'field' and 'values'");
  }
  const std::string field = sweep.at("field").get<std::string>();
  static const std::set<std::string> kSweepable = {
      "m",     "n",     "d",     "a",          "b",     "sigma_q", "sigma_p",
      "p_row", "p_col", "t_row", "t_col",      "design_eps", "trials", "seed"};
  if (!kSweepable.count(field)) {
    throw ParameterError("config: field '" + field + "' is not sweepable");
  }
  std::vector<ExperimentConfig> out;
  for (const auto& value : sweep.at("values")) {
    json expanded = j;
    expanded.erase("sweep");
    expanded[field] = value;
    ExperimentConfig c = config_from_json(expanded);
    // Suffix the output stem with the swept value.
    std::string suffix = "_" + field + "=" + value.dump();
    std::string path_out = c.output_path;
    const auto dot = path_out.rfind('.');
    if (dot == std::string::npos) {
      path_out += suffix;
    } else {
      path_out.insert(dot, suffix);
    }
    c.output_path = path_out;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<TrialResult> run_experiment(const ExperimentConfig& config,
                                        int threads) {
  TransferPair loaded;
  TrialContext ctx{config, nullptr};
  if (config.model == "from_files") {
    loaded = load_pair(config.input_dir);
    ctx.shared_pair = &loaded;
  }

  const int workers =
      std::max(1, std::min(threads, config.trials));
  std::vector<std::vector<TrialResult>> per_trial(
      static_cast<std::size_t>(config.trials));

  if (workers == 1) {
    for (int t = 0; t < config.trials; ++t) {
      run_trial(ctx, t, per_trial[static_cast<std::size_t>(t)]);
    }
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      while (true) {
        const int t = next.fetch_add(1);
        if (t >= config.trials) return;
        run_trial(ctx, t, per_trial[static_cast<std::size_t>(t)]);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<TrialResult> rows;
  for (auto& trial_rows : per_trial) {
    for (auto& row : trial_rows) rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, EstimatorSummary> summarize(
    const std::vector<TrialResult>& results) {
  if (results.empty()) throw DataError("summarize: no results");
  std::map<std::string, std::vector<double>> max_sq, mse;
  std::map<std::string, EstimatorSummary> out;
  for (const auto& row : results) {
    if (!row.ok()) {
      ++out[row.estimator].trials_failed;
      continue;
    }
    ++out[row.estimator].trials_ok;
    max_sq[row.estimator].push_back(row.max_sq);
    mse[row.estimator].push_back(row.mse);
  }
  for (auto& [name, summary] : out) {
    if (summary.trials_ok == 0) continue;
    summary.max_sq = {percentile(max_sq[name], 0.5),
                      percentile(max_sq[name], 0.1),
                      percentile(max_sq[name], 0.9)};
    summary.mse = {percentile(mse[name], 0.5), percentile(mse[name], 0.1),
                   percentile(mse[name], 0.9)};
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("percentile: q in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void write_results_csv(const std::vector<TrialResult>& results,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "trial,estimator,max_sq,mse,wall_time_ms,ridge_used,error,"
         "max_sq_norm,mse_norm\n";
  char buf[40];
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  for (const auto& row : results) {
    out << row.trial << ',' << row.estimator << ',' << fmt(row.max_sq) << ','
        << fmt(row.mse) << ',';
    std::snprintf(buf, sizeof(buf), "%.3f", row.wall_time_ms);
    out << buf << ',' << fmt(row.ridge_used) << ',' << row.error << ','
        << fmt(row.max_sq_norm) << ',' << fmt(row.mse_norm) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

int default_threads() {
  const char* env = std::getenv("MNAR_THREADS");
  if (!env) return 1;
  const int k = std::atoi(env);
  return k >= 1 ? k : 1;
}

}  // namespace mnar
