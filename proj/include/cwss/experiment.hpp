#pragma once

// End-to-end sensing runs and Monte Carlo sweeps shared by the CLI and the
// acceptance suite.

#include "cwss/correlate.hpp"
#include "cwss/detect.hpp"
#include "cwss/model.hpp"
#include "cwss/sampling.hpp"
#include "cwss/solve.hpp"
#include "cwss/tvops.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cwss {

inline constexpr const char* kVersionTag = "cwss 0.1.0";

enum class Method { lasso, tvm };

inline const char* method_name(Method m) { return m == Method::lasso ? "lasso" : "tvm"; }

enum class CompressiveEstimator {
  anchored,  // pairs of retained samples grouped by Nyquist lag
  stream,    // lag products of the compressive sample sequence
};

/// Validation failure tied to a config key, so callers can point at the line
/// that carries it.
struct ConfigError : std::invalid_argument {
  std::string key;
  ConfigError(std::string k, const std::string& what) : std::invalid_argument(k + ": " + what), key(std::move(k)) {}
};

struct ExperimentConfig {
  std::optional<nlohmann::json> plan;  // unset: the eight-subband 0-500 MHz plan
  int n = 128;
  int t_periods = 2;
  int n_active = 5;
  double snr_db = 10.0;  // +inf disables noise
  double rate = 0.25;    // single-run sub-sampling rate
  std::vector<double> subsample_rates{0.2, 0.4, 0.6, 0.8};
  int trials = 200;
  int frames_per_period = 64;  // 0: use the exact second-order statistics of the scene
  double mu_factor = kDefaultMuFactor;
  std::vector<Method> methods{Method::lasso, Method::tvm};
  CompressiveEstimator estimator = CompressiveEstimator::anchored;
  int fa_subband = 4;
  int pd_subband = 5;
  std::uint64_t seed = 1;
  SolverConfig solver{};

  SubbandPlan make_plan() const { return plan ? plan_from_json(*plan) : default_paper_plan(n); }

  void validate() const {
    if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("n", "must be a power of two >= 2");
    if (t_periods < 1) throw ConfigError("t_periods", "must be >= 1");
    if (trials < 1) throw ConfigError("trials", "must be >= 1");
    if (frames_per_period < 0) throw ConfigError("frames_per_period", "must be >= 0");
    if (!(mu_factor >= 0.0)) throw ConfigError("mu_factor", "must be >= 0");
    if (methods.empty()) throw ConfigError("methods", "at least one method is required");
    const auto check_rate = [](const char* key, double r) {
      if (!(r > 0.0) || r > 1.0) throw ConfigError(key, "sub-sampling rates must lie in (0, 1]");
    };
    check_rate("rate", rate);
    if (subsample_rates.empty()) throw ConfigError("subsample_rates", "must not be empty");
    for (double r : subsample_rates) check_rate("subsample_rates", r);
    try {
      solver.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("solver", e.what());
    }
    std::optional<SubbandPlan> p;
    try {
      p.emplace(make_plan());
    } catch (const std::exception& e) {
      throw ConfigError("plan", e.what());
    }
    if (p->n() != n) throw ConfigError("plan", "plan n differs from configured n");
    if (n_active < 0 || static_cast<std::size_t>(n_active) > p->size())
      throw ConfigError("n_active", "out of range for the plan");
    const auto check_id = [&](const char* key, int id) {
      try {
        (void)p->index_of(id);
      } catch (const std::exception&) {
        throw ConfigError(key, "subband id " + std::to_string(id) + " is not in the plan");
      }
    };
    check_id("fa_subband", fa_subband);
    check_id("pd_subband", pd_subband);
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  nlohmann::json j = {{"n", c.n},
                      {"t_periods", c.t_periods},
                      {"n_active", c.n_active},
                      {"snr_db", std::isfinite(c.snr_db) ? nlohmann::json(c.snr_db) : nlohmann::json(nullptr)},
                      {"rate", c.rate},
                      {"subsample_rates", c.subsample_rates},
                      {"trials", c.trials},
                      {"frames_per_period", c.frames_per_period},
                      {"mu_factor", c.mu_factor},
                      {"methods", methods},
                      {"estimator", c.estimator == CompressiveEstimator::anchored ? "anchored" : "stream"},
                      {"fa_subband", c.fa_subband},
                      {"pd_subband", c.pd_subband},
                      {"seed", c.seed},
                      {"solver", to_json(c.solver)}};
  j["plan"] = c.plan ? *c.plan : nlohmann::json(nullptr);
  return j;
}

inline std::vector<Method> parse_methods(const std::string& s) {
  if (s == "lasso") return {Method::lasso};
  if (s == "tvm") return {Method::tvm};
  if (s == "both") return {Method::lasso, Method::tvm};
  throw std::invalid_argument("method must be lasso, tvm or both");
}

/// Keys absent from the document keep their defaults; unknown keys are rejected.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
  static const std::vector<std::string> known = {
      "plan",  "n",      "t_periods", "n_active",  "snr_db",     "rate",       "subsample_rates", "trials",
      "frames_per_period", "mu_factor", "methods", "method", "estimator", "fa_subband", "pd_subband", "seed",
      "solver"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(key, "unknown config key");
  ExperimentConfig c;
  const auto field = [&](const char* key, auto&& read) {
    if (!j.contains(key)) return;
    try {
      read(j.at(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  field("plan", [&](const nlohmann::json& v) { if (!v.is_null()) c.plan = v; });
  field("n", [&](const nlohmann::json& v) { c.n = v.get<int>(); });
  field("t_periods", [&](const nlohmann::json& v) { c.t_periods = v.get<int>(); });
  field("n_active", [&](const nlohmann::json& v) { c.n_active = v.get<int>(); });
  field("snr_db", [&](const nlohmann::json& v) {
    c.snr_db = v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
  });
  field("rate", [&](const nlohmann::json& v) { c.rate = v.get<double>(); });
  field("subsample_rates", [&](const nlohmann::json& v) { c.subsample_rates = v.get<std::vector<double>>(); });
  field("trials", [&](const nlohmann::json& v) { c.trials = v.get<int>(); });
  field("frames_per_period", [&](const nlohmann::json& v) { c.frames_per_period = v.get<int>(); });
  field("mu_factor", [&](const nlohmann::json& v) { c.mu_factor = v.get<double>(); });
  field("method", [&](const nlohmann::json& v) { c.methods = parse_methods(v.get<std::string>()); });
  field("methods", [&](const nlohmann::json& v) {
    c.methods.clear();
    for (const auto& m : v) {
      auto parsed = parse_methods(m.get<std::string>());
      c.methods.insert(c.methods.end(), parsed.begin(), parsed.end());
    }
  });
  field("estimator", [&](const nlohmann::json& v) {
    const auto e = v.get<std::string>();
    if (e == "anchored") c.estimator = CompressiveEstimator::anchored;
    else if (e == "stream") c.estimator = CompressiveEstimator::stream;
    else throw std::invalid_argument("estimator must be anchored or stream");
  });
  field("fa_subband", [&](const nlohmann::json& v) { c.fa_subband = v.get<int>(); });
  field("pd_subband", [&](const nlohmann::json& v) { c.pd_subband = v.get<int>(); });
  field("seed", [&](const nlohmann::json& v) { c.seed = v.get<std::uint64_t>(); });
  field("solver", [&](const nlohmann::json& v) { c.solver = solver_config_from_json(v); });
  return c;
}

// Single trial ----------------------------------------------------------------

/// Sensing inputs for one trial at one rate. Scene and frames depend only on
/// (seed, trial); the row selection is nested across rates.
struct TrialInput {
  WidebandScene scene;
  MeasurementMatrix phi;
  DictionaryBundle bundle;
  std::vector<AutocorrVector> columns;  // one compressive autocorrelation per period
};

inline std::uint64_t trial_seed(std::uint64_t base, int trial) { return base + static_cast<std::uint64_t>(trial); }

inline std::vector<std::vector<NyquistFrame>> trial_frames(const ExperimentConfig& cfg, const WidebandScene& scene,
                                                           int trial) {
  std::vector<std::vector<NyquistFrame>> periods;
  if (cfg.frames_per_period == 0) {
    periods.resize(static_cast<std::size_t>(cfg.t_periods));  // empty periods select the exact statistics
    return periods;
  }
  for (int t = 0; t < cfg.t_periods; ++t)
    periods.push_back(synthesize_frames(scene, cfg.frames_per_period,
                                        mix_seed(trial_seed(cfg.seed, trial), 1, static_cast<std::uint64_t>(t))));
  return periods;
}

inline WidebandScene trial_scene(const ExperimentConfig& cfg, const SubbandPlan& plan, int trial) {
  return generate_scene(plan, cfg.n_active, cfg.snr_db, mix_seed(trial_seed(cfg.seed, trial), 0));
}

/// r_y = A r_x with r_x the exact autocorrelation of the scene, white noise
/// included at lag 0.
inline AutocorrVector expected_compressive_autocorr(const WidebandScene& scene, const DictionaryBundle& bundle) {
  AutocorrVector rx = nyquist_autocorr_from_psd(scene.true_psd);
  rx.values[rx.half_len] += noise_variance(scene);
  return {bundle.m(), bundle.a * rx.values};
}

inline TrialInput prepare_trial(const ExperimentConfig& cfg, const WidebandScene& scene,
                                const std::vector<std::vector<NyquistFrame>>& periods, double rate, int trial) {
  const int m = rows_for_rate(rate, cfg.n);
  MeasurementMatrix phi = make_subsampling_matrix(m, cfg.n, mix_seed(trial_seed(cfg.seed, trial), 2));
  DictionaryBundle bundle = build_sensing_dictionary(phi);
  std::vector<AutocorrVector> columns;
  for (const auto& frames : periods) {
    if (frames.empty()) {
      columns.push_back(expected_compressive_autocorr(scene, bundle));
      continue;
    }
    const auto compressed = compress_frames(phi, frames);
    columns.push_back(cfg.estimator == CompressiveEstimator::anchored
                          ? estimate_anchored_autocorr(compressed, phi)
                          : estimate_autocorr(compressed, phi.m(), Estimator::biased));
  }
  return {scene, std::move(phi), std::move(bundle), std::move(columns)};
}

struct MethodOutcome {
  SolveResult solve;
  RVector p_current;  // estimate for the latest period
  bool fa_applicable = false, fa_event = false;
  bool pd_applicable = false, pd_event = false;
  TrialOutcome ordering;
  double psd_error = 0.0;  // ||p_hat - p|| / ||p||
};

inline MethodOutcome run_method(const ExperimentConfig& cfg, const TrialInput& in, Method method) {
  SolverConfig sc = cfg.solver;
  sc.mu_factor = cfg.mu_factor;
  MethodOutcome out;
  if (method == Method::lasso) {
    out.solve = solve_lasso_cwss(in.bundle, in.columns.back(), sc);
    out.p_current = out.solve.p_hat.col(0);
  } else {
    const TvOperator v = build_tv_operator(2 * cfg.n, cfg.t_periods);
    out.solve = solve_tvm_cwss(in.bundle, v, stack_measurements(in.columns), sc);
    out.p_current = out.solve.p_hat.col(out.solve.p_hat.cols() - 1);
  }
  const WidebandScene& scene = in.scene;
  out.fa_applicable = !scene.is_active(cfg.fa_subband);
  if (out.fa_applicable) out.fa_event = false_alarm_event(out.p_current, scene, cfg.fa_subband);
  out.pd_applicable = scene.is_active(cfg.pd_subband);
  if (out.pd_applicable) out.pd_event = detection_event(out.p_current, scene, cfg.pd_subband);
  out.ordering = make_outcome(scene, decide_occupancy(out.p_current, scene, OrderingRule{}));
  const double ref = scene.true_psd.norm();
  out.psd_error = ref > 0 ? (out.p_current - scene.true_psd).norm() / ref : out.p_current.norm();
  return out;
}

// Monte Carlo -----------------------------------------------------------------

struct SweepEntry {
  double rate = 0.0;
  Method method = Method::lasso;
  int fa_trials = 0, fa_events = 0;
  int pd_trials = 0, pd_events = 0;
  DetectionReport subbands;
  double mean_psd_error = 0.0;
  double mean_iterations = 0.0;
  int unconverged = 0;
  double wall_seconds = 0.0;

  std::optional<double> p_f() const { return fa_trials ? std::optional<double>(double(fa_events) / fa_trials) : std::nullopt; }
  std::optional<double> p_d() const { return pd_trials ? std::optional<double>(double(pd_events) / pd_trials) : std::nullopt; }
};

struct MonteCarloReport {
  nlohmann::json config;
  std::string version = kVersionTag;
  std::vector<SweepEntry> entries;  // rate-major, methods in configured order
};

/// Runs `count` independent tasks on `workers` threads; results land by index
/// so the outcome does not depend on scheduling.
inline void parallel_for(int count, int workers, const std::function<void(int)>& task) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// on_rate is invoked after each rate completes with the entries of that rate.
inline MonteCarloReport run_montecarlo(const ExperimentConfig& cfg, int workers,
                                       const std::function<void(const std::vector<SweepEntry>&)>& on_rate = {}) {
  cfg.validate();
  const SubbandPlan plan = cfg.make_plan();
  MonteCarloReport report;
  report.config = to_json(cfg);

  for (double rate : cfg.subsample_rates) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::vector<MethodOutcome>> results(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, workers, [&](int trial) {
      const WidebandScene scene = trial_scene(cfg, plan, trial);
      const auto frames = trial_frames(cfg, scene, trial);
      const TrialInput in = prepare_trial(cfg, scene, frames, rate, trial);
      auto& slot = results[static_cast<std::size_t>(trial)];
      for (Method m : cfg.methods) slot.push_back(run_method(cfg, in, m));
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<SweepEntry> batch;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      SweepEntry e;
      e.rate = rate;
      e.method = cfg.methods[mi];
      std::vector<TrialOutcome> outcomes;
      double err = 0.0, iters = 0.0;
      for (const auto& trial : results) {
        const MethodOutcome& o = trial[mi];
        e.fa_trials += o.fa_applicable;
        e.fa_events += o.fa_applicable && o.fa_event;
        e.pd_trials += o.pd_applicable;
        e.pd_events += o.pd_applicable && o.pd_event;
        e.unconverged += !o.solve.converged;
        err += o.psd_error;
        iters += o.solve.iterations;
        outcomes.push_back(o.ordering);
      }
      e.subbands = aggregate_report(plan, outcomes, cfg.trials);
      e.mean_psd_error = err / cfg.trials;
      e.mean_iterations = iters / cfg.trials;
      e.wall_seconds = secs;
      batch.push_back(std::move(e));
    }
    if (on_rate) on_rate(batch);
    report.entries.insert(report.entries.end(), batch.begin(), batch.end());
  }
  return report;
}

inline std::string csv_header() {
  return "rate,method,fa_trials,fa_events,p_f,p_f_ci_low,p_f_ci_high,pd_trials,pd_events,p_d,p_d_ci_low,p_d_ci_high\n";
}

inline std::string csv_row(const SweepEntry& e) {
  const auto num = [](double v) { return nlohmann::json(v).dump(); };
  const auto opt = [&](std::optional<double> v) { return v ? num(*v) : std::string("n/a"); };
  const auto fa_ci = wilson_interval(e.fa_events, e.fa_trials);
  const auto pd_ci = wilson_interval(e.pd_events, e.pd_trials);
  std::string row = num(e.rate) + ',' + method_name(e.method) + ',' + std::to_string(e.fa_trials) + ',' +
                    std::to_string(e.fa_events) + ',' + opt(e.p_f()) + ',' +
                    (e.fa_trials ? num(fa_ci.first) + ',' + num(fa_ci.second) : std::string("n/a,n/a")) + ',' +
                    std::to_string(e.pd_trials) + ',' + std::to_string(e.pd_events) + ',' + opt(e.p_d()) + ',' +
                    (e.pd_trials ? num(pd_ci.first) + ',' + num(pd_ci.second) : std::string("n/a,n/a")) + '\n';
  return row;
}

/// Deterministic report document; wall-clock figures are kept out of it.
inline nlohmann::json to_json(const MonteCarloReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"rate", e.rate},
                       {"method", method_name(e.method)},
                       {"fa_trials", e.fa_trials},
                       {"fa_events", e.fa_events},
                       {"p_f", detail::optional_json(e.p_f())},
                       {"pd_trials", e.pd_trials},
                       {"pd_events", e.pd_events},
                       {"p_d", detail::optional_json(e.p_d())},
                       {"mean_psd_error", e.mean_psd_error},
                       {"mean_iterations", e.mean_iterations},
                       {"unconverged", e.unconverged},
                       {"subbands", to_json(e.subbands)}});
  return {{"version", r.version}, {"config", r.config}, {"entries", entries}};
}

// Single run ------------------------------------------------------------------

struct SenseOutcome {
  WidebandScene scene;
  MeasurementMatrix phi;
  std::vector<std::pair<Method, MethodOutcome>> methods;

  bool all_converged() const {
    return std::all_of(methods.begin(), methods.end(), [](const auto& m) { return m.second.solve.converged; });
  }
};

inline SenseOutcome run_sense(const ExperimentConfig& cfg) {
  cfg.validate();
  const SubbandPlan plan = cfg.make_plan();
  const WidebandScene scene = trial_scene(cfg, plan, 0);
  const auto frames = trial_frames(cfg, scene, 0);
  TrialInput in = prepare_trial(cfg, scene, frames, cfg.rate, 0);
  SenseOutcome out{in.scene, in.phi, {}};
  for (Method m : cfg.methods) out.methods.emplace_back(m, run_method(cfg, in, m));
  return out;
}

}  // namespace cwss
