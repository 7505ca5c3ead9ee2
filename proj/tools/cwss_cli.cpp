// cwss: command-line front end for single runs, Monte Carlo sweeps, bound
// reports and the self-test gate.

#include "cwss/cwss.hpp"
#include "cwss/selftest.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace cwss;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNotConverged = 3 };

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// First line of `text` mentioning "key" as a JSON member name, or 0.
int line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = '"' + key + '"';
  std::istringstream in(text);
  std::string line;
  for (int no = 1; std::getline(in, line); ++no)
    if (line.find(needle) != std::string::npos) return no;
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFailure(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_snr(const std::string& s) {
  if (s == "off" || s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad --snr-db value '" + s + "'");
  return v;
}

/// Options shared by `sense` and `montecarlo`; a flag only overrides the
/// config file when it was given.
struct RunOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  double rate = 0;
  std::vector<double> rates;
  int trials = 0;
  std::string method;
  int n = 0;
  int t = 0;
  std::string snr_db;
  double mu_factor = 0;
  std::string out_dir = "out";
  int workers = 0;
  bool export_matrices = false;

  CLI::App* app = nullptr;

  void attach(CLI::App* sub, bool sweep) {
    app = sub;
    sub->add_option("--config", config_path, "JSON config mirroring ExperimentConfig")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--rate", rate, "single-run sub-sampling rate in (0, 1]");
    sub->add_option("--rates", rates, "sweep rates, comma separated")->delimiter(',');
    sub->add_option("--trials", trials, "Monte Carlo trials per rate");
    sub->add_option("--method", method, "lasso, tvm or both");
    sub->add_option("--n", n, "half grid size N (power of two)");
    sub->add_option("--t", t, "sensing periods T");
    sub->add_option("--snr-db", snr_db, "SNR in dB, or 'off' for a noiseless run");
    sub->add_option("--mu-factor", mu_factor, "mu = mu_factor * ||r_y||");
    sub->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads (default: hardware concurrency)");
    if (!sweep) sub->add_flag("--export-matrices", export_matrices, "also dump Phi, A and D as complex64 binaries");
  }

  bool given(const std::string& name) const { return app->get_option(name)->count() > 0; }

  ExperimentConfig resolve() const {
    std::string text;
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      text = read_file(config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigFailure(config_path + ": " + e.what());
      }
      try {
        cfg = experiment_config_from_json(doc);
      } catch (const ConfigError& e) {
        throw ConfigFailure(located(text, e));
      }
    }
    try {
      if (given("--seed")) cfg.seed = seed;
      if (given("--rate")) cfg.rate = rate;
      if (given("--rates")) cfg.subsample_rates = rates;
      if (given("--trials")) cfg.trials = trials;
      if (given("--method")) cfg.methods = parse_methods(method);
      if (given("--n")) cfg.n = n;
      if (given("--t")) cfg.t_periods = t;
      if (given("--snr-db")) cfg.snr_db = parse_snr(snr_db);
      if (given("--mu-factor")) cfg.mu_factor = mu_factor;
      cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigFailure(located(text, e));
    } catch (const std::invalid_argument& e) {
      throw ConfigFailure(std::string("command line: ") + e.what());
    }
    return cfg;
  }

  std::string located(const std::string& text, const ConfigError& e) const {
    const int line = text.empty() ? 0 : line_of_key(text, e.key);
    if (line > 0) return config_path + ":" + std::to_string(line) + ": " + e.what();
    if (!config_path.empty()) return config_path + ": " + e.what();
    return std::string("command line: ") + e.what();
  }

  int worker_count() const {
    if (given("--workers") && workers >= 1) return workers;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

/// bin_hz,value with values scaled so the largest magnitude is 1.
void write_psd_csv(const fs::path& path, const SubbandPlan& plan, const RVector& p) {
  const double peak = p.cwiseAbs().maxCoeff();
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  std::ostringstream os;
  os << "bin_hz,value\n" << std::setprecision(17);
  for (Eigen::Index l = 0; l < p.size(); ++l) os << plan.bin_hz(static_cast<int>(l)) << ',' << p[l] * scale << '\n';
  write_text(path, os.str());
}

std::string rate_tag(double rate) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << rate;
  return os.str();
}

int cmd_sense(const RunOptions& opt) {
  const ExperimentConfig cfg = opt.resolve();
  const fs::path dir = opt.out_dir;
  fs::create_directories(dir);
  write_json(dir / "config_echo.json", to_json(cfg));

  const SenseOutcome out = run_sense(cfg);
  const SubbandPlan& plan = out.scene.plan;
  write_psd_csv(dir / "truth.csv", plan, out.scene.true_psd);

  nlohmann::json summary = {{"version", kVersionTag},
                            {"scene", scene_to_json(out.scene)},
                            {"phi", to_json(out.phi)},
                            {"occupancy", plan.occupancy(out.scene.active_ids)}};
  for (const auto& [method, mo] : out.methods) {
    write_psd_csv(dir / (std::string(method_name(method)) + ".csv"), plan, mo.p_current);
    nlohmann::json sj = to_json(mo.solve);
    sj.erase("p_hat");
    sj["psd_error"] = mo.psd_error;
    summary["methods"][method_name(method)] = sj;
    std::cout << method_name(method) << ": iterations " << mo.solve.iterations << ", relative PSD error "
              << mo.psd_error << (mo.solve.converged ? "" : " (not converged)") << '\n';
  }
  write_json(dir / "sense.json", summary);

  if (opt.export_matrices) {
    const CMatrix phi = out.phi.dense().cast<cplx>();
    const LinkMatrix link = build_link_matrix(phi);
    export_matrix(dir / "phi", phi);
    export_matrix(dir / "a", link.a);
    export_matrix(dir / "d", build_dictionary(link, build_lag_idft(2 * cfg.n)).d);
  }
  std::cout << "wrote " << dir.string() << '\n';
  if (!out.all_converged()) {
    std::cerr << "solver did not converge within " << cfg.solver.max_iter << " iterations\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_montecarlo(const RunOptions& opt) {
  const ExperimentConfig cfg = opt.resolve();
  const fs::path dir = opt.out_dir;
  fs::create_directories(dir);
  write_json(dir / "config_echo.json", to_json(cfg));

  // Rows are appended and flushed one rate at a time so an interrupted sweep
  // still leaves a well-formed CSV.
  std::ofstream csv(dir / "montecarlo.csv", std::ios::binary | std::ios::trunc);
  csv << csv_header() << std::flush;
  nlohmann::json timing = nlohmann::json::array();
  const auto start = std::chrono::steady_clock::now();

  const int workers = opt.worker_count();
  const MonteCarloReport report = run_montecarlo(cfg, workers, [&](const std::vector<SweepEntry>& batch) {
    std::string rows;
    for (const auto& e : batch) rows += csv_row(e);
    csv << rows << std::flush;
    for (const auto& e : batch) {
      std::ostringstream sub;
      write_csv(sub, e.subbands);
      write_text(dir / ("subbands_" + rate_tag(e.rate) + "_" + method_name(e.method) + ".csv"), sub.str());
      timing.push_back({{"rate", e.rate}, {"method", method_name(e.method)}, {"wall_seconds", e.wall_seconds}});
      std::cout << "rate " << rate_tag(e.rate) << ' ' << method_name(e.method)
                << ": p_f=" << (e.p_f() ? std::to_string(*e.p_f()) : "n/a")
                << " p_d=" << (e.p_d() ? std::to_string(*e.p_d()) : "n/a") << " (" << e.wall_seconds << " s)\n";
    }
  });
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_json(dir / "report.json", to_json(report));
  write_json(dir / "timing.json", {{"workers", workers}, {"total_seconds", total}, {"per_rate", timing}});
  std::cout << "wrote " << dir.string() << '\n';
  return kOk;
}

int cmd_bounds(double n, double s, double k, double delta, double t, double c, const std::string& out_dir) {
  BoundsReport r;
  try {
    r = measurement_bounds(n, s, k, delta, t, c);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const nlohmann::json j = to_json(r);
  std::cout << j.dump(2) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json(fs::path(out_dir) / "bounds.json", j);
  }
  return kOk;
}

/// Mutation hook: a V builder with one interior frequency coupling dropped.
TvOperator corrupted_tv_builder(int n2, int t) {
  const TvOperator good = build_tv_operator(n2, t);
  std::vector<TvOperator::Sparse> blocks;
  for (int b = 0; b < 4; ++b) blocks.push_back(good.block(b));
  blocks[2].coeffRef(1, 2) = 0.0;
  blocks[2].prune(0.0);
  return TvOperator(n2, t, std::move(blocks));
}

int cmd_selftest(bool mutate_tv) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_selftest(mutate_tv ? TvBuilder(corrupted_tv_builder) : TvBuilder(build_tv_operator));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width) + 2) << r.name
              << r.detail << '\n';
    ok = ok && r.passed;
  }
  std::cout << "selftest " << (ok ? "passed" : "FAILED") << " in " << std::fixed << std::setprecision(2) << secs
            << " s\n";
  if (secs > 60.0) std::cerr << "warning: selftest exceeded its 60 s budget\n";
  if (!ok)
    for (const auto& r : results)
      if (!r.passed) std::cerr << "failing property: " << r.name << '\n';
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive wideband spectrum sensing: LASSO and total-variation recovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersionTag);

  RunOptions sense_opt, mc_opt;
  auto* sense = app.add_subcommand("sense", "single end-to-end run; writes true and recovered PSD CSVs");
  sense_opt.attach(sense, false);
  auto* mc = app.add_subcommand("montecarlo", "detection/false-alarm sweep over sub-sampling rates");
  mc_opt.attach(mc, true);

  auto* bounds = app.add_subcommand("bounds", "measurement-count bounds for LASSO and TV recovery");
  double bn = 0, bs = 0, bk = 0, bdelta = 0, bt = 1, bc = 1;
  std::string bounds_out;
  bounds->add_option("--n", bn, "signal length n")->required();
  bounds->add_option("--s", bs, "sparsity S")->required();
  bounds->add_option("--k", bk, "edge count K")->required();
  bounds->add_option("--delta", bdelta, "per-period change count")->required();
  bounds->add_option("--t", bt, "periods T")->capture_default_str();
  bounds->add_option("--c", bc, "constant C")->capture_default_str();
  bounds->add_option("--out-dir", bounds_out, "also write bounds.json here");

  auto* selftest = app.add_subcommand("selftest", "release-gate property checks");
  bool mutate_tv = false;
  selftest->add_flag("--mutate-tv", mutate_tv, "run against a deliberately corrupted TV builder");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sense) return cmd_sense(sense_opt);
    if (*mc) return cmd_montecarlo(mc_opt);
    if (*bounds) return cmd_bounds(bn, bs, bk, bdelta, bt, bc, bounds_out);
    if (*selftest) return cmd_selftest(mutate_tv);
  } catch (const ConfigFailure& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kOk;
}
