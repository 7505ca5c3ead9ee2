#include "cwss/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace cwss;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 64;
  c.trials = 6;
  c.frames_per_period = 16;
  c.subsample_rates = {0.4, 0.8};
  c.solver.max_iter = 2000;
  c.seed = 17;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cwss_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CWSS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.n, 128);
  EXPECT_EQ(c.t_periods, 2);
  EXPECT_EQ(c.trials, 200);
  EXPECT_DOUBLE_EQ(c.rate, 0.25);
  EXPECT_DOUBLE_EQ(c.mu_factor, 0.05);
  EXPECT_DOUBLE_EQ(c.snr_db, 10.0);
  EXPECT_EQ(c.subsample_rates, (std::vector<double>{0.2, 0.4, 0.6, 0.8}));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTripIsIdempotent) {
  ExperimentConfig c = small_config();
  c.snr_db = std::numeric_limits<double>::infinity();
  c.methods = {Method::tvm};
  const std::string once = to_json(c).dump(2);
  const std::string twice = to_json(experiment_config_from_json(nlohmann::json::parse(once))).dump(2);
  EXPECT_EQ(once, twice);
}

TEST(Config, ValidationNamesTheKey) {
  const auto key_of = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const ConfigError& e) {
      return e.key;
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of([](auto& c) { c.n = 100; }), "n");
  EXPECT_EQ(key_of([](auto& c) { c.trials = 0; }), "trials");
  EXPECT_EQ(key_of([](auto& c) { c.subsample_rates = {0.5, 1.2}; }), "subsample_rates");
  EXPECT_EQ(key_of([](auto& c) { c.rate = 0.0; }), "rate");
  EXPECT_EQ(key_of([](auto& c) { c.mu_factor = -1; }), "mu_factor");
  EXPECT_EQ(key_of([](auto& c) { c.pd_subband = 42; }), "pd_subband");
  EXPECT_EQ(key_of([](auto& c) { c.n = 32; }), "plan");  // 4 MHz bands own no bin
  EXPECT_THROW(experiment_config_from_json({{"nope", 1}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json({{"n", "eight"}}), ConfigError);
  EXPECT_THROW(experiment_config_from_json({{"method", "omp"}}), ConfigError);
}

TEST(Pipeline, TrialsArePairedAcrossRatesAndMethods) {
  const ExperimentConfig c = small_config();
  const SubbandPlan plan = c.make_plan();
  const WidebandScene s = trial_scene(c, plan, 3);
  const auto frames = trial_frames(c, s, 3);
  const TrialInput lo = prepare_trial(c, s, frames, 0.4, 3);
  const TrialInput hi = prepare_trial(c, s, frames, 0.8, 3);
  EXPECT_EQ(lo.scene.true_psd, hi.scene.true_psd);
  for (int r : lo.phi.selected_rows())
    EXPECT_TRUE(std::binary_search(hi.phi.selected_rows().begin(), hi.phi.selected_rows().end(), r));
  EXPECT_NE(trial_scene(c, plan, 4).seed, s.seed);
  EXPECT_EQ(lo.columns.size(), 2u);
}

TEST(Pipeline, ExpectedStatisticsModeUsesLinkModel) {
  ExperimentConfig c = small_config();
  c.frames_per_period = 0;
  c.snr_db = std::numeric_limits<double>::infinity();
  const SubbandPlan plan = c.make_plan();
  const WidebandScene s = trial_scene(c, plan, 0);
  const TrialInput in = prepare_trial(c, s, trial_frames(c, s, 0), 0.5, 0);
  const CVector expect = in.bundle.d * s.true_psd.cast<cplx>();
  EXPECT_LT((in.columns[0].values - expect).norm(), 1e-12);
}

TEST(Sense, FullRateNoiselessRecoversSupportExactly) {
  ExperimentConfig c;
  c.rate = 1.0;
  c.snr_db = std::numeric_limits<double>::infinity();
  c.frames_per_period = 0;
  c.mu_factor = 1e-6;
  c.solver.max_iter = 50000;
  const SenseOutcome out = run_sense(c);
  ASSERT_EQ(out.methods.size(), 2u);
  for (const auto& [m, o] : out.methods) {
    EXPECT_TRUE(o.solve.converged) << method_name(m);
    const double peak = o.p_current.cwiseAbs().maxCoeff();
    for (Eigen::Index l = 0; l < o.p_current.size(); ++l)
      EXPECT_EQ(std::abs(o.p_current[l]) > 1e-3 * peak, out.scene.true_psd[l] > 0) << method_name(m) << " bin " << l;
    EXPECT_LT(o.psd_error, 1e-3);
  }
}

TEST(MonteCarlo, DeterministicAcrossWorkerCounts) {
  const ExperimentConfig c = small_config();
  const std::string one = to_json(run_montecarlo(c, 1)).dump();
  const std::string three = to_json(run_montecarlo(c, 3)).dump();
  EXPECT_EQ(one, three);
}

TEST(MonteCarlo, OneEntryPerRateAndMethod) {
  const ExperimentConfig c = small_config();
  int callbacks = 0;
  const MonteCarloReport r = run_montecarlo(c, 1, [&](const auto& batch) {
    ++callbacks;
    EXPECT_EQ(batch.size(), 2u);
  });
  EXPECT_EQ(callbacks, 2);
  ASSERT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.entries[0].method, Method::lasso);
  EXPECT_EQ(r.entries[1].method, Method::tvm);
  for (const auto& e : r.entries) {
    EXPECT_EQ(e.fa_trials + (c.trials - e.fa_trials), c.trials);
    EXPECT_EQ(e.subbands.trials, c.trials);
  }
}

TEST(MonteCarlo, SingleTrialGivesDegenerateRatios) {
  ExperimentConfig c = small_config();
  c.trials = 1;
  for (const auto& e : run_montecarlo(c, 1).entries)
    for (auto v : {e.p_f(), e.p_d()})
      if (v) EXPECT_TRUE(*v == 0.0 || *v == 1.0);
      else SUCCEED();
}

TEST(MonteCarlo, CsvRowShape) {
  SweepEntry e;
  e.rate = 0.4;
  e.method = Method::tvm;
  e.fa_trials = 10;
  e.fa_events = 3;
  const std::string row = csv_row(e);
  const std::string header = csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_EQ(row.substr(0, 16), "0.4,tvm,10,3,0.3");
  EXPECT_NE(row.find("n/a,n/a,n/a"), std::string::npos);  // no detection trials
}

TEST(MonteCarlo, LassoRaisesMoreFalseAlarmsAtQuarterRate) {
  ExperimentConfig c;
  c.subsample_rates = {0.25};
  c.trials = 200;
  const auto workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const MonteCarloReport r = run_montecarlo(c, workers);
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_GT(*r.entries[0].p_f(), *r.entries[1].p_f());
}

// Command-line behaviour ------------------------------------------------------

TEST(Cli, SenseWritesPlotFilesDeterministically) {
  const fs::path a = scratch("sense_a"), b = scratch("sense_b");
  const std::string args = "sense --n 64 --seed 5 --rate 0.5";
  EXPECT_EQ(run_cli(args + " --out-dir " + a.string(), a / "log"), 0) << slurp(a / "log");
  EXPECT_EQ(run_cli(args + " --out-dir " + b.string(), b / "log"), 0);
  for (const char* f : {"truth.csv", "lasso.csv", "tvm.csv", "sense.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const std::string truth = slurp(a / "truth.csv");
  EXPECT_EQ(truth.substr(0, 13), "bin_hz,value\n");
  EXPECT_EQ(std::count(truth.begin(), truth.end(), '\n'), 1 + 128);
}

TEST(Cli, SenseReportsNonConvergence) {
  const fs::path d = scratch("sense_nc");
  EXPECT_EQ(run_cli("sense --n 64 --out-dir " + d.string() + " --config " + (d / "c.json").string(), d / "log"), 2);
  std::ofstream(d / "c.json") << R"({"n": 64, "solver": {"max_iter": 3}})";
  EXPECT_EQ(run_cli("sense --config " + (d / "c.json").string() + " --out-dir " + d.string(), d / "log"), 3);
}

TEST(Cli, ConfigErrorsPointAtTheLine) {
  const fs::path d = scratch("cfg");
  std::ofstream(d / "bad.json") << "{\n  \"n\": 64,\n  \"trials\": 0\n}\n";
  EXPECT_EQ(run_cli("montecarlo --config " + (d / "bad.json").string(), d / "log"), 2);
  EXPECT_NE(slurp(d / "log").find("bad.json:3:"), std::string::npos) << slurp(d / "log");
  std::ofstream(d / "syntax.json") << "{\n  \"n\": 64,\n  \"trials\": \n}\n";
  EXPECT_EQ(run_cli("sense --config " + (d / "syntax.json").string(), d / "log"), 2);
  EXPECT_NE(slurp(d / "log").find("line 4"), std::string::npos) << slurp(d / "log");
  EXPECT_EQ(run_cli("sense --n 100", d / "log"), 2);
}

TEST(Cli, MontecarloRerunFromEchoIsByteIdentical) {
  const fs::path a = scratch("mc_a"), b = scratch("mc_b");
  const std::string base = "montecarlo --n 64 --trials 3 --rates 0.5,0.75 --seed 9 --workers 2";
  ASSERT_EQ(run_cli(base + " --out-dir " + a.string(), a / "log"), 0) << slurp(a / "log");
  ASSERT_EQ(run_cli("montecarlo --config " + (a / "config_echo.json").string() + " --workers 1 --out-dir " +
                        b.string(),
                    b / "log"),
            0)
      << slurp(b / "log");
  for (const char* f : {"report.json", "montecarlo.csv", "config_echo.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const std::string csv = slurp(a / "montecarlo.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
  EXPECT_TRUE(fs::exists(a / "timing.json"));
  EXPECT_TRUE(fs::exists(a / "subbands_0.50_tvm.csv"));
}

TEST(Cli, BoundsAndSelftest) {
  const fs::path d = scratch("misc");
  EXPECT_EQ(run_cli("bounds --n 1024 --s 140 --k 8 --delta 10 --t 4 --out-dir " + d.string(), d / "log"), 0);
  const auto j = nlohmann::json::parse(slurp(d / "bounds.json"));
  EXPECT_NEAR(j.at("ratio").get<double>(), 0.154, 0.001);
  EXPECT_NE(run_cli("bounds --n 1024 --s 10 --k 4 --delta 20", d / "log"), 0);
  EXPECT_NE(slurp(d / "log").find("delta"), std::string::npos);
  EXPECT_EQ(run_cli("selftest", d / "log"), 0) << slurp(d / "log");
  EXPECT_EQ(run_cli("selftest --mutate-tv", d / "log"), 1);
  EXPECT_NE(slurp(d / "log").find("failing property: TV operator"), std::string::npos);
}
