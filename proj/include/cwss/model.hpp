#pragma once

// Monitored band layout, ground-truth scenes and Nyquist-rate frame synthesis.

#include "cwss/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwss {

struct Subband {
  int id = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Band layout over a grid of 2N frequency bins covering [0, bandwidth).
///
/// Bin l sits at frequency l * bandwidth / (2N). A bin belongs to a subband
/// when its frequency lies in [low_hz, high_hz).
class SubbandPlan {
 public:
  SubbandPlan(double bandwidth_hz, int n, std::vector<Subband> subbands)
      : bandwidth_hz_(bandwidth_hz), n_(n), subbands_(std::move(subbands)) {
    if (!(bandwidth_hz_ > 0.0) || !std::isfinite(bandwidth_hz_))
      throw std::invalid_argument("SubbandPlan: bandwidth must be positive");
    if (n_ < 1) throw std::invalid_argument("SubbandPlan: n must be positive");

    std::vector<std::size_t> order(subbands_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return subbands_[a].low_hz < subbands_[b].low_hz;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Subband& sb = subbands_[order[k]];
      if (!(sb.low_hz >= 0.0) || !(sb.high_hz > sb.low_hz) || sb.high_hz > bandwidth_hz_)
        throw std::invalid_argument("SubbandPlan: subband " + std::to_string(sb.id) +
                                    " is not a nonempty interval inside [0, bandwidth)");
      if (k > 0 && subbands_[order[k - 1]].high_hz > sb.low_hz)
        throw std::invalid_argument("SubbandPlan: subbands " +
                                    std::to_string(subbands_[order[k - 1]].id) + " and " +
                                    std::to_string(sb.id) + " overlap");
    }
    for (std::size_t i = 0; i < subbands_.size(); ++i)
      for (std::size_t j = i + 1; j < subbands_.size(); ++j)
        if (subbands_[i].id == subbands_[j].id)
          throw std::invalid_argument("SubbandPlan: duplicate subband id " +
                                      std::to_string(subbands_[i].id));

    bins_.resize(subbands_.size());
    bin_owner_.assign(static_cast<std::size_t>(grid_size()), -1);
    for (std::size_t q = 0; q < subbands_.size(); ++q) {
      for (int l = 0; l < grid_size(); ++l) {
        const double f = bin_hz(l);
        if (f >= subbands_[q].low_hz && f < subbands_[q].high_hz) {
          bins_[q].push_back(l);
          bin_owner_[static_cast<std::size_t>(l)] = static_cast<int>(q);
        }
      }
      if (bins_[q].empty())
        throw std::invalid_argument("SubbandPlan: subband " + std::to_string(subbands_[q].id) +
                                    " covers no grid bin at n = " + std::to_string(n_));
    }
  }

  double bandwidth_hz() const { return bandwidth_hz_; }
  int n() const { return n_; }
  int grid_size() const { return 2 * n_; }
  double bin_width_hz() const { return bandwidth_hz_ / grid_size(); }
  double bin_hz(int l) const { return l * bin_width_hz(); }

  std::size_t size() const { return subbands_.size(); }
  const std::vector<Subband>& subbands() const { return subbands_; }
  const Subband& subband(std::size_t index) const { return subbands_.at(index); }
  const std::vector<int>& bins(std::size_t index) const { return bins_.at(index); }

  /// Subband index owning bin l, or -1 for unallocated bins.
  int owner(int l) const { return bin_owner_.at(static_cast<std::size_t>(l)); }

  std::size_t index_of(int id) const {
    for (std::size_t q = 0; q < subbands_.size(); ++q)
      if (subbands_[q].id == id) return q;
    throw std::invalid_argument("unknown subband id " + std::to_string(id));
  }

  /// Fraction of grid bins covered by the given subbands.
  double occupancy(const std::vector<int>& ids) const {
    std::size_t count = 0;
    for (int id : ids) count += bins(index_of(id)).size();
    return static_cast<double>(count) / grid_size();
  }

 private:
  double bandwidth_hz_;
  int n_;
  std::vector<Subband> subbands_;
  std::vector<std::vector<int>> bins_;
  std::vector<int> bin_owner_;
};

/// 0-500 MHz with the eight subbands used in the reference experiment, ids 1..8.
/// Needs n >= 64 so the 4 MHz subbands each own a grid bin.
inline SubbandPlan default_paper_plan(int n = 128) {
  constexpr double MHz = 1e6;
  std::vector<Subband> bands = {
      {1, 46 * MHz, 50 * MHz},   {2, 56 * MHz, 60 * MHz},   {3, 141 * MHz, 150 * MHz},
      {4, 161 * MHz, 170 * MHz}, {5, 231 * MHz, 260 * MHz}, {6, 381 * MHz, 400 * MHz},
      {7, 421 * MHz, 425 * MHz}, {8, 441 * MHz, 445 * MHz},
  };
  return SubbandPlan(500 * MHz, n, std::move(bands));
}

/// Ground truth for one sensing run. snr_db = +inf disables noise.
struct WidebandScene {
  SubbandPlan plan;
  std::vector<int> active_ids;  // ascending
  std::vector<double> levels;   // per subband index, 0 for inactive, after normalization
  RVector true_psd;             // length 2N, sums to 1 when any subband is active
  double snr_db = 10.0;
  std::uint64_t seed = 0;

  bool is_active(int id) const {
    return std::binary_search(active_ids.begin(), active_ids.end(), id);
  }
  bool noise_enabled() const { return std::isfinite(snr_db); }
};

/// Builds a scene for a fixed active set. Band levels are flat within a band,
/// drawn uniform in [0.5, 1) per subband from the seed, then scaled so that the
/// PSD sums to one.
inline WidebandScene make_scene(const SubbandPlan& plan, std::vector<int> active_ids,
                                double snr_db, std::uint64_t seed) {
  std::sort(active_ids.begin(), active_ids.end());
  if (std::adjacent_find(active_ids.begin(), active_ids.end()) != active_ids.end())
    throw std::invalid_argument("make_scene: duplicate active id");
  for (int id : active_ids) (void)plan.index_of(id);

  std::mt19937_64 rng(mix_seed(seed, 2));
  std::uniform_real_distribution<double> level_dist(0.5, 1.0);
  std::vector<double> raw(plan.size());
  for (auto& v : raw) v = level_dist(rng);

  WidebandScene scene{plan, std::move(active_ids), std::vector<double>(plan.size(), 0.0),
                      RVector::Zero(plan.grid_size()), snr_db, seed};
  double total = 0.0;
  for (int id : scene.active_ids) {
    const std::size_t q = plan.index_of(id);
    total += raw[q] * static_cast<double>(plan.bins(q).size());
  }
  for (int id : scene.active_ids) {
    const std::size_t q = plan.index_of(id);
    scene.levels[q] = raw[q] / total;
    for (int l : plan.bins(q)) scene.true_psd[l] = scene.levels[q];
  }
  return scene;
}

/// Uniformly random n_active-subset of the plan's subbands.
inline WidebandScene generate_scene(const SubbandPlan& plan, int n_active, double snr_db,
                                    std::uint64_t seed) {
  if (n_active < 0 || static_cast<std::size_t>(n_active) > plan.size())
    throw std::invalid_argument("generate_scene: n_active out of range");
  std::vector<int> ids;
  for (const auto& sb : plan.subbands()) ids.push_back(sb.id);
  std::mt19937_64 rng(mix_seed(seed, 1));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_active); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(static_cast<std::size_t>(n_active));
  return make_scene(plan, std::move(ids), snr_db, seed);
}

struct NyquistFrame {
  int index = 0;
  CVector samples;
};

/// Per-sample signal power implied by a PSD under the lag-centered IDFT scaling.
inline double signal_power(const RVector& psd) { return psd.sum() / static_cast<double>(psd.size()); }

/// Complex white-noise variance for a scene. A silent scene uses the power of a
/// unit-energy PSD as its reference.
inline double noise_variance(const WidebandScene& scene) {
  if (!scene.noise_enabled()) return 0.0;
  double ps = signal_power(scene.true_psd);
  if (ps <= 0.0) ps = 1.0 / scene.plan.grid_size();
  return ps / std::pow(10.0, scene.snr_db / 10.0);
}

/// Frames x_t[n] = sum_l sqrt(p_l / 2N) e^{i theta_{t,l}} e^{2 pi i l n / 2N} + w_t[n],
/// with fresh uniform phases per frame, so E[x[n] x*[n-j]] follows the
/// lag-centered inverse transform of the PSD.
inline std::vector<NyquistFrame> synthesize_frames(const WidebandScene& scene, int n_frames,
                                                   std::uint64_t seed) {
  if (n_frames < 1) throw std::invalid_argument("synthesize_frames: n_frames must be >= 1");
  const int n = scene.plan.n();
  const int grid = scene.plan.grid_size();

  std::vector<cplx> twiddle(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k)
    twiddle[static_cast<std::size_t>(k)] = std::polar(1.0, 2.0 * std::numbers::pi * k / grid);

  std::vector<int> support;
  std::vector<double> amp;
  for (int l = 0; l < grid; ++l)
    if (scene.true_psd[l] > 0.0) {
      support.push_back(l);
      amp.push_back(std::sqrt(scene.true_psd[l] / grid));
    }

  const double sigma = std::sqrt(noise_variance(scene) / 2.0);
  std::mt19937_64 rng(mix_seed(seed, 3));
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<NyquistFrame> frames;
  frames.reserve(static_cast<std::size_t>(n_frames));
  std::vector<cplx> coef(support.size());
  for (int t = 0; t < n_frames; ++t) {
    for (std::size_t k = 0; k < support.size(); ++k) coef[k] = std::polar(amp[k], phase_dist(rng));
    NyquistFrame frame{t, CVector::Zero(n)};
    for (int s = 0; s < n; ++s) {
      cplx acc = 0.0;
      for (std::size_t k = 0; k < support.size(); ++k)
        acc += coef[k] * twiddle[static_cast<std::size_t>((support[k] * s) % grid)];
      frame.samples[s] = acc;
    }
    if (sigma > 0.0)
      for (int s = 0; s < n; ++s) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        frame.samples[s] += cplx(sigma * re, sigma * im);
      }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// JSON ----------------------------------------------------------------------

inline nlohmann::json plan_to_json(const SubbandPlan& plan) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& sb : plan.subbands())
    bands.push_back({{"id", sb.id}, {"low_hz", sb.low_hz}, {"high_hz", sb.high_hz}});
  return {{"bandwidth_hz", plan.bandwidth_hz()}, {"n", plan.n()}, {"subbands", bands}};
}

inline SubbandPlan plan_from_json(const nlohmann::json& j) {
  std::vector<Subband> bands;
  for (const auto& b : j.at("subbands"))
    bands.push_back({b.at("id").get<int>(), b.at("low_hz").get<double>(),
                     b.at("high_hz").get<double>()});
  return SubbandPlan(j.at("bandwidth_hz").get<double>(), j.at("n").get<int>(), std::move(bands));
}

/// Scene document; levels are recomputed from the seed on load. A null snr_db
/// means noise disabled.
inline nlohmann::json scene_to_json(const WidebandScene& scene) {
  nlohmann::json j = plan_to_json(scene.plan);
  j["active_ids"] = scene.active_ids;
  j["snr_db"] = scene.noise_enabled() ? nlohmann::json(scene.snr_db) : nlohmann::json(nullptr);
  j["seed"] = scene.seed;
  return j;
}

inline WidebandScene scene_from_json(const nlohmann::json& j) {
  const double snr = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("snr_db").get<double>();
  return make_scene(plan_from_json(j), j.at("active_ids").get<std::vector<int>>(), snr,
                    j.at("seed").get<std::uint64_t>());
}

}  // namespace cwss
