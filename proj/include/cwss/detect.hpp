#pragma once

// Per-subband occupancy decisions and false-alarm / detection ratios.

#include "cwss/model.hpp"
#include "cwss/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <variant>
#include <vector>

namespace cwss {

struct OccupancyDecision {
  std::vector<bool> occupied;    // per subband index
  std::vector<double> statistic; // mean |p_hat| over the subband's bins
};

/// Occupied iff the subband's mean bin magnitude exceeds tau times the mean
/// magnitude over the whole grid.
struct ThresholdRule {
  double tau = 1.0;
};

/// Order-statistic criteria: an inactive subband alarms when one of its bins
/// beats the weakest active bin; an active subband is detected when all its
/// bins beat the strongest inactive bin.
struct OrderingRule {};

namespace detail {

inline void check_length(const RVector& p_hat, const SubbandPlan& plan) {
  if (p_hat.size() != plan.grid_size())
    throw std::invalid_argument("p_hat length does not match the plan's 2N grid");
}

inline std::vector<double> band_means(const RVector& p_hat, const SubbandPlan& plan) {
  std::vector<double> means(plan.size());
  for (std::size_t q = 0; q < plan.size(); ++q) {
    double acc = 0.0;
    for (int l : plan.bins(q)) acc += std::abs(p_hat[l]);
    means[q] = acc / static_cast<double>(plan.bins(q).size());
  }
  return means;
}

/// Extremes of |p_hat| over bins of subbands whose activity equals `active`.
inline std::pair<double, double> extremes(const RVector& p_hat, const WidebandScene& scene, bool active) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < scene.plan.size(); ++q) {
    if (scene.is_active(scene.plan.subband(q).id) != active) continue;
    for (int l : scene.plan.bins(q)) {
      lo = std::min(lo, std::abs(p_hat[l]));
      hi = std::max(hi, std::abs(p_hat[l]));
    }
  }
  return {lo, hi};
}

}  // namespace detail

inline bool false_alarm_event(const RVector& p_hat, const WidebandScene& scene, int q_id) {
  detail::check_length(p_hat, scene.plan);
  if (scene.is_active(q_id)) throw std::invalid_argument("false_alarm_event: subband is active");
  const auto& bins = scene.plan.bins(scene.plan.index_of(q_id));
  double peak = 0.0;
  for (int l : bins) peak = std::max(peak, std::abs(p_hat[l]));
  const double weakest_active = detail::extremes(p_hat, scene, true).first;
  return peak > weakest_active;
}

inline bool detection_event(const RVector& p_hat, const WidebandScene& scene, int q_id) {
  detail::check_length(p_hat, scene.plan);
  if (!scene.is_active(q_id)) throw std::invalid_argument("detection_event: subband is inactive");
  const auto& bins = scene.plan.bins(scene.plan.index_of(q_id));
  double floor = std::numeric_limits<double>::infinity();
  for (int l : bins) floor = std::min(floor, std::abs(p_hat[l]));
  const double strongest_inactive = detail::extremes(p_hat, scene, false).second;
  if (!std::isfinite(strongest_inactive)) return floor > 0.0;
  return floor > strongest_inactive;
}

inline OccupancyDecision decide_occupancy(const RVector& p_hat, const SubbandPlan& plan, ThresholdRule rule) {
  detail::check_length(p_hat, plan);
  OccupancyDecision out{std::vector<bool>(plan.size()), detail::band_means(p_hat, plan)};
  const double global = p_hat.cwiseAbs().mean();
  for (std::size_t q = 0; q < plan.size(); ++q) out.occupied[q] = out.statistic[q] > rule.tau * global;
  return out;
}

/// Ordering rule needs the hypothesis of each subband, hence the scene.
inline OccupancyDecision decide_occupancy(const RVector& p_hat, const WidebandScene& scene, OrderingRule) {
  detail::check_length(p_hat, scene.plan);
  OccupancyDecision out{std::vector<bool>(scene.plan.size()), detail::band_means(p_hat, scene.plan)};
  for (std::size_t q = 0; q < scene.plan.size(); ++q) {
    const int id = scene.plan.subband(q).id;
    out.occupied[q] = scene.is_active(id) ? detection_event(p_hat, scene, id) : false_alarm_event(p_hat, scene, id);
  }
  return out;
}

/// One trial's per-subband truth and decision.
struct TrialOutcome {
  std::vector<bool> active;
  std::vector<bool> occupied;
};

inline TrialOutcome make_outcome(const WidebandScene& scene, const OccupancyDecision& d) {
  TrialOutcome o{std::vector<bool>(scene.plan.size()), d.occupied};
  for (std::size_t q = 0; q < scene.plan.size(); ++q) o.active[q] = scene.is_active(scene.plan.subband(q).id);
  return o;
}

enum class Denominator {
  per_condition,  // trials in which the hypothesis held
  total_trials,   // L, as in the original ratio definitions
};

struct DetectionReport {
  std::vector<int> ids;
  int trials = 0;
  std::vector<int> inactive_trials, false_alarms;
  std::vector<int> active_trials, detections;
  Denominator denominator = Denominator::per_condition;

  std::optional<double> p_f(std::size_t q) const {
    const int den = denominator == Denominator::per_condition ? inactive_trials[q] : trials;
    if (den == 0) return std::nullopt;
    return static_cast<double>(false_alarms[q]) / den;
  }

  std::optional<double> p_d(std::size_t q) const {
    const int den = denominator == Denominator::per_condition ? active_trials[q] : trials;
    if (den == 0) return std::nullopt;
    return static_cast<double>(detections[q]) / den;
  }
};

inline DetectionReport aggregate_report(const SubbandPlan& plan, const std::vector<TrialOutcome>& outcomes,
                                        int l_trials, Denominator denominator = Denominator::per_condition) {
  if (l_trials < 1) throw std::invalid_argument("aggregate_report: l_trials must be >= 1");
  if (outcomes.size() != static_cast<std::size_t>(l_trials))
    throw std::invalid_argument("aggregate_report: outcome count differs from l_trials");
  const std::size_t q_count = plan.size();
  DetectionReport r;
  r.trials = l_trials;
  r.denominator = denominator;
  for (const auto& sb : plan.subbands()) r.ids.push_back(sb.id);
  r.inactive_trials.assign(q_count, 0);
  r.false_alarms.assign(q_count, 0);
  r.active_trials.assign(q_count, 0);
  r.detections.assign(q_count, 0);
  for (const auto& o : outcomes) {
    if (o.active.size() != q_count || o.occupied.size() != q_count)
      throw std::invalid_argument("aggregate_report: outcome length differs from subband count");
    for (std::size_t q = 0; q < q_count; ++q) {
      if (o.active[q]) {
        ++r.active_trials[q];
        if (o.occupied[q]) ++r.detections[q];
      } else {
        ++r.inactive_trials[q];
        if (o.occupied[q]) ++r.false_alarms[q];
      }
    }
  }
  return r;
}

namespace detail {
inline nlohmann::json optional_json(std::optional<double> v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t q = 0; q < r.ids.size(); ++q)
    rows.push_back({{"subband_id", r.ids[q]},
                    {"inactive_trials", r.inactive_trials[q]},
                    {"false_alarms", r.false_alarms[q]},
                    {"p_f", detail::optional_json(r.p_f(q))},
                    {"active_trials", r.active_trials[q]},
                    {"detections", r.detections[q]},
                    {"p_d", detail::optional_json(r.p_d(q))}});
  return {{"trials", r.trials},
          {"denominator", r.denominator == Denominator::per_condition ? "per_condition" : "total_trials"},
          {"subbands", rows}};
}

/// Two rows per subband: false alarms under H0 and detections under H1. A
/// ratio with an empty condition prints as "n/a".
inline void write_csv(std::ostream& os, const DetectionReport& r) {
  os << "subband_id,condition,condition_count,event_count,ratio\n";
  const auto ratio = [](std::optional<double> v) { return v ? nlohmann::json(*v).dump() : std::string("n/a"); };
  for (std::size_t q = 0; q < r.ids.size(); ++q) {
    const int h0 = r.denominator == Denominator::per_condition ? r.inactive_trials[q] : r.trials;
    const int h1 = r.denominator == Denominator::per_condition ? r.active_trials[q] : r.trials;
    os << r.ids[q] << ",H0," << h0 << ',' << r.false_alarms[q] << ',' << ratio(r.p_f(q)) << '\n';
    os << r.ids[q] << ",H1," << h1 << ',' << r.detections[q] << ',' << ratio(r.p_d(q)) << '\n';
  }
}

/// Wilson score interval at 95% for k successes in n trials.
inline std::pair<double, double> wilson_interval(int k, int n, double z = 1.959963984540054) {
  if (n <= 0) return {0.0, 1.0};
  const double ph = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double centre = (ph + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace cwss
