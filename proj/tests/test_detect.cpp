#include "cwss/detect.hpp"
#include "cwss/model.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cwss;

namespace {

WidebandScene paper_scene(std::vector<int> active, std::uint64_t seed = 1) {
  return make_scene(default_paper_plan(), std::move(active), 10.0, seed);
}

SubbandPlan random_plan(std::mt19937_64& rng) {
  // Contiguous 3-bin-or-wider bands separated by gaps on a 64-bin grid.
  std::vector<Subband> bands;
  double edge = 0;
  int id = 1;
  while (true) {
    edge += static_cast<double>(rng() % 3);
    const double width = 3 + static_cast<double>(rng() % 6);
    if (edge + width > 64) break;
    bands.push_back({id++, edge, edge + width});
    edge += width;
  }
  return SubbandPlan(64, 32, bands);
}

}  // namespace

TEST(Threshold, EnergyInOneSubband) {
  const SubbandPlan plan = default_paper_plan();
  RVector p = RVector::Zero(plan.grid_size());
  for (int l : plan.bins(plan.index_of(2))) p[l] = 0.3;
  const OccupancyDecision d = decide_occupancy(p, plan, ThresholdRule{1.0});
  for (std::size_t q = 0; q < plan.size(); ++q) EXPECT_EQ(d.occupied[q], plan.subband(q).id == 2);
}

TEST(Threshold, ZeroInputOccupiesNothing) {
  const SubbandPlan plan = default_paper_plan();
  const OccupancyDecision d = decide_occupancy(RVector::Zero(plan.grid_size()), plan, ThresholdRule{0.5});
  for (bool o : d.occupied) EXPECT_FALSE(o);
}

TEST(Threshold, GroundTruthRecoversActiveSetBelowBinGain) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WidebandScene s = generate_scene(default_paper_plan(), 1 + seed % 7, 10.0, seed);
    const double global = s.true_psd.mean();
    double gain = 1e300;
    for (std::size_t q = 0; q < s.plan.size(); ++q)
      if (s.levels[q] > 0) gain = std::min(gain, s.levels[q] / global);
    for (double tau : {1e-3, 0.5 * gain, 0.999 * gain}) {
      const OccupancyDecision d = decide_occupancy(s.true_psd, s.plan, ThresholdRule{tau});
      for (std::size_t q = 0; q < s.plan.size(); ++q) EXPECT_EQ(d.occupied[q], s.is_active(s.plan.subband(q).id));
    }
  }
}

TEST(Events, GroundTruthHasNoFalseAlarmAndFullDetection) {
  const WidebandScene s = paper_scene({1, 3, 5, 6, 8});
  for (int id : {2, 4, 7}) EXPECT_FALSE(false_alarm_event(s.true_psd, s, id));
  for (int id : {1, 3, 5, 6, 8}) EXPECT_TRUE(detection_event(s.true_psd, s, id));
}

TEST(Events, RaisedInactiveBinAlarms) {
  const WidebandScene s = paper_scene({1, 3, 5, 6, 8});
  RVector p = s.true_psd;
  double weakest = 1e300;
  for (int l = 0; l < p.size(); ++l)
    if (p[l] > 0) weakest = std::min(weakest, p[l]);
  p[s.plan.bins(s.plan.index_of(4)).front()] = 1.01 * weakest;
  EXPECT_TRUE(false_alarm_event(p, s, 4));
  EXPECT_FALSE(false_alarm_event(p, s, 2));
  // Equal magnitude does not count: the comparison is strict.
  p[s.plan.bins(s.plan.index_of(4)).front()] = weakest;
  EXPECT_FALSE(false_alarm_event(p, s, 4));
}

TEST(Events, NegativeValuesCompareByMagnitude) {
  const WidebandScene s = paper_scene({5});
  RVector p = s.true_psd;
  p[s.plan.bins(s.plan.index_of(4)).front()] = -2.0 * p.maxCoeff();
  EXPECT_TRUE(false_alarm_event(p, s, 4));
  EXPECT_FALSE(detection_event(p, s, 5));
}

TEST(Events, ZeroEstimateDetectsNothing) {
  const WidebandScene s = paper_scene({1, 5});
  EXPECT_FALSE(detection_event(RVector::Zero(s.plan.grid_size()), s, 5));
  EXPECT_FALSE(false_alarm_event(RVector::Zero(s.plan.grid_size()), s, 4));
}

TEST(Events, WrongHypothesisThrows) {
  const WidebandScene s = paper_scene({1, 5});
  EXPECT_THROW(false_alarm_event(s.true_psd, s, 5), std::invalid_argument);
  EXPECT_THROW(detection_event(s.true_psd, s, 4), std::invalid_argument);
  EXPECT_THROW(detection_event(RVector::Zero(3), s, 5), std::invalid_argument);
}

TEST(Events, InvariantToPositiveRescaling) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const WidebandScene s = generate_scene(default_paper_plan(), 4, 10.0, k);
    const RVector p = RVector::Random(s.plan.grid_size());
    for (double a : {1e-3, 0.7, 250.0}) {
      const auto base = decide_occupancy(p, s, OrderingRule{});
      const auto scaled = decide_occupancy(RVector(a * p), s, OrderingRule{});
      EXPECT_EQ(base.occupied, scaled.occupied);
    }
  }
}

TEST(Aggregate, CorrectAndInvertedDecisions) {
  const SubbandPlan plan = default_paper_plan();
  std::vector<TrialOutcome> right, wrong;
  for (int t = 0; t < 12; ++t) {
    const WidebandScene s = generate_scene(plan, 5, 10.0, t);
    TrialOutcome o = make_outcome(s, decide_occupancy(s.true_psd, s, OrderingRule{}));
    right.push_back(o);
    o.occupied.flip();
    wrong.push_back(o);
  }
  const DetectionReport r = aggregate_report(plan, right, 12);
  const DetectionReport w = aggregate_report(plan, wrong, 12);
  for (std::size_t q = 0; q < plan.size(); ++q) {
    if (r.p_f(q)) { EXPECT_EQ(*r.p_f(q), 0.0); }
    if (r.p_d(q)) { EXPECT_EQ(*r.p_d(q), 1.0); }
    if (w.p_f(q)) { EXPECT_EQ(*w.p_f(q), 1.0); }
    if (w.p_d(q)) { EXPECT_EQ(*w.p_d(q), 0.0); }
  }
}

TEST(Aggregate, CountsAndDenominators) {
  const SubbandPlan plan(100, 16, {{1, 0, 20}, {2, 40, 60}});
  std::vector<TrialOutcome> outcomes;
  for (int t = 0; t < 10; ++t) outcomes.push_back({{false, true}, {t < 3, t < 6}});
  const DetectionReport r = aggregate_report(plan, outcomes, 10);
  EXPECT_DOUBLE_EQ(*r.p_f(0), 0.3);
  EXPECT_FALSE(r.p_d(0).has_value());
  EXPECT_DOUBLE_EQ(*r.p_d(1), 0.6);
  EXPECT_FALSE(r.p_f(1).has_value());

  outcomes.push_back({{true, true}, {true, false}});
  const DetectionReport all = aggregate_report(plan, outcomes, 11, Denominator::total_trials);
  EXPECT_DOUBLE_EQ(*all.p_f(0), 3.0 / 11);
  EXPECT_DOUBLE_EQ(*all.p_d(0), 1.0 / 11);
  EXPECT_THROW(aggregate_report(plan, outcomes, 10), std::invalid_argument);
}

TEST(Aggregate, RatiosBoundedAndExact) {
  std::mt19937_64 rng(4);
  const SubbandPlan plan = default_paper_plan();
  std::vector<TrialOutcome> outcomes;
  for (int t = 0; t < 40; ++t) {
    TrialOutcome o{std::vector<bool>(8), std::vector<bool>(8)};
    for (int q = 0; q < 8; ++q) {
      o.active[q] = rng() & 1;
      o.occupied[q] = rng() & 1;
    }
    outcomes.push_back(o);
  }
  const DetectionReport r = aggregate_report(plan, outcomes, 40);
  for (std::size_t q = 0; q < 8; ++q) {
    EXPECT_EQ(r.inactive_trials[q] + r.active_trials[q], 40);
    if (r.p_f(q)) {
      EXPECT_GE(*r.p_f(q), 0.0);
      EXPECT_LE(*r.p_f(q), 1.0);
      EXPECT_EQ(*r.p_f(q), double(r.false_alarms[q]) / r.inactive_trials[q]);
    }
    if (r.p_d(q)) { EXPECT_EQ(*r.p_d(q), double(r.detections[q]) / r.active_trials[q]); }
  }
}

TEST(Aggregate, GroundTruthOnRandomPlans) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const SubbandPlan plan = random_plan(rng);
    std::vector<TrialOutcome> outcomes;
    for (int t = 0; t < 10; ++t) {
      const WidebandScene s = generate_scene(plan, 1 + static_cast<int>(rng() % plan.size()), 10.0, rng());
      outcomes.push_back(make_outcome(s, decide_occupancy(s.true_psd, s, OrderingRule{})));
    }
    const DetectionReport r = aggregate_report(plan, outcomes, 10);
    for (std::size_t q = 0; q < plan.size(); ++q) {
      EXPECT_EQ(r.false_alarms[q], 0);
      EXPECT_EQ(r.detections[q], r.active_trials[q]);
    }
  }
}

TEST(Report, CsvAndJson) {
  const SubbandPlan plan(100, 16, {{1, 0, 20}, {2, 40, 60}});
  std::vector<TrialOutcome> outcomes{{{false, true}, {true, true}}, {{false, true}, {false, false}}};
  const DetectionReport r = aggregate_report(plan, outcomes, 2);
  std::ostringstream os;
  write_csv(os, r);
  EXPECT_EQ(os.str(),
            "subband_id,condition,condition_count,event_count,ratio\n"
            "1,H0,2,1,0.5\n1,H1,0,0,n/a\n2,H0,0,0,n/a\n2,H1,2,1,0.5\n");
  const auto j = to_json(r);
  EXPECT_EQ(j.at("subbands").size(), 2u);
  EXPECT_TRUE(j.at("subbands")[0].at("p_d").is_null());
}

TEST(Wilson, MatchesClosedForm) {
  // z = 1.96: 5/10 -> [0.2366, 0.7634]; 0/10 -> [0, 0.2775].
  auto a = wilson_interval(5, 10);
  EXPECT_NEAR(a.first, 0.2366, 1e-4);
  EXPECT_NEAR(a.second, 0.7634, 1e-4);
  auto b = wilson_interval(0, 10);
  EXPECT_NEAR(b.first, 0.0, 1e-12);
  EXPECT_NEAR(b.second, 0.2775, 1e-4);
  auto c = wilson_interval(10, 10);
  EXPECT_NEAR(c.first, 0.7225, 1e-4);
  EXPECT_NEAR(c.second, 1.0, 1e-12);
}
