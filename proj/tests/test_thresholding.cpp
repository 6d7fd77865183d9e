#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "ppm/thresholding.hpp"
#include "test_support.hpp"

using namespace ppm;
using ppm_test::Constants;
using ppm_test::FixedPredictor;
using ppm_test::trace_of_length;

namespace {

CostModel constant_model(const Constants& c) {
  CostSpec spec;
  spec.c_in = cost_form::Constant{c.c_in};
  spec.c_out = cost_form::Constant{c.c_out};
  spec.c_com = cost_form::Constant{c.c_com};
  spec.eff = cost_form::Constant{c.eff};
  return compile(spec);
}

Constants random_constants(std::mt19937_64& gen) {
  return {static_cast<double>(gen() % 5), static_cast<double>(gen() % 21), static_cast<double>(gen() % 4),
          static_cast<double>(gen() % 11) / 10.0};
}

ppm_test::RandomInstance nonempty_instance(std::mt19937_64& gen, std::size_t max_traces, std::size_t max_length) {
  for (;;) {
    auto inst = ppm_test::random_instance(gen, max_traces, max_length);
    if (!inst.log.empty()) return inst;
  }
}

// Cost is a step function of tau that only changes at prediction values, so
// the minimum over [0, 1] is the minimum over the predictions plus both ends.
double brute_force_global_minimum(const ppm_test::RandomInstance& inst, std::size_t max_length, const Constants& c) {
  std::set<double> cuts{0.0, 1.0};
  for (const auto& [id, row] : inst.predictor.rows) cuts.insert(row.begin(), row.end());
  double best = 0.0;
  bool first = true;
  for (double tau : cuts) {
    const double cost =
        ppm_test::reference_log_cost(inst.log, inst.predictor, std::vector<double>(max_length, tau), c);
    if (first || cost < best) best = cost;
    first = false;
  }
  return best;
}

}  // namespace

TEST(GlobalThreshold, TwoCaseExample) {
  EventLog log;
  log.traces = {trace_of_length("d", 2, false), trace_of_length("u", 2, true)};
  FixedPredictor p;
  p.rows["d"] = {0.3};
  p.rows["u"] = {0.8};
  const auto r = find_global_threshold(log, p, constant_model({1, 10, 5, 1}));
  EXPECT_EQ(r.best_cost, 1.0);
  EXPECT_GT(r.best_policy.tau(), 0.3);
  EXPECT_LE(r.best_policy.tau(), 0.8);
}

TEST(GlobalThreshold, NeverAlarmWhenInterventionsDoNotPay) {
  EventLog log;
  log.traces = {trace_of_length("d", 3, false), trace_of_length("u", 3, true)};
  FixedPredictor p;
  p.rows["d"] = {0.6, 0.9};
  p.rows["u"] = {0.7, 0.95};
  const auto model = constant_model({5, 2, 1, 1});
  const auto r = find_global_threshold(log, p, model);
  EXPECT_EQ(r.best_cost, 2.0);
  EXPECT_EQ(log_cost(log, p, r.best_policy, model).total_cost, log_cost(log, p, AlarmPolicy::never(), model).total_cost);
}

TEST(GlobalThreshold, TieGoesToLargerThreshold) {
  // Every tau in (0.4, 1] costs the same.
  EventLog log;
  log.traces = {trace_of_length("d", 2, false)};
  FixedPredictor p;
  p.rows["d"] = {0.4};
  const auto r = find_global_threshold(log, p, constant_model({1, 1, 0, 1}));
  EXPECT_EQ(r.best_policy.tau(), 1.0);
}

TEST(GlobalThreshold, InvalidInputs) {
  EventLog log;
  log.traces = {trace_of_length("d", 2, false)};
  FixedPredictor p;
  p.rows["d"] = {0.4};
  const auto model = constant_model({});
  EXPECT_THROW(find_global_threshold(EventLog{}, p, model), DomainError);
  EXPECT_THROW(find_global_threshold(log, p, model, 1), DomainError);
  EXPECT_THROW(find_per_length_thresholds(EventLog{}, p, model), DomainError);
}

TEST(GlobalThreshold, MatchesBruteForceAndEvaluatesExactly) {
  std::mt19937_64 gen(11);
  for (int iter = 0; iter < 300; ++iter) {
    const auto inst = nonempty_instance(gen, 12, 6);
    const auto c = random_constants(gen);
    const auto model = constant_model(c);
    const auto r = find_global_threshold(inst.log, inst.predictor, model);
    ASSERT_EQ(r.best_cost, brute_force_global_minimum(inst, 6, c)) << "iteration " << iter;
    EXPECT_EQ(r.best_cost, log_cost(inst.log, inst.predictor, r.best_policy, model).total_cost);
    for (const auto& baseline : {AlarmPolicy::always(), AlarmPolicy::global(0.5)}) {
      EXPECT_LE(r.best_cost, log_cost(inst.log, inst.predictor, baseline, model).total_cost);
    }
    // tau = 1 only means "never" when no likelihood reaches 1, as with real models.
    bool below_one = true;
    for (const auto& [id, row] : inst.predictor.rows) {
      for (double x : row) below_one = below_one && x < 1.0;
    }
    if (below_one) {
      EXPECT_LE(r.best_cost, log_cost(inst.log, inst.predictor, AlarmPolicy::never(), model).total_cost);
    }
  }
}

TEST(GlobalThreshold, TausBetweenAdjacentPredictionsCostTheSame) {
  std::mt19937_64 gen(12);
  for (int iter = 0; iter < 100; ++iter) {
    const auto inst = nonempty_instance(gen, 10, 6);
    const auto model = constant_model(random_constants(gen));
    // Predictions sit on tenths, so (0.3, 0.4] is one plateau.
    const double a = log_cost(inst.log, inst.predictor, AlarmPolicy::global(0.31), model).total_cost;
    const double b = log_cost(inst.log, inst.predictor, AlarmPolicy::global(0.37), model).total_cost;
    const double d = log_cost(inst.log, inst.predictor, AlarmPolicy::global(0.4), model).total_cost;
    EXPECT_EQ(a, b);
    EXPECT_EQ(b, d);
  }
}

TEST(GlobalThreshold, Deterministic) {
  std::mt19937_64 gen(13);
  const auto inst = nonempty_instance(gen, 30, 8);
  const auto model = constant_model({1, 7, 1, 0.8});
  const auto a = find_global_threshold(inst.log, inst.predictor, model, 101, 5);
  const auto b = find_global_threshold(inst.log, inst.predictor, model, 101, 5);
  EXPECT_EQ(a.best_policy, b.best_policy);
  EXPECT_EQ(a.best_cost, b.best_cost);
  std::ostringstream sa, sb;
  write_search_csv(sa, a);
  write_search_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().rfind("length,tau,cost\n", 0), 0u);
}

TEST(GlobalThreshold, CachedAndLazyPredictorsAgree) {
  std::mt19937_64 gen(14);
  for (int iter = 0; iter < 50; ++iter) {
    const auto inst = nonempty_instance(gen, 10, 6);
    const auto model = constant_model(random_constants(gen));
    const PredictionCache cache(inst.log, inst.predictor);
    const auto a = find_global_threshold(inst.log, inst.predictor, model);
    const auto b = find_global_threshold(inst.log, cache, model);
    EXPECT_EQ(a.best_policy, b.best_policy);
    EXPECT_EQ(a.best_cost, b.best_cost);
  }
}

TEST(PerLengthThresholds, LengthTwoLogReducesToGlobal) {
  std::mt19937_64 gen(15);
  for (int iter = 0; iter < 100; ++iter) {
    EventLog log;
    FixedPredictor p;
    const std::size_t n = 1 + gen() % 10;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "c" + std::to_string(i);
      log.traces.push_back(trace_of_length(id, 2, gen() % 2));
      p.rows[id] = {static_cast<double>(gen() % 11) / 10.0};
    }
    const auto model = constant_model(random_constants(gen));
    EXPECT_EQ(find_per_length_thresholds(log, p, model).best_cost, find_global_threshold(log, p, model).best_cost);
  }
}

TEST(PerLengthThresholds, NeverWorseThanGlobalAndEvaluatesExactly) {
  std::mt19937_64 gen(16);
  for (int iter = 0; iter < 300; ++iter) {
    const auto inst = nonempty_instance(gen, 12, 6);
    const auto model = constant_model(random_constants(gen));
    const auto global = find_global_threshold(inst.log, inst.predictor, model);
    const auto per = find_per_length_thresholds(inst.log, inst.predictor, model);
    EXPECT_LE(per.best_cost, global.best_cost);
    EXPECT_EQ(per.best_cost, log_cost(inst.log, inst.predictor, per.best_policy, model).total_cost);
    EXPECT_EQ(per.best_policy.mode(), AlarmPolicy::Mode::per_length);
  }
}

TEST(PerLengthThresholds, UnseenLengthsFallBackToGlobal) {
  EventLog log;
  log.traces = {trace_of_length("d", 3, false), trace_of_length("u", 3, true)};
  FixedPredictor p;
  p.rows["d"] = {0.2, 0.3};
  p.rows["u"] = {0.6, 0.9};
  const auto model = constant_model({1, 10, 1, 1});
  const auto global = find_global_threshold(log, p, model);
  const auto per = find_per_length_thresholds(log, p, model);
  EXPECT_EQ(per.best_policy.threshold_for(40), global.best_policy.tau());
}

TEST(PerLengthThresholds, CanBeatGlobal) {
  // The undesired case is only separable at length 1, the desired one only at length 2.
  EventLog log;
  log.traces = {trace_of_length("u", 3, true), trace_of_length("d", 3, false)};
  FixedPredictor p;
  p.rows["u"] = {0.5, 0.1};
  p.rows["d"] = {0.2, 0.6};
  const auto model = constant_model({1, 10, 3, 1});
  const auto global = find_global_threshold(log, p, model);
  const auto per = find_per_length_thresholds(log, p, model);
  EXPECT_EQ(global.best_cost, 5.0);  // alarm both at 0.5
  EXPECT_EQ(per.best_cost, 1.0);
}
