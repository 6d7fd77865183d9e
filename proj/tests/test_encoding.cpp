#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>

#include "ppm/encoding.hpp"
#include "test_support.hpp"

using namespace ppm;
using ppm_test::make_trace;

namespace {

std::size_t index_of(const EncodingSchema& s, const std::string& name) {
  const auto& names = s.feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::runtime_error("no feature " + name);
  return static_cast<std::size_t>(it - names.begin());
}

EventLog one_trace_log(const Trace& t) {
  EventLog log;
  log.traces.push_back(t);
  return log;
}

// A log with every attribute kind, for layout and property tests.
EventLog rich_log(std::mt19937_64& gen, std::size_t n_traces) {
  EventLog log;
  for (std::size_t c = 0; c < n_traces; ++c) {
    const std::size_t len = 1 + gen() % 6;
    std::vector<std::string> acts;
    for (std::size_t i = 0; i < len; ++i) acts.push_back(std::string(1, static_cast<char>('a' + gen() % 4)));
    auto t = make_trace("c" + std::to_string(c), acts, gen() % 2, 1.6e9 + 1000.0 * c, 3600.0);
    // Several events share a timestamp so permutation tests have material.
    for (std::size_t i = 1; i < len; ++i) {
      if (gen() % 3 == 0) t.events[i].timestamp = t.events[i - 1].timestamp;
    }
    for (auto& e : t.events) {
      e.categorical["res"] = "r" + std::to_string(gen() % 3);
      e.numeric["amount"] = static_cast<double>(gen() % 50);
    }
    t.case_attributes["channel"] = std::string(gen() % 2 ? "web" : "phone");
    t.case_attributes["age"] = static_cast<double>(20 + gen() % 40);
    log.traces.push_back(t);
  }
  return log;
}

}  // namespace

TEST(FitSchema, ActivityBlockWidth) {
  const auto s = fit_schema(one_trace_log(make_trace("c", {"b", "a", "b"}, false)));
  EXPECT_EQ(s.activities(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(s.width(), 2u + kDerivedFeatures);
  EXPECT_EQ(s.feature_names()[0], "activity=a");
}

TEST(FitSchema, NumericAttributeAddsFiveAggregates) {
  auto t = make_trace("c", {"a"}, false);
  const auto base = fit_schema(one_trace_log(t)).width();
  t.events[0].numeric["amount"] = 1.0;
  const auto s = fit_schema(one_trace_log(t));
  EXPECT_EQ(s.width() - base, 5u);
  EXPECT_NO_THROW(index_of(s, "event:amount:std"));
}

TEST(FitSchema, EmptyLogIsSchemaError) { EXPECT_THROW(fit_schema(EventLog{}), SchemaError); }

TEST(FitSchema, LexicographicDeterministicOrder) {
  std::mt19937_64 gen(4);
  const auto log = rich_log(gen, 30);
  auto reversed = log;
  std::reverse(reversed.traces.begin(), reversed.traces.end());
  EXPECT_EQ(fit_schema(log).feature_names(), fit_schema(reversed).feature_names());
}

TEST(Encode, ActivityCountsHandExample) {
  const auto t = make_trace("c", {"a", "b", "a"}, false);
  const auto s = fit_schema(one_trace_log(t));
  const auto v = s.encode(prefix(t, 3));
  EXPECT_EQ(v[index_of(s, "activity=a")], 2.0);
  EXPECT_EQ(v[index_of(s, "activity=b")], 1.0);
}

TEST(Encode, UnseenActivityIsIgnored) {
  const auto s = fit_schema(one_trace_log(make_trace("c", {"a"}, false)));
  const auto t = make_trace("d", {"zzz", "a"}, false);
  const auto v = s.encode(prefix(t, 2));
  EXPECT_EQ(v[index_of(s, "activity=a")], 1.0);
  EXPECT_EQ(v.size(), s.width());
}

TEST(Encode, FirstEventTimeFeaturesAreZero) {
  const auto t = make_trace("c", {"a", "b"}, false, 1.6e9, 500.0);
  const auto s = fit_schema(one_trace_log(t));
  const auto v = s.encode(prefix(t, 1));
  EXPECT_EQ(v[index_of(s, "time_since_case_start")], 0.0);
  EXPECT_EQ(v[index_of(s, "time_since_last_event")], 0.0);
  EXPECT_EQ(v[index_of(s, "event_number")], 1.0);
  const auto w = s.encode(prefix(t, 2));
  EXPECT_EQ(w[index_of(s, "time_since_case_start")], 500.0);
  EXPECT_EQ(w[index_of(s, "time_since_last_event")], 500.0);
}

TEST(Encode, NumericAggregatesHandExample) {
  auto t = make_trace("c", {"a", "a"}, false);
  t.events[0].numeric["x"] = 3.0;
  t.events[1].numeric["x"] = 5.0;
  const auto s = fit_schema(one_trace_log(t));
  const auto v = s.encode(prefix(t, 2));
  EXPECT_EQ(v[index_of(s, "event:x:min")], 3.0);
  EXPECT_EQ(v[index_of(s, "event:x:max")], 5.0);
  EXPECT_EQ(v[index_of(s, "event:x:mean")], 4.0);
  EXPECT_EQ(v[index_of(s, "event:x:sum")], 8.0);
  EXPECT_EQ(v[index_of(s, "event:x:std")], 1.0);
  EXPECT_EQ(s.encode(prefix(t, 1))[index_of(s, "event:x:std")], 0.0);
}

TEST(Encode, CalendarFeaturesInUtc) {
  // 2021-03-15 13:45:00 UTC, a Monday.
  const auto t = make_trace("c", {"a"}, false, 1615815900.0);
  const auto s = fit_schema(one_trace_log(t));
  const auto v = s.encode(prefix(t, 1));
  EXPECT_EQ(v[index_of(s, "hour")], 13.0);
  EXPECT_EQ(v[index_of(s, "weekday")], 1.0);
  EXPECT_EQ(v[index_of(s, "month")], 3.0);
}

TEST(Encode, CaseAttributesOneHotAndRaw) {
  auto t = make_trace("c", {"a"}, false);
  t.case_attributes["channel"] = std::string("web");
  t.case_attributes["age"] = 41.0;
  auto u = make_trace("d", {"a"}, false);
  u.case_attributes["channel"] = std::string("phone");
  u.case_attributes["age"] = 30.0;
  EventLog log;
  log.traces = {t, u};
  const auto s = fit_schema(log);
  const auto v = s.encode(prefix(t, 1));
  EXPECT_EQ(v[index_of(s, "case:channel=web")], 1.0);
  EXPECT_EQ(v[index_of(s, "case:channel=phone")], 0.0);
  EXPECT_EQ(v[index_of(s, "case:age")], 41.0);
}

TEST(EncodeProperties, WidthConstantAndFinite) {
  std::mt19937_64 gen(1);
  const auto log = rich_log(gen, 40);
  const auto s = fit_schema(log);
  EXPECT_EQ(s.feature_names().size(), s.width());
  for (const auto& t : log.traces) {
    for (std::size_t k = 1; k <= t.size(); ++k) {
      const auto v = s.encode(prefix(t, k));
      ASSERT_EQ(v.size(), s.width());
      for (double x : v) EXPECT_TRUE(std::isfinite(x));
    }
  }
}

TEST(EncodeProperties, SuffixMutationDoesNotChangePrefixEncoding) {
  std::mt19937_64 gen(2);
  const auto log = rich_log(gen, 40);
  const auto s = fit_schema(log);
  for (const auto& t : log.traces) {
    for (std::size_t k = 1; k < t.size(); ++k) {
      auto mutated = t;
      for (std::size_t i = k; i < mutated.size(); ++i) {
        mutated.events[i].activity = "q";
        mutated.events[i].numeric["amount"] = 1e6;
        mutated.events[i].categorical["res"] = "r0";
        mutated.events[i].timestamp += 1e5;
      }
      EXPECT_EQ(s.encode(prefix(t, k)), s.encode(prefix(mutated, k)));
    }
  }
}

TEST(EncodeProperties, SwappingSimultaneousEventsKeepsAggregates) {
  std::mt19937_64 gen(3);
  const auto log = rich_log(gen, 60);
  const auto s = fit_schema(log);
  const std::size_t aggregate_end = index_of(s, "case:channel=phone");  // first case feature
  std::size_t swaps = 0;
  for (const auto& t : log.traces) {
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      if (t.events[i].timestamp != t.events[i + 1].timestamp) continue;
      auto swapped = t;
      std::swap(swapped.events[i], swapped.events[i + 1]);
      const auto a = s.encode(prefix(t, t.size()));
      const auto b = s.encode(prefix(swapped, t.size()));
      for (std::size_t f = 0; f < aggregate_end; ++f) EXPECT_EQ(a[f], b[f]) << s.feature_names()[f];
      ++swaps;
    }
  }
  EXPECT_GT(swaps, 0u);
}

TEST(EncodingSchema, JsonRoundTrip) {
  std::mt19937_64 gen(6);
  const auto log = rich_log(gen, 20);
  const auto s = fit_schema(log);
  const auto back = nlohmann::json::parse(nlohmann::json(s).dump()).get<EncodingSchema>();
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.feature_names(), s.feature_names());
  for (const auto& t : log.traces) EXPECT_EQ(back.encode(prefix(t, 1)), s.encode(prefix(t, 1)));
}
