#pragma once

// Seeded synthetic event logs with a controllable outcome signal.
//
// Undesired cases draw activities from a tilted distribution: activity a gets
// weight exp(+signal * d_a / 2) in undesired and exp(-signal * d_a / 2) in
// desired cases, with d_a alternating between +1 and -1. The event attribute
// "amount" shifts with the outcome by the same strength. At signal 0 the two
// classes are identically distributed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppm/error.hpp"
#include "ppm/event_log.hpp"
#include "ppm/rng.hpp"

namespace ppm {

struct SyntheticSpec {
  std::size_t n_cases = 1000;
  double class_ratio = 0.5;  // fraction undesired
  std::size_t min_length = 3;
  std::size_t median_length = 8;
  std::size_t max_length = 16;
  double signal = 2.0;
  std::size_t n_activities = 10;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticSpec&) const = default;
};

inline void validate(const SyntheticSpec& s) {
  if (s.n_cases < 1) throw DomainError("synthetic log needs at least one case");
  if (!(s.class_ratio > 0.0 && s.class_ratio < 1.0)) throw DomainError("class_ratio must lie in (0, 1)");
  if (s.min_length < 2) throw DomainError("min_length must be at least 2");
  if (!(s.min_length <= s.median_length && s.median_length <= s.max_length)) {
    throw DomainError("lengths must satisfy min <= median <= max");
  }
  if (!std::isfinite(s.signal) || s.signal < 0.0) throw DomainError("signal must be finite and non-negative");
  if (s.n_activities < 2) throw DomainError("n_activities must be at least 2");
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"n_cases", s.n_cases},         {"class_ratio", s.class_ratio},
                     {"min_length", s.min_length},   {"median_length", s.median_length},
                     {"max_length", s.max_length},   {"signal", s.signal},
                     {"n_activities", s.n_activities}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  s = SyntheticSpec{};
  s.n_cases = j.value("n_cases", s.n_cases);
  s.class_ratio = j.value("class_ratio", s.class_ratio);
  s.min_length = j.value("min_length", s.min_length);
  s.median_length = j.value("median_length", s.median_length);
  s.max_length = j.value("max_length", s.max_length);
  s.signal = j.value("signal", s.signal);
  s.n_activities = j.value("n_activities", s.n_activities);
  s.seed = j.value("seed", s.seed);
}

// Column layout of generated logs, for writing and re-reading them as CSV.
inline LogSchemaConfig synthetic_schema() {
  LogSchemaConfig c;
  c.cat_event_cols = {"resource"};
  c.num_event_cols = {"amount"};
  c.cat_case_cols = {"channel"};
  c.num_case_cols = {"age"};
  return c;
}

inline EventLog generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);

  const auto n_undesired = static_cast<std::size_t>(std::llround(spec.class_ratio * static_cast<double>(spec.n_cases)));
  std::vector<char> outcomes(spec.n_cases, 0);
  for (std::size_t i = 0; i < n_undesired; ++i) outcomes[i] = 1;
  rng.shuffle(outcomes);

  std::vector<double> w_undesired(spec.n_activities), w_desired(spec.n_activities);
  for (std::size_t a = 0; a < spec.n_activities; ++a) {
    const double d = a % 2 == 0 ? 1.0 : -1.0;
    w_undesired[a] = std::exp(0.5 * spec.signal * d);
    w_desired[a] = std::exp(-0.5 * spec.signal * d);
  }
  std::vector<std::string> activities(spec.n_activities);
  for (std::size_t a = 0; a < spec.n_activities; ++a) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "A%02zu", a + 1);
    activities[a] = buf;
  }
  // R8 is rare on purpose so category folding has something to fold.
  static constexpr double kResourceWeights[] = {8, 8, 6, 6, 4, 4, 2, 0.2};
  static const char* const kChannels[] = {"web", "branch", "phone"};

  EventLog log;
  log.traces.reserve(spec.n_cases);
  double start = 1.6e9;
  for (std::size_t i = 0; i < spec.n_cases; ++i) {
    Trace trace;
    char id[24];
    std::snprintf(id, sizeof id, "case_%06zu", i + 1);
    trace.case_id = id;
    trace.outcome = outcomes[i] != 0;

    std::size_t length = 0;
    if (rng.bernoulli(0.5)) {
      length = spec.min_length + rng.below(spec.median_length - spec.min_length + 1);
    } else {
      length = spec.median_length + rng.below(spec.max_length - spec.median_length + 1);
    }

    trace.case_attributes["channel"] = std::string(kChannels[rng.below(3)]);
    trace.case_attributes["age"] = std::round(rng.uniform(18.0, 80.0));

    start += rng.exponential(1800.0);
    double t = start;
    const auto& weights = trace.outcome ? w_undesired : w_desired;
    const double amount_mean = trace.outcome ? 100.0 * (1.0 + 0.15 * spec.signal) : 100.0;
    for (std::size_t e = 0; e < length; ++e) {
      Event ev;
      ev.case_id = trace.case_id;
      ev.activity = activities[rng.weighted(weights)];
      ev.timestamp = std::round(t);
      ev.categorical["resource"] = "R" + std::to_string(rng.weighted(kResourceWeights) + 1);
      ev.numeric["amount"] = std::round(std::max(0.0, amount_mean + 20.0 * rng.normal()) * 100.0) / 100.0;
      trace.events.push_back(std::move(ev));
      t += rng.exponential(3600.0);
    }
    log.traces.push_back(std::move(trace));
  }
  return log;
}

}  // namespace ppm
