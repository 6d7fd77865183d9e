#pragma once

// Aggregation encoding of trace prefixes into fixed-width feature vectors.
//
// Layout, in order:
//   1. per activity: occurrence count in the prefix
//   2. per categorical event attribute value: occurrence count
//   3. per numeric event attribute: min, max, mean, sum, std (population)
//   4. case attributes: one-hot for categoricals, raw value for numerics
//   5. event number, hour, weekday (0 = Sunday), month (1-12) of the last
//      event in UTC, seconds since case start, seconds since previous event
//
// Alphabets are fitted on the training log only and sorted lexicographically.
// Values outside the alphabet contribute to no feature.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppm/error.hpp"
#include "ppm/event_log.hpp"

namespace ppm {

using FeatureVector = std::vector<double>;

inline constexpr std::size_t kNumericAggregates = 5;
inline constexpr std::size_t kDerivedFeatures = 6;

class EncodingSchema {
 public:
  using Alphabets = std::vector<std::pair<std::string, std::vector<std::string>>>;

  EncodingSchema() { finalize(); }

  EncodingSchema(std::vector<std::string> activities, Alphabets event_categorical,
                 std::vector<std::string> event_numeric, Alphabets case_categorical,
                 std::vector<std::string> case_numeric)
      : activities_(std::move(activities)),
        event_categorical_(std::move(event_categorical)),
        event_numeric_(std::move(event_numeric)),
        case_categorical_(std::move(case_categorical)),
        case_numeric_(std::move(case_numeric)) {
    finalize();
  }

  const std::vector<std::string>& activities() const noexcept { return activities_; }
  const Alphabets& event_categorical() const noexcept { return event_categorical_; }
  const std::vector<std::string>& event_numeric() const noexcept { return event_numeric_; }
  const Alphabets& case_categorical() const noexcept { return case_categorical_; }
  const std::vector<std::string>& case_numeric() const noexcept { return case_numeric_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  std::size_t width() const noexcept { return feature_names_.size(); }

  bool operator==(const EncodingSchema& other) const {
    return activities_ == other.activities_ && event_categorical_ == other.event_categorical_ &&
           event_numeric_ == other.event_numeric_ && case_categorical_ == other.case_categorical_ &&
           case_numeric_ == other.case_numeric_;
  }

  // Writes the encoding of the prefix into out (out.size() == width()).
  void encode_into(const Prefix& prefix, std::span<double> out) const {
    if (out.size() != width()) throw DomainError("feature buffer width mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    const auto events = prefix.events();

    for (const auto& event : events) {
      if (const auto it = activity_index_.find(event.activity); it != activity_index_.end()) {
        out[it->second] += 1.0;
      }
      for (const auto& [name, value] : event.categorical) {
        if (const auto it = event_value_index_.find(key(name, value)); it != event_value_index_.end()) {
          out[it->second] += 1.0;
        }
      }
    }

    std::size_t offset = numeric_offset_;
    for (const auto& name : event_numeric_) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double sum = 0.0;
      double sum_sq = 0.0;
      std::size_t n = 0;
      for (const auto& event : events) {
        const auto it = event.numeric.find(name);
        if (it == event.numeric.end()) continue;
        const double v = it->second;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        sum_sq += v * v;
        ++n;
      }
      if (n > 0) {
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
        out[offset] = lo;
        out[offset + 1] = hi;
        out[offset + 2] = mean;
        out[offset + 3] = sum;
        out[offset + 4] = n == 1 ? 0.0 : std::sqrt(var);
      }
      offset += kNumericAggregates;
    }

    const Trace& trace = prefix.trace();
    for (const auto& [name, value] : trace.case_attributes) {
      if (const auto* s = std::get_if<std::string>(&value)) {
        if (const auto it = case_value_index_.find(key(name, *s)); it != case_value_index_.end()) {
          out[it->second] = 1.0;
        }
      }
    }
    offset = case_numeric_offset_;
    for (const auto& name : case_numeric_) {
      out[offset++] = trace.case_numeric(name).value_or(0.0);
    }

    const double last_time = prefix.last().timestamp;
    const auto seconds = std::chrono::sys_seconds{std::chrono::seconds{static_cast<long long>(std::floor(last_time))}};
    const auto day = std::chrono::floor<std::chrono::days>(seconds);
    const std::chrono::year_month_day ymd{day};
    const auto since_midnight = seconds - day;
    out[offset++] = static_cast<double>(prefix.length());
    out[offset++] = static_cast<double>(std::chrono::duration_cast<std::chrono::hours>(since_midnight).count());
    out[offset++] = static_cast<double>(std::chrono::weekday{day}.c_encoding());
    out[offset++] = static_cast<double>(static_cast<unsigned>(ymd.month()));
    out[offset++] = last_time - prefix.first().timestamp;
    out[offset++] = prefix.length() == 1 ? 0.0 : last_time - events[prefix.length() - 2].timestamp;

    for (double v : out) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value in case '" + trace.case_id + "'");
    }
  }

  FeatureVector encode(const Prefix& prefix) const {
    FeatureVector out(width());
    encode_into(prefix, out);
    return out;
  }

 private:
  static std::string key(const std::string& attr, const std::string& value) { return attr + '\x1f' + value; }

  void finalize() {
    feature_names_.clear();
    activity_index_.clear();
    event_value_index_.clear();
    case_value_index_.clear();
    for (const auto& a : activities_) {
      activity_index_.emplace(a, feature_names_.size());
      feature_names_.push_back("activity=" + a);
    }
    for (const auto& [attr, values] : event_categorical_) {
      for (const auto& v : values) {
        event_value_index_.emplace(key(attr, v), feature_names_.size());
        feature_names_.push_back("event:" + attr + "=" + v);
      }
    }
    numeric_offset_ = feature_names_.size();
    for (const auto& name : event_numeric_) {
      for (const char* stat : {"min", "max", "mean", "sum", "std"}) {
        feature_names_.push_back("event:" + name + ":" + stat);
      }
    }
    for (const auto& [attr, values] : case_categorical_) {
      for (const auto& v : values) {
        case_value_index_.emplace(key(attr, v), feature_names_.size());
        feature_names_.push_back("case:" + attr + "=" + v);
      }
    }
    case_numeric_offset_ = feature_names_.size();
    for (const auto& name : case_numeric_) feature_names_.push_back("case:" + name);
    for (const char* derived :
         {"event_number", "hour", "weekday", "month", "time_since_case_start", "time_since_last_event"}) {
      feature_names_.emplace_back(derived);
    }
  }

  std::vector<std::string> activities_;
  Alphabets event_categorical_;
  std::vector<std::string> event_numeric_;
  Alphabets case_categorical_;
  std::vector<std::string> case_numeric_;

  std::vector<std::string> feature_names_;
  std::unordered_map<std::string, std::size_t> activity_index_;
  std::unordered_map<std::string, std::size_t> event_value_index_;
  std::unordered_map<std::string, std::size_t> case_value_index_;
  std::size_t numeric_offset_ = 0;
  std::size_t case_numeric_offset_ = 0;
};

// Collects the alphabets of a (preprocessed) training log.
inline EncodingSchema fit_schema(const EventLog& train) {
  if (train.empty()) throw SchemaError("cannot fit an encoding schema on an empty log");
  std::set<std::string> activities;
  std::map<std::string, std::set<std::string>> event_cat, case_cat;
  std::set<std::string> event_num, case_num;
  for (const auto& trace : train.traces) {
    for (const auto& [name, value] : trace.case_attributes) {
      if (const auto* s = std::get_if<std::string>(&value)) {
        case_cat[name].insert(*s);
      } else {
        case_num.insert(name);
      }
    }
    for (const auto& event : trace.events) {
      activities.insert(event.activity);
      for (const auto& [name, value] : event.categorical) event_cat[name].insert(value);
      for (const auto& [name, _] : event.numeric) event_num.insert(name);
    }
  }
  const auto to_alphabets = [](const std::map<std::string, std::set<std::string>>& m) {
    EncodingSchema::Alphabets out;
    for (const auto& [name, values] : m) out.emplace_back(name, std::vector<std::string>(values.begin(), values.end()));
    return out;
  };
  return EncodingSchema({activities.begin(), activities.end()}, to_alphabets(event_cat),
                        {event_num.begin(), event_num.end()}, to_alphabets(case_cat),
                        {case_num.begin(), case_num.end()});
}

inline FeatureVector encode(const Prefix& prefix, const EncodingSchema& schema) { return schema.encode(prefix); }

inline void to_json(nlohmann::json& j, const EncodingSchema& s) {
  const auto alphabets = [](const EncodingSchema::Alphabets& a) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [name, values] : a) out.push_back({{"name", name}, {"values", values}});
    return out;
  };
  j = nlohmann::json{{"activities", s.activities()},
                     {"event_categorical", alphabets(s.event_categorical())},
                     {"event_numeric", s.event_numeric()},
                     {"case_categorical", alphabets(s.case_categorical())},
                     {"case_numeric", s.case_numeric()},
                     {"feature_names", s.feature_names()}};
}

inline void from_json(const nlohmann::json& j, EncodingSchema& s) {
  const auto alphabets = [](const nlohmann::json& a) {
    EncodingSchema::Alphabets out;
    for (const auto& entry : a) {
      out.emplace_back(entry.at("name").get<std::string>(), entry.at("values").get<std::vector<std::string>>());
    }
    return out;
  };
  s = EncodingSchema(j.at("activities").get<std::vector<std::string>>(), alphabets(j.at("event_categorical")),
                     j.at("event_numeric").get<std::vector<std::string>>(), alphabets(j.at("case_categorical")),
                     j.at("case_numeric").get<std::vector<std::string>>());
  if (j.contains("feature_names") && j.at("feature_names").get<std::vector<std::string>>() != s.feature_names()) {
    throw SchemaError("stored feature names do not match the stored alphabets");
  }
}

}  // namespace ppm
