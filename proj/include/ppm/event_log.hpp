#pragma once

// Event logs: traces of timestamped events with a boolean outcome label,
// CSV ingestion, prefixes and the log-to-log preprocessing transforms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ppm/error.hpp"
#include "ppm/rng.hpp"
#include "ppm/text.hpp"

namespace ppm {

// Reserved category labels. Neither is ever folded.
inline constexpr const char* kOtherLabel = "other";
inline constexpr const char* kMissingLabel = "missing";

struct Event {
  std::string case_id;
  std::string activity;
  double timestamp = 0.0;  // epoch seconds, UTC
  std::map<std::string, std::string> categorical;
  std::map<std::string, double> numeric;

  bool operator==(const Event&) const = default;
};

using CaseValue = std::variant<std::string, double>;

struct Trace {
  std::string case_id;
  std::vector<Event> events;
  std::map<std::string, CaseValue> case_attributes;
  bool outcome = false;  // true = undesired

  std::size_t size() const noexcept { return events.size(); }
  double start_time() const { return events.front().timestamp; }
  double end_time() const { return events.back().timestamp; }

  std::optional<double> case_numeric(const std::string& name) const {
    const auto it = case_attributes.find(name);
    if (it == case_attributes.end()) return std::nullopt;
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    return std::nullopt;
  }

  bool operator==(const Trace&) const = default;
};

struct EventLog {
  std::vector<Trace> traces;

  std::size_t size() const noexcept { return traces.size(); }
  bool empty() const noexcept { return traces.empty(); }

  std::size_t event_count() const {
    std::size_t n = 0;
    for (const auto& t : traces) n += t.size();
    return n;
  }

  bool operator==(const EventLog&) const = default;
};

inline void validate(const Event& event) {
  if (event.activity.empty()) throw DataError("event of case '" + event.case_id + "' has an empty activity");
  if (!std::isfinite(event.timestamp) || event.timestamp < 0.0) {
    throw DataError("event of case '" + event.case_id + "' has a negative or non-finite timestamp");
  }
}

inline void validate(const Trace& trace) {
  if (trace.events.empty()) throw DataError("trace '" + trace.case_id + "' is empty");
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    validate(trace.events[i]);
    if (i > 0 && trace.events[i].timestamp < trace.events[i - 1].timestamp) {
      throw DataError("trace '" + trace.case_id + "' has decreasing timestamps at position " +
                      std::to_string(i + 1));
    }
  }
}

inline void validate(const EventLog& log) {
  std::unordered_set<std::string> seen;
  for (const auto& trace : log.traces) {
    validate(trace);
    if (!seen.insert(trace.case_id).second) throw DataError("duplicate case id '" + trace.case_id + "'");
  }
}

// The first k events of a trace. Holds a reference; the trace must outlive it.
class Prefix {
 public:
  Prefix(const Trace& trace, std::size_t k) : trace_(&trace), k_(k) {
    if (k < 1 || k > trace.size()) {
      throw DomainError("prefix length " + std::to_string(k) + " outside [1, " + std::to_string(trace.size()) +
                        "] for case '" + trace.case_id + "'");
    }
  }

  std::size_t length() const noexcept { return k_; }
  const Trace& trace() const noexcept { return *trace_; }
  std::span<const Event> events() const noexcept { return {trace_->events.data(), k_}; }
  const Event& first() const noexcept { return trace_->events.front(); }
  const Event& last() const noexcept { return trace_->events[k_ - 1]; }

 private:
  const Trace* trace_;
  std::size_t k_;
};

inline Prefix prefix(const Trace& trace, std::size_t k) { return Prefix(trace, k); }

// Events k+1..|trace|; prefix(t, k) followed by suffix(t, k) is t.
inline std::span<const Event> suffix(const Trace& trace, std::size_t k) {
  if (k > trace.size()) throw DomainError("suffix start beyond trace length");
  return std::span<const Event>(trace.events).subspan(k);
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct LogSchemaConfig {
  std::string case_id_col = "case_id";
  std::string activity_col = "activity";
  std::string timestamp_col = "timestamp";
  std::string label_col = "label";
  std::vector<std::string> cat_event_cols;
  std::vector<std::string> num_event_cols;
  std::vector<std::string> cat_case_cols;
  std::vector<std::string> num_case_cols;
  std::string pos_label_value = "1";
  char delimiter = ',';
};

inline void to_json(nlohmann::json& j, const LogSchemaConfig& c) {
  j = nlohmann::json{{"case_id_col", c.case_id_col},       {"activity_col", c.activity_col},
                     {"timestamp_col", c.timestamp_col},   {"label_col", c.label_col},
                     {"cat_event_cols", c.cat_event_cols}, {"num_event_cols", c.num_event_cols},
                     {"cat_case_cols", c.cat_case_cols},   {"num_case_cols", c.num_case_cols},
                     {"pos_label_value", c.pos_label_value}, {"delimiter", std::string(1, c.delimiter)}};
}

inline void from_json(const nlohmann::json& j, LogSchemaConfig& c) {
  const auto get_string = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  const auto get_list = [&](const char* key, std::vector<std::string>& out) {
    if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
  };
  get_string("case_id_col", c.case_id_col);
  get_string("activity_col", c.activity_col);
  get_string("timestamp_col", c.timestamp_col);
  get_string("label_col", c.label_col);
  get_list("cat_event_cols", c.cat_event_cols);
  get_list("num_event_cols", c.num_event_cols);
  get_list("cat_case_cols", c.cat_case_cols);
  get_list("num_case_cols", c.num_case_cols);
  if (j.contains("pos_label_value")) {
    const auto& v = j.at("pos_label_value");
    c.pos_label_value = v.is_string() ? v.get<std::string>() : v.dump();
  }
  if (j.contains("delimiter")) {
    const auto d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw SchemaError("delimiter must be a single character");
    c.delimiter = d[0];
  }
}

// Reads a CSV event log. Events are grouped by case in order of first
// appearance and sorted by timestamp, ties kept in input order.
inline EventLog parse_log(std::istream& in, const LogSchemaConfig& config) {
  text::CsvReader reader(in, config.delimiter);
  std::vector<std::string> header;
  if (!reader.next(header)) throw SchemaError("CSV source has no header row");
  for (auto& h : header) h = text::trim(h);

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
  const auto require = [&](const std::string& name, const char* role) {
    const auto it = column.find(name);
    if (it == column.end()) throw SchemaError(std::string("missing ") + role + " column '" + name + "'");
    return it->second;
  };
  const std::size_t case_col = require(config.case_id_col, "case id");
  const std::size_t activity_col = require(config.activity_col, "activity");
  const std::size_t time_col = require(config.timestamp_col, "timestamp");
  const std::size_t label_col = require(config.label_col, "label");
  const auto columns_of = [&](const std::vector<std::string>& names, const char* role) {
    std::vector<std::pair<std::string, std::size_t>> out;
    for (const auto& name : names) out.emplace_back(name, require(name, role));
    return out;
  };
  const auto cat_event = columns_of(config.cat_event_cols, "categorical event attribute");
  const auto num_event = columns_of(config.num_event_cols, "numeric event attribute");
  const auto cat_case = columns_of(config.cat_case_cols, "categorical case attribute");
  const auto num_case = columns_of(config.num_case_cols, "numeric case attribute");

  EventLog log;
  std::unordered_map<std::string, std::size_t> trace_index;
  std::vector<std::string> label_of;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && text::trim(fields[0]).empty()) continue;
    const std::string line = std::to_string(reader.line());
    if (fields.size() != header.size()) {
      throw DataError("line " + line + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    Event event;
    event.case_id = text::trim(fields[case_col]);
    event.activity = text::trim(fields[activity_col]);
    if (event.case_id.empty()) throw DataError("line " + line + ": empty case id");
    if (event.activity.empty()) throw DataError("line " + line + ": empty activity");
    const auto ts = text::parse_timestamp(fields[time_col]);
    if (!ts || !std::isfinite(*ts) || *ts < 0.0) {
      throw DataError("line " + line + ": unparseable timestamp '" + fields[time_col] + "'");
    }
    event.timestamp = *ts;
    for (const auto& [name, col] : cat_event) {
      std::string value = text::trim(fields[col]);
      if (!value.empty()) event.categorical.emplace(name, std::move(value));
    }
    for (const auto& [name, col] : num_event) {
      if (text::trim(fields[col]).empty()) continue;
      const auto value = text::parse_double(fields[col]);
      if (!value || !std::isfinite(*value)) {
        throw DataError("line " + line + ": non-numeric value '" + fields[col] + "' in column '" + name + "'");
      }
      event.numeric.emplace(name, *value);
    }

    const std::string label = text::trim(fields[label_col]);
    auto [it, inserted] = trace_index.emplace(event.case_id, log.traces.size());
    if (inserted) {
      Trace trace;
      trace.case_id = event.case_id;
      trace.outcome = label == config.pos_label_value;
      log.traces.push_back(std::move(trace));
      label_of.push_back(label);
    } else if (label_of[it->second] != label) {
      throw DataError("line " + line + ": case '" + event.case_id + "' has conflicting outcome labels '" +
                      label_of[it->second] + "' and '" + label + "'");
    }
    Trace& trace = log.traces[it->second];
    for (const auto& [name, col] : cat_case) {
      std::string value = text::trim(fields[col]);
      if (!value.empty()) trace.case_attributes.emplace(name, std::move(value));
    }
    for (const auto& [name, col] : num_case) {
      if (text::trim(fields[col]).empty()) continue;
      const auto value = text::parse_double(fields[col]);
      if (!value || !std::isfinite(*value)) {
        throw DataError("line " + line + ": non-numeric value '" + fields[col] + "' in column '" + name + "'");
      }
      trace.case_attributes.emplace(name, *value);
    }
    trace.events.push_back(std::move(event));
  }
  for (auto& trace : log.traces) {
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
  return log;
}

inline EventLog parse_log_file(const std::string& path, const LogSchemaConfig& config) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open event log '" + path + "'");
  return parse_log(in, config);
}

// Column configuration matching write_log_csv() output for this log.
inline LogSchemaConfig canonical_schema(const EventLog& log) {
  std::set<std::string> cat_event, num_event, cat_case, num_case;
  for (const auto& trace : log.traces) {
    for (const auto& [name, value] : trace.case_attributes) {
      (std::holds_alternative<double>(value) ? num_case : cat_case).insert(name);
    }
    for (const auto& event : trace.events) {
      for (const auto& [name, _] : event.categorical) cat_event.insert(name);
      for (const auto& [name, _] : event.numeric) num_event.insert(name);
    }
  }
  LogSchemaConfig config;
  config.cat_event_cols.assign(cat_event.begin(), cat_event.end());
  config.num_event_cols.assign(num_event.begin(), num_event.end());
  config.cat_case_cols.assign(cat_case.begin(), cat_case.end());
  config.num_case_cols.assign(num_case.begin(), num_case.end());
  std::set<std::string> names{config.case_id_col, config.activity_col, config.timestamp_col, config.label_col};
  for (const auto* group : {&config.cat_event_cols, &config.num_event_cols, &config.cat_case_cols,
                            &config.num_case_cols}) {
    for (const auto& name : *group) {
      if (!names.insert(name).second) throw SchemaError("attribute name '" + name + "' is used twice");
    }
  }
  return config;
}

// One row per event; timestamps as epoch seconds. Readable with canonical_schema(log).
inline void write_log_csv(std::ostream& out, const EventLog& log, const LogSchemaConfig& config) {
  const char d = config.delimiter;
  out << text::csv_field(config.case_id_col, d) << d << text::csv_field(config.activity_col, d) << d
      << text::csv_field(config.timestamp_col, d) << d << text::csv_field(config.label_col, d);
  for (const auto* group :
       {&config.cat_event_cols, &config.num_event_cols, &config.cat_case_cols, &config.num_case_cols}) {
    for (const auto& name : *group) out << d << text::csv_field(name, d);
  }
  out << '\n';
  for (const auto& trace : log.traces) {
    const std::string negative = config.pos_label_value == "0" ? "1" : "0";
    const std::string& label = trace.outcome ? config.pos_label_value : negative;
    for (const auto& event : trace.events) {
      out << text::csv_field(trace.case_id, d) << d << text::csv_field(event.activity, d) << d
          << text::format_double(event.timestamp) << d << label;
      for (const auto& name : config.cat_event_cols) {
        const auto it = event.categorical.find(name);
        out << d << (it == event.categorical.end() ? std::string() : text::csv_field(it->second, d));
      }
      for (const auto& name : config.num_event_cols) {
        const auto it = event.numeric.find(name);
        out << d << (it == event.numeric.end() ? std::string() : text::format_double(it->second));
      }
      for (const auto& name : config.cat_case_cols) {
        const auto it = trace.case_attributes.find(name);
        const std::string* v = it == trace.case_attributes.end() ? nullptr : std::get_if<std::string>(&it->second);
        out << d << (v ? text::csv_field(*v, d) : std::string());
      }
      for (const auto& name : config.num_case_cols) {
        const auto v = trace.case_numeric(name);
        out << d << (v ? text::format_double(*v) : std::string());
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Preprocessing

// Nearest-rank quantile of the trace lengths: the ceil(p/100 * n)-th smallest.
inline std::size_t length_quantile(const EventLog& log, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) throw DomainError("percentile must lie in (0, 100]");
  if (log.empty()) return 0;
  std::vector<std::size_t> lengths;
  lengths.reserve(log.size());
  for (const auto& t : log.traces) lengths.push_back(t.size());
  std::sort(lengths.begin(), lengths.end());
  const double exact = percentile / 100.0 * static_cast<double>(lengths.size());
  // Guard against 0.9 * 10 evaluating to 9.000000000000002.
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, lengths.size());
  return lengths[rank - 1];
}

// Cuts every trace longer than the given length quantile down to it.
inline EventLog truncate_log(const EventLog& log, double percentile) {
  const std::size_t max_length = length_quantile(log, percentile);
  EventLog out = log;
  for (auto& trace : out.traces) {
    if (trace.size() > max_length) trace.events.resize(max_length);
  }
  return out;
}

// Truncates each trace just before its first event whose activity reveals the
// outcome; traces left empty are dropped.
inline EventLog cut_trivially_known(const EventLog& log, const std::vector<std::string>& trigger_rules) {
  if (trigger_rules.empty()) return log;
  const std::unordered_set<std::string> triggers(trigger_rules.begin(), trigger_rules.end());
  EventLog out;
  for (const auto& trace : log.traces) {
    const auto hit = std::find_if(trace.events.begin(), trace.events.end(),
                                  [&](const Event& e) { return triggers.count(e.activity) > 0; });
    if (hit == trace.events.begin()) continue;
    Trace cut = trace;
    cut.events.resize(static_cast<std::size_t>(hit - trace.events.begin()));
    out.traces.push_back(std::move(cut));
  }
  return out;
}

// Retained categorical values per attribute, fitted on one log and applied to
// others. Values not retained become "other"; unseen attributes pass through.
class CategoryFolding {
 public:
  CategoryFolding() = default;

  static CategoryFolding fit(const EventLog& log, std::size_t min_count) {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    for (const auto& trace : log.traces) {
      for (const auto& [name, value] : trace.case_attributes) {
        if (const auto* s = std::get_if<std::string>(&value)) ++counts["case:" + name][*s];
      }
      for (const auto& event : trace.events) {
        for (const auto& [name, value] : event.categorical) ++counts["event:" + name][value];
      }
    }
    CategoryFolding folding;
    for (const auto& [attr, values] : counts) {
      auto& keep = folding.retained_[attr];
      for (const auto& [value, count] : values) {
        if (count >= min_count || is_reserved(value)) keep.insert(value);
      }
    }
    return folding;
  }

  EventLog apply(const EventLog& log) const {
    EventLog out = log;
    for (auto& trace : out.traces) {
      for (auto& [name, value] : trace.case_attributes) {
        if (auto* s = std::get_if<std::string>(&value)) *s = fold("case:" + name, *s);
      }
      for (auto& event : trace.events) {
        for (auto& [name, value] : event.categorical) value = fold("event:" + name, value);
      }
    }
    return out;
  }

  const std::map<std::string, std::set<std::string>>& retained() const noexcept { return retained_; }

  friend void to_json(nlohmann::json& j, const CategoryFolding& f) { j = f.retained_; }
  friend void from_json(const nlohmann::json& j, CategoryFolding& f) {
    f.retained_ = j.get<std::map<std::string, std::set<std::string>>>();
  }

 private:
  static bool is_reserved(const std::string& v) { return v == kOtherLabel || v == kMissingLabel; }

  std::string fold(const std::string& attr, const std::string& value) const {
    const auto it = retained_.find(attr);
    if (it == retained_.end() || is_reserved(value) || it->second.count(value)) return value;
    return kOtherLabel;
  }

  std::map<std::string, std::set<std::string>> retained_;
};

// Replaces categorical values seen fewer than min_count times in this log by "other".
inline EventLog fold_rare_categories(const EventLog& log, std::size_t min_count) {
  if (min_count == 0) return log;
  return CategoryFolding::fit(log, min_count).apply(log);
}

// Fills missing event attributes with the nearest preceding value in the same
// trace, else 0 (numeric) or "missing" (categorical). Missing case attributes
// get the same defaults. Attribute names are those seen anywhere in the log.
inline EventLog impute_missing(const EventLog& log) {
  std::set<std::string> cat_names, num_names, cat_case, num_case;
  for (const auto& trace : log.traces) {
    for (const auto& [name, value] : trace.case_attributes) {
      (std::holds_alternative<double>(value) ? num_case : cat_case).insert(name);
    }
    for (const auto& event : trace.events) {
      for (const auto& [name, _] : event.categorical) cat_names.insert(name);
      for (const auto& [name, _] : event.numeric) num_names.insert(name);
    }
  }
  EventLog out = log;
  for (auto& trace : out.traces) {
    for (const auto& name : cat_case) trace.case_attributes.try_emplace(name, std::string(kMissingLabel));
    for (const auto& name : num_case) trace.case_attributes.try_emplace(name, 0.0);
    std::map<std::string, std::string> last_cat;
    std::map<std::string, double> last_num;
    for (auto& event : trace.events) {
      for (const auto& name : cat_names) {
        auto it = event.categorical.find(name);
        if (it != event.categorical.end()) {
          last_cat[name] = it->second;
        } else {
          const auto prev = last_cat.find(name);
          event.categorical.emplace(name, prev != last_cat.end() ? prev->second : std::string(kMissingLabel));
        }
      }
      for (const auto& name : num_names) {
        auto it = event.numeric.find(name);
        if (it != event.numeric.end()) {
          last_num[name] = it->second;
        } else {
          const auto prev = last_num.find(name);
          event.numeric.emplace(name, prev != last_num.end() ? prev->second : 0.0);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temporal split

struct SplitLogs {
  EventLog train;
  EventLog thres;
  EventLog test;
  double test_start = 0.0;            // events at or after this time are cut from train/thres
  std::vector<std::string> warnings;  // e.g. a partition emptied by the overlap discard
};

// Orders cases by start time. The earliest (train_frac + thres_frac) share is
// split at random into train and thres; the rest is the test log. Events of
// train/thres cases at or after the first test case start are discarded and
// traces emptied by that are dropped.
inline SplitLogs temporal_split(const EventLog& log, double train_frac = 0.64, double thres_frac = 0.16,
                                std::uint64_t seed = 0) {
  if (!(train_frac > 0.0 && thres_frac > 0.0 && train_frac + thres_frac < 1.0)) {
    throw DomainError("split fractions must be positive and sum to less than 1");
  }
  const std::size_t n = log.size();
  if (n < 3) throw SplitError("temporal split needs at least 3 cases, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return log.traces[a].start_time() < log.traces[b].start_time();
  });

  const double pool_frac = train_frac + thres_frac;
  auto n_pool = static_cast<std::size_t>(std::llround(pool_frac * static_cast<double>(n)));
  n_pool = std::clamp<std::size_t>(n_pool, 2, n - 1);
  auto n_train = static_cast<std::size_t>(std::llround(train_frac / pool_frac * static_cast<double>(n_pool)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_pool - 1);

  std::vector<std::size_t> pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pool));
  Rng rng(seed);
  rng.shuffle(pool);
  std::vector<std::size_t> train_ids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> thres_ids(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  // Keep each partition in start-time order.
  const auto by_time = [&](std::vector<std::size_t>& ids) {
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;
    std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
  };
  by_time(train_ids);
  by_time(thres_ids);

  SplitLogs split;
  split.test_start = log.traces[order[n_pool]].start_time();
  for (std::size_t i = n_pool; i < n; ++i) split.test.traces.push_back(log.traces[order[i]]);

  const auto fill = [&](const std::vector<std::size_t>& ids, EventLog& target, const char* name) {
    std::size_t dropped = 0;
    for (std::size_t id : ids) {
      Trace trace = log.traces[id];
      const auto cut = std::find_if(trace.events.begin(), trace.events.end(),
                                    [&](const Event& e) { return e.timestamp >= split.test_start; });
      trace.events.erase(cut, trace.events.end());
      if (trace.events.empty()) {
        ++dropped;
        continue;
      }
      target.traces.push_back(std::move(trace));
    }
    if (target.empty()) {
      split.warnings.push_back(std::string(name) + " partition is empty after discarding events overlapping the test period");
    } else if (dropped > 0) {
      split.warnings.push_back(std::string(name) + ": dropped " + std::to_string(dropped) +
                               " cases that started inside the test period");
    }
  };
  fill(train_ids, split.train, "train");
  fill(thres_ids, split.thres, "thres");
  return split;
}

}  // namespace ppm
