#pragma once

// Alarm decisions over proper prefixes, per-case costs by outcome and alarm,
// log-level cost reports and the return-on-investment condition.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppm/cost_model.hpp"
#include "ppm/error.hpp"
#include "ppm/event_log.hpp"
#include "ppm/text.hpp"

namespace ppm {

// Anything that yields the undesired-outcome likelihood of the first k events.
template <class P>
concept PrefixPredictor = requires(const P& p, const Trace& t, std::size_t k) {
  { p.predict(t, k) } -> std::convertible_to<double>;
};

class AlarmPolicy {
 public:
  enum class Mode { global, per_length, never, always };

  static AlarmPolicy global(double tau) {
    check(tau);
    AlarmPolicy p(Mode::global);
    p.tau_ = tau;
    return p;
  }

  // Threshold per prefix length; lengths not listed use the fallback.
  static AlarmPolicy per_length(std::map<std::size_t, double> thresholds, double fallback) {
    check(fallback);
    for (const auto& [k, tau] : thresholds) check(tau);
    AlarmPolicy p(Mode::per_length);
    p.tau_ = fallback;
    p.thresholds_ = std::move(thresholds);
    return p;
  }

  static AlarmPolicy never() { return AlarmPolicy(Mode::never); }
  static AlarmPolicy always() { return AlarmPolicy(Mode::always); }

  Mode mode() const noexcept { return mode_; }
  double tau() const noexcept { return tau_; }
  const std::map<std::size_t, double>& thresholds() const noexcept { return thresholds_; }

  double threshold_for(std::size_t k) const {
    if (mode_ == Mode::per_length) {
      if (const auto it = thresholds_.find(k); it != thresholds_.end()) return it->second;
    }
    return tau_;
  }

  bool alarms(std::size_t k, double likelihood) const {
    switch (mode_) {
      case Mode::never:
        return false;
      case Mode::always:
        return true;
      default:
        return likelihood >= threshold_for(k);
    }
  }

  std::string describe() const {
    switch (mode_) {
      case Mode::never:
        return "never";
      case Mode::always:
        return "always";
      case Mode::global:
        return "tau=" + text::format_double(tau_);
      default:
        return "per_length(fallback=" + text::format_double(tau_) + ")";
    }
  }

  bool operator==(const AlarmPolicy&) const = default;

 private:
  explicit AlarmPolicy(Mode mode) : mode_(mode) {}

  static void check(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("alarm threshold must lie in [0, 1]");
  }

  Mode mode_;
  double tau_ = 1.0;
  std::map<std::size_t, double> thresholds_;
};

inline void to_json(nlohmann::json& j, const AlarmPolicy& p) {
  switch (p.mode()) {
    case AlarmPolicy::Mode::never:
      j = {{"mode", "never"}};
      break;
    case AlarmPolicy::Mode::always:
      j = {{"mode", "always"}};
      break;
    case AlarmPolicy::Mode::global:
      j = {{"mode", "global"}, {"tau", p.tau()}};
      break;
    case AlarmPolicy::Mode::per_length: {
      nlohmann::json t = nlohmann::json::object();
      for (const auto& [k, tau] : p.thresholds()) t[std::to_string(k)] = tau;
      j = {{"mode", "per_length"}, {"fallback", p.tau()}, {"thresholds", t}};
      break;
    }
  }
}

inline AlarmPolicy policy_from_json(const nlohmann::json& j) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "never") return AlarmPolicy::never();
  if (mode == "always") return AlarmPolicy::always();
  if (mode == "global") return AlarmPolicy::global(j.at("tau").get<double>());
  if (mode == "per_length") {
    std::map<std::size_t, double> thresholds;
    for (const auto& [k, tau] : j.at("thresholds").items()) thresholds[std::stoul(k)] = tau.get<double>();
    return AlarmPolicy::per_length(std::move(thresholds), j.at("fallback").get<double>());
  }
  throw ConfigError("unknown alarm policy mode '" + mode + "'");
}

// First position i in [1, |trace|-1] whose likelihood reaches the policy
// threshold for length i, or 0. likelihoods[i-1] belongs to the prefix of
// length i; at most |trace|-1 entries are read.
inline std::size_t alarm_index(std::span<const double> likelihoods, std::size_t trace_length,
                               const AlarmPolicy& policy) {
  if (trace_length < 2 || policy.mode() == AlarmPolicy::Mode::never) return 0;
  if (policy.mode() == AlarmPolicy::Mode::always) return 1;
  const std::size_t last = std::min(trace_length - 1, likelihoods.size());
  for (std::size_t i = 1; i <= last; ++i) {
    if (policy.alarms(i, likelihoods[i - 1])) return i;
  }
  return 0;
}

// Same decision, querying the predictor lazily up to the first alarm.
template <PrefixPredictor P>
std::size_t alarm_index(const Trace& trace, const P& predictor, const AlarmPolicy& policy) {
  if (trace.size() < 2 || policy.mode() == AlarmPolicy::Mode::never) return 0;
  if (policy.mode() == AlarmPolicy::Mode::always) return 1;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (policy.alarms(i, static_cast<double>(predictor.predict(trace, i)))) return i;
  }
  return 0;
}

// Likelihoods of every proper prefix of every trace of one log, computed once.
class PredictionCache {
 public:
  PredictionCache() = default;

  template <PrefixPredictor P>
  PredictionCache(const EventLog& log, const P& predictor) {
    predictions_.reserve(log.size());
    for (const auto& trace : log.traces) {
      std::vector<double> row;
      for (std::size_t k = 1; k < trace.size(); ++k) row.push_back(static_cast<double>(predictor.predict(trace, k)));
      add(trace.case_id, std::move(row));
    }
  }

  // Explicit likelihoods; row[k-1] is the prefix of length k.
  void add(const std::string& case_id, std::vector<double> row) {
    index_[case_id] = predictions_.size();
    predictions_.push_back(std::move(row));
  }

  double predict(const Trace& trace, std::size_t k) const {
    const auto& row = predictions_.at(position(trace.case_id));
    if (k < 1 || k > row.size()) throw DomainError("no cached likelihood for prefix length " + std::to_string(k));
    return row[k - 1];
  }

  std::span<const double> row(std::size_t trace_position) const { return predictions_.at(trace_position); }
  std::size_t position(const std::string& case_id) const {
    const auto it = index_.find(case_id);
    if (it == index_.end()) throw DomainError("no cached likelihoods for case '" + case_id + "'");
    return it->second;
  }
  std::size_t size() const noexcept { return predictions_.size(); }

 private:
  std::vector<std::vector<double>> predictions_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct CaseCostRecord {
  std::string case_id;
  std::size_t alarm_index = 0;
  bool outcome = false;
  double cost = 0.0;
  double intervention = 0.0;
  double residual_outcome = 0.0;
  double compensation = 0.0;
};

// Cost of one case given where (if at all) it was alarmed:
//   undesired, alarmed     c_in(i) + (1 - eff(i)) * c_out
//   desired,   alarmed     c_in(i) + c_com
//   undesired, not alarmed c_out
//   desired,   not alarmed 0
inline CaseCostRecord case_cost(const Trace& trace, const EventLog& log, const CostModel& model,
                                std::size_t alarm_position) {
  CaseCostRecord rec;
  rec.case_id = trace.case_id;
  rec.alarm_index = alarm_position;
  rec.outcome = trace.outcome;
  try {
    if (alarm_position > 0) {
      rec.intervention = model.intervention(alarm_position, trace, log);
      if (trace.outcome) {
        rec.residual_outcome = (1.0 - model.effectiveness(alarm_position, trace, log)) * model.outcome(trace, log);
      } else {
        rec.compensation = model.compensation(trace, log);
      }
    } else if (trace.outcome) {
      rec.residual_outcome = model.outcome(trace, log);
    }
  } catch (const Error& e) {
    throw DataError("cost evaluation failed for case '" + trace.case_id + "': " + e.what());
  }
  rec.cost = rec.intervention + rec.residual_outcome + rec.compensation;
  return rec;
}

struct PartitionCounts {
  std::size_t undesired_alarmed = 0;
  std::size_t desired_alarmed = 0;
  std::size_t undesired_not_alarmed = 0;
  std::size_t desired_not_alarmed = 0;

  std::size_t total() const {
    return undesired_alarmed + desired_alarmed + undesired_not_alarmed + desired_not_alarmed;
  }
};

struct CostReport {
  std::vector<CaseCostRecord> cases;
  double total_cost = 0.0;
  double average_cost = 0.0;
  double as_is_cost = 0.0;          // total when nothing is ever alarmed
  double as_is_average_cost = 0.0;
  double roi = 0.0;                 // as_is_cost - total_cost
  double benefit = 0.0;             // roi per case
  PartitionCounts counts;
};

// Builds a report from an alarm position per trace (same order as the log).
// Totals are accumulated in log order.
inline CostReport cost_report(const EventLog& log, std::span<const std::size_t> alarm_positions,
                              const CostModel& model) {
  if (alarm_positions.size() != log.size()) throw DomainError("one alarm position per trace expected");
  CostReport report;
  report.cases.reserve(log.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    const Trace& trace = log.traces[t];
    CaseCostRecord rec = case_cost(trace, log, model, alarm_positions[t]);
    report.total_cost += rec.cost;
    if (trace.outcome) report.as_is_cost += model.outcome(trace, log);
    auto& c = report.counts;
    if (rec.alarm_index > 0) {
      ++(trace.outcome ? c.undesired_alarmed : c.desired_alarmed);
    } else {
      ++(trace.outcome ? c.undesired_not_alarmed : c.desired_not_alarmed);
    }
    report.cases.push_back(std::move(rec));
  }
  report.roi = report.as_is_cost - report.total_cost;
  if (!log.empty()) {
    const auto n = static_cast<double>(log.size());
    report.average_cost = report.total_cost / n;
    report.as_is_average_cost = report.as_is_cost / n;
    report.benefit = report.roi / n;
  }
  return report;
}

template <PrefixPredictor P>
CostReport log_cost(const EventLog& log, const P& predictor, const AlarmPolicy& policy, const CostModel& model) {
  std::vector<std::size_t> positions;
  positions.reserve(log.size());
  for (const auto& trace : log.traces) positions.push_back(alarm_index(trace, predictor, policy));
  return cost_report(log, positions, model);
}

struct ConstantCosts {
  double c_in = 1.0;
  double c_out = 1.0;
  double c_com = 0.0;
  double eff = 1.0;
};

// Positive-ROI condition under constant costs:
//   |und&al| (eff c_out - c_in) > |des&al| (c_in + c_com)
inline bool roi_feasible(const PartitionCounts& counts, const ConstantCosts& costs) {
  const auto und_al = static_cast<double>(counts.undesired_alarmed);
  const auto des_al = static_cast<double>(counts.desired_alarmed);
  return und_al * (costs.eff * costs.c_out - costs.c_in) > des_al * (costs.c_in + costs.c_com);
}

// ---------------------------------------------------------------------------
// Report output

inline constexpr const char* kCaseCsvHeader =
    "case_id,outcome,alarm_index,cost,intervention,residual_outcome,compensation";

inline void write_case_csv(std::ostream& out, const CostReport& report) {
  out << kCaseCsvHeader << '\n';
  for (const auto& rec : report.cases) {
    out << text::csv_field(rec.case_id) << ',' << (rec.outcome ? 1 : 0) << ',' << rec.alarm_index << ','
        << text::format_double(rec.cost) << ',' << text::format_double(rec.intervention) << ','
        << text::format_double(rec.residual_outcome) << ',' << text::format_double(rec.compensation) << '\n';
  }
}

inline nlohmann::json summary_json(const CostReport& r) {
  return {{"cases", r.cases.size()},
          {"total_cost", r.total_cost},
          {"average_cost", r.average_cost},
          {"as_is_cost", r.as_is_cost},
          {"as_is_average_cost", r.as_is_average_cost},
          {"roi", r.roi},
          {"benefit", r.benefit},
          {"undesired_alarmed", r.counts.undesired_alarmed},
          {"desired_alarmed", r.counts.desired_alarmed},
          {"undesired_not_alarmed", r.counts.undesired_not_alarmed},
          {"desired_not_alarmed", r.counts.desired_not_alarmed}};
}

}  // namespace ppm
