#pragma once

// Alarm-based cost model (c_in, c_out, c_com, eff) built from a declarative
// specification. c_in and eff depend on the alarm position k; c_out and c_com
// depend on the case only. Every function also receives the whole log, which
// none of the built-in forms reads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "ppm/error.hpp"
#include "ppm/event_log.hpp"

namespace ppm {

namespace cost_form {

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};

// base * (1 - k / |trace|)
struct LinearPrefixDecay {
  double base = 1.0;
  bool operator==(const LinearPrefixDecay&) const = default;
};

// base at k = 1 rising linearly to max at k = |trace|
struct LinearPrefixGrowth {
  double base = 0.0;
  double max = 0.0;
  bool operator==(const LinearPrefixGrowth&) const = default;
};

// m * beta * exp(t(k)), t(k) the time of event k normalized to [0, 1] over
// the span of the trace (0 for traces without elapsed time).
struct ExponentialTimeGrowth {
  double m = 1.0;
  double beta = 1.0;
  bool operator==(const ExponentialTimeGrowth&) const = default;
};

// coeff * v, v a per-case numeric attribute; when the case does not carry it,
// the value on the last event is used.
struct AttributeProportional {
  std::string attribute;
  double coeff = 1.0;
  bool operator==(const AttributeProportional&) const = default;
};

// (v(trace) - v(first k events)) / v(trace) for a cumulative per-event
// attribute: v of a prefix is the attribute on its last event, v of the empty
// prefix is 0. Defined as 0 (and counted) when v(trace) = 0.
struct PrefixRemainderRatio {
  std::string attribute;
  bool operator==(const PrefixRemainderRatio&) const = default;
};

}  // namespace cost_form

using CostForm = std::variant<cost_form::Constant, cost_form::LinearPrefixDecay, cost_form::LinearPrefixGrowth,
                              cost_form::ExponentialTimeGrowth, cost_form::AttributeProportional,
                              cost_form::PrefixRemainderRatio>;

struct CostSpec {
  CostForm c_in = cost_form::Constant{1.0};
  CostForm c_out = cost_form::Constant{1.0};
  CostForm c_com = cost_form::Constant{0.0};
  CostForm eff = cost_form::Constant{1.0};

  bool operator==(const CostSpec&) const = default;
};

// Counters bumped during evaluation; shared by copies of a compiled model.
struct CostDiagnostics {
  std::atomic<std::size_t> eff_clamped{0};
  std::atomic<std::size_t> zero_remainder_base{0};
};

namespace detail {

inline bool depends_on_position(const CostForm& form) {
  return !std::holds_alternative<cost_form::Constant>(form) &&
         !std::holds_alternative<cost_form::AttributeProportional>(form);
}

inline double case_attribute(const Trace& trace, const std::string& name) {
  if (const auto v = trace.case_numeric(name)) return *v;
  const auto& last = trace.events.back().numeric;
  if (const auto it = last.find(name); it != last.end()) return it->second;
  throw DataError("case '" + trace.case_id + "' has no numeric attribute '" + name + "'");
}

inline double event_attribute(const Trace& trace, std::size_t position, const std::string& name) {
  const auto& numeric = trace.events[position].numeric;
  const auto it = numeric.find(name);
  if (it == numeric.end()) {
    throw DataError("case '" + trace.case_id + "' has no numeric attribute '" + name + "' at event " +
                    std::to_string(position + 1));
  }
  return it->second;
}

// Evaluates a form at alarm position k (k is ignored by position-free forms).
inline double evaluate(const CostForm& form, std::size_t k, const Trace& trace, CostDiagnostics& diag) {
  const auto n = static_cast<double>(trace.size());
  const auto kd = static_cast<double>(k);
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, cost_form::Constant>) {
          return f.value;
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixDecay>) {
          return f.base * (1.0 - kd / n);
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixGrowth>) {
          if (trace.size() < 2) return f.base;
          return f.base + (f.max - f.base) * (kd - 1.0) / (n - 1.0);
        } else if constexpr (std::is_same_v<F, cost_form::ExponentialTimeGrowth>) {
          const double span = trace.end_time() - trace.start_time();
          const std::size_t idx = std::clamp<std::size_t>(k, 1, trace.size()) - 1;
          const double t = span > 0.0 ? (trace.events[idx].timestamp - trace.start_time()) / span : 0.0;
          return f.m * f.beta * std::exp(t);
        } else if constexpr (std::is_same_v<F, cost_form::AttributeProportional>) {
          return f.coeff * case_attribute(trace, f.attribute);
        } else {
          const double total = event_attribute(trace, trace.size() - 1, f.attribute);
          if (total == 0.0) {
            diag.zero_remainder_base.fetch_add(1, std::memory_order_relaxed);
            return 0.0;
          }
          const double done = k == 0 ? 0.0 : event_attribute(trace, std::min(k, trace.size()) - 1, f.attribute);
          return (total - done) / total;
        }
      },
      form);
}

inline void validate_form(const CostForm& form, const char* component) {
  const auto fail = [&](const std::string& msg) { throw SpecError(std::string(component) + ": " + msg); };
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, cost_form::Constant>) {
          if (!std::isfinite(f.value) || f.value < 0.0) fail("constant must be finite and non-negative");
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixDecay>) {
          if (!std::isfinite(f.base) || f.base < 0.0) fail("base must be non-negative");
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixGrowth>) {
          if (!std::isfinite(f.base) || f.base < 0.0) fail("base must be non-negative");
          if (!std::isfinite(f.max) || f.max < 0.0) fail("max must be non-negative");
        } else if constexpr (std::is_same_v<F, cost_form::ExponentialTimeGrowth>) {
          if (!std::isfinite(f.m) || f.m < 0.0) fail("m must be non-negative");
          if (!std::isfinite(f.beta) || f.beta <= 0.0) fail("beta must be positive");
        } else if constexpr (std::is_same_v<F, cost_form::AttributeProportional>) {
          if (f.attribute.empty()) fail("attribute name is empty");
          if (!std::isfinite(f.coeff) || f.coeff < 0.0) fail("coeff must be non-negative");
        } else {
          if (f.attribute.empty()) fail("attribute name is empty");
        }
      },
      form);
}

}  // namespace detail

inline void validate(const CostSpec& spec) {
  detail::validate_form(spec.c_in, "c_in");
  detail::validate_form(spec.c_out, "c_out");
  detail::validate_form(spec.c_com, "c_com");
  detail::validate_form(spec.eff, "eff");
  if (detail::depends_on_position(spec.c_out)) throw SpecError("c_out cannot depend on the alarm position");
  if (detail::depends_on_position(spec.c_com)) throw SpecError("c_com cannot depend on the alarm position");
  if (const auto* c = std::get_if<cost_form::Constant>(&spec.eff); c && c->value > 1.0) {
    throw SpecError("eff: constant must lie in [0, 1]");
  }
}

class CostModel {
 public:
  explicit CostModel(CostSpec spec) : spec_(std::move(spec)), diag_(std::make_shared<CostDiagnostics>()) {}

  double intervention(std::size_t k, const Trace& trace, const EventLog& /*log*/) const {
    return money(spec_.c_in, k, trace, "c_in");
  }
  double outcome(const Trace& trace, const EventLog& /*log*/) const { return money(spec_.c_out, 0, trace, "c_out"); }
  double compensation(const Trace& trace, const EventLog& /*log*/) const {
    return money(spec_.c_com, 0, trace, "c_com");
  }

  // Clamped to [0, 1]; clamping is counted in diagnostics().
  double effectiveness(std::size_t k, const Trace& trace, const EventLog& /*log*/) const {
    const double v = detail::evaluate(spec_.eff, k, trace, *diag_);
    if (!std::isfinite(v)) throw DataError("eff is not finite for case '" + trace.case_id + "'");
    if (v < 0.0 || v > 1.0) {
      diag_->eff_clamped.fetch_add(1, std::memory_order_relaxed);
      return std::clamp(v, 0.0, 1.0);
    }
    return v;
  }

  const CostSpec& spec() const noexcept { return spec_; }
  const CostDiagnostics& diagnostics() const noexcept { return *diag_; }

 private:
  double money(const CostForm& form, std::size_t k, const Trace& trace, const char* name) const {
    const double v = detail::evaluate(form, k, trace, *diag_);
    if (!std::isfinite(v) || v < 0.0) {
      throw DataError(std::string(name) + " evaluates to a negative or non-finite value for case '" +
                      trace.case_id + "'");
    }
    return v;
  }

  CostSpec spec_;
  std::shared_ptr<CostDiagnostics> diag_;
};

inline CostModel compile(const CostSpec& spec) {
  validate(spec);
  return CostModel(spec);
}

// Named parameters of the three scenario presets. Salary, duration and
// disruption terms are expected as per-case numeric attributes.
struct ScenarioParameters {
  // unemployment benefits
  std::string unentitled_attribute = "unt";
  std::string intervention_cost_attribute = "intervention_cost";
  // financial institution
  double post_cost = 10.0;
  std::string value_attribute = "value";
  std::string asset_attribute = "asset";
  double switch_fraction = 0.05;
  // railway maintenance
  double min_intervention_cost = 1.0;
  double growth = 1.0;
  std::string disruption_cost_attribute = "disruption_cost";
};

inline CostSpec scenario_preset(const std::string& name, const ScenarioParameters& p = {}) {
  using namespace cost_form;
  CostSpec spec;
  if (name == "unemployment") {
    // The intervention cost is the employee salary over the intervention
    // window; the undesired outcome costs the unentitled benefits paid.
    spec.c_in = AttributeProportional{p.intervention_cost_attribute, 1.0};
    spec.c_out = AttributeProportional{p.unentitled_attribute, 1.0};
    spec.c_com = Constant{0.0};
    spec.eff = PrefixRemainderRatio{p.unentitled_attribute};
  } else if (name == "financial") {
    spec.c_in = Constant{p.post_cost};
    spec.c_out = AttributeProportional{p.value_attribute, 1.0};
    spec.c_com = AttributeProportional{p.asset_attribute, p.switch_fraction};
    spec.eff = PrefixRemainderRatio{p.value_attribute};
  } else if (name == "railway") {
    spec.c_in = ExponentialTimeGrowth{p.min_intervention_cost, p.growth};
    spec.c_out = AttributeProportional{p.disruption_cost_attribute, 1.0};
    spec.c_com = Constant{0.0};
    spec.eff = Constant{1.0};
  } else {
    throw SpecError("unknown scenario preset '" + name + "'");
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// JSON form: {"type": "constant", "value": 1}, {"type": "linear_prefix_decay",
// "base": 1}, ... one object per component.

inline void form_to_json(nlohmann::json& j, const CostForm& form) {
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, cost_form::Constant>) {
          j = {{"type", "constant"}, {"value", f.value}};
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixDecay>) {
          j = {{"type", "linear_prefix_decay"}, {"base", f.base}};
        } else if constexpr (std::is_same_v<F, cost_form::LinearPrefixGrowth>) {
          j = {{"type", "linear_prefix_growth"}, {"base", f.base}, {"max", f.max}};
        } else if constexpr (std::is_same_v<F, cost_form::ExponentialTimeGrowth>) {
          j = {{"type", "exponential_time_growth"}, {"m", f.m}, {"beta", f.beta}};
        } else if constexpr (std::is_same_v<F, cost_form::AttributeProportional>) {
          j = {{"type", "attribute_proportional"}, {"attribute", f.attribute}, {"coeff", f.coeff}};
        } else {
          j = {{"type", "prefix_remainder_ratio"}, {"attribute", f.attribute}};
        }
      },
      form);
}

inline void form_from_json(const nlohmann::json& j, CostForm& form) {
  if (j.is_number()) {
    form = cost_form::Constant{j.get<double>()};
    return;
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "constant") {
    form = cost_form::Constant{j.at("value").get<double>()};
  } else if (type == "linear_prefix_decay") {
    form = cost_form::LinearPrefixDecay{j.value("base", 1.0)};
  } else if (type == "linear_prefix_growth") {
    form = cost_form::LinearPrefixGrowth{j.at("base").get<double>(), j.at("max").get<double>()};
  } else if (type == "exponential_time_growth") {
    form = cost_form::ExponentialTimeGrowth{j.at("m").get<double>(), j.at("beta").get<double>()};
  } else if (type == "attribute_proportional") {
    form = cost_form::AttributeProportional{j.at("attribute").get<std::string>(), j.value("coeff", 1.0)};
  } else if (type == "prefix_remainder_ratio") {
    form = cost_form::PrefixRemainderRatio{j.at("attribute").get<std::string>()};
  } else {
    throw SpecError("unknown cost form type '" + type + "'");
  }
}

inline void to_json(nlohmann::json& j, const CostSpec& spec) {
  j = nlohmann::json::object();
  form_to_json(j["c_in"], spec.c_in);
  form_to_json(j["c_out"], spec.c_out);
  form_to_json(j["c_com"], spec.c_com);
  form_to_json(j["eff"], spec.eff);
}

inline void from_json(const nlohmann::json& j, CostSpec& spec) {
  if (j.contains("preset")) {
    ScenarioParameters p;
    if (j.contains("parameters")) {
      const auto& q = j.at("parameters");
      p.unentitled_attribute = q.value("unentitled_attribute", p.unentitled_attribute);
      p.intervention_cost_attribute = q.value("intervention_cost_attribute", p.intervention_cost_attribute);
      p.post_cost = q.value("post_cost", p.post_cost);
      p.value_attribute = q.value("value_attribute", p.value_attribute);
      p.asset_attribute = q.value("asset_attribute", p.asset_attribute);
      p.switch_fraction = q.value("switch_fraction", p.switch_fraction);
      p.min_intervention_cost = q.value("min_intervention_cost", p.min_intervention_cost);
      p.growth = q.value("growth", p.growth);
      p.disruption_cost_attribute = q.value("disruption_cost_attribute", p.disruption_cost_attribute);
    }
    spec = scenario_preset(j.at("preset").get<std::string>(), p);
    return;
  }
  spec = CostSpec{};
  if (j.contains("c_in")) form_from_json(j.at("c_in"), spec.c_in);
  if (j.contains("c_out")) form_from_json(j.at("c_out"), spec.c_out);
  if (j.contains("c_com")) form_from_json(j.at("c_com"), spec.c_com);
  if (j.contains("eff")) form_from_json(j.at("eff"), spec.eff);
}

}  // namespace ppm
