#pragma once

// Empirical thresholding: pick the alarm threshold that minimizes the total
// cost on a held-out thresholding log, for a fixed estimator and cost model.
//
// Likelihoods are computed once per prefix. Candidates are a uniform grid over
// [0, 1] (endpoints included) plus every distinct likelihood in the log, which
// already reaches every achievable alarm set; a golden-section pass around
// the best grid point adds a few more. Equal costs resolve to the larger
// threshold. Costs are summed in log order with the same per-case arithmetic
// as cost_report(), so a returned best_cost equals log_cost() exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <vector>

#include "ppm/alarm_engine.hpp"
#include "ppm/cost_model.hpp"
#include "ppm/error.hpp"
#include "ppm/event_log.hpp"
#include "ppm/text.hpp"

namespace ppm {

struct EvaluatedThreshold {
  std::size_t length = 0;  // 0 for the global threshold, else the prefix length it applies to
  double tau = 0.0;
  double cost = 0.0;
};

struct ThresholdSearchResult {
  AlarmPolicy best_policy = AlarmPolicy::never();
  double best_cost = 0.0;
  std::vector<EvaluatedThreshold> evaluated;
  std::uint64_t seed = 0;
};

namespace detail {

// Per-trace cost of every alarm position 0..|trace|-1.
inline std::vector<std::vector<double>> alarm_cost_table(const EventLog& log, const CostModel& model) {
  std::vector<std::vector<double>> table(log.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    const Trace& trace = log.traces[t];
    auto& row = table[t];
    row.reserve(trace.size());
    for (std::size_t i = 0; i < std::max<std::size_t>(trace.size(), 1); ++i) {
      row.push_back(case_cost(trace, log, model, i).cost);
    }
  }
  return table;
}

// Running-maximum records of a likelihood row: (value, position), strictly
// increasing in both. Under a global threshold tau the alarm fires at the
// position of the first record whose value reaches tau.
struct Records {
  std::vector<double> values;
  std::vector<std::size_t> positions;

  std::size_t alarm_at(double tau) const {
    const auto it = std::lower_bound(values.begin(), values.end(), tau);
    return it == values.end() ? 0 : positions[static_cast<std::size_t>(it - values.begin())];
  }
};

inline Records running_max_records(std::span<const double> row) {
  Records r;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (r.values.empty() || row[i] > r.values.back()) {
      r.values.push_back(row[i]);
      r.positions.push_back(i + 1);
    }
  }
  return r;
}

inline std::vector<double> threshold_grid(std::size_t resolution) {
  std::vector<double> grid(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(resolution - 1);
  }
  return grid;
}

// Lower cost wins; equal cost prefers the larger threshold.
inline bool better(double cost, double tau, double best_cost, double best_tau) {
  return cost < best_cost || (cost == best_cost && tau > best_tau);
}

inline void check_search_inputs(const EventLog& log, std::size_t resolution) {
  if (log.empty()) throw DomainError("thresholding log is empty");
  if (resolution < 2) throw DomainError("threshold grid needs at least 2 points");
}

inline std::vector<std::span<const double>> rows_for(const EventLog& log, const PredictionCache& cache) {
  std::vector<std::span<const double>> rows;
  rows.reserve(log.size());
  for (const auto& trace : log.traces) {
    auto row = cache.row(cache.position(trace.case_id));
    rows.push_back(row.first(std::min(row.size(), trace.size() > 0 ? trace.size() - 1 : 0)));
  }
  return rows;
}

}  // namespace detail

inline ThresholdSearchResult find_global_threshold(const EventLog& thres, const PredictionCache& cache,
                                                   const CostModel& model, std::size_t resolution = 101,
                                                   std::uint64_t seed = 0) {
  detail::check_search_inputs(thres, resolution);
  const auto table = detail::alarm_cost_table(thres, model);
  const auto rows = detail::rows_for(thres, cache);
  std::vector<detail::Records> records;
  records.reserve(rows.size());
  for (const auto& row : rows) records.push_back(detail::running_max_records(row));

  const auto cost_at = [&](double tau) {
    double total = 0.0;
    for (std::size_t t = 0; t < records.size(); ++t) total += table[t][records[t].alarm_at(tau)];
    return total;
  };

  std::set<double> candidates;
  for (double g : detail::threshold_grid(resolution)) candidates.insert(g);
  for (const auto& row : rows) {
    for (double p : row) {
      if (p >= 0.0 && p <= 1.0) candidates.insert(p);
    }
  }

  ThresholdSearchResult result;
  result.seed = seed;
  std::map<double, double> evaluated;
  double best_tau = 0.0;
  double best_cost = 0.0;
  bool first = true;
  const auto visit = [&](double tau) {
    auto it = evaluated.find(tau);
    if (it == evaluated.end()) it = evaluated.emplace(tau, cost_at(tau)).first;
    if (first || detail::better(it->second, tau, best_cost, best_tau)) {
      best_cost = it->second;
      best_tau = tau;
      first = false;
    }
    return it->second;
  };
  for (double tau : candidates) visit(tau);

  // Golden-section refinement inside one grid step of the incumbent.
  const double step = 1.0 / static_cast<double>(resolution - 1);
  double lo = std::max(0.0, best_tau - step);
  double hi = std::min(1.0, best_tau + step);
  constexpr double kInvPhi = 0.6180339887498949;
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = visit(c);
  double fd = visit(d);
  for (int iter = 0; iter < 24 && hi - lo > 1e-9; ++iter) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = visit(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = visit(d);
    }
  }

  for (const auto& [tau, cost] : evaluated) result.evaluated.push_back({0, tau, cost});
  result.best_policy = AlarmPolicy::global(best_tau);
  result.best_cost = best_cost;
  return result;
}

template <PrefixPredictor P>
  requires(!std::same_as<P, PredictionCache>)
ThresholdSearchResult find_global_threshold(const EventLog& thres, const P& predictor, const CostModel& model,
                                            std::size_t resolution = 101, std::uint64_t seed = 0) {
  return find_global_threshold(thres, PredictionCache(thres, predictor), model, resolution, seed);
}

// One threshold per prefix length present in the log, found by coordinate
// descent started from the global optimum: each length is searched in turn
// with the others fixed, and passes repeat until nothing changes. Lengths not
// present fall back to the global threshold. Since every coordinate search
// includes the current value, the result never costs more than the global one.
inline ThresholdSearchResult find_per_length_thresholds(const EventLog& thres, const PredictionCache& cache,
                                                        const CostModel& model, std::size_t resolution = 101,
                                                        std::uint64_t seed = 0) {
  const ThresholdSearchResult global = find_global_threshold(thres, cache, model, resolution, seed);
  const double fallback = global.best_policy.tau();
  const auto table = detail::alarm_cost_table(thres, model);
  const auto rows = detail::rows_for(thres, cache);

  std::size_t max_length = 0;
  for (const auto& row : rows) max_length = std::max(max_length, row.size());
  std::map<std::size_t, double> taus;
  for (std::size_t k = 1; k <= max_length; ++k) taus[k] = fallback;

  ThresholdSearchResult result;
  result.seed = seed;
  const auto grid = detail::threshold_grid(resolution);

  const auto current_cost = [&] {
    double total = 0.0;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      std::size_t idx = 0;
      for (std::size_t i = 1; i <= rows[t].size(); ++i) {
        if (rows[t][i - 1] >= taus[i]) {
          idx = i;
          break;
        }
      }
      total += table[t][idx];
    }
    return total;
  };
  double best_cost = current_cost();
  result.evaluated.push_back({0, fallback, best_cost});

  for (int pass = 0; pass < 5; ++pass) {
    bool changed = false;
    for (std::size_t k = 1; k <= max_length; ++k) {
      // Per trace: alarm position if it fires before k, or the position used
      // when the prefix of length k does not fire (after), and p_k.
      struct State {
        std::size_t before = 0;
        std::size_t after = 0;
        bool has_k = false;
        double p_k = 0.0;
      };
      std::vector<State> states(rows.size());
      std::set<double> candidates(grid.begin(), grid.end());
      candidates.insert(taus[k]);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const auto row = rows[t];
        State& s = states[t];
        for (std::size_t i = 1; i < k && i <= row.size(); ++i) {
          if (row[i - 1] >= taus[i]) {
            s.before = i;
            break;
          }
        }
        if (s.before > 0) continue;
        if (k <= row.size()) {
          s.has_k = true;
          s.p_k = row[k - 1];
          if (s.p_k >= 0.0 && s.p_k <= 1.0) candidates.insert(s.p_k);
        }
        for (std::size_t i = k + 1; i <= row.size(); ++i) {
          if (row[i - 1] >= taus[i]) {
            s.after = i;
            break;
          }
        }
      }
      double k_best_tau = taus[k];
      double k_best_cost = 0.0;
      bool first = true;
      for (double tau : candidates) {
        double total = 0.0;
        for (std::size_t t = 0; t < rows.size(); ++t) {
          const State& s = states[t];
          const std::size_t idx = s.before > 0 ? s.before : (s.has_k && s.p_k >= tau ? k : s.after);
          total += table[t][idx];
        }
        result.evaluated.push_back({k, tau, total});
        if (first || detail::better(total, tau, k_best_cost, k_best_tau)) {
          k_best_cost = total;
          k_best_tau = tau;
          first = false;
        }
      }
      if (k_best_tau != taus[k]) {
        taus[k] = k_best_tau;
        changed = true;
      }
      best_cost = k_best_cost;
    }
    if (!changed) break;
  }

  result.best_policy = AlarmPolicy::per_length(std::move(taus), fallback);
  result.best_cost = best_cost;
  return result;
}

template <PrefixPredictor P>
  requires(!std::same_as<P, PredictionCache>)
ThresholdSearchResult find_per_length_thresholds(const EventLog& thres, const P& predictor, const CostModel& model,
                                                 std::size_t resolution = 101, std::uint64_t seed = 0) {
  return find_per_length_thresholds(thres, PredictionCache(thres, predictor), model, resolution, seed);
}

// tau,cost rows of a global search, sorted by tau (length column for per-length searches).
inline void write_search_csv(std::ostream& out, const ThresholdSearchResult& result) {
  out << "length,tau,cost\n";
  for (const auto& e : result.evaluated) {
    out << e.length << ',' << text::format_double(e.tau) << ',' << text::format_double(e.cost) << '\n';
  }
}

}  // namespace ppm
