#pragma once

// Outcome estimator: maps a trace prefix to the likelihood of an undesired
// outcome. Wraps an encoding schema and a trained learner.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ppm/encoding.hpp"
#include "ppm/error.hpp"
#include "ppm/event_log.hpp"
#include "ppm/gbt.hpp"
#include "ppm/metrics.hpp"
#include "ppm/rng.hpp"

namespace ppm {

inline constexpr int kModelFormatVersion = 1;

enum class Learner { gbt, logistic };

NLOHMANN_JSON_SERIALIZE_ENUM(Learner, {{Learner::gbt, "gbt"}, {Learner::logistic, "logistic"}})

// One row per proper prefix (k = 1..|trace|-1) of every training trace.
struct TrainingSet {
  FeatureMatrix features;
  std::vector<double> labels;
  std::vector<std::size_t> trace_index;  // source trace of each row
  std::vector<std::size_t> prefix_length;
};

inline TrainingSet make_training_set(const EventLog& log, const EncodingSchema& schema) {
  std::size_t rows = 0;
  for (const auto& trace : log.traces) rows += trace.size() > 0 ? trace.size() - 1 : 0;
  if (rows == 0) throw TrainingError("training log yields no proper prefixes");
  TrainingSet set;
  set.features = FeatureMatrix(rows, schema.width());
  set.labels.reserve(rows);
  set.trace_index.reserve(rows);
  set.prefix_length.reserve(rows);
  std::size_t r = 0;
  for (std::size_t t = 0; t < log.size(); ++t) {
    const Trace& trace = log.traces[t];
    for (std::size_t k = 1; k < trace.size(); ++k) {
      schema.encode_into(Prefix(trace, k), set.features.row(r++));
      set.labels.push_back(trace.outcome ? 1.0 : 0.0);
      set.trace_index.push_back(t);
      set.prefix_length.push_back(k);
    }
  }
  return set;
}

struct TuningResult {
  Hyperparams best;
  std::vector<std::pair<Hyperparams, double>> candidates;  // with mean CV AUC
  std::vector<double> best_fold_scores;
};

struct TrainingMetadata {
  Learner learner = Learner::gbt;
  Hyperparams hyperparams;
  std::vector<double> fold_scores;  // CV AUC per fold of the selected setting
  std::size_t training_rows = 0;
};

class Estimator {
 public:
  using Model = std::variant<GbtModel, LogisticModel>;

  Estimator() = default;
  Estimator(EncodingSchema schema, Model model, TrainingMetadata meta = {})
      : schema_(std::move(schema)), model_(std::move(model)), meta_(std::move(meta)) {}

  double predict(std::span<const double> features) const {
    return std::visit([&](const auto& m) { return m.predict(features); }, model_);
  }

  double predict(const Prefix& prefix) const { return predict(schema_.encode(prefix)); }

  // Likelihood for the first k events of the trace.
  double predict(const Trace& trace, std::size_t k) const { return predict(Prefix(trace, k)); }

  const EncodingSchema& schema() const noexcept { return schema_; }
  const Model& model() const noexcept { return model_; }
  const TrainingMetadata& metadata() const noexcept { return meta_; }
  TrainingMetadata& metadata() noexcept { return meta_; }

 private:
  EncodingSchema schema_;
  Model model_;
  TrainingMetadata meta_;
};

inline Estimator train_estimator(const TrainingSet& set, const EncodingSchema& schema, const Hyperparams& hp,
                                 Learner learner = Learner::gbt) {
  TrainingMetadata meta;
  meta.learner = learner;
  meta.hyperparams = hp;
  meta.training_rows = set.features.rows;
  if (learner == Learner::gbt) {
    return Estimator(schema, train_gbt(set.features, set.labels, hp), meta);
  }
  return Estimator(schema, train_logistic(set.features, set.labels), meta);
}

inline Estimator train_estimator(const EventLog& train, const EncodingSchema& schema, const Hyperparams& hp,
                                 Learner learner = Learner::gbt) {
  return train_estimator(make_training_set(train, schema), schema, hp, learner);
}

namespace detail {

inline TrainingSet select_rows(const TrainingSet& set, const std::vector<std::size_t>& rows) {
  TrainingSet out;
  out.features = FeatureMatrix(rows.size(), set.features.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = set.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(set.labels[rows[i]]);
    out.trace_index.push_back(set.trace_index[rows[i]]);
    out.prefix_length.push_back(set.prefix_length[rows[i]]);
  }
  return out;
}

}  // namespace detail

// Case-level fold of every trace: all prefixes of one case share a fold.
inline std::vector<std::size_t> assign_case_folds(std::size_t n_traces, std::size_t n_folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n_traces);
  for (std::size_t i = 0; i < n_traces; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold(n_traces);
  for (std::size_t i = 0; i < n_traces; ++i) fold[order[i]] = i % n_folds;
  return fold;
}

// Mean ROC-AUC of a setting over case-level folds, with per-fold scores.
inline std::pair<double, std::vector<double>> cross_validate(const TrainingSet& set, std::size_t n_traces,
                                                             const Hyperparams& hp, std::size_t n_folds,
                                                             std::uint64_t seed, Learner learner = Learner::gbt) {
  const auto fold = assign_case_folds(n_traces, n_folds, seed);
  std::vector<double> scores;
  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> fit_rows, eval_rows;
    for (std::size_t r = 0; r < set.features.rows; ++r) {
      (fold[set.trace_index[r]] == f ? eval_rows : fit_rows).push_back(r);
    }
    if (fit_rows.empty() || eval_rows.empty()) throw TrainingError("cross-validation fold is empty");
    const TrainingSet fit = detail::select_rows(set, fit_rows);
    const TrainingSet eval = detail::select_rows(set, eval_rows);
    std::vector<double> predictions(eval.features.rows);
    if (learner == Learner::gbt) {
      const GbtModel model = train_gbt(fit.features, fit.labels, hp);
      for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i] = model.predict(eval.features.row(i));
    } else {
      const LogisticModel model = train_logistic(fit.features, fit.labels);
      for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i] = model.predict(eval.features.row(i));
    }
    scores.push_back(roc_auc(predictions, eval.labels));
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  return {mean / static_cast<double>(scores.size()), scores};
}

// Scores the given settings by k-fold case-level CV AUC; the first best wins.
inline TuningResult select_hyperparams(const EventLog& train, const EncodingSchema& schema,
                                       const std::vector<Hyperparams>& candidates, std::uint64_t seed,
                                       std::size_t n_folds = 3) {
  if (candidates.empty()) throw DomainError("hyperparameter search needs at least one candidate");
  const TrainingSet set = make_training_set(train, schema);
  TuningResult result;
  double best = -1.0;
  for (const auto& hp : candidates) {
    auto [auc, folds] = cross_validate(set, train.size(), hp, n_folds, seed);
    result.candidates.emplace_back(hp, auc);
    if (auc > best) {
      best = auc;
      result.best = hp;
      result.best_fold_scores = std::move(folds);
    }
  }
  return result;
}

// Default setting first, then distinct random draws from a fixed grid.
inline std::vector<Hyperparams> hyperparam_candidates(std::size_t budget, std::uint64_t seed) {
  if (budget == 0) throw DomainError("search budget must be at least 1");
  static constexpr int kTrees[] = {50, 100, 200};
  static constexpr double kRates[] = {0.05, 0.1, 0.2};
  static constexpr int kDepths[] = {2, 3, 4, 5};
  static constexpr int kLeaves[] = {5, 10, 20, 50};
  static constexpr double kSubsample[] = {0.8, 1.0};
  constexpr std::size_t kGridSize = 3 * 3 * 4 * 4 * 2;

  Hyperparams base;
  base.rng_seed = seed;
  std::vector<Hyperparams> out{base};
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t attempts = 0;
  while (out.size() < std::min(budget, kGridSize) && attempts++ < 10000) {
    Hyperparams hp;
    hp.n_trees = kTrees[rng.below(3)];
    hp.learning_rate = kRates[rng.below(3)];
    hp.max_depth = kDepths[rng.below(4)];
    hp.min_samples_leaf = kLeaves[rng.below(4)];
    hp.subsample = kSubsample[rng.below(2)];
    hp.rng_seed = seed;
    if (std::find(out.begin(), out.end(), hp) == out.end()) out.push_back(hp);
  }
  return out;
}

inline TuningResult tune_hyperparams(const EventLog& train, const EncodingSchema& schema, std::size_t search_budget,
                                     std::uint64_t seed) {
  const auto candidates = hyperparam_candidates(search_budget, seed);
  if (candidates.size() == 1) {
    // Nothing to compare.
    return TuningResult{candidates.front(), {{candidates.front(), 0.0}}, {}};
  }
  return select_hyperparams(train, schema, candidates, seed);
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json estimator_to_json(const Estimator& est) {
  const auto& meta = est.metadata();
  nlohmann::json j;
  j["format"] = "ppm-estimator";
  j["version"] = kModelFormatVersion;
  j["schema"] = est.schema();
  j["learner"] = meta.learner;
  j["metadata"] = {{"hyperparams", meta.hyperparams},
                   {"fold_scores", meta.fold_scores},
                   {"training_rows", meta.training_rows}};
  std::visit([&](const auto& m) { j["model"] = m; }, est.model());
  return j;
}

inline Estimator estimator_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "ppm-estimator") throw SchemaError("not an estimator file");
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) {
    throw SchemaError("unsupported estimator file version " + std::to_string(version));
  }
  TrainingMetadata meta;
  meta.learner = j.at("learner").get<Learner>();
  const auto& m = j.at("metadata");
  meta.hyperparams = m.at("hyperparams").get<Hyperparams>();
  meta.fold_scores = m.at("fold_scores").get<std::vector<double>>();
  meta.training_rows = m.at("training_rows").get<std::size_t>();
  auto schema = j.at("schema").get<EncodingSchema>();
  if (meta.learner == Learner::gbt) return Estimator(std::move(schema), j.at("model").get<GbtModel>(), meta);
  return Estimator(std::move(schema), j.at("model").get<LogisticModel>(), meta);
}

inline void save_estimator(const Estimator& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out << estimator_to_json(est).dump(1) << '\n';
}

inline Estimator load_estimator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return estimator_from_json(nlohmann::json::parse(in));
}

}  // namespace ppm
