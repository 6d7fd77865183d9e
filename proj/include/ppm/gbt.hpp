#pragma once

// Gradient boosted regression trees for binary outcomes (logistic loss) and a
// plain logistic-regression baseline. Both work on dense row-major matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppm/error.hpp"
#include "ppm/rng.hpp"

namespace ppm {

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

namespace logistic {

// Loss for label y in {0, 1} and raw score F: log(1 + exp(-(2y - 1) F)).
inline double loss(double y, double score) {
  const double margin = (2.0 * y - 1.0) * score;
  // log1p(exp(-m)) without overflow for large |m|
  return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

inline double sigmoid(double score) {
  if (score >= 0.0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

// -dL/dF = y - sigmoid(F)
inline double negative_gradient(double y, double score) { return y - sigmoid(score); }

inline double hessian(double score) {
  const double p = sigmoid(score);
  return p * (1.0 - p);
}

// Scores are clamped before the link so a likelihood never reaches exactly
// 0 or 1; a threshold of 1.0 then never alarms.
inline double likelihood(double score) { return sigmoid(std::clamp(score, -30.0, 30.0)); }

}  // namespace logistic

struct Hyperparams {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 20;
  double subsample = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (n_trees < 1) throw DomainError("n_trees must be positive");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw DomainError("learning_rate must lie in (0, 1]");
    if (max_depth < 1) throw DomainError("max_depth must be positive");
    if (min_samples_leaf < 1) throw DomainError("min_samples_leaf must be positive");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw DomainError("subsample must lie in (0, 1]");
  }

  bool operator==(const Hyperparams&) const = default;
};

inline void to_json(nlohmann::json& j, const Hyperparams& hp) {
  j = nlohmann::json{{"n_trees", hp.n_trees},
                     {"learning_rate", hp.learning_rate},
                     {"max_depth", hp.max_depth},
                     {"min_samples_leaf", hp.min_samples_leaf},
                     {"subsample", hp.subsample},
                     {"rng_seed", hp.rng_seed}};
}

inline void from_json(const nlohmann::json& j, Hyperparams& hp) {
  hp.n_trees = j.value("n_trees", hp.n_trees);
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
  hp.max_depth = j.value("max_depth", hp.max_depth);
  hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
  hp.subsample = j.value("subsample", hp.subsample);
  hp.rng_seed = j.value("rng_seed", hp.rng_seed);
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

// Binary regression tree; a row goes left when x[feature] <= threshold.
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& node = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
  }

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct GbtModel {
  double initial_score = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> stage_loss;  // mean training loss after the init and after each tree

  double score(std::span<const double> x) const {
    double f = initial_score;
    for (const auto& tree : trees) f += learning_rate * tree.predict(x);
    return f;
  }

  double predict(std::span<const double> x) const { return logistic::likelihood(score(x)); }

  bool operator==(const GbtModel&) const = default;
};

namespace detail {

// Per-feature cut points; bin b holds values in (cuts[b-1], cuts[b]].
// With at most kMaxBins distinct values the cuts are exact.
class BinnedMatrix {
 public:
  static constexpr std::size_t kMaxBins = 256;

  explicit BinnedMatrix(const FeatureMatrix& x) : rows_(x.rows), cols_(x.cols), bins_(x.rows * x.cols) {
    cuts_.resize(cols_);
    std::vector<double> column(rows_);
    for (std::size_t j = 0; j < cols_; ++j) {
      for (std::size_t i = 0; i < rows_; ++i) column[i] = x(i, j);
      std::sort(column.begin(), column.end());
      std::vector<double> distinct;
      for (double v : column) {
        if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
      }
      auto& cuts = cuts_[j];
      if (distinct.size() <= kMaxBins) {
        cuts.assign(distinct.begin(), distinct.end() - (distinct.empty() ? 0 : 1));
      } else {
        for (std::size_t b = 1; b < kMaxBins; ++b) {
          const double v = column[b * rows_ / kMaxBins];
          if (v < distinct.back() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
        }
      }
      for (std::size_t i = 0; i < rows_; ++i) {
        const double v = x(i, j);
        bins_[j * rows_ + i] =
            static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
      }
    }
  }

  std::uint8_t bin(std::size_t row, std::size_t col) const { return bins_[col * rows_ + row]; }
  const std::vector<double>& cuts(std::size_t col) const { return cuts_[col]; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bins_;  // column-major
  std::vector<std::vector<double>> cuts_;
};

struct TreeGrower {
  const BinnedMatrix& binned;
  std::span<const double> gradient;  // negative gradients (pseudo-residuals)
  std::span<const double> hess;
  int max_depth;
  std::size_t min_leaf;
  std::vector<TreeNode> nodes;

  static constexpr double kLeafClip = 4.0;

  double leaf_value(const std::vector<std::size_t>& rows) const {
    double g = 0.0;
    double h = 0.0;
    for (std::size_t r : rows) {
      g += gradient[r];
      h += hess[r];
    }
    if (h <= 1e-12) return g > 0.0 ? kLeafClip : (g < 0.0 ? -kLeafClip : 0.0);
    return std::clamp(g / h, -kLeafClip, kLeafClip);
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    int best_feature = -1;
    std::size_t best_bin = 0;
    double best_gain = 1e-12;

    if (depth < max_depth && rows.size() >= 2 * min_leaf) {
      double total = 0.0;
      for (std::size_t r : rows) total += gradient[r];
      const double n = static_cast<double>(rows.size());
      const double parent = total * total / n;
      std::vector<double> sum(BinnedMatrix::kMaxBins);
      std::vector<std::size_t> count(BinnedMatrix::kMaxBins);
      for (std::size_t j = 0; j < binned.cols(); ++j) {
        const std::size_t n_bins = binned.cuts(j).size() + 1;
        if (n_bins < 2) continue;
        std::fill(sum.begin(), sum.begin() + static_cast<std::ptrdiff_t>(n_bins), 0.0);
        std::fill(count.begin(), count.begin() + static_cast<std::ptrdiff_t>(n_bins), 0);
        for (std::size_t r : rows) {
          const auto b = binned.bin(r, j);
          sum[b] += gradient[r];
          ++count[b];
        }
        double left_sum = 0.0;
        std::size_t left_n = 0;
        for (std::size_t b = 0; b + 1 < n_bins; ++b) {
          left_sum += sum[b];
          left_n += count[b];
          if (left_n < min_leaf) continue;
          const std::size_t right_n = rows.size() - left_n;
          if (right_n < min_leaf) break;
          const double right_sum = total - left_sum;
          // Variance reduction of the residuals (scaled by n).
          const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                              right_sum * right_sum / static_cast<double>(right_n) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(j);
            best_bin = b;
          }
        }
      }
    }

    if (best_feature < 0) {
      nodes[static_cast<std::size_t>(index)].value = leaf_value(rows);
      return index;
    }
    const auto feature = static_cast<std::size_t>(best_feature);
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) (binned.bin(r, feature) <= best_bin ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    auto& node = nodes[static_cast<std::size_t>(index)];
    node.feature = best_feature;
    node.threshold = binned.cuts(feature)[best_bin];
    node.left = left;
    node.right = right;
    return index;
  }
};

inline void check_training_data(const FeatureMatrix& x, std::span<const double> y) {
  if (x.rows == 0) throw TrainingError("training set has no rows");
  if (y.size() != x.rows) throw TrainingError("label count does not match row count");
  bool has_pos = false, has_neg = false;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw TrainingError("labels must be 0 or 1");
    (v == 1.0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw TrainingError("training labels contain a single class; estimator would be degenerate");
}

}  // namespace detail

inline double mean_logistic_loss(std::span<const double> y, std::span<const double> scores) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += logistic::loss(y[i], scores[i]);
  return total / static_cast<double>(y.size());
}

// Stagewise fit: each tree is grown on the current pseudo-residuals with
// variance-reduction splits; leaves take a clipped Newton step.
inline GbtModel train_gbt(const FeatureMatrix& x, std::span<const double> y, const Hyperparams& hp) {
  hp.validate();
  detail::check_training_data(x, y);

  const double prevalence = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  GbtModel model;
  model.initial_score = std::log(prevalence / (1.0 - prevalence));
  model.learning_rate = hp.learning_rate;

  const detail::BinnedMatrix binned(x);
  std::vector<double> scores(x.rows, model.initial_score);
  std::vector<double> gradient(x.rows), hess(x.rows);
  model.stage_loss.push_back(mean_logistic_loss(y, scores));

  Rng rng(hp.rng_seed);
  std::vector<std::size_t> all_rows(x.rows);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  const auto sample_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hp.subsample * static_cast<double>(x.rows))));

  for (int t = 0; t < hp.n_trees; ++t) {
    for (std::size_t i = 0; i < x.rows; ++i) {
      gradient[i] = logistic::negative_gradient(y[i], scores[i]);
      hess[i] = logistic::hessian(scores[i]);
    }
    std::vector<std::size_t> rows;
    if (sample_size < x.rows) {
      // Partial Fisher-Yates: the first sample_size entries form the subsample.
      std::vector<std::size_t> perm = all_rows;
      for (std::size_t i = 0; i < sample_size; ++i) std::swap(perm[i], perm[i + rng.below(x.rows - i)]);
      rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sample_size));
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all_rows;
    }
    detail::TreeGrower grower{binned, gradient, hess, hp.max_depth,
                              static_cast<std::size_t>(hp.min_samples_leaf), {}};
    grower.grow(std::move(rows), 0);
    RegressionTree tree(std::move(grower.nodes));
    for (std::size_t i = 0; i < x.rows; ++i) scores[i] += hp.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.stage_loss.push_back(mean_logistic_loss(y, scores));
  }
  return model;
}

// L2-regularized logistic regression on standardized features, fitted by
// full-batch gradient descent. Used as a quick baseline learner.
struct LogisticModel {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const double> x) const {
    double s = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * (x[j] - mean[j]) / scale[j];
    return s;
  }

  double predict(std::span<const double> x) const { return logistic::likelihood(score(x)); }

  bool operator==(const LogisticModel&) const = default;
};

inline LogisticModel train_logistic(const FeatureMatrix& x, std::span<const double> y, int iterations = 300,
                                    double step = 0.5, double l2 = 1e-4) {
  detail::check_training_data(x, y);
  LogisticModel model;
  model.mean.assign(x.cols, 0.0);
  model.scale.assign(x.cols, 1.0);
  model.weights.assign(x.cols, 0.0);
  const auto n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      s += x(i, j);
      s2 += x(i, j) * x(i, j);
    }
    model.mean[j] = s / n;
    const double var = s2 / n - model.mean[j] * model.mean[j];
    model.scale[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  std::vector<double> grad(x.cols);
  for (int it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = x.row(i);
      const double residual = logistic::sigmoid(model.score(row)) - y[i];
      grad_bias += residual;
      for (std::size_t j = 0; j < x.cols; ++j) grad[j] += residual * (row[j] - model.mean[j]) / model.scale[j];
    }
    model.bias -= step * grad_bias / n;
    for (std::size_t j = 0; j < x.cols; ++j) model.weights[j] -= step * (grad[j] / n + l2 * model.weights[j]);
  }
  return model;
}

inline void to_json(nlohmann::json& j, const RegressionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes()) {
    if (n.feature < 0) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
  }
  j = std::move(nodes);
}

inline void from_json(const nlohmann::json& j, RegressionTree& tree) {
  std::vector<TreeNode> nodes;
  for (const auto& entry : j) {
    TreeNode node;
    if (entry.contains("feature")) {
      node.feature = entry.at("feature").get<int>();
      node.threshold = entry.at("threshold").get<double>();
      node.left = entry.at("left").get<int>();
      node.right = entry.at("right").get<int>();
    } else {
      node.value = entry.at("value").get<double>();
    }
    nodes.push_back(node);
  }
  tree = RegressionTree(std::move(nodes));
}

inline void to_json(nlohmann::json& j, const GbtModel& m) {
  j = nlohmann::json{{"initial_score", m.initial_score},
                     {"learning_rate", m.learning_rate},
                     {"trees", m.trees},
                     {"stage_loss", m.stage_loss}};
}

inline void from_json(const nlohmann::json& j, GbtModel& m) {
  m.initial_score = j.at("initial_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.trees = j.at("trees").get<std::vector<RegressionTree>>();
  m.stage_loss = j.value("stage_loss", std::vector<double>{});
}

inline void to_json(nlohmann::json& j, const LogisticModel& m) {
  j = nlohmann::json{{"mean", m.mean}, {"scale", m.scale}, {"weights", m.weights}, {"bias", m.bias}};
}

inline void from_json(const nlohmann::json& j, LogisticModel& m) {
  m.mean = j.at("mean").get<std::vector<double>>();
  m.scale = j.at("scale").get<std::vector<double>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
}

}  // namespace ppm
