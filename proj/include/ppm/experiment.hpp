#pragma once

// Experiment orchestration: configuration, the end-to-end pipeline (load,
// prepare, train, threshold, evaluate) and the cost-configuration sweeps.
//
// One estimator is trained per dataset and reused by every cost cell; only
// the threshold search depends on the cost model.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppm/alarm_engine.hpp"
#include "ppm/cost_model.hpp"
#include "ppm/encoding.hpp"
#include "ppm/error.hpp"
#include "ppm/estimator.hpp"
#include "ppm/event_log.hpp"
#include "ppm/synthetic.hpp"
#include "ppm/text.hpp"
#include "ppm/thresholding.hpp"

namespace ppm {

enum class ResearchQuestion { rq1, rq2, rq3 };

inline std::string to_string(ResearchQuestion rq) {
  switch (rq) {
    case ResearchQuestion::rq1:
      return "RQ1";
    case ResearchQuestion::rq2:
      return "RQ2";
    default:
      return "RQ3";
  }
}

inline ResearchQuestion parse_research_question(const std::string& s) {
  if (s == "RQ1" || s == "rq1" || s == "1") return ResearchQuestion::rq1;
  if (s == "RQ2" || s == "rq2" || s == "2") return ResearchQuestion::rq2;
  if (s == "RQ3" || s == "rq3" || s == "3") return ResearchQuestion::rq3;
  throw ConfigError("unknown research question '" + s + "' (expected RQ1, RQ2 or RQ3)");
}

struct DataSource {
  std::optional<SyntheticSpec> synthetic;  // generated when set, else read from path
  std::string path;
  LogSchemaConfig schema;
};

struct PreprocessConfig {
  double percentile = 90.0;
  std::size_t min_count = 10;  // 0 disables category folding
  std::vector<std::string> trigger_rules;
};

struct SweepGrids {
  std::vector<double> ratios{1, 2, 3, 5, 10, 20};  // c_out : c_in, with c_in = 1
  std::vector<double> eff{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1};
  std::vector<double> com{0, 0.05, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20};  // c_com, with c_in = 1
  std::vector<ResearchQuestion> run{ResearchQuestion::rq1, ResearchQuestion::rq2, ResearchQuestion::rq3};
};

struct ExperimentConfig {
  std::string dataset = "synthetic";
  DataSource data;
  PreprocessConfig preprocess;
  double train_frac = 0.64;
  double thres_frac = 0.16;
  std::size_t search_budget = 1;
  Learner learner = Learner::gbt;
  std::size_t resolution = 101;
  bool per_length = false;
  CostSpec cost;
  SweepGrids grids;
  std::uint64_t seed = 0;
};

inline void validate(const ExperimentConfig& c) {
  if (c.dataset.empty()) throw ConfigError("dataset name is empty");
  if (!c.data.synthetic && c.data.path.empty()) throw ConfigError("data source needs 'path' or 'synthetic'");
  if (c.data.synthetic) validate(*c.data.synthetic);
  if (!(c.preprocess.percentile > 0.0 && c.preprocess.percentile <= 100.0)) {
    throw ConfigError("preprocess.percentile must lie in (0, 100]");
  }
  if (!(c.train_frac > 0.0 && c.thres_frac > 0.0 && c.train_frac + c.thres_frac < 1.0)) {
    throw ConfigError("split fractions must be positive and sum to less than 1");
  }
  if (c.search_budget == 0) throw ConfigError("estimator.search_budget must be at least 1");
  if (c.resolution < 2) throw ConfigError("thresholding.resolution must be at least 2");
  if (c.grids.ratios.empty() || c.grids.eff.empty() || c.grids.com.empty()) {
    throw ConfigError("sweep grids must be non-empty");
  }
  for (double r : c.grids.ratios) {
    if (!(r > 0.0)) throw ConfigError("sweep ratios must be positive");
  }
  for (double e : c.grids.eff) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("sweep eff values must lie in [0, 1]");
  }
  for (double m : c.grids.com) {
    if (!(m >= 0.0)) throw ConfigError("sweep com values must be non-negative");
  }
  validate(c.cost);
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.seed = j.value("seed", c.seed);
  c.dataset = j.value("dataset", c.dataset);
  if (!j.contains("data")) throw ConfigError("missing 'data' section");
  const auto& d = j.at("data");
  if (d.contains("synthetic")) {
    SyntheticSpec s = d.at("synthetic").get<SyntheticSpec>();
    if (!d.at("synthetic").contains("seed")) s.seed = c.seed;
    c.data.synthetic = s;
  }
  c.data.path = d.value("path", std::string());
  if (d.contains("schema")) c.data.schema = d.at("schema").get<LogSchemaConfig>();
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    c.preprocess.percentile = p.value("percentile", c.preprocess.percentile);
    c.preprocess.min_count = p.value("min_count", c.preprocess.min_count);
    c.preprocess.trigger_rules = p.value("trigger_rules", c.preprocess.trigger_rules);
  }
  if (j.contains("split")) {
    c.train_frac = j.at("split").value("train", c.train_frac);
    c.thres_frac = j.at("split").value("thres", c.thres_frac);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    c.search_budget = e.value("search_budget", c.search_budget);
    if (e.contains("learner")) {
      const auto name = e.at("learner").get<std::string>();
      if (name != "gbt" && name != "logistic") throw ConfigError("unknown learner '" + name + "'");
      c.learner = e.at("learner").get<Learner>();
    }
  }
  if (j.contains("thresholding")) {
    c.resolution = j.at("thresholding").value("resolution", c.resolution);
    c.per_length = j.at("thresholding").value("per_length", c.per_length);
  }
  if (j.contains("cost")) c.cost = j.at("cost").get<CostSpec>();
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    c.grids.ratios = s.value("ratios", c.grids.ratios);
    c.grids.eff = s.value("eff", c.grids.eff);
    c.grids.com = s.value("com", c.grids.com);
    if (s.contains("run")) {
      c.grids.run.clear();
      for (const auto& rq : s.at("run")) c.grids.run.push_back(parse_research_question(rq.get<std::string>()));
    }
  }
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json data = nlohmann::json::object();
  if (c.data.synthetic) data["synthetic"] = *c.data.synthetic;
  if (!c.data.path.empty()) data["path"] = c.data.path;
  data["schema"] = c.data.schema;
  std::vector<std::string> run;
  for (auto rq : c.grids.run) run.push_back(to_string(rq));
  j = nlohmann::json{
      {"seed", c.seed},
      {"dataset", c.dataset},
      {"data", data},
      {"preprocess",
       {{"percentile", c.preprocess.percentile},
        {"min_count", c.preprocess.min_count},
        {"trigger_rules", c.preprocess.trigger_rules}}},
      {"split", {{"train", c.train_frac}, {"thres", c.thres_frac}}},
      {"estimator", {{"search_budget", c.search_budget}, {"learner", c.learner}}},
      {"thresholding", {{"resolution", c.resolution}, {"per_length", c.per_length}}},
      {"cost", c.cost},
      {"sweep", {{"ratios", c.grids.ratios}, {"eff", c.grids.eff}, {"com", c.grids.com}, {"run", run}}}};
}

// Relative data paths resolve against the config file's directory.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ExperimentConfig c;
  try {
    c = nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (!c.data.path.empty()) {
    const std::filesystem::path p(c.data.path);
    if (p.is_relative()) c.data.path = (std::filesystem::path(path).parent_path() / p).string();
  }
  validate(c);
  return c;
}

// Replaces every seed in the config, including the generator's.
inline void override_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  if (c.data.synthetic) c.data.synthetic->seed = seed;
}

// ---------------------------------------------------------------------------
// Stages

template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// Column layout used for reading the raw log and writing prepared partitions.
inline LogSchemaConfig log_columns(const ExperimentConfig& c) {
  return c.data.synthetic ? synthetic_schema() : c.data.schema;
}

inline EventLog load_log(const ExperimentConfig& c) {
  return run_stage("load", [&] {
    if (c.data.synthetic) return generate_synthetic(*c.data.synthetic);
    return parse_log_file(c.data.path, c.data.schema);
  });
}

struct PreparedData {
  SplitLogs split;
  CategoryFolding folding;
  EncodingSchema schema;
  std::size_t max_length = 0;  // truncation length
  std::size_t cases_after_cut = 0;
};

inline PreparedData prepare_data(const ExperimentConfig& c, const EventLog& raw) {
  return run_stage("prepare", [&] {
    PreparedData out;
    EventLog log = cut_trivially_known(raw, c.preprocess.trigger_rules);
    out.cases_after_cut = log.size();
    out.max_length = length_quantile(log, c.preprocess.percentile);
    log = truncate_log(log, c.preprocess.percentile);
    out.split = temporal_split(log, c.train_frac, c.thres_frac, c.seed);
    for (EventLog* part : {&out.split.train, &out.split.thres, &out.split.test}) *part = impute_missing(*part);
    if (out.split.train.empty()) throw SplitError("training partition is empty");
    if (out.split.thres.empty()) throw SplitError("thresholding partition is empty");
    if (c.preprocess.min_count > 0) {
      out.folding = CategoryFolding::fit(out.split.train, c.preprocess.min_count);
      for (EventLog* part : {&out.split.train, &out.split.thres, &out.split.test}) {
        *part = out.folding.apply(*part);
      }
    }
    out.schema = fit_schema(out.split.train);
    return out;
  });
}

struct TrainedEstimator {
  Estimator estimator;
  TuningResult tuning;
};

inline TrainedEstimator train_stage(const ExperimentConfig& c, const EventLog& train, const EncodingSchema& schema) {
  return run_stage("train", [&] {
    TrainedEstimator out;
    if (c.learner == Learner::gbt) {
      out.tuning = tune_hyperparams(train, schema, c.search_budget, c.seed);
    } else {
      out.tuning.best.rng_seed = c.seed;
      out.tuning.candidates.emplace_back(out.tuning.best, 0.0);
    }
    out.estimator = train_estimator(train, schema, out.tuning.best, c.learner);
    out.estimator.metadata().fold_scores = out.tuning.best_fold_scores;
    return out;
  });
}

inline ThresholdSearchResult threshold_stage(const ExperimentConfig& c, const EventLog& thres,
                                             const PredictionCache& cache, const CostModel& model) {
  return run_stage("threshold", [&] {
    return c.per_length ? find_per_length_thresholds(thres, cache, model, c.resolution, c.seed)
                        : find_global_threshold(thres, cache, model, c.resolution, c.seed);
  });
}

struct PolicyOutcome {
  std::string name;
  AlarmPolicy policy = AlarmPolicy::never();
  CostReport thres;
  CostReport test;
};

// The optimized policy followed by the cost-insensitive baselines.
inline std::vector<std::pair<std::string, AlarmPolicy>> policy_set(const AlarmPolicy& optimized) {
  return {{"optimized", optimized},
          {"never", AlarmPolicy::never()},
          {"tau_0", AlarmPolicy::global(0.0)},
          {"tau_0.5", AlarmPolicy::global(0.5)}};
}

inline std::vector<PolicyOutcome> evaluate_policies(const std::vector<std::pair<std::string, AlarmPolicy>>& policies,
                                                    const EventLog& thres, const PredictionCache& thres_cache,
                                                    const EventLog& test, const PredictionCache& test_cache,
                                                    const CostModel& model) {
  return run_stage("evaluate", [&] {
    std::vector<PolicyOutcome> out;
    for (const auto& [name, policy] : policies) {
      out.push_back({name, policy, log_cost(thres, thres_cache, policy, model), log_cost(test, test_cache, policy, model)});
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Sweeps

// Cost specification of one sweep cell; c_in is fixed at 1.
inline CostSpec sweep_cost_spec(ResearchQuestion rq, double ratio, double secondary) {
  CostSpec s;
  s.c_in = cost_form::Constant{1.0};
  s.c_out = cost_form::Constant{ratio};
  s.c_com = cost_form::Constant{rq == ResearchQuestion::rq3 ? secondary : 0.0};
  if (rq == ResearchQuestion::rq2) {
    s.eff = cost_form::Constant{secondary};
  } else {
    s.eff = cost_form::LinearPrefixDecay{1.0};
  }
  return s;
}

struct SweepRow {
  std::string rq;
  std::string dataset;
  double ratio = 0.0;
  std::string eff;  // constant value, or "linear_decay"
  double com = 0.0;
  std::string policy;
  std::string threshold;
  double thres_total_cost = 0.0;
  double thres_avg_cost = 0.0;
  double test_total_cost = 0.0;
  double avg_cost = 0.0;
  double as_is_avg_cost = 0.0;
  double benefit = 0.0;
};

struct SweepReport {
  ResearchQuestion rq = ResearchQuestion::rq1;
  std::vector<SweepRow> rows;
};

inline std::string threshold_label(const AlarmPolicy& p) {
  switch (p.mode()) {
    case AlarmPolicy::Mode::never:
      return "never";
    case AlarmPolicy::Mode::always:
      return "always";
    case AlarmPolicy::Mode::global:
      return text::format_double(p.tau());
    default:
      return "per_length";
  }
}

// Every cell re-runs the threshold search on L_thres and evaluates all
// policies on both partitions. Likelihoods come from the caches.
inline SweepReport run_sweep(const ExperimentConfig& c, ResearchQuestion rq, const EventLog& thres,
                             const PredictionCache& thres_cache, const EventLog& test,
                             const PredictionCache& test_cache) {
  return run_stage("sweep", [&] {
    SweepReport report;
    report.rq = rq;
    const std::vector<double> secondary =
        rq == ResearchQuestion::rq1 ? std::vector<double>{0.0} : rq == ResearchQuestion::rq2 ? c.grids.eff : c.grids.com;
    for (double ratio : c.grids.ratios) {
      for (double value : secondary) {
        const CostSpec spec = sweep_cost_spec(rq, ratio, value);
        const CostModel model = compile(spec);
        const auto search = c.per_length ? find_per_length_thresholds(thres, thres_cache, model, c.resolution, c.seed)
                                         : find_global_threshold(thres, thres_cache, model, c.resolution, c.seed);
        for (const auto& outcome :
             evaluate_policies(policy_set(search.best_policy), thres, thres_cache, test, test_cache, model)) {
          SweepRow row;
          row.rq = to_string(rq);
          row.dataset = c.dataset;
          row.ratio = ratio;
          row.eff = rq == ResearchQuestion::rq2 ? text::format_double(value) : "linear_decay";
          row.com = rq == ResearchQuestion::rq3 ? value : 0.0;
          row.policy = outcome.name;
          row.threshold = threshold_label(outcome.policy);
          row.thres_total_cost = outcome.thres.total_cost;
          row.thres_avg_cost = outcome.thres.average_cost;
          row.test_total_cost = outcome.test.total_cost;
          row.avg_cost = outcome.test.average_cost;
          row.as_is_avg_cost = outcome.test.as_is_average_cost;
          row.benefit = outcome.test.benefit;
          report.rows.push_back(std::move(row));
        }
      }
    }
    return report;
  });
}

inline constexpr const char* kSweepCsvHeader =
    "rq,dataset,ratio,eff,com,policy,threshold,thres_total_cost,thres_avg_cost,test_total_cost,avg_cost,"
    "as_is_avg_cost,benefit";

inline void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  using text::format_double;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.rq << ',' << text::csv_field(r.dataset) << ',' << format_double(r.ratio) << ',' << r.eff << ','
        << format_double(r.com) << ',' << r.policy << ',' << r.threshold << ',' << format_double(r.thres_total_cost)
        << ',' << format_double(r.thres_avg_cost) << ',' << format_double(r.test_total_cost) << ','
        << format_double(r.avg_cost) << ',' << format_double(r.as_is_avg_cost) << ',' << format_double(r.benefit)
        << '\n';
  }
}

inline std::string sweep_file_name(ResearchQuestion rq) {
  std::string s = to_string(rq);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return "sweep_" + s + ".csv";
}

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct PipelineResult {
  PreparedData data;
  TrainedEstimator trained;
  ThresholdSearchResult search;
  std::vector<PolicyOutcome> policies;  // optimized first, then baselines
  std::vector<SweepReport> sweeps;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

inline void write_tuning_csv(std::ostream& out, const TuningResult& t) {
  out << "n_trees,learning_rate,max_depth,min_samples_leaf,subsample,mean_auc\n";
  for (const auto& [hp, auc] : t.candidates) {
    out << hp.n_trees << ',' << text::format_double(hp.learning_rate) << ',' << hp.max_depth << ','
        << hp.min_samples_leaf << ',' << text::format_double(hp.subsample) << ',' << text::format_double(auc) << '\n';
  }
}

inline std::string summary_text(const ExperimentConfig& c, const PipelineResult& r) {
  std::ostringstream s;
  const auto& split = r.data.split;
  s << "dataset: " << c.dataset << "\n"
    << "seed: " << c.seed << "\n"
    << "cases (train/thres/test): " << split.train.size() << '/' << split.thres.size() << '/' << split.test.size()
    << "\n"
    << "truncation length: " << r.data.max_length << "\n"
    << "features: " << r.data.schema.width() << "\n"
    << "hyperparameters: trees=" << r.trained.tuning.best.n_trees
    << " lr=" << text::format_double(r.trained.tuning.best.learning_rate)
    << " depth=" << r.trained.tuning.best.max_depth << " min_leaf=" << r.trained.tuning.best.min_samples_leaf
    << " subsample=" << text::format_double(r.trained.tuning.best.subsample) << "\n"
    << "threshold: " << r.search.best_policy.describe() << " (thres cost " << text::format_double(r.search.best_cost)
    << ")\n";
  for (const auto& w : split.warnings) s << "warning: " << w << "\n";
  s << "\npolicy      test_avg_cost  benefit  und_al des_al und_nal des_nal\n";
  for (const auto& p : r.policies) {
    const auto& t = p.test;
    s << p.name << std::string(p.name.size() < 12 ? 12 - p.name.size() : 1, ' ') << text::format_double(t.average_cost)
      << "  " << text::format_double(t.benefit) << "  " << t.counts.undesired_alarmed << ' ' << t.counts.desired_alarmed
      << ' ' << t.counts.undesired_not_alarmed << ' ' << t.counts.desired_not_alarmed << "\n";
  }
  return s.str();
}

inline void write_pipeline_artifacts(const ExperimentConfig& c, const PipelineResult& r,
                                     const std::filesystem::path& dir) {
  run_stage("report", [&] {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "config.json", nlohmann::json(c).dump(2) + "\n");
    save_estimator(r.trained.estimator, (dir / "model.json").string());
    write_text_file(dir / "schema.json", nlohmann::json(r.data.schema).dump(1) + "\n");
    std::string names;
    for (const auto& n : r.data.schema.feature_names()) names += n + "\n";
    write_text_file(dir / "feature_names.txt", names);
    write_text_file(dir / "folding.json", nlohmann::json(r.data.folding).dump(1) + "\n");
    std::ostringstream tuning;
    write_tuning_csv(tuning, r.trained.tuning);
    write_text_file(dir / "tuning.csv", tuning.str());
    nlohmann::json threshold{{"policy", r.search.best_policy}, {"thres_cost", r.search.best_cost}, {"cost", c.cost}};
    write_text_file(dir / "threshold.json", threshold.dump(2) + "\n");
    std::ostringstream search;
    write_search_csv(search, r.search);
    write_text_file(dir / "threshold_search.csv", search.str());
    std::ostringstream cases;
    write_case_csv(cases, r.policies.front().test);
    write_text_file(dir / "cases.csv", cases.str());
    nlohmann::json summary{{"dataset", c.dataset},
                           {"seed", c.seed},
                           {"threshold", r.search.best_policy},
                           {"split",
                            {{"train", r.data.split.train.size()},
                             {"thres", r.data.split.thres.size()},
                             {"test", r.data.split.test.size()},
                             {"warnings", r.data.split.warnings}}},
                           {"policies", nlohmann::json::array()}};
    for (const auto& p : r.policies) {
      summary["policies"].push_back({{"name", p.name},
                                     {"policy", p.policy},
                                     {"thres", summary_json(p.thres)},
                                     {"test", summary_json(p.test)}});
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    write_text_file(dir / "summary.txt", summary_text(c, r));
    for (const auto& sweep : r.sweeps) {
      std::ostringstream csv;
      write_sweep_csv(csv, sweep);
      write_text_file(dir / sweep_file_name(sweep.rq), csv.str());
    }
    return 0;
  });
}

// Runs every stage; artifacts are written when out_dir is non-empty.
inline PipelineResult run_pipeline(const ExperimentConfig& config, const std::string& out_dir = {}) {
  run_stage("config", [&] {
    validate(config);
    return 0;
  });
  PipelineResult r;
  const EventLog raw = load_log(config);
  r.data = prepare_data(config, raw);
  const auto& split = r.data.split;
  r.trained = train_stage(config, split.train, r.data.schema);
  const auto& est = r.trained.estimator;
  const PredictionCache thres_cache = run_stage("threshold", [&] { return PredictionCache(split.thres, est); });
  const PredictionCache test_cache = run_stage("evaluate", [&] { return PredictionCache(split.test, est); });
  const CostModel model = run_stage("threshold", [&] { return compile(config.cost); });
  r.search = threshold_stage(config, split.thres, thres_cache, model);
  r.policies = evaluate_policies(policy_set(r.search.best_policy), split.thres, thres_cache, split.test, test_cache, model);
  for (auto rq : config.grids.run) {
    r.sweeps.push_back(run_sweep(config, rq, split.thres, thres_cache, split.test, test_cache));
  }
  if (!out_dir.empty()) write_pipeline_artifacts(config, r, out_dir);
  return r;
}

}  // namespace ppm
