// ppm: command-line front end for the prescriptive monitoring pipeline.
//
// Every subcommand takes a config file plus --seed and --out-dir. Staged
// subcommands read what the previous stage wrote into the output directory:
//   generate  -> log.csv, log_columns.json
//   prepare   -> train.csv, thres.csv, test.csv, log_columns.json, schema.json, folding.json, prepare.json
//   train     -> model.json, tuning.csv, feature_names.txt
//   threshold -> threshold.json, threshold_search.csv
//   evaluate  -> cases.csv, summary.json, summary.txt
//   sweep     -> sweep_rq{1,2,3}.csv
//   roi       -> roi.json
//   pipeline  -> all of the above except the partition CSVs

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppm/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string rq;
};

ppm::ExperimentConfig load(const Options& o) {
  auto c = ppm::run_stage("config", [&] { return ppm::load_config(o.config); });
  if (o.seed) ppm::override_seed(c, *o.seed);
  return c;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ppm::Error("cannot open '" + path.string() + "' (run the previous stage first)");
  return nlohmann::json::parse(in);
}

void write_log(const fs::path& path, const ppm::EventLog& log, const ppm::LogSchemaConfig& columns) {
  std::ostringstream s;
  ppm::write_log_csv(s, log, columns);
  ppm::write_text_file(path, s.str());
}

ppm::LogSchemaConfig partition_columns(const fs::path& dir) { return read_json(dir / "log_columns.json"); }

ppm::EventLog read_partition(const fs::path& dir, const char* name) {
  return ppm::parse_log_file((dir / name).string(), partition_columns(dir));
}

void cmd_generate(const Options& o) {
  const auto c = load(o);
  if (!c.data.synthetic) throw ppm::StageError("generate", "config has no 'synthetic' data source");
  const auto log = ppm::load_log(c);
  ppm::run_stage("generate", [&] {
    fs::create_directories(o.out_dir);
    write_log(fs::path(o.out_dir) / "log.csv", log, ppm::synthetic_schema());
    ppm::write_text_file(fs::path(o.out_dir) / "log_columns.json", nlohmann::json(ppm::synthetic_schema()).dump(2) + "\n");
    return 0;
  });
  std::cout << "generated " << log.size() << " cases, " << log.event_count() << " events\n";
}

void cmd_prepare(const Options& o) {
  const auto c = load(o);
  const auto raw = ppm::load_log(c);
  const auto data = ppm::prepare_data(c, raw);
  ppm::run_stage("prepare", [&] {
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    const auto columns = ppm::log_columns(c);
    write_log(dir / "train.csv", data.split.train, columns);
    write_log(dir / "thres.csv", data.split.thres, columns);
    write_log(dir / "test.csv", data.split.test, columns);
    ppm::write_text_file(dir / "log_columns.json", nlohmann::json(columns).dump(2) + "\n");
    ppm::write_text_file(dir / "schema.json", nlohmann::json(data.schema).dump(1) + "\n");
    ppm::write_text_file(dir / "folding.json", nlohmann::json(data.folding).dump(1) + "\n");
    const nlohmann::json info{{"cases_loaded", raw.size()},
                              {"cases_after_cut", data.cases_after_cut},
                              {"truncation_length", data.max_length},
                              {"train", data.split.train.size()},
                              {"thres", data.split.thres.size()},
                              {"test", data.split.test.size()},
                              {"test_start", data.split.test_start},
                              {"warnings", data.split.warnings}};
    ppm::write_text_file(dir / "prepare.json", info.dump(2) + "\n");
    return 0;
  });
  for (const auto& w : data.split.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "train/thres/test: " << data.split.train.size() << '/' << data.split.thres.size() << '/'
            << data.split.test.size() << '\n';
}

void cmd_train(const Options& o) {
  const auto c = load(o);
  const fs::path dir(o.out_dir);
  const auto [train, schema] = ppm::run_stage("train", [&] {
    return std::make_pair(read_partition(dir, "train.csv"), read_json(dir / "schema.json").get<ppm::EncodingSchema>());
  });
  const auto trained = ppm::train_stage(c, train, schema);
  ppm::run_stage("train", [&] {
    ppm::save_estimator(trained.estimator, (dir / "model.json").string());
    std::ostringstream tuning;
    ppm::write_tuning_csv(tuning, trained.tuning);
    ppm::write_text_file(dir / "tuning.csv", tuning.str());
    std::string names;
    for (const auto& n : schema.feature_names()) names += n + "\n";
    ppm::write_text_file(dir / "feature_names.txt", names);
    return 0;
  });
  std::cout << "trained on " << trained.estimator.metadata().training_rows << " prefixes\n";
}

ppm::Estimator read_model(const fs::path& dir) { return ppm::load_estimator((dir / "model.json").string()); }

void cmd_threshold(const Options& o) {
  const auto c = load(o);
  const fs::path dir(o.out_dir);
  const auto thres = ppm::run_stage("threshold", [&] { return read_partition(dir, "thres.csv"); });
  const auto est = ppm::run_stage("threshold", [&] { return read_model(dir); });
  const auto cache = ppm::run_stage("threshold", [&] { return ppm::PredictionCache(thres, est); });
  const auto model = ppm::run_stage("threshold", [&] { return ppm::compile(c.cost); });
  const auto search = ppm::threshold_stage(c, thres, cache, model);
  ppm::run_stage("threshold", [&] {
    const nlohmann::json j{{"policy", search.best_policy}, {"thres_cost", search.best_cost}, {"cost", c.cost}};
    ppm::write_text_file(dir / "threshold.json", j.dump(2) + "\n");
    std::ostringstream s;
    ppm::write_search_csv(s, search);
    ppm::write_text_file(dir / "threshold_search.csv", s.str());
    return 0;
  });
  std::cout << "threshold: " << search.best_policy.describe() << '\n';
}

ppm::AlarmPolicy read_policy(const fs::path& dir) { return ppm::policy_from_json(read_json(dir / "threshold.json").at("policy")); }

void cmd_evaluate(const Options& o) {
  const auto c = load(o);
  const fs::path dir(o.out_dir);
  const auto [thres, test] = ppm::run_stage("evaluate", [&] {
    return std::make_pair(read_partition(dir, "thres.csv"), read_partition(dir, "test.csv"));
  });
  const auto est = ppm::run_stage("evaluate", [&] { return read_model(dir); });
  const auto policy = ppm::run_stage("evaluate", [&] { return read_policy(dir); });
  const auto model = ppm::run_stage("evaluate", [&] { return ppm::compile(c.cost); });
  const auto thres_cache = ppm::run_stage("evaluate", [&] { return ppm::PredictionCache(thres, est); });
  const auto test_cache = ppm::run_stage("evaluate", [&] { return ppm::PredictionCache(test, est); });
  const auto outcomes = ppm::evaluate_policies(ppm::policy_set(policy), thres, thres_cache, test, test_cache, model);
  ppm::run_stage("evaluate", [&] {
    std::ostringstream cases;
    ppm::write_case_csv(cases, outcomes.front().test);
    ppm::write_text_file(dir / "cases.csv", cases.str());
    nlohmann::json summary{{"dataset", c.dataset}, {"threshold", policy}, {"policies", nlohmann::json::array()}};
    std::ostringstream text;
    text << "policy      test_avg_cost  benefit\n";
    for (const auto& p : outcomes) {
      summary["policies"].push_back(
          {{"name", p.name}, {"policy", p.policy}, {"thres", ppm::summary_json(p.thres)}, {"test", ppm::summary_json(p.test)}});
      text << p.name << std::string(p.name.size() < 12 ? 12 - p.name.size() : 1, ' ')
           << ppm::text::format_double(p.test.average_cost) << "  " << ppm::text::format_double(p.test.benefit) << '\n';
    }
    ppm::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    ppm::write_text_file(dir / "summary.txt", text.str());
    std::cout << text.str();
    return 0;
  });
}

void cmd_sweep(const Options& o) {
  auto c = load(o);
  if (!o.rq.empty()) c.grids.run = {ppm::run_stage("sweep", [&] { return ppm::parse_research_question(o.rq); })};
  const fs::path dir(o.out_dir);
  const auto [thres, test] = ppm::run_stage("sweep", [&] {
    return std::make_pair(read_partition(dir, "thres.csv"), read_partition(dir, "test.csv"));
  });
  const auto est = ppm::run_stage("sweep", [&] { return read_model(dir); });
  const auto thres_cache = ppm::run_stage("sweep", [&] { return ppm::PredictionCache(thres, est); });
  const auto test_cache = ppm::run_stage("sweep", [&] { return ppm::PredictionCache(test, est); });
  for (auto rq : c.grids.run) {
    const auto report = ppm::run_sweep(c, rq, thres, thres_cache, test, test_cache);
    ppm::run_stage("sweep", [&] {
      std::ostringstream csv;
      ppm::write_sweep_csv(csv, report);
      ppm::write_text_file(dir / ppm::sweep_file_name(rq), csv.str());
      return 0;
    });
    std::cout << ppm::to_string(rq) << ": " << report.rows.size() << " rows\n";
  }
}

// Constant values of a cost spec, when every component is constant.
std::optional<ppm::ConstantCosts> constant_costs(const ppm::CostSpec& s) {
  const auto* in = std::get_if<ppm::cost_form::Constant>(&s.c_in);
  const auto* out = std::get_if<ppm::cost_form::Constant>(&s.c_out);
  const auto* com = std::get_if<ppm::cost_form::Constant>(&s.c_com);
  const auto* eff = std::get_if<ppm::cost_form::Constant>(&s.eff);
  if (!in || !out || !com || !eff) return std::nullopt;
  return ppm::ConstantCosts{in->value, out->value, com->value, eff->value};
}

void cmd_roi(const Options& o) {
  const auto c = load(o);
  const fs::path dir(o.out_dir);
  const auto test = ppm::run_stage("roi", [&] { return read_partition(dir, "test.csv"); });
  const auto est = ppm::run_stage("roi", [&] { return read_model(dir); });
  const auto policy = ppm::run_stage("roi", [&] { return read_policy(dir); });
  const auto report = ppm::run_stage("roi", [&] { return ppm::log_cost(test, est, policy, ppm::compile(c.cost)); });
  ppm::run_stage("roi", [&] {
    nlohmann::json j = ppm::summary_json(report);
    j["policy"] = policy;
    if (const auto k = constant_costs(c.cost)) {
      j["roi_feasible"] = ppm::roi_feasible(report.counts, *k);
    } else {
      j["roi_feasible"] = nullptr;  // condition only defined for constant costs
    }
    ppm::write_text_file(dir / "roi.json", j.dump(2) + "\n");
    std::cout << "roi " << ppm::text::format_double(report.roi) << ", benefit per case "
              << ppm::text::format_double(report.benefit) << '\n';
    return 0;
  });
}

void cmd_pipeline(const Options& o) {
  const auto c = load(o);
  const auto r = ppm::run_pipeline(c, o.out_dir);
  std::cout << ppm::summary_text(c, r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prescriptive process monitoring: alarm thresholds under a cost model"};
  app.require_subcommand(1);
  Options opts;

  const auto add = [&](const char* name, const char* help, void (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", opts.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", opts.seed, "override every seed in the config");
    sub->add_option("--out-dir", opts.out_dir, "output directory")->capture_default_str();
    sub->callback([&opts, fn] { fn(opts); });
    return sub;
  };
  add("generate", "write a synthetic event log", cmd_generate);
  add("prepare", "clean, split and encode the log", cmd_prepare);
  add("train", "tune and train the outcome estimator", cmd_train);
  add("threshold", "find the cost-minimizing alarm threshold", cmd_threshold);
  add("evaluate", "evaluate the threshold and baselines on the test log", cmd_evaluate);
  add("sweep", "run cost-configuration sweeps", cmd_sweep)
      ->add_option("--rq", opts.rq, "RQ1, RQ2 or RQ3 (default: those listed in the config)");
  add("roi", "report ROI and benefit of the threshold on the test log", cmd_roi);
  add("pipeline", "run every stage end to end", cmd_pipeline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ppm::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    std::cerr << "error: [" << (sub ? sub->get_name() : "ppm") << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
