#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "puupl/config.hpp"
#include "puupl/errors.hpp"
#include "puupl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PU learning with uncertainty-aware pseudo-labeling"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  bool resume = false;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "Run every configured seed and aggregate the results");
  train->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seeds, "Override the config seeds (repeatable)");
  train->add_option("--jobs", jobs, "Seeds to run in parallel")->check(CLI::PositiveNumber);
  train->add_flag("--resume", resume, "Continue from per-seed checkpoints");
  train->add_flag("--quiet", quiet, "Suppress progress output");

  std::string param, values_text;
  auto* sweep = app.add_subcommand("sweep", "Run the experiment once per value of one parameter");
  sweep->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Dotted config key, e.g. puupl.prior")->required();
  sweep->add_option("--values", values_text, "Comma-separated values")->required();
  sweep->add_option("--jobs", jobs, "Seeds to run in parallel")->check(CLI::PositiveNumber);
  sweep->add_flag("--quiet", quiet, "Suppress progress output");

  std::string snapshot, data_path, labels_path, positive_text;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved best.snap on labeled data");
  eval->add_option("--snapshot", snapshot, "Snapshot written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "CSV file, or IDX images with --labels")->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", labels_path, "IDX label file")->check(CLI::ExistingFile);
  eval->add_option("--positive", positive_text, "Comma-separated positive class ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    puupl::ExperimentOptions options;
    options.jobs = jobs;
    options.resume = resume;
    options.quiet = quiet;

    if (*train) {
      puupl::RunConfig cfg = puupl::parse_config(config_path);
      if (!seeds.empty()) cfg.seeds = seeds;
      const auto result = puupl::run_experiment(cfg, options);
      std::cout << result.aggregate.at("metrics").dump(2) << '\n';
    } else if (*sweep) {
      const puupl::RunConfig cfg = puupl::parse_config(config_path);
      const auto table = puupl::sweep(cfg, param, split_list(values_text), options);
      std::cout << table.dump(2) << '\n';
    } else if (*eval) {
      std::vector<int> positives;
      for (const auto& id : split_list(positive_text)) positives.push_back(std::stoi(id));
      const auto report = puupl::evaluate_snapshot(snapshot, data_path, labels_path, positives);
      std::cout << report.to_json().dump(2) << '\n';
    }
  } catch (const puupl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const puupl::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
