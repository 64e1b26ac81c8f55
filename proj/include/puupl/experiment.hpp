#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "puupl/config.hpp"
#include "puupl/dataset.hpp"
#include "puupl/engine.hpp"

namespace puupl {

/// Train/validation/test data for one seed, standardized with the train map.
struct PreparedData {
  SplitResult split;
  LabeledDataset test;
  Standardizer standardizer;
};

PreparedData prepare_data(const DatasetConfig& cfg, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::filesystem::path directory;
  double prior = 0.0;  // after an optional grid search
  RunResult result;
};

struct Summary {
  double mean = 0.0;
  double se = 0.0;  // sample std (n - 1) / sqrt(n); 0 for a single value
  std::size_t n = 0;
};

Summary summarize(std::span<const double> values);

struct ExperimentOptions {
  std::size_t jobs = 1;
  bool resume = false;
  bool quiet = false;
};

struct ExperimentResult {
  std::filesystem::path directory;
  std::vector<SeedOutcome> seeds;
  nlohmann::json aggregate;
};

// Runs every configured seed into <output_dir>/seed_<N>/ and writes
// aggregate.json plus plot-ready two-column CSVs into <output_dir>/plots/.
// A relative output_dir is resolved against $PUUPL_OUTPUT_ROOT when set.
ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& options = {});

// One experiment per value of a dotted config key; writes
// <output_dir>/sweep_<param>.csv with mean and standard error per value.
nlohmann::json sweep(const RunConfig& cfg, const std::string& param,
                     const std::vector<std::string>& values, const ExperimentOptions& options = {});

// Evaluates a best.snap file written by run_experiment on labeled data.
// `data_path` is a CSV file, or an IDX image file when `labels_path` is set.
EvalReport evaluate_snapshot(const std::filesystem::path& snapshot, const std::string& data_path,
                             const std::string& labels_path, std::vector<int> positive_class_ids);

std::filesystem::path resolve_output_dir(const std::string& output_dir);

}  // namespace puupl
