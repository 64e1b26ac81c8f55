#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "puupl/engine.hpp"

namespace puupl {

enum class DataSource { gaussians, idx, csv };

struct GaussianSpec {
  std::size_t n = 1000;
  std::size_t n_test = 10000;
  double prior = 0.5;
  double separation = 4.0;
  std::size_t dim = 2;
};

struct DatasetConfig {
  DataSource source = DataSource::gaussians;
  std::string train_images;  // idx
  std::string train_labels;  // idx
  std::string test_images;   // idx
  std::string test_labels;   // idx
  std::string train_csv;     // csv
  std::string test_csv;      // csv
  std::vector<int> positive_class_ids{1};
  std::size_t n_labeled_positives = 50;
  // Subgroup = raw class id of each positive; empty = uniform sampling.
  std::map<int, double> bias_weights;
  std::size_t validation_size = 100;
  bool labeled_fraction_matched = true;
  std::size_t max_train_samples = 0;  // 0 = all
  std::size_t max_test_samples = 0;   // 0 = all
  GaussianSpec gaussians;
};

struct RunConfig {
  DatasetConfig dataset;
  EngineConfig engine;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  bool dump_uncertainty = false;
  std::vector<double> prior_grid;  // non-empty: choose the prior per seed by grid search

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Reads a JSON config. Unknown keys and invalid values raise ConfigError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

// Sets a dotted key such as "puupl.lambda" from its textual value,
// re-validating the config afterwards.
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

}  // namespace puupl
