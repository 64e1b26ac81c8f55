#include "puupl/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "puupl/errors.hpp"
#include "puupl/random.hpp"

namespace puupl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::mutex g_log_mutex;

void log_line(bool quiet, const std::string& line) {
  if (quiet) return;
  std::lock_guard lock(g_log_mutex);
  std::cerr << line << std::endl;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Columns of the per-seed test report that get aggregated.
std::map<std::string, double> seed_metrics(const SeedOutcome& s) {
  std::map<std::string, double> m;
  if (s.result.test) {
    m["accuracy"] = s.result.test->accuracy;
    m["auc"] = s.result.test->pu_auc;
    m["ece"] = s.result.test->ece;
    m["nll"] = s.result.test->nll;
    if (s.result.test->pl_nll) m["pl_nll"] = *s.result.test->pl_nll;
  }
  m["best_val_score"] = s.result.best_score;
  m["iterations"] = static_cast<double>(s.result.iterations_run);
  m["prior"] = s.prior;
  return m;
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"se", s.se}, {"n", s.n}}; }

SeedOutcome run_seed(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir,
                     const ExperimentOptions& options) {
  fs::create_directories(dir);
  const PreparedData data = prepare_data(cfg.dataset, seed);
  EngineConfig engine = cfg.engine;

  json grid_json = nullptr;
  if (!cfg.prior_grid.empty()) {
    const auto grid = prior_grid_search(data.split.train, data.split.validation, engine,
                                        cfg.prior_grid, seed);
    engine.puupl.prior = grid.best_prior;
    grid_json = json::array();
    for (const auto& [prior, score] : grid.scores) grid_json.push_back({{"prior", prior}, {"score", score}});
    log_line(options.quiet, "seed " + std::to_string(seed) + ": grid search chose prior " +
                                format_double(grid.best_prior));
  }

  RunOptions run_options;
  run_options.test = &data.test;
  run_options.checkpoint_dir = dir / "checkpoint";
  if (!options.resume) fs::remove_all(run_options.checkpoint_dir);
  if (cfg.dump_uncertainty) run_options.uncertainty_dir = dir / "uncertainty";
  run_options.hooks.on_iteration_end = [&](const IterationOutcome& o, const PUDataset&,
                                           const PUDataset&, const UncertaintyReport*) {
    std::ostringstream line;
    line << "seed " << seed << ": iteration " << o.iteration << " val " << o.val_score << " best "
         << o.best_score << " +" << o.n_newly_labeled << " -" << o.n_unlabeled_back << " |L| "
         << o.size_l;
    log_line(options.quiet, line.str());
  };

  RunResult result = run(data.split.train, data.split.validation, engine, seed, run_options);

  {
    std::ofstream epochs(dir / "epochs.csv", std::ios::binary);
    result.log.write_epochs_csv(epochs);
    std::ofstream iterations(dir / "iterations.jsonl", std::ios::binary);
    result.log.write_iterations_jsonl(iterations);
  }
  const auto layer_sizes = engine.layer_sizes(static_cast<std::size_t>(data.test.dim()));
  save_snapshots(dir / "best.snap", result.best,
                 {{"standardizer", {{"mean", data.standardizer.mean}, {"std", data.standardizer.std}}},
                  {"layer_sizes", layer_sizes},
                  {"positive_class_ids", cfg.dataset.positive_class_ids},
                  {"best_score", result.best_score}});

  json summary = {{"seed", seed},
                  {"prior", engine.puupl.prior},
                  {"prior_grid", grid_json},
                  {"best_val_score", result.best_score},
                  {"iterations_run", result.iterations_run},
                  {"resumed", result.resumed},
                  {"n_train", data.split.train.size()},
                  {"n_validation", data.split.validation.size()},
                  {"n_test", data.test.size()},
                  {"final_sizes",
                   {{"P", result.final_train.positives().size()},
                    {"U", result.final_train.unlabeled().size()},
                    {"L", result.final_train.pseudo_labeled().size()}}},
                  {"test", result.test ? result.test->to_json() : json(nullptr)}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  log_line(options.quiet, "seed " + std::to_string(seed) + ": done, test accuracy " +
                              (result.test ? format_double(result.test->accuracy) : "n/a"));
  return SeedOutcome{seed, dir, engine.puupl.prior, std::move(result)};
}

void write_plots(const fs::path& dir, const std::vector<SeedOutcome>& seeds) {
  const fs::path plots = dir / "plots";
  fs::create_directories(plots);

  // Mean over seeds, keyed by a global epoch or iteration counter.
  std::map<std::size_t, std::vector<double>> val_by_epoch, best_by_epoch, loss_by_epoch;
  std::map<std::size_t, std::vector<double>> pl_acc, size_l, pl_nll;
  for (const auto& s : seeds) {
    for (std::size_t e = 0; e < s.result.log.epochs.size(); ++e) {
      const auto& rec = s.result.log.epochs[e];
      val_by_epoch[e].push_back(rec.val_score);
      best_by_epoch[e].push_back(rec.best_score);
      loss_by_epoch[e].push_back(rec.loss_total);
    }
    for (const auto& o : s.result.log.iterations) {
      if (o.pl_accuracy) pl_acc[o.iteration].push_back(*o.pl_accuracy);
      if (o.pl_nll) pl_nll[o.iteration].push_back(*o.pl_nll);
      size_l[o.iteration].push_back(static_cast<double>(o.size_l));
    }
  }
  auto emit = [&](const std::string& name, const std::string& x, const std::string& y,
                  const std::map<std::size_t, std::vector<double>>& series) {
    std::ofstream out(plots / name, std::ios::binary);
    out << x << ',' << y << '\n' << std::setprecision(17);
    for (const auto& [k, v] : series) out << k << ',' << summarize(v).mean << '\n';
  };
  emit("val_score_by_epoch.csv", "epoch", "val_score", val_by_epoch);
  emit("best_score_by_epoch.csv", "epoch", "best_score", best_by_epoch);
  emit("loss_by_epoch.csv", "epoch", "loss_total", loss_by_epoch);
  emit("pl_accuracy_by_iteration.csv", "iteration", "pl_accuracy", pl_acc);
  emit("pl_nll_by_iteration.csv", "iteration", "pl_nll", pl_nll);
  emit("pseudo_labeled_by_iteration.csv", "iteration", "size_l", size_l);
}

}  // namespace

fs::path resolve_output_dir(const std::string& output_dir) {
  const fs::path p(output_dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("PUUPL_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
  return p;
}

PreparedData prepare_data(const DatasetConfig& cfg, std::uint64_t seed) {
  const SeedStreams streams(seed);
  LabeledDataset train, test;
  switch (cfg.source) {
    case DataSource::gaussians: {
      const auto& g = cfg.gaussians;
      train = make_gaussians(g.n, g.prior, g.separation, g.dim, streams.seed("data", {0}));
      test = make_gaussians(g.n_test, g.prior, g.separation, g.dim, streams.seed("data", {1}));
      break;
    }
    case DataSource::idx:
      train = load_idx(cfg.train_images, cfg.train_labels);
      test = load_idx(cfg.test_images, cfg.test_labels);
      break;
    case DataSource::csv:
      train = load_csv(cfg.train_csv);
      test = load_csv(cfg.test_csv);
      break;
  }
  train = binarize(train, cfg.positive_class_ids);
  test = binarize(test, cfg.positive_class_ids);
  if (cfg.max_train_samples > 0)
    train = subsample(train, cfg.max_train_samples, streams.seed("sampling", {0}));
  if (cfg.max_test_samples > 0)
    test = subsample(test, cfg.max_test_samples, streams.seed("sampling", {1}));

  LabeledDataset* others[] = {&test};
  const Standardizer standardizer = standardize(train, others);

  std::optional<BiasSpec> bias;
  if (!cfg.bias_weights.empty()) bias = BiasSpec{train.class_ids, cfg.bias_weights};

  const SplitSpec spec{cfg.validation_size, cfg.labeled_fraction_matched, streams.seed("splits")};
  return PreparedData{split(train, spec, cfg.n_labeled_positives, bias), std::move(test), standardizer};
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& options) {
  cfg.validate();
  const fs::path dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");

  const std::size_t n = cfg.seeds.size();
  std::vector<std::optional<SeedOutcome>> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto seed = cfg.seeds[i];
        outcomes[i] = run_seed(cfg, seed, dir / ("seed_" + std::to_string(seed)), options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  result.directory = dir;
  for (auto& o : outcomes) result.seeds.push_back(std::move(*o));

  std::map<std::string, std::vector<double>> columns;
  for (const auto& s : result.seeds)
    for (const auto& [k, v] : seed_metrics(s)) columns[k].push_back(v);
  json metrics = json::object();
  for (const auto& [k, v] : columns) {
    // Metrics missing for some seeds (pl_nll without pseudo-labels) are not aggregated.
    if (v.size() != result.seeds.size()) continue;
    metrics[k] = summary_json(summarize(v));
  }
  json per_seed = json::array();
  for (const auto& s : result.seeds) {
    json row = {{"seed", s.seed}};
    for (const auto& [k, v] : seed_metrics(s)) row[k] = v;
    per_seed.push_back(row);
  }
  result.aggregate = {{"seeds", cfg.seeds}, {"metrics", metrics}, {"per_seed", per_seed}};
  write_text(dir / "aggregate.json", result.aggregate.dump(2) + "\n");
  write_plots(dir, result.seeds);
  return result;
}

json sweep(const RunConfig& cfg, const std::string& param, const std::vector<std::string>& values,
           const ExperimentOptions& options) {
  if (values.empty()) throw ConfigError("sweep: the value list is empty");
  // Validate every point before running any of them.
  std::vector<RunConfig> configs;
  const fs::path base = resolve_output_dir(cfg.output_dir);
  for (const auto& value : values) {
    RunConfig c = cfg;
    set_config_value(c, param, value);
    c.output_dir = (base / (param + "=" + value)).string();
    configs.push_back(std::move(c));
  }

  fs::create_directories(base);
  const std::vector<std::string> metrics{"accuracy", "auc", "ece", "nll", "best_val_score"};
  json table = json::array();
  std::ofstream csv(base / ("sweep_" + param + ".csv"), std::ios::binary);
  csv << "value";
  for (const auto& m : metrics) csv << ',' << m << "_mean," << m << "_se";
  csv << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ExperimentResult r = run_experiment(configs[i], options);
    json row = {{"value", values[i]}, {"metrics", r.aggregate.at("metrics")}};
    csv << values[i];
    for (const auto& m : metrics) {
      const auto& agg = r.aggregate.at("metrics");
      if (agg.contains(m))
        csv << ',' << agg[m]["mean"].get<double>() << ',' << agg[m]["se"].get<double>();
      else
        csv << ",,";
    }
    csv << '\n';
    table.push_back(row);
  }
  const json out = {{"param", param}, {"rows", table}};
  write_text(base / ("sweep_" + param + ".json"), out.dump(2) + "\n");
  return out;
}

EvalReport evaluate_snapshot(const fs::path& snapshot, const std::string& data_path,
                             const std::string& labels_path, std::vector<int> positive_class_ids) {
  const SnapshotFile file = load_snapshots(snapshot);
  const json& h = file.header;
  if (!h.contains("standardizer") || !h.contains("layer_sizes"))
    throw FormatError(snapshot.string() + ": snapshot header lacks standardizer or layer sizes");
  if (file.snapshots.empty()) throw FormatError(snapshot.string() + ": snapshot holds no models");

  LabeledDataset data = labels_path.empty() ? load_csv(data_path) : load_idx(data_path, labels_path);
  if (positive_class_ids.empty()) positive_class_ids = h.at("positive_class_ids").get<std::vector<int>>();
  data = binarize(data, positive_class_ids);

  Standardizer s;
  s.mean = h.at("standardizer").at("mean").get<double>();
  s.std = h.at("standardizer").at("std").get<double>();
  const Matrix x = s.apply(data.features);

  const auto layer_sizes = h.at("layer_sizes").get<std::vector<std::size_t>>();
  if (layer_sizes.front() != data.dim())
    throw ConfigError("eval: data has " + std::to_string(data.dim()) + " features, the model expects " +
                      std::to_string(layer_sizes.front()));
  Vector p = Vector::Zero(x.rows());
  for (const auto& snap : file.snapshots) {
    Mlp model(snap.layer_sizes);
    model.restore(snap);
    p += sigmoid(model.predict(x));
  }
  p /= static_cast<double>(file.snapshots.size());
  return evaluate_predictions(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                              data.truth);
}

}  // namespace puupl
