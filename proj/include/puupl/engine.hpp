#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "puupl/dataset.hpp"
#include "puupl/metrics.hpp"
#include "puupl/network.hpp"
#include "puupl/puloss.hpp"
#include "puupl/random.hpp"
#include "puupl/runlog.hpp"
#include "puupl/selection.hpp"
#include "puupl/uncertainty.hpp"

namespace puupl {

enum class ReinitMode { same_weights, fresh, none };
enum class ValidationCriterion { pu_auc, accuracy };

/// Hyperparameters of the pseudo-labeling loop. Defaults are the
/// recommended settings.
struct PuuplConfig {
  double lambda = 0.1;
  std::size_t ensemble_size = 2;         // K; MC-dropout forward passes in that mode
  std::size_t max_new_labels = 1000;     // T per iteration (kUnlimited for no cap)
  double select_threshold = 0.05;        // max uncertainty to pseudo-label
  double unlabel_threshold = 0.35;       // min epistemic uncertainty to unlabel
  double balance_ratio = 1.0;            // target |L+| / |L-| in mode equal
  std::size_t max_iterations = 15;
  std::size_t epochs_per_iteration = 20;
  std::size_t patience = 3;              // outer iterations without improvement; 0 = off
  std::size_t inner_patience = 0;        // epochs without improvement; 0 = off
  bool reassign_all = false;
  BalanceMode balance = BalanceMode::equal;
  ReinitMode reinit = ReinitMode::same_weights;
  bool soft_labels = true;
  UncertaintyKind uncertainty = UncertaintyKind::epistemic;
  EstimatorKind estimator = EstimatorKind::ensemble;
  bool naive_pl = false;        // rank by |p - 0.5| instead of uncertainty
  bool pseudo_labeling = true;  // false: a single PU training round
  double prior = 0.5;
  PuLossKind loss = PuLossKind::nnpu;

  void validate() const;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{300, 300, 300, 300};
  double dropout_p = 0.0;
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double weight_decay = 0.0;
  double lr_decay_gamma = 0.99;
};

struct EngineConfig {
  PuuplConfig puupl;
  ModelConfig model;
  OptimizerConfig optimizer;
  ValidationCriterion criterion = ValidationCriterion::pu_auc;
  std::size_t ece_bins = 10;

  void validate() const;
  std::size_t trained_members() const;
  std::vector<std::size_t> layer_sizes(std::size_t input_dim) const;
};

// Mean sigmoid output over ensemble members, without dropout.
Vector ensemble_probability(const Ensemble& ensemble, const Matrix& x);

// PU-AUC between labeled positives and the rest, or accuracy against the
// validation truth.
double validation_score(const Ensemble& ensemble, const PUDataset& validation,
                        ValidationCriterion criterion);

struct InnerResult {
  double final_score = 0.0;
  std::size_t epochs_run = 0;
};

// Trains every member for up to epochs_per_iteration epochs on the combined
// loss, scoring the ensemble on validation after each epoch and keeping the
// best parameters in the ensemble. Throws NumericError on a non-finite loss.
InnerResult train_inner(Ensemble& ensemble, const PUDataset& train, const PUDataset& validation,
                        const EngineConfig& cfg, const SeedStreams& streams, std::size_t iteration,
                        RunLog& log);

struct RunHooks {
  std::function<void(std::size_t iteration, const Ensemble&, const PUDataset&)> on_iteration_start;
  std::function<void(const IterationOutcome&, const PUDataset& before, const PUDataset& after,
                     const UncertaintyReport* report)>
      on_iteration_end;
};

struct RunOptions {
  const LabeledDataset* test = nullptr;
  std::filesystem::path checkpoint_dir;   // empty: no checkpoints
  std::filesystem::path uncertainty_dir;  // empty: no per-iteration dumps
  RunHooks hooks;
};

struct RunResult {
  RunLog log;
  std::vector<ParamSnapshot> best;
  double best_score = 0.0;
  std::optional<EvalReport> test;
  PUDataset final_train;
  std::size_t iterations_run = 0;
  bool resumed = false;
};

// The pseudo-labeling loop: train, score, select, balance, assign,
// unlabel, re-initialize; stops at max_iterations, after `patience`
// iterations without validation improvement, or when an iteration leaves
// the dataset unchanged. Final evaluation uses the best parameters.
RunResult run(const PUDataset& train, const PUDataset& validation, const EngineConfig& cfg,
              std::uint64_t seed, const RunOptions& options = {});

struct GridSearchResult {
  double best_prior = 0.0;
  std::vector<std::pair<double, double>> scores;  // (prior, best validation PU-AUC)
};

// One PU-only training per prior; picks the prior with the highest
// validation PU-AUC (the first one on ties).
GridSearchResult prior_grid_search(const PUDataset& train, const PUDataset& validation,
                                   const EngineConfig& cfg, std::span<const double> grid,
                                   std::uint64_t seed);

}  // namespace puupl
