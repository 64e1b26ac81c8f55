#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"

namespace puupl {

struct EpochRecord {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double loss_total = 0.0;  // mean over members and minibatches
  double loss_pu = 0.0;
  double loss_pl = 0.0;
  double val_score = 0.0;
  double best_score = 0.0;
  std::optional<double> val_ece;  // needs validation truth
};

struct IterationOutcome {
  std::size_t iteration = 0;
  std::size_t epochs_run = 0;
  std::size_t n_selected = 0;  // before balancing
  std::size_t n_newly_labeled = 0;
  std::size_t n_unlabeled_back = 0;
  double val_score = 0.0;   // end-of-iteration weights
  double best_score = 0.0;  // best checkpoint so far
  std::optional<double> pl_accuracy;  // new pseudo-labels vs hidden truth
  std::optional<double> pl_nll;       // all of L vs hidden truth
  std::size_t size_p = 0;
  std::size_t size_u = 0;
  std::size_t size_l = 0;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  std::vector<IterationOutcome> iterations;

  // iteration,epoch,loss_total,loss_pu,loss_pl,val_score,best_score,val_ece
  void write_epochs_csv(std::ostream& out) const;
  // One IterationOutcome JSON object per line.
  void write_iterations_jsonl(std::ostream& out) const;

  nlohmann::json to_json() const;
  static RunLog from_json(const nlohmann::json& j);
};

nlohmann::json to_json(const IterationOutcome& o);

}  // namespace puupl
