#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "json.hpp"

namespace puupl {

// Fraction of samples with (p >= 0.5) == truth.
double accuracy(std::span<const double> probabilities, std::span<const int> truth);

// Mann-Whitney AUC between positive and unlabeled scores: the fraction of
// (p, u) pairs with score_p > score_u, ties counted one half. O(n log n).
double pu_auc(std::span<const double> positive_scores, std::span<const double> unlabeled_scores);

// Expected calibration error with equal-width bins over [0, 1]. Bin b holds
// b/n_bins <= p < (b+1)/n_bins (the last bin also holds p = 1); empty bins
// are skipped.
double ece(std::span<const double> probabilities, std::span<const int> truth,
           std::size_t n_bins = 10);

// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
double nll(std::span<const double> probabilities, std::span<const double> targets);

struct EvalReport {
  double accuracy = 0.0;
  double pu_auc = 0.0;  // AUC of positives vs. the rest
  double ece = 0.0;
  double nll = 0.0;
  std::optional<double> pl_nll;  // stored pseudo-labels vs. hidden truth

  nlohmann::json to_json() const;
};

// Report for predictions on a fully labeled set.
EvalReport evaluate_predictions(std::span<const double> probabilities, std::span<const int> truth,
                                std::size_t n_bins = 10);

}  // namespace puupl
