#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "puupl/dataset.hpp"

namespace puupl {

enum class BalanceMode { equal, prior_ratio, none };

/// A candidate for pseudo-labeling: sample index, the score it is ranked
/// by (lower is more certain) and the ensemble mean prediction.
struct Candidate {
  std::size_t index = 0;
  double uncertainty = 0.0;
  double p_mean = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

// Ranks by (uncertainty, index) ascending and keeps those with rank < max_new
// and uncertainty <= threshold. Returned in rank order.
std::vector<Candidate> rank_and_select(std::vector<Candidate> pool, std::size_t max_new,
                                       double threshold);

// Splits by p_mean >= 0.5 and trims the larger side, dropping its most
// uncertain members, until |positives| / |negatives| matches `ratio`
// (rounded to the nearest count). Output is in (uncertainty, index) order.
std::vector<Candidate> balance(std::vector<Candidate> selected, BalanceMode mode, double ratio);

// Target positive/negative ratio for a mode: equal -> ratio, prior_ratio ->
// prior / (1 - prior).
double balance_target(BalanceMode mode, double ratio, double prior);

// Pseudo-label stored for a mean prediction: p itself for soft labels,
// round(p) mapped to {1e-6, 1 - 1e-6} for hard labels.
double pseudo_label_value(double p_mean, bool soft_labels);

// Moves `selected` from U into L with labels from `p_mean` (indexed by
// sample). With reassign_all every sample already in L is relabeled too.
PUDataset assign_pseudo_labels(const PUDataset& data, std::span<const std::size_t> selected,
                               const Vector& p_mean, bool soft_labels, bool reassign_all);

// Members of L whose epistemic uncertainty is >= threshold.
std::vector<std::size_t> select_for_unlabeling(const PUDataset& data, const Vector& epistemic,
                                               double threshold);

// Moves those samples back to U with label 0.
PUDataset pseudo_unlabel(const PUDataset& data, std::span<const std::size_t> indices);

}  // namespace puupl
