#include "puupl/selection.hpp"

#include <algorithm>
#include <cmath>

#include "puupl/errors.hpp"

namespace puupl {

namespace {

bool more_certain(const Candidate& a, const Candidate& b) {
  if (a.uncertainty != b.uncertainty) return a.uncertainty < b.uncertainty;
  return a.index < b.index;
}

}  // namespace

std::vector<Candidate> rank_and_select(std::vector<Candidate> pool, std::size_t max_new,
                                       double threshold) {
  std::sort(pool.begin(), pool.end(), more_certain);
  std::vector<Candidate> out;
  for (std::size_t rank = 0; rank < pool.size() && rank < max_new; ++rank) {
    if (!(pool[rank].uncertainty <= threshold)) break;
    out.push_back(pool[rank]);
  }
  return out;
}

double balance_target(BalanceMode mode, double ratio, double prior) {
  if (mode == BalanceMode::prior_ratio) return prior / (1.0 - prior);
  return ratio;
}

std::vector<Candidate> balance(std::vector<Candidate> selected, BalanceMode mode, double ratio) {
  std::sort(selected.begin(), selected.end(), more_certain);
  if (mode == BalanceMode::none) return selected;
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ConfigError("balance: ratio must be positive");

  std::vector<Candidate> pos, neg;
  for (const auto& c : selected) (c.p_mean >= 0.5 ? pos : neg).push_back(c);
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  const auto keep_pos = std::min(pos.size(), static_cast<std::size_t>(std::llround(ratio * nn)));
  const auto keep_neg = std::min(neg.size(), static_cast<std::size_t>(std::llround(np / ratio)));
  pos.resize(keep_pos);
  neg.resize(keep_neg);

  std::vector<Candidate> out;
  out.reserve(pos.size() + neg.size());
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(out), more_certain);
  return out;
}

double pseudo_label_value(double p_mean, bool soft_labels) {
  if (soft_labels) return p_mean;
  return p_mean >= 0.5 ? 1.0 - 1e-6 : 1e-6;
}

PUDataset assign_pseudo_labels(const PUDataset& data, std::span<const std::size_t> selected,
                               const Vector& p_mean, bool soft_labels, bool reassign_all) {
  std::vector<std::size_t> idx;
  std::vector<double> values;
  if (reassign_all) {
    for (std::size_t i : data.pseudo_labeled()) {
      idx.push_back(i);
      values.push_back(pseudo_label_value(p_mean[static_cast<Eigen::Index>(i)], soft_labels));
    }
  }
  for (std::size_t i : selected) {
    if (data.membership(i) != Membership::unlabeled)
      throw UsageError("assign_pseudo_labels: sample " + std::to_string(i) + " is not unlabeled");
    idx.push_back(i);
    values.push_back(pseudo_label_value(p_mean[static_cast<Eigen::Index>(i)], soft_labels));
  }
  if (idx.empty()) return data;
  return data.with_pseudo_labels(idx, values);
}

std::vector<std::size_t> select_for_unlabeling(const PUDataset& data, const Vector& epistemic,
                                               double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i : data.pseudo_labeled())
    if (epistemic[static_cast<Eigen::Index>(i)] >= threshold) out.push_back(i);
  return out;
}

PUDataset pseudo_unlabel(const PUDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return data;
  return data.with_unlabeled(indices);
}

}  // namespace puupl
