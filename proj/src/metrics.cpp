#include "puupl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "puupl/errors.hpp"
#include "puupl/puloss.hpp"

namespace puupl {

double accuracy(std::span<const double> p, std::span<const int> truth) {
  if (p.size() != truth.size()) throw UsageError("accuracy: length mismatch");
  if (p.empty()) throw UsageError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hits += ((p[i] >= 0.5 ? 1 : 0) == truth[i]);
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

double pu_auc(std::span<const double> pos, std::span<const double> unl) {
  if (pos.empty() || unl.empty()) throw UsageError("pu_auc: both score sets must be non-empty");
  std::vector<double> u(unl.begin(), unl.end());
  std::sort(u.begin(), u.end());
  // For each positive score count unlabeled scores strictly below and equal.
  std::uint64_t greater = 0, ties = 0;
  for (double s : pos) {
    const auto lo = std::lower_bound(u.begin(), u.end(), s);
    const auto hi = std::upper_bound(lo, u.end(), s);
    greater += static_cast<std::uint64_t>(lo - u.begin());
    ties += static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(pos.size()) * static_cast<double>(unl.size());
  return (2.0 * static_cast<double>(greater) + static_cast<double>(ties)) / (2.0 * pairs);
}

double ece(std::span<const double> p, std::span<const int> truth, std::size_t n_bins) {
  if (p.size() != truth.size()) throw UsageError("ece: length mismatch");
  if (p.empty()) throw UsageError("ece: empty input");
  if (n_bins == 0) throw ConfigError("ece: n_bins must be positive");
  const double nb = static_cast<double>(n_bins);
  std::vector<double> conf(n_bins, 0.0), pos(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = std::clamp(p[i], 0.0, 1.0);
    auto b = static_cast<std::size_t>(std::min(std::floor(v * nb), nb - 1.0));
    // Align with the edges b / n_bins as evaluated in floating point.
    while (b > 0 && v < static_cast<double>(b) / nb) --b;
    while (b + 1 < n_bins && v >= static_cast<double>(b + 1) / nb) ++b;
    conf[b] += v;
    pos[b] += truth[i];
    ++count[b];
  }
  double total = 0.0;
  const double n = static_cast<double>(p.size());
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    total += (c / n) * std::abs(pos[b] / c - conf[b] / c);
  }
  return total;
}

double nll(std::span<const double> p, std::span<const double> targets) {
  if (p.size() != targets.size()) throw UsageError("nll: length mismatch");
  if (p.empty()) throw UsageError("nll: empty input");
  return pseudo_label_ce(p, targets);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = {{"accuracy", accuracy}, {"auc", pu_auc}, {"ece", ece}, {"nll", nll}};
  j["pl_nll"] = pl_nll ? nlohmann::json(*pl_nll) : nlohmann::json(nullptr);
  return j;
}

EvalReport evaluate_predictions(std::span<const double> p, std::span<const int> truth,
                                std::size_t n_bins) {
  EvalReport r;
  r.accuracy = accuracy(p, truth);
  r.ece = ece(p, truth, n_bins);
  std::vector<double> targets(truth.begin(), truth.end());
  r.nll = nll(p, targets);
  std::vector<double> sp, sn;
  for (std::size_t i = 0; i < p.size(); ++i) (truth[i] == 1 ? sp : sn).push_back(p[i]);
  r.pu_auc = (sp.empty() || sn.empty()) ? 0.5 : pu_auc(sp, sn);
  return r;
}

}  // namespace puupl
