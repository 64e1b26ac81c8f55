#include "puupl/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "puupl/errors.hpp"
#include "puupl/puloss.hpp"
#include "puupl/random.hpp"

namespace puupl {

Ensemble::Ensemble(std::vector<std::size_t> layer_sizes, std::size_t members, double dropout_p,
                   std::uint64_t init_seed) {
  if (members == 0) throw ConfigError("ensemble size must be at least 1");
  members_.reserve(members);
  for (std::size_t k = 0; k < members; ++k) members_.emplace_back(layer_sizes, dropout_p);
  reinitialize(init_seed);
  initial_ = snapshot();
}

std::vector<ParamSnapshot> Ensemble::snapshot() const {
  std::vector<ParamSnapshot> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m.snapshot());
  return out;
}

void Ensemble::restore(std::span<const ParamSnapshot> snaps) {
  if (snaps.size() != members_.size())
    throw ShapeError("Ensemble::restore: snapshot has " + std::to_string(snaps.size()) +
                     " members, ensemble has " + std::to_string(members_.size()));
  for (std::size_t k = 0; k < members_.size(); ++k) members_[k].restore(snaps[k]);
}

void Ensemble::reinitialize(std::uint64_t seed) {
  const SeedStreams streams(seed);
  for (std::size_t k = 0; k < members_.size(); ++k) members_[k].initialize(streams.seed("member", {k}));
}

bool Ensemble::offer_best(double score) {
  if (best_score_ && !(score > *best_score_)) return false;
  best_score_ = score;
  best_ = snapshot();
  return true;
}

void Ensemble::restore_best() {
  if (best_.empty()) throw UsageError("Ensemble::restore_best: no best snapshot recorded");
  restore(best_);
}

void Ensemble::set_best(std::vector<ParamSnapshot> snaps, double score) {
  best_ = std::move(snaps);
  best_score_ = score;
}

Matrix predict_members(const Ensemble& ensemble, const Matrix& x, EstimatorKind estimator,
                       std::size_t n_passes, std::uint64_t dropout_seed) {
  if (estimator == EstimatorKind::ensemble) {
    Matrix out(x.rows(), static_cast<Eigen::Index>(ensemble.size()));
    for (std::size_t k = 0; k < ensemble.size(); ++k)
      out.col(static_cast<Eigen::Index>(k)) = sigmoid(ensemble.member(k).predict(x));
    return out;
  }
  if (n_passes == 0) throw ConfigError("MC dropout needs at least one forward pass");
  const Mlp& model = ensemble.member(0);
  if (!(model.dropout_p() > 0.0)) throw ConfigError("MC dropout needs dropout_p > 0");
  const SeedStreams streams(dropout_seed);
  Matrix out(x.rows(), static_cast<Eigen::Index>(n_passes));
  for (std::size_t s = 0; s < n_passes; ++s)
    out.col(static_cast<Eigen::Index>(s)) = sigmoid(model.predict(x, true, streams.seed("pass", {s})));
  return out;
}

const Vector& UncertaintyReport::of(UncertaintyKind kind) const {
  switch (kind) {
    case UncertaintyKind::epistemic: return epistemic;
    case UncertaintyKind::aleatoric: return aleatoric;
    case UncertaintyKind::total: return total;
  }
  return epistemic;
}

double binary_entropy(double p) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(q * std::log(q) + (1.0 - q) * std::log(1.0 - q));
}

UncertaintyReport decompose(const Matrix& probs) {
  if (probs.rows() == 0 || probs.cols() == 0) throw UsageError("decompose: empty prediction matrix");
  const Eigen::Index n = probs.rows();
  const Eigen::Index k = probs.cols();
  UncertaintyReport r;
  r.p_mean.resize(n);
  r.f_mean.resize(n);
  r.aleatoric.resize(n);
  r.total.resize(n);
  r.epistemic.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum_p = 0.0, sum_h = 0.0, sum_f = 0.0;
    bool all_equal = true;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double p = std::clamp(probs(i, j), kProbClamp, 1.0 - kProbClamp);
      sum_p += p;
      sum_h += binary_entropy(p);
      sum_f += std::log(p) - std::log1p(-p);
      all_equal = all_equal && probs(i, j) == probs(i, 0);
    }
    // Averaging K identical values need not round-trip; use the value itself.
    const double mean = all_equal ? std::clamp(probs(i, 0), kProbClamp, 1.0 - kProbClamp)
                                  : sum_p / static_cast<double>(k);
    const double ua = all_equal ? binary_entropy(mean) : sum_h / static_cast<double>(k);
    const double ut = binary_entropy(mean);
    r.p_mean[i] = mean;
    r.f_mean[i] = sum_f / static_cast<double>(k);
    r.aleatoric[i] = ua;
    r.total[i] = ut;
    r.epistemic[i] = std::max(0.0, ut - ua);
  }
  return r;
}

void write_uncertainty_csv(std::ostream& out, const UncertaintyReport& report,
                           std::span<const std::size_t> indices) {
  out << "index,p_mean,ua,ut,ue\n";
  out << std::setprecision(17);
  for (std::size_t i : indices) {
    const auto e = static_cast<Eigen::Index>(i);
    out << i << ',' << report.p_mean[e] << ',' << report.aleatoric[e] << ',' << report.total[e]
        << ',' << report.epistemic[e] << '\n';
  }
}

}  // namespace puupl
