#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "puupl/dataset.hpp"
#include "puupl/network.hpp"

namespace puupl {

enum class EstimatorKind { ensemble, mc_dropout };
enum class UncertaintyKind { epistemic, aleatoric, total };

/// K identically shaped networks, their initial parameters and the best
/// parameters seen so far according to the validation criterion.
class Ensemble {
 public:
  Ensemble(std::vector<std::size_t> layer_sizes, std::size_t members, double dropout_p,
           std::uint64_t init_seed);

  std::size_t size() const { return members_.size(); }
  Mlp& member(std::size_t k) { return members_.at(k); }
  const Mlp& member(std::size_t k) const { return members_.at(k); }
  const std::vector<std::size_t>& layer_sizes() const { return members_.front().layer_sizes(); }

  std::vector<ParamSnapshot> snapshot() const;
  void restore(std::span<const ParamSnapshot> snaps);

  const std::vector<ParamSnapshot>& initial() const { return initial_; }
  void restore_initial() { restore(initial_); }
  // New random weights for every member; the stored initial snapshot is kept.
  void reinitialize(std::uint64_t seed);

  // Stores the current parameters as best when `score` beats the best so far.
  bool offer_best(double score);
  std::optional<double> best_score() const { return best_score_; }
  const std::vector<ParamSnapshot>& best() const { return best_; }
  void restore_best();
  void set_best(std::vector<ParamSnapshot> snaps, double score);

 private:
  std::vector<Mlp> members_;
  std::vector<ParamSnapshot> initial_;
  std::vector<ParamSnapshot> best_;
  std::optional<double> best_score_;
};

// Sigmoid outputs, one column per ensemble member (ensemble mode) or per
// stochastic forward pass of member 0 (MC-dropout mode, n_passes columns).
Matrix predict_members(const Ensemble& ensemble, const Matrix& x, EstimatorKind estimator,
                       std::size_t n_passes, std::uint64_t dropout_seed);

/// Per-sample predictive summary and entropy decomposition (nats).
struct UncertaintyReport {
  Vector p_mean;
  Vector f_mean;
  Vector aleatoric;
  Vector total;
  Vector epistemic;

  std::size_t size() const { return static_cast<std::size_t>(p_mean.size()); }
  const Vector& of(UncertaintyKind kind) const;
};

// Binary entropy in nats with p clamped to [1e-12, 1 - 1e-12].
double binary_entropy(double p);

// Aleatoric = mean member entropy, total = entropy of the mean prediction,
// epistemic = total - aleatoric (floored at 0; exactly 0 when all members agree).
UncertaintyReport decompose(const Matrix& member_probabilities);

// CSV: index,p_mean,ua,ut,ue for the given sample indices.
void write_uncertainty_csv(std::ostream& out, const UncertaintyReport& report,
                           std::span<const std::size_t> indices);

}  // namespace puupl
