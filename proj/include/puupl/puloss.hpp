#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace puupl {

enum class PuLossKind { upu, nnpu };

struct PuLossConfig {
  double prior = 0.5;  // pi = p(y = 1)
  PuLossKind kind = PuLossKind::nnpu;
  double lambda = 0.1;  // weight of the pseudo-label term

  void validate() const;
};

// Mean sigmoid loss 1 / (1 + exp(y * f)) over logits f, y in {-1, +1}.
double sigmoid_loss(std::span<const double> logits, int y);
// Gradient of sigmoid_loss w.r.t. each logit.
std::vector<double> sigmoid_loss_gradient(std::span<const double> logits, int y);

/// Value and logit gradients of a PU risk on one (P, U) sample.
struct PuRisk {
  double value = 0.0;
  double positive_term = 0.0;  // pi * l(P, +1)
  double bracket = 0.0;        // l(U, -1) - pi * l(P, -1)
  bool clamped = false;        // nnPU max{0, .} took the zero branch
  std::vector<double> grad_positive;
  std::vector<double> grad_unlabeled;
};

/// Pluggable PU risk estimator. New estimators (imbalance- or bias-aware
/// variants) implement evaluate() and are selected by make_pu_loss().
class PuLoss {
 public:
  virtual ~PuLoss() = default;
  virtual std::string_view name() const = 0;
  // P must be non-empty; an empty U contributes l(U, -1) = 0.
  virtual PuRisk evaluate(std::span<const double> positive_logits,
                          std::span<const double> unlabeled_logits) const = 0;
};

class UnbiasedPuLoss final : public PuLoss {
 public:
  explicit UnbiasedPuLoss(double prior) : prior_(prior) {}
  std::string_view name() const override { return "upu"; }
  PuRisk evaluate(std::span<const double> positive_logits,
                  std::span<const double> unlabeled_logits) const override;

 private:
  double prior_;
};

// max{0, bracket} with zero gradient through the bracket when it is negative.
class NonNegativePuLoss final : public PuLoss {
 public:
  explicit NonNegativePuLoss(double prior) : prior_(prior) {}
  std::string_view name() const override { return "nnpu"; }
  PuRisk evaluate(std::span<const double> positive_logits,
                  std::span<const double> unlabeled_logits) const override;

 private:
  double prior_;
};

std::unique_ptr<PuLoss> make_pu_loss(const PuLossConfig& cfg);

double upu_risk(std::span<const double> positive_logits, std::span<const double> unlabeled_logits,
                double prior);
double nnpu_risk(std::span<const double> positive_logits, std::span<const double> unlabeled_logits,
                 double prior);

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

// Mean binary cross-entropy of probabilities against soft targets.
// Empty input contributes 0.
double pseudo_label_ce(std::span<const double> probabilities, std::span<const double> targets);

struct CrossEntropy {
  double value = 0.0;
  std::vector<double> grad_logits;
};
// Same loss evaluated from logits, with its gradient w.r.t. the logits.
CrossEntropy pseudo_label_ce_from_logits(std::span<const double> logits,
                                         std::span<const double> targets);

/// lambda * L_L + (1 - lambda) * L_PU, or L_PU alone when L is empty.
struct CombinedLoss {
  double total = 0.0;
  double pu = 0.0;
  double pl = 0.0;
  bool clamped = false;
  std::vector<double> grad_positive;
  std::vector<double> grad_unlabeled;
  std::vector<double> grad_pseudo;
};

double combine_losses(double pseudo_label_loss, double pu_loss, double lambda, bool has_pseudo);

CombinedLoss combined_loss(std::span<const double> positive_logits,
                           std::span<const double> unlabeled_logits,
                           std::span<const double> pseudo_logits,
                           std::span<const double> pseudo_targets, const PuLoss& pu_loss,
                           double lambda);
CombinedLoss combined_loss(std::span<const double> positive_logits,
                           std::span<const double> unlabeled_logits,
                           std::span<const double> pseudo_logits,
                           std::span<const double> pseudo_targets, const PuLossConfig& cfg);

}  // namespace puupl
