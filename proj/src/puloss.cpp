#include "puupl/puloss.hpp"

#include <algorithm>
#include <cmath>

#include "puupl/errors.hpp"
#include "puupl/network.hpp"

namespace puupl {

void PuLossConfig::validate() const {
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("prior must lie in (0,1)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0,1)");
}

namespace {

double mean_sigmoid_loss(std::span<const double> logits, int y) {
  if (logits.empty()) return 0.0;
  double sum = 0.0;
  for (double f : logits) sum += sigmoid(-y * f);
  return sum / static_cast<double>(logits.size());
}

// Gradient of the mean loss, scaled by `weight`, accumulated into `out`.
void accumulate_gradient(std::span<const double> logits, int y, double weight,
                         std::vector<double>& out) {
  out.resize(logits.size(), 0.0);
  if (logits.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double s = sigmoid(-y * logits[i]);
    out[i] += weight * (-y) * s * (1.0 - s) * inv_n;
  }
}

void require_positive_set(std::span<const double> positive_logits) {
  if (positive_logits.empty()) throw UsageError("PU risk: the positive set is empty");
}

}  // namespace

double sigmoid_loss(std::span<const double> logits, int y) {
  if (logits.empty()) throw UsageError("sigmoid_loss: empty set");
  if (y != 1 && y != -1) throw UsageError("sigmoid_loss: y must be +1 or -1");
  return mean_sigmoid_loss(logits, y);
}

std::vector<double> sigmoid_loss_gradient(std::span<const double> logits, int y) {
  if (logits.empty()) throw UsageError("sigmoid_loss_gradient: empty set");
  std::vector<double> g;
  accumulate_gradient(logits, y, 1.0, g);
  return g;
}

PuRisk UnbiasedPuLoss::evaluate(std::span<const double> p, std::span<const double> u) const {
  require_positive_set(p);
  PuRisk r;
  r.positive_term = prior_ * mean_sigmoid_loss(p, +1);
  r.bracket = mean_sigmoid_loss(u, -1) - prior_ * mean_sigmoid_loss(p, -1);
  r.value = r.positive_term + r.bracket;
  accumulate_gradient(p, +1, prior_, r.grad_positive);
  accumulate_gradient(p, -1, -prior_, r.grad_positive);
  accumulate_gradient(u, -1, 1.0, r.grad_unlabeled);
  return r;
}

PuRisk NonNegativePuLoss::evaluate(std::span<const double> p, std::span<const double> u) const {
  require_positive_set(p);
  PuRisk r;
  r.positive_term = prior_ * mean_sigmoid_loss(p, +1);
  r.bracket = mean_sigmoid_loss(u, -1) - prior_ * mean_sigmoid_loss(p, -1);
  accumulate_gradient(p, +1, prior_, r.grad_positive);
  if (r.bracket >= 0.0) {
    r.value = r.positive_term + r.bracket;
    accumulate_gradient(p, -1, -prior_, r.grad_positive);
    accumulate_gradient(u, -1, 1.0, r.grad_unlabeled);
  } else {
    r.value = r.positive_term;
    r.clamped = true;
    r.grad_unlabeled.assign(u.size(), 0.0);
  }
  return r;
}

std::unique_ptr<PuLoss> make_pu_loss(const PuLossConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case PuLossKind::upu: return std::make_unique<UnbiasedPuLoss>(cfg.prior);
    case PuLossKind::nnpu: return std::make_unique<NonNegativePuLoss>(cfg.prior);
  }
  throw ConfigError("unknown PU loss kind");
}

double upu_risk(std::span<const double> p, std::span<const double> u, double prior) {
  return UnbiasedPuLoss(prior).evaluate(p, u).value;
}

double nnpu_risk(std::span<const double> p, std::span<const double> u, double prior) {
  return NonNegativePuLoss(prior).evaluate(p, u).value;
}

double pseudo_label_ce(std::span<const double> probabilities, std::span<const double> targets) {
  if (probabilities.size() != targets.size())
    throw UsageError("pseudo_label_ce: predictions and targets differ in length");
  if (probabilities.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbClamp, 1.0 - kProbClamp);
    const double y = targets[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(probabilities.size());
}

CrossEntropy pseudo_label_ce_from_logits(std::span<const double> logits,
                                         std::span<const double> targets) {
  if (logits.size() != targets.size())
    throw UsageError("pseudo_label_ce: logits and targets differ in length");
  CrossEntropy out;
  out.grad_logits.assign(logits.size(), 0.0);
  if (logits.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(logits[i]);
    probs[i] = p;
    // Inside the clamp the derivative of the BCE w.r.t. the logit is p - y.
    if (p > kProbClamp && p < 1.0 - kProbClamp) out.grad_logits[i] = (p - targets[i]) * inv_n;
  }
  out.value = pseudo_label_ce(probs, targets);
  return out;
}

double combine_losses(double pseudo_label_loss, double pu_loss, double lambda, bool has_pseudo) {
  if (!has_pseudo) return pu_loss;
  return lambda * pseudo_label_loss + (1.0 - lambda) * pu_loss;
}

CombinedLoss combined_loss(std::span<const double> positive_logits,
                           std::span<const double> unlabeled_logits,
                           std::span<const double> pseudo_logits,
                           std::span<const double> pseudo_targets, const PuLoss& pu_loss,
                           double lambda) {
  const bool has_pseudo = !pseudo_logits.empty();
  const double w_pl = has_pseudo ? lambda : 0.0;
  const double w_pu = 1.0 - w_pl;

  PuRisk risk = pu_loss.evaluate(positive_logits, unlabeled_logits);
  CrossEntropy ce = pseudo_label_ce_from_logits(pseudo_logits, pseudo_targets);

  CombinedLoss out;
  out.pu = risk.value;
  out.pl = ce.value;
  out.clamped = risk.clamped;
  out.total = combine_losses(ce.value, risk.value, lambda, has_pseudo);
  out.grad_positive = std::move(risk.grad_positive);
  out.grad_unlabeled = std::move(risk.grad_unlabeled);
  out.grad_pseudo = std::move(ce.grad_logits);
  for (double& g : out.grad_positive) g *= w_pu;
  for (double& g : out.grad_unlabeled) g *= w_pu;
  for (double& g : out.grad_pseudo) g *= w_pl;
  return out;
}

CombinedLoss combined_loss(std::span<const double> positive_logits,
                           std::span<const double> unlabeled_logits,
                           std::span<const double> pseudo_logits,
                           std::span<const double> pseudo_targets, const PuLossConfig& cfg) {
  const auto loss = make_pu_loss(cfg);
  return combined_loss(positive_logits, unlabeled_logits, pseudo_logits, pseudo_targets, *loss,
                       cfg.lambda);
}

}  // namespace puupl
