#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "puupl/errors.hpp"
#include "puupl/puloss.hpp"

using namespace puupl;

namespace {

std::vector<double> random_logits(std::size_t n, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Central-difference gradient of a scalar function of one logit vector.
std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double eps = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x);
    x[i] = orig - eps;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

void expect_close_relative(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    EXPECT_LT(std::abs(a[i] - b[i]) / scale, tol) << "component " << i;
  }
}

}  // namespace

TEST(SigmoidLoss, Values) {
  const std::vector<double> zero{0.0};
  EXPECT_DOUBLE_EQ(sigmoid_loss(zero, 1), 0.5);
  const std::vector<double> ten{10.0};
  EXPECT_NEAR(sigmoid_loss(ten, 1), 1.0 / (1.0 + std::exp(10.0)), 1e-18);
  EXPECT_NEAR(sigmoid_loss(ten, 1), 4.5e-5, 1e-6);
  for (double f : {-3.0, 0.1, 2.7}) {
    const std::vector<double> s{f};
    EXPECT_NEAR(sigmoid_loss(s, 1) + sigmoid_loss(s, -1), 1.0, 1e-15);
  }
  EXPECT_THROW(sigmoid_loss(std::vector<double>{}, 1), UsageError);
  EXPECT_THROW(sigmoid_loss(zero, 0), UsageError);
}

TEST(SigmoidLoss, StrictlyDecreasingForPositives) {
  std::vector<double> s{0.5, -1.0, 2.0};
  const double base = sigmoid_loss(s, 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto t = s;
    t[i] += 0.1;
    EXPECT_LT(sigmoid_loss(t, 1), base);
  }
}

TEST(SigmoidLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (int y : {1, -1}) {
    const auto s = random_logits(30, rng);
    expect_close_relative(sigmoid_loss_gradient(s, y),
                          numeric_gradient([&](const auto& v) { return oracle::sigmoid_loss(v, y); }, s),
                          1e-5);
  }
}

TEST(PuRisk, MatchesDefinition) {
  const std::vector<double> p{1.4, -0.2}, u{-0.3, 1.2, 0.4};
  EXPECT_NEAR(upu_risk(p, u, 0.5), oracle::upu(p, u, 0.5), 1e-15);
  EXPECT_NEAR(nnpu_risk(p, u, 0.5), oracle::nnpu(p, u, 0.5), 1e-15);

  const auto r = NonNegativePuLoss(0.5).evaluate(p, u);
  EXPECT_NEAR(r.positive_term, 0.5 * oracle::sigmoid_loss(p, 1), 1e-15);
  EXPECT_NEAR(r.bracket, oracle::nnpu_bracket(p, u, 0.5), 1e-15);
}

TEST(PuRisk, NegativeUpuIsClampedByNnpu) {
  // Positives scored positive and unlabeled scored negative drive uPU below zero.
  const std::vector<double> p(10, 10.0), u(10, -10.0);
  const double prior = 0.5;
  EXPECT_LT(upu_risk(p, u, prior), 0.0);
  const NonNegativePuLoss nn(prior);
  const auto r = nn.evaluate(p, u);
  EXPECT_TRUE(r.clamped);
  EXPECT_NEAR(r.value, prior * oracle::sigmoid_loss(p, 1), 1e-15);
  for (double g : r.grad_unlabeled) EXPECT_EQ(g, 0.0);
}

TEST(PuRisk, NnpuDominatesUpu) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_logits(8, rng, 4.0);
    const auto u = random_logits(12, rng, 4.0);
    const double prior = 0.1 + 0.8 * std::uniform_real_distribution<double>()(rng);
    const double nn = nnpu_risk(p, u, prior), up = upu_risk(p, u, prior);
    EXPECT_GE(nn, up);
    EXPECT_GE(nn, 0.0);
    const bool bracket_nonnegative = oracle::nnpu_bracket(p, u, prior) >= 0.0;
    EXPECT_EQ(nn == up, bracket_nonnegative);
  }
}

TEST(PuRisk, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  const double prior = 0.4;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_logits(10, rng);
    const auto u = random_logits(20, rng);
    for (PuLossKind kind : {PuLossKind::upu, PuLossKind::nnpu}) {
      const auto loss = make_pu_loss({prior, kind, 0.1});
      const auto r = loss->evaluate(p, u);
      auto value = [&](const std::vector<double>& pp, const std::vector<double>& uu) {
        return kind == PuLossKind::upu ? oracle::upu(pp, uu, prior) : oracle::nnpu(pp, uu, prior);
      };
      if (std::abs(oracle::nnpu_bracket(p, u, prior)) < 1e-3) continue;  // kink
      expect_close_relative(r.grad_positive,
                            numeric_gradient([&](const auto& v) { return value(v, u); }, p), 1e-5);
      expect_close_relative(r.grad_unlabeled,
                            numeric_gradient([&](const auto& v) { return value(p, v); }, u), 1e-5);
    }
  }
}

TEST(PuRisk, RejectsEmptyPositives) {
  const UnbiasedPuLoss loss(0.5);
  EXPECT_THROW(loss.evaluate(std::vector<double>{}, std::vector<double>{1.0}), UsageError);
  const auto r = loss.evaluate(std::vector<double>{1.0}, std::vector<double>{});
  EXPECT_NEAR(r.value, oracle::upu({1.0}, {}, 0.5), 1e-15);
}

TEST(PuLossConfig, Validation) {
  EXPECT_THROW((PuLossConfig{0.0, PuLossKind::nnpu, 0.1}.validate()), ConfigError);
  EXPECT_THROW((PuLossConfig{1.0, PuLossKind::nnpu, 0.1}.validate()), ConfigError);
  EXPECT_THROW((PuLossConfig{0.5, PuLossKind::nnpu, 0.0}.validate()), ConfigError);
  EXPECT_THROW((PuLossConfig{0.5, PuLossKind::nnpu, 1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((PuLossConfig{0.5, PuLossKind::upu, 0.5}.validate()));
  EXPECT_EQ(make_pu_loss({0.5, PuLossKind::upu, 0.1})->name(), "upu");
  EXPECT_EQ(make_pu_loss({0.5, PuLossKind::nnpu, 0.1})->name(), "nnpu");
}

TEST(PseudoLabelCe, Values) {
  const std::vector<double> half{0.5};
  EXPECT_NEAR(pseudo_label_ce(half, half), std::log(2.0), 1e-15);
  const std::vector<double> p8{0.8};
  const double h = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2));
  EXPECT_NEAR(pseudo_label_ce(p8, p8), h, 1e-15);
  EXPECT_NEAR(h, 0.5004, 1e-4);
  // y = 0.8 is minimised at p = 0.8.
  for (double q : {0.7, 0.79, 0.81, 0.9}) EXPECT_GT(pseudo_label_ce(std::vector<double>{q}, p8), h);
  EXPECT_EQ(pseudo_label_ce(std::vector<double>{}, std::vector<double>{}), 0.0);
  const std::vector<double> zero{0.0}, one{1.0};
  EXPECT_TRUE(std::isfinite(pseudo_label_ce(zero, one)));
  EXPECT_NEAR(pseudo_label_ce(zero, one), -std::log(1e-12), 1e-9);
}

TEST(PseudoLabelCe, FromLogitsMatchesProbabilities) {
  std::mt19937_64 rng(8);
  const auto f = random_logits(30, rng);
  std::vector<double> y(30), p(30);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (std::size_t i = 0; i < 30; ++i) {
    y[i] = u(rng);
    p[i] = oracle::logistic(f[i]);
  }
  const auto ce = pseudo_label_ce_from_logits(f, y);
  EXPECT_NEAR(ce.value, oracle::bce(p, y), 1e-12);
  expect_close_relative(
      ce.grad_logits,
      numeric_gradient(
          [&](const std::vector<double>& v) {
            std::vector<double> q(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) q[i] = oracle::logistic(v[i]);
            return oracle::bce(q, y);
          },
          f),
      1e-5);
}

TEST(CombinedLoss, ConvexCombination) {
  EXPECT_NEAR(combine_losses(1.0, 0.5, 0.1, true), 0.55, 1e-15);
  EXPECT_EQ(combine_losses(1.0, 0.5, 0.1, false), 0.5);
  EXPECT_NEAR(combine_losses(1.0, 0.5, 1e-6, true), 0.5, 1e-6);
  // Monotone in each component.
  EXPECT_LT(combine_losses(1.0, 0.5, 0.3, true), combine_losses(1.1, 0.5, 0.3, true));
  EXPECT_LT(combine_losses(1.0, 0.5, 0.3, true), combine_losses(1.0, 0.6, 0.3, true));
}

TEST(CombinedLoss, EmptyPseudoSetIsPurePu) {
  std::mt19937_64 rng(9);
  const auto p = random_logits(5, rng), u = random_logits(9, rng);
  const PuLossConfig cfg{0.5, PuLossKind::nnpu, 0.1};
  const auto c = combined_loss(p, u, {}, {}, cfg);
  EXPECT_EQ(c.total, nnpu_risk(p, u, 0.5));
  EXPECT_TRUE(c.grad_pseudo.empty());
}

TEST(CombinedLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  const double prior = 0.5, lambda = 0.3;
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_logits(6, rng), u = random_logits(15, rng), l = random_logits(9, rng);
    std::vector<double> y(9);
    for (double& v : y) v = unit(rng);
    if (std::abs(oracle::nnpu_bracket(p, u, prior)) < 1e-3) continue;
    const auto c = combined_loss(p, u, l, y, PuLossConfig{prior, PuLossKind::nnpu, lambda});
    auto total = [&](const std::vector<double>& pp, const std::vector<double>& uu,
                     const std::vector<double>& ll) {
      std::vector<double> q(ll.size());
      for (std::size_t i = 0; i < ll.size(); ++i) q[i] = oracle::logistic(ll[i]);
      return lambda * oracle::bce(q, y) + (1 - lambda) * oracle::nnpu(pp, uu, prior);
    };
    EXPECT_NEAR(c.total, total(p, u, l), 1e-12);
    expect_close_relative(c.grad_positive, numeric_gradient([&](const auto& v) { return total(v, u, l); }, p), 1e-5);
    expect_close_relative(c.grad_unlabeled, numeric_gradient([&](const auto& v) { return total(p, v, l); }, u), 1e-5);
    expect_close_relative(c.grad_pseudo, numeric_gradient([&](const auto& v) { return total(p, u, v); }, l), 1e-5);
  }
}
