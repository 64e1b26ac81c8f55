#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "puupl/errors.hpp"
#include "puupl/selection.hpp"

using namespace puupl;

namespace {

std::vector<Candidate> random_pool(std::mt19937_64& rng, std::size_t n) {
  // Coarse uncertainty grid to force ties; indices shuffled.
  std::uniform_int_distribution<int> level(0, 9);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Candidate> pool;
  for (std::size_t i = 0; i < n; ++i) pool.push_back({idx[i] * 3, level(rng) * 0.01, p(rng)});
  return pool;
}

PUDataset toy_dataset(std::size_t n, std::size_t positives) {
  auto x = std::make_shared<const Matrix>(Matrix::Zero(static_cast<Eigen::Index>(n), 1));
  std::vector<std::size_t> p(positives);
  std::iota(p.begin(), p.end(), 0);
  return PUDataset(x, p);
}

}  // namespace

TEST(RankAndSelect, SpecExample) {
  const std::vector<Candidate> pool{{0, 0.01, 0.9}, {1, 0.2, 0.9}, {2, 0.03, 0.1}, {3, 0.04, 0.1}};
  const auto out = rank_and_select(pool, 2, 0.05);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].index, 0u);
  EXPECT_EQ(out[1].index, 2u);
  EXPECT_TRUE(rank_and_select(pool, 10, 0.005).empty());
  EXPECT_EQ(rank_and_select(pool, kUnlimited, std::numbers::ln2).size(), 4u);
  EXPECT_TRUE(rank_and_select(pool, 0, 1.0).empty());
}

TEST(RankAndSelect, TiesBreakByIndex) {
  const std::vector<Candidate> pool{{7, 0.01, 0.9}, {3, 0.01, 0.9}, {5, 0.01, 0.9}};
  const auto out = rank_and_select(pool, 2, 0.05);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].index, 3u);
  EXPECT_EQ(out[1].index, 5u);
}

TEST(RankAndSelect, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 40)(rng);
    const auto pool = random_pool(rng, n);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, 45)(rng);
    const double thr = std::uniform_int_distribution<int>(0, 10)(rng) * 0.01;
    EXPECT_EQ(rank_and_select(pool, t, thr), oracle::select(pool, t, thr));
  }
}

TEST(Balance, SpecExamples) {
  // 5 predicted positives, 3 negatives: keep 3 + 3, dropping the two most
  // uncertain positives.
  const std::vector<Candidate> sel{{0, 0.01, 0.9}, {1, 0.02, 0.8}, {2, 0.03, 0.7}, {3, 0.04, 0.95},
                                   {4, 0.05, 0.99}, {5, 0.01, 0.1}, {6, 0.02, 0.2}, {7, 0.03, 0.3}};
  const auto out = balance(sel, BalanceMode::equal, 1.0);
  ASSERT_EQ(out.size(), 6u);
  for (const auto& c : out) EXPECT_TRUE(c.index != 3 && c.index != 4);

  const std::vector<Candidate> all_pos{{0, 0.01, 0.9}, {1, 0.02, 0.8}};
  EXPECT_TRUE(balance(all_pos, BalanceMode::equal, 1.0).empty());
  EXPECT_EQ(balance(sel, BalanceMode::none, 1.0).size(), sel.size());
}

TEST(Balance, PriorRatio) {
  EXPECT_NEAR(balance_target(BalanceMode::prior_ratio, 1.0, 0.25), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(balance_target(BalanceMode::equal, 1.0, 0.25), 1.0);
  std::vector<Candidate> sel;
  for (std::size_t i = 0; i < 10; ++i) sel.push_back({i, 0.001 * i, 0.9});
  for (std::size_t i = 10; i < 16; ++i) sel.push_back({i, 0.001 * i, 0.1});
  // Target 1/3: 6 negatives support 2 positives.
  const auto out = balance(sel, BalanceMode::prior_ratio, 1.0 / 3.0);
  std::size_t pos = 0, neg = 0;
  for (const auto& c : out) (c.p_mean >= 0.5 ? pos : neg)++;
  EXPECT_EQ(pos, 2u);
  EXPECT_EQ(neg, 6u);
}

TEST(Balance, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pool = random_pool(rng, std::uniform_int_distribution<std::size_t>(0, 40)(rng));
    const auto selected = rank_and_select(pool, kUnlimited, 1.0);
    EXPECT_EQ(balance(selected, BalanceMode::equal, 1.0), oracle::balance_equal(selected));
  }
}

TEST(PseudoLabels, AssignSoftAndHard) {
  const auto data = toy_dataset(6, 2);
  Vector p(6);
  p << 1, 1, 0.97, 0.1, 0.6, 0.4;
  const std::size_t sel[] = {2, 3};
  const auto soft = assign_pseudo_labels(data, sel, p, true, false);
  EXPECT_EQ(soft.labels()[2], 0.97);
  EXPECT_EQ(soft.labels()[3], 0.1);
  EXPECT_EQ(soft.membership(2), Membership::pseudo);
  const auto hard = assign_pseudo_labels(data, sel, p, false, false);
  EXPECT_EQ(hard.labels()[2], 1.0 - 1e-6);
  EXPECT_EQ(hard.labels()[3], 1e-6);

  // Existing pseudo-labels stay fixed unless reassign_all is set.
  Vector p2 = p;
  p2[2] = 0.8;
  const std::size_t more[] = {4};
  const auto kept = assign_pseudo_labels(soft, more, p2, true, false);
  EXPECT_EQ(kept.labels()[2], 0.97);
  const auto redone = assign_pseudo_labels(soft, more, p2, true, true);
  EXPECT_EQ(redone.labels()[2], 0.8);

  const auto same = assign_pseudo_labels(data, std::span<const std::size_t>{}, p, true, false);
  EXPECT_EQ(same.revision(), data.revision());
  const std::size_t positive[] = {0};
  EXPECT_THROW(assign_pseudo_labels(data, positive, p, true, false), UsageError);
}

TEST(PseudoLabels, Unlabel) {
  const auto data = toy_dataset(6, 2);
  Vector p = Vector::Constant(6, 0.9);
  const std::size_t sel[] = {2, 3, 4};
  const auto labeled = assign_pseudo_labels(data, sel, p, true, false);
  Vector ue(6);
  ue << 0.9, 0.9, 0.4, 0.1, 0.35, 0.5;
  const auto removed = select_for_unlabeling(labeled, ue, 0.35);
  EXPECT_EQ(removed, (std::vector<std::size_t>{2, 4}));  // P indices 0,1 never scanned
  const auto back = pseudo_unlabel(labeled, removed);
  EXPECT_EQ(back.membership(2), Membership::unlabeled);
  EXPECT_EQ(back.labels()[2], 0.0);
  EXPECT_EQ(back.pseudo_labeled(), (std::vector<std::size_t>{3}));
  EXPECT_TRUE(select_for_unlabeling(labeled, Vector::Zero(6), 0.35).empty());
  EXPECT_EQ(select_for_unlabeling(labeled, Vector::Zero(6), 0.0).size(), 3u);
}
