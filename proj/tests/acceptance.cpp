// Acceptance checks. Prints one PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "puupl/config.hpp"
#include "puupl/engine.hpp"
#include "puupl/experiment.hpp"
#include "puupl/metrics.hpp"
#include "puupl/network.hpp"
#include "puupl/puloss.hpp"
#include "puupl/selection.hpp"
#include "puupl/uncertainty.hpp"

using namespace puupl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path work_dir() {
  static const fs::path dir = fs::current_path() / "acceptance_runs";
  return dir;
}

fs::path mnist_dir() {
  if (const char* env = std::getenv("PUUPL_MNIST_DIR")) return env;
  return PUUPL_MNIST_DIR;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string epochs_csv(const RunLog& log) {
  std::ostringstream out;
  log.write_epochs_csv(out);
  return out.str();
}

std::vector<double> as_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string list(const std::vector<double>& v, int digits = 4) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt(x, digits);
  return s;
}

// ---------------------------------------------------------------- 1

Outcome gradient_oracle() {
  Outcome out;
  const auto start = Clock::now();
  const std::vector<std::size_t> sizes{6, 10, 8, 1};
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0, clamped = 0;

  for (std::uint64_t b = 0; b < 20; ++b) {
    std::mt19937_64 rng(1000 + b);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto np = std::uniform_int_distribution<Eigen::Index>(3, 12)(rng);
    const auto nu = std::uniform_int_distribution<Eigen::Index>(5, 20)(rng);
    const auto nl = b % 4 == 0 ? 0 : std::uniform_int_distribution<Eigen::Index>(1, 10)(rng);
    const double prior = 0.2 + 0.7 * unit(rng);
    const double lambda = 0.05 + 0.9 * unit(rng);
    // Odd batches separate P from U so the nnPU bracket tends to go negative.
    const double shift = b % 2 ? 2.0 : 0.0;

    Matrix x(np + nu + nl, static_cast<Eigen::Index>(sizes.front()));
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        x(r, c) = normal(rng) + (r < np ? shift : (r < np + nu ? -shift : 0.0));
    std::vector<double> targets(static_cast<std::size_t>(nl));
    for (double& t : targets) t = 0.02 + 0.96 * unit(rng);

    Mlp net(sizes);
    net.initialize(b);
    for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] += 0.1 * normal(rng);
    const Vector theta = net.parameters();

    auto split_logits = [&](const std::vector<double>& f) {
      std::array<std::vector<double>, 3> parts;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(f.size()); ++i)
        parts[i < np ? 0 : (i < np + nu ? 1 : 2)].push_back(f[static_cast<std::size_t>(i)]);
      return parts;
    };

    enum class Kind { upu, nnpu, combined };
    for (Kind kind : {Kind::upu, Kind::nnpu, Kind::combined}) {
      // Analytic: library loss gradient w.r.t. logits, backpropagated.
      const Vector f = net.forward(x);
      const auto parts = split_logits(as_vector(f));
      Vector upstream = Vector::Zero(x.rows());
      auto scatter = [&](const std::vector<double>& g, Eigen::Index offset) {
        for (std::size_t i = 0; i < g.size(); ++i) upstream[offset + static_cast<Eigen::Index>(i)] = g[i];
      };
      if (kind == Kind::combined) {
        const auto loss = combined_loss(parts[0], parts[1], parts[2], targets,
                                        PuLossConfig{prior, PuLossKind::nnpu, lambda});
        scatter(loss.grad_positive, 0);
        scatter(loss.grad_unlabeled, np);
        scatter(loss.grad_pseudo, np + nu);
        clamped += loss.clamped;
      } else {
        std::unique_ptr<PuLoss> loss;
        if (kind == Kind::upu)
          loss = std::make_unique<UnbiasedPuLoss>(prior);
        else
          loss = std::make_unique<NonNegativePuLoss>(prior);
        const auto r = loss->evaluate(parts[0], parts[1]);
        scatter(r.grad_positive, 0);
        scatter(r.grad_unlabeled, np);
        clamped += r.clamped;
      }
      const Vector analytic = net.backward(upstream);
      net.clear_cache();

      // Numeric: oracle forward pass and oracle loss.
      auto oracle_loss = [&](const Vector& t) {
        const auto p = split_logits(oracle::mlp_forward(sizes, t, x));
        switch (kind) {
          case Kind::upu:
            return oracle::upu(p[0], p[1], prior);
          case Kind::nnpu:
            return oracle::nnpu(p[0], p[1], prior);
          case Kind::combined: {
            const double pu = oracle::nnpu(p[0], p[1], prior);
            if (p[2].empty()) return pu;
            std::vector<double> probs;
            for (double v : p[2]) probs.push_back(oracle::logistic(v));
            return lambda * oracle::bce(probs, targets) + (1.0 - lambda) * pu;
          }
        }
        return 0.0;
      };
      // ReLU signs plus the side of the nnPU kink.
      auto pattern = [&](const Vector& t) {
        std::vector<bool> p;
        const auto logits = split_logits(oracle::mlp_forward(sizes, t, x, &p));
        if (kind != Kind::upu) p.push_back(oracle::nnpu_bracket(logits[0], logits[1], prior) > 0.0);
        return p;
      };
      const auto check = oracle::finite_difference_check(oracle_loss, pattern, theta, analytic);
      worst = std::max(worst, check.max_relative_error);
      checked += check.checked;
      skipped += check.skipped;
    }
  }
  const double elapsed = seconds_since(start);
  out.detail << "max relative error " << std::scientific << std::setprecision(2) << worst << std::defaultfloat
             << " over " << checked << " components (" << skipped << " kink-crossing skipped, " << clamped
             << " clamped evaluations), " << fmt(elapsed, 2) << " s";
  out.require(worst < 1e-4, "relative error < 1e-4");
  out.require(checked > 0, "components checked");
  out.require(clamped > 0, "clamped branch exercised");
  out.require(elapsed < 10.0, "runtime < 10 s");
  return out;
}

// ---------------------------------------------------------------- 2

Outcome uncertainty_invariants() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t ks[] = {1, 2, 5, 10};
  const double extremes[] = {0.0, 1.0, 1e-15, 1.0 - 1e-15, 1e-13, 0.5};
  std::size_t violations = 0, zero_failures = 0, identical = 0;
  double worst_gap = 0.0;
  const int rows = 4;

  for (int m = 0; m < 100'000; ++m) {
    const std::size_t k = ks[m % 4];
    const bool same_columns = k > 1 && (m / 4) % 4 == 0;
    Matrix p(rows, static_cast<Eigen::Index>(k));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double u = unit(rng);
        const int style = (m + static_cast<int>(r)) % 5;
        if (style == 0)
          p(r, c) = extremes[std::uniform_int_distribution<int>(0, 5)(rng)];
        else if (style == 1)
          p(r, c) = std::pow(u, 8.0);
        else if (style == 2)
          p(r, c) = 1.0 - std::pow(u, 8.0);
        else
          p(r, c) = u;
      }
      if (same_columns)
        for (Eigen::Index c = 1; c < p.cols(); ++c) p(r, c) = p(r, 0);
    }
    identical += same_columns;
    const auto rep = decompose(p);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double ua = rep.aleatoric[r], ut = rep.total[r], ue = rep.epistemic[r];
      worst_gap = std::min({worst_gap, ut - ua, ua, ue});
      if (ut < ua - 1e-12 || ua < -1e-12 || ue < -1e-12) ++violations;
      if ((k == 1 || same_columns) && ue != 0.0) ++zero_failures;
      // Against the oracle entropy; entries are clamped before averaging.
      double mean_p = 0.0, mean_h = 0.0;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        mean_p += oracle::clamp_prob(p(r, c));
        mean_h += oracle::entropy(p(r, c));
      }
      mean_p /= static_cast<double>(k);
      mean_h /= static_cast<double>(k);
      if (std::abs(ua - mean_h) > 1e-12 || std::abs(ut - oracle::entropy(mean_p)) > 1e-12) ++violations;
    }
  }
  const double elapsed = seconds_since(start);
  out.detail << "100000 matrices (" << identical << " with identical columns), " << violations
             << " ordering/oracle violations, " << zero_failures << " non-zero epistemic where exact 0 is required, "
             << "most negative margin " << worst_gap << ", " << fmt(elapsed, 2) << " s";
  out.require(violations == 0, "u_t >= u_a >= 0, u_e >= 0");
  out.require(zero_failures == 0, "u_e == 0 exactly for K=1 and identical columns");
  out.require(elapsed < 10.0, "runtime < 10 s");
  return out;
}

// ---------------------------------------------------------------- 3

Outcome selection_oracle() {
  Outcome out;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t mismatches = 0, nonempty = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 50)(rng);
    const bool coarse = trial % 2 == 0;
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<Candidate> pool;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = coarse ? std::uniform_int_distribution<int>(0, 12)(rng) * 0.005
                              : unit(rng) * std::numbers::ln2 * 0.2;
      double p = unit(rng);
      if (i % 9 == 0) p = 0.5;
      pool.push_back({ids[i] * 7 + 1, u, p});
    }
    const std::size_t t_max =
        trial % 10 == 0 ? kUnlimited : std::uniform_int_distribution<std::size_t>(0, 60)(rng);
    const double t_l = coarse ? std::uniform_int_distribution<int>(0, 12)(rng) * 0.005
                              : unit(rng) * std::numbers::ln2 * 0.2;

    const auto chosen = rank_and_select(pool, t_max, t_l);
    const auto got = balance(chosen, BalanceMode::equal, 1.0);
    const auto expected_chosen = oracle::select(pool, t_max, t_l);
    const auto expected = oracle::balance_equal(expected_chosen);
    mismatches += !(chosen == expected_chosen && got == expected);
    nonempty += !got.empty();
  }
  out.detail << "1000 instances (n <= 50), " << nonempty << " with a non-empty balanced selection, "
             << mismatches << " mismatches";
  out.require(mismatches == 0, "exact match with brute force");
  return out;
}

// ---------------------------------------------------------------- 4

Outcome metric_oracles() {
  Outcome out;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t auc_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto np = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const auto nu = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const int levels = trial % 3 == 0 ? 0 : std::uniform_int_distribution<int>(1, 8)(rng);
    auto draw = [&] {
      return levels == 0 ? unit(rng) : std::uniform_int_distribution<int>(0, levels)(rng) / double(levels);
    };
    std::vector<double> p(np), u(nu);
    for (double& v : p) v = draw();
    for (double& v : u) v = draw();
    auc_mismatch += pu_auc(p, u) != oracle::pairwise_auc(p, u);
  }

  const double hand = ece(std::vector<double>{0.9, 0.9, 0.1, 0.1}, std::vector<int>{1, 0, 0, 0});
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const std::size_t bins = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Every third case sits on bin edges.
      p[i] = trial % 3 == 0 ? std::uniform_int_distribution<std::size_t>(0, bins)(rng) / double(bins) : unit(rng);
      y[i] = unit(rng) < p[i];
    }
    worst = std::max(worst, std::abs(ece(p, y, bins) - oracle::ece(p, y, bins)));
  }
  out.detail << "pu_auc: " << auc_mismatch << "/1000 mismatches; ece hand example " << hand
             << ", max oracle gap " << worst << " over 100 cases";
  out.require(auc_mismatch == 0, "pu_auc exact");
  out.require(std::abs(hand - 0.25) <= 1e-12, "ece example 0.25");
  out.require(worst <= 1e-12, "ece oracle within 1e-12");
  return out;
}

// ---------------------------------------------------------------- 5

Outcome nnpu_clamp() {
  Outcome out;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t cases = 0, below = 0, nonzero_grad = 0, not_clamped = 0, oracle_gap = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto np = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    const auto nu = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    const double prior = 0.05 + 0.9 * unit(rng);
    // P scored positive, U scored negative; margins from mild to saturated.
    const double scale = trial % 2 ? 30.0 : 5.0;
    std::vector<double> p(np), u(nu);
    for (double& v : p) v = 1.0 + scale * unit(rng);
    for (double& v : u) v = -1.0 - scale * unit(rng);
    if (upu_risk(p, u, prior) >= 0.0) continue;
    ++cases;

    const double floor_value = prior * sigmoid_loss(p, 1);
    const auto r = NonNegativePuLoss(prior).evaluate(p, u);
    const auto c = combined_loss(p, u, {}, {}, PuLossConfig{prior, PuLossKind::nnpu, 0.1});
    below += nnpu_risk(p, u, prior) < floor_value || r.value < floor_value || c.total < floor_value;
    not_clamped += !r.clamped || !c.clamped;
    for (double g : r.grad_unlabeled) nonzero_grad += g != 0.0;
    for (double g : c.grad_unlabeled) nonzero_grad += g != 0.0;
    oracle_gap += std::abs(r.value - prior * oracle::sigmoid_loss(p, 1)) > 1e-15;
  }
  out.detail << cases << " adversarial sets with uPU < 0; " << below << " below pi*l(P,1), " << not_clamped
             << " not on the clamped branch, " << nonzero_grad << " non-zero U-gradients";
  out.require(cases >= 1000, "enough adversarial sets");
  out.require(below == 0, "nnPU >= pi*l(P,1)");
  out.require(not_clamped == 0, "clamped branch taken");
  out.require(nonzero_grad == 0, "zero U-gradient");
  out.require(oracle_gap == 0, "value equals oracle pi*l(P,1)");
  return out;
}

// ---------------------------------------------------------------- 6, 8, 9, 10

json gaussian_config(const fs::path& output) {
  return {{"dataset",
           {{"source", "gaussians"},
            {"n_labeled_positives", 50},
            {"validation_size", 500},
            {"gaussians", {{"n", 1500}, {"n_test", 10000}, {"prior", 0.5}, {"separation", 4.0}, {"dim", 2}}}}},
          {"network", {{"hidden", {32, 32}}}},
          {"optimizer", {{"lr", 1e-3}, {"batch_size", 64}}},
          {"puupl",
           {{"lambda", 0.1},
            {"ensemble_size", 2},
            {"max_new_labels", 100},
            {"select_threshold", 0.05},
            {"unlabel_threshold", 0.35},
            {"max_iterations", 5},
            {"patience", 0},
            {"epochs_per_iteration", 30}}},
          {"seeds", {1, 2, 3}},
          {"output_dir", output.string()}};
}

ExperimentOptions quiet_options(std::size_t jobs = 1) {
  ExperimentOptions o;
  o.quiet = true;
  o.jobs = jobs;
  return o;
}

json nnpu_only(json cfg) {
  // One network trained for the same epoch budget as the whole loop.
  const auto iterations = cfg["puupl"]["max_iterations"].get<std::size_t>();
  const auto epochs = cfg["puupl"]["epochs_per_iteration"].get<std::size_t>();
  cfg["puupl"]["pseudo_labeling"] = false;
  cfg["puupl"]["ensemble_size"] = 1;
  cfg["puupl"]["epochs_per_iteration"] = iterations * epochs;
  return cfg;
}

Outcome gaussians_end_to_end() {
  Outcome out;
  const auto start = Clock::now();
  const auto base = gaussian_config(work_dir() / "gaussians" / "puupl");
  auto baseline_cfg = nnpu_only(base);
  baseline_cfg["output_dir"] = (work_dir() / "gaussians" / "nnpu").string();

  const auto baseline = run_experiment(parse_config_json(baseline_cfg), quiet_options());
  const auto puupl = run_experiment(parse_config_json(base), quiet_options());
  const double elapsed = seconds_since(start);

  std::vector<double> base_acc, puupl_acc, first_pl;
  for (const auto& s : baseline.seeds) base_acc.push_back(s.result.test->accuracy);
  for (const auto& s : puupl.seeds) {
    puupl_acc.push_back(s.result.test->accuracy);
    const auto& its = s.result.log.iterations;
    first_pl.push_back(!its.empty() && its.front().pl_accuracy ? *its.front().pl_accuracy : 0.0);
  }
  const double bayes = oracle::normal_cdf(2.0);
  out.detail << "Bayes " << fmt(bayes) << "; nnPU accuracy " << fmt(mean_of(base_acc)) << " (" << list(base_acc)
             << "); PUUPL " << fmt(mean_of(puupl_acc)) << " (" << list(puupl_acc)
             << "); first-iteration pseudo-label accuracy " << list(first_pl) << "; " << fmt(elapsed, 1) << " s";
  out.require(mean_of(base_acc) >= 0.93, "baseline >= 0.93");
  out.require(mean_of(puupl_acc) >= mean_of(base_acc) - 0.005, "PUUPL >= baseline - 0.005");
  out.require(*std::min_element(first_pl.begin(), first_pl.end()) >= 0.95, "first-iteration PL accuracy >= 0.95");
  out.require(elapsed < 120.0, "runtime < 2 min");
  return out;
}

Outcome degeneracy() {
  Outcome out;
  std::size_t identical = 0, total = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto cfg = parse_config_json(gaussian_config(work_dir() / "unused"));
    const auto data = prepare_data(cfg.dataset, seed);
    auto plain = cfg.engine;
    plain.puupl.pseudo_labeling = false;
    const auto reference = epochs_csv(run(data.split.train, data.split.validation, plain, seed).log);

    auto zero_budget = cfg.engine;
    zero_budget.puupl.max_new_labels = 0;
    auto zero_threshold = cfg.engine;
    zero_threshold.puupl.select_threshold = 0.0;
    for (const auto& variant : {zero_budget, zero_threshold}) {
      const auto r = run(data.split.train, data.split.validation, variant, seed);
      identical += epochs_csv(r.log) == reference && r.final_train.pseudo_labeled().empty();
      ++total;
    }
  }
  out.detail << identical << "/" << total << " runs (T=0 and t_l=0, 3 seeds) bit-identical to plain nnPU";
  out.require(identical == total, "bit-identical epoch traces");
  return out;
}

Outcome determinism() {
  Outcome out;
  auto cfg = gaussian_config(work_dir() / "determinism" / "a");
  cfg["puupl"]["max_iterations"] = 3;
  cfg["puupl"]["epochs_per_iteration"] = 10;
  run_experiment(parse_config_json(cfg), quiet_options(1));
  cfg["output_dir"] = (work_dir() / "determinism" / "b").string();
  run_experiment(parse_config_json(cfg), quiet_options(3));

  std::size_t compared = 0, equal = 0;
  const auto a = work_dir() / "determinism" / "a", b = work_dir() / "determinism" / "b";
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || (ext != ".csv" && ext != ".jsonl")) continue;
    const auto other = b / fs::relative(entry.path(), a);
    ++compared;
    equal += fs::exists(other) && slurp(entry.path()) == slurp(other);
  }
  out.detail << equal << "/" << compared << " RunLog files byte-identical across two runs (serial vs 3 jobs)";
  out.require(compared > 0 && equal == compared, "byte-identical CSVs");
  return out;
}

Outcome naive_pl_mode() {
  Outcome out;
  const auto text = R"({"puupl": {"naive_pl": true, "balance": "none", "max_new_labels": 80,
                                   "uncertainty": "aleatoric", "max_iterations": 2,
                                   "epochs_per_iteration": 10},
                        "dataset": {"n_labeled_positives": 50, "validation_size": 200,
                                    "gaussians": {"n": 1200}},
                        "network": {"hidden": [32, 32]}})";
  const auto cfg = parse_config_json(json::parse(text));
  out.require(cfg.engine.puupl.naive_pl, "naive_pl parsed from config");

  const auto data = prepare_data(cfg.dataset, 7);
  RunOptions opts;
  std::size_t iterations = 0, misranked = 0, added = 0;
  opts.hooks.on_iteration_end = [&](const IterationOutcome& o, const PUDataset& before, const PUDataset& after,
                                    const UncertaintyReport* rep) {
    ++iterations;
    added += o.n_newly_labeled;
    // Every new pseudo-label is at least as confident as every sample left in U.
    double weakest_taken = std::numeric_limits<double>::infinity(), strongest_left = 0.0;
    for (std::size_t i : before.unlabeled()) {
      const double c = std::abs(rep->p_mean[static_cast<Eigen::Index>(i)] - 0.5);
      if (after.membership(i) == Membership::pseudo)
        weakest_taken = std::min(weakest_taken, c);
      else
        strongest_left = std::max(strongest_left, c);
    }
    misranked += o.n_newly_labeled > 0 && weakest_taken < strongest_left;
  };
  const auto r = run(data.split.train, data.split.validation, cfg.engine, 7, opts);

  // The uncertainty kind plays no part in naive ranking.
  auto epistemic = cfg.engine;
  epistemic.puupl.uncertainty = UncertaintyKind::epistemic;
  const auto same = run(data.split.train, data.split.validation, epistemic, 7);

  out.detail << iterations << " iterations, " << added << " pseudo-labels ranked by |p - 0.5|, " << misranked
             << " ranking violations";
  out.require(iterations == 2 && added > 0, "loop ran with pseudo-labels");
  out.require(misranked == 0, "ranking by raw sigmoid confidence");
  out.require(epochs_csv(same.log) == epochs_csv(r.log), "uncertainty kind ignored");
  return out;
}

// ---------------------------------------------------------------- 7

Outcome mnist_direction() {
  Outcome out;
  const auto dir = mnist_dir();
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                        "t10k-labels-idx1-ubyte"}) {
    if (!fs::exists(dir / f)) {
      out.require(false, (dir / f).string() + " present (set PUUPL_MNIST_DIR)");
      return out;
    }
  }
  const auto start = Clock::now();
  const json puupl = {
      {"dataset",
       {{"source", "idx"},
        {"train_images", (dir / "train-images-idx3-ubyte").string()},
        {"train_labels", (dir / "train-labels-idx1-ubyte").string()},
        {"test_images", (dir / "t10k-images-idx3-ubyte").string()},
        {"test_labels", (dir / "t10k-labels-idx1-ubyte").string()},
        {"positive_class_ids", {1, 3, 5, 7, 9}},
        {"n_labeled_positives", 1000},
        {"validation_size", 1000},
        {"max_train_samples", 11000}}},
      {"network", {{"hidden", {300, 300, 300, 300}}}},
      {"optimizer", {{"lr", 3e-4}, {"batch_size", 128}}},
      {"eval", {{"criterion", "accuracy"}}},
      {"puupl", {{"max_new_labels", 2000}, {"max_iterations", 8}, {"epochs_per_iteration", 8}, {"patience", 0}}},
      {"seeds", {1, 2, 3}},
      {"output_dir", (work_dir() / "mnist" / "puupl").string()}};
  json nnpu = puupl;
  nnpu["puupl"]["pseudo_labeling"] = false;
  nnpu["puupl"]["ensemble_size"] = 1;
  nnpu["puupl"]["epochs_per_iteration"] = 40;
  nnpu["output_dir"] = (work_dir() / "mnist" / "nnpu").string();
  json naive = puupl;
  naive["puupl"]["naive_pl"] = true;
  naive["output_dir"] = (work_dir() / "mnist" / "naive").string();

  const std::size_t jobs = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 3);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> metrics;
  for (const auto& [name, cfg] : {std::pair{"nnPU", nnpu}, std::pair{"PUUPL", puupl}, std::pair{"naive PL", naive}}) {
    const auto r = run_experiment(parse_config_json(cfg), quiet_options(jobs));
    for (const auto& s : r.seeds) {
      metrics[name].first.push_back(s.result.test->accuracy);
      metrics[name].second.push_back(s.result.test->ece);
    }
  }
  const double elapsed = seconds_since(start);
  for (const char* name : {"nnPU", "naive PL", "PUUPL"}) {
    const auto& [acc, ece_values] = metrics[name];
    out.detail << name << " accuracy " << fmt(mean_of(acc)) << " (" << list(acc) << ") ECE "
               << fmt(mean_of(ece_values)) << " (" << list(ece_values) << "); ";
  }
  out.detail << fmt(elapsed / 60.0, 1) << " min";
  out.require(mean_of(metrics["PUUPL"].first) >= mean_of(metrics["nnPU"].first), "PUUPL accuracy >= nnPU");
  out.require(mean_of(metrics["PUUPL"].second) <= mean_of(metrics["nnPU"].second), "PUUPL ECE <= nnPU");
  out.require(elapsed < 1800.0, "runtime < 30 min");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"uncertainty invariants", uncertainty_invariants},
      {"selection oracle", selection_oracle},
      {"metric oracles", metric_oracles},
      {"nnPU clamp", nnpu_clamp},
      {"synthetic Gaussians end to end", gaussians_end_to_end},
      {"MNIST direction of effect", mnist_direction},
      {"degeneracy to plain nnPU", degeneracy},
      {"determinism", determinism},
      {"naive pseudo-labeling mode", naive_pl_mode},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  fs::remove_all(work_dir());
  fs::create_directories(work_dir());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail.str()
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
