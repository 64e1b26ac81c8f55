#include "puupl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "puupl/errors.hpp"

namespace puupl {

void PuuplConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("puupl.lambda must lie in (0,1)");
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("puupl.prior must lie in (0,1)");
  if (ensemble_size < 1) throw ConfigError("puupl.ensemble_size must be at least 1");
  const double ln2 = std::numbers::ln2;
  if (!(select_threshold >= 0.0 && select_threshold <= ln2))
    throw ConfigError("puupl.select_threshold must lie in [0, ln 2]");
  if (!(unlabel_threshold >= 0.0 && unlabel_threshold <= ln2))
    throw ConfigError("puupl.unlabel_threshold must lie in [0, ln 2]");
  if (select_threshold > unlabel_threshold)
    throw ConfigError("puupl.select_threshold must not exceed puupl.unlabel_threshold");
  if (!(balance_ratio > 0.0)) throw ConfigError("puupl.balance_ratio must be positive");
  if (balance == BalanceMode::equal && balance_ratio != 1.0)
    throw ConfigError("puupl.balance_ratio must be 1 when puupl.balance is 'equal'");
  if (max_iterations < 1) throw ConfigError("puupl.max_iterations must be at least 1");
  if (epochs_per_iteration < 1) throw ConfigError("puupl.epochs_per_iteration must be at least 1");
}

void EngineConfig::validate() const {
  puupl.validate();
  if (optimizer.batch_size < 1) throw ConfigError("optimizer.batch_size must be at least 1");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be positive");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (!(optimizer.lr_decay_gamma > 0.0 && optimizer.lr_decay_gamma <= 1.0))
    throw ConfigError("optimizer.lr_decay_gamma must lie in (0,1]");
  if (!(model.dropout_p >= 0.0 && model.dropout_p < 1.0))
    throw ConfigError("network.dropout must lie in [0,1)");
  for (std::size_t h : model.hidden)
    if (h == 0) throw ConfigError("network.hidden widths must be positive");
  if (puupl.estimator == EstimatorKind::mc_dropout && !(model.dropout_p > 0.0))
    throw ConfigError("network.dropout must be > 0 with puupl.estimator 'mc_dropout'");
  if (ece_bins < 1) throw ConfigError("eval.bins must be at least 1");
}

std::size_t EngineConfig::trained_members() const {
  return puupl.estimator == EstimatorKind::ensemble ? puupl.ensemble_size : 1;
}

std::vector<std::size_t> EngineConfig::layer_sizes(std::size_t input_dim) const {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), model.hidden.begin(), model.hidden.end());
  sizes.push_back(1);
  return sizes;
}

Vector ensemble_probability(const Ensemble& ensemble, const Matrix& x) {
  Vector sum = Vector::Zero(x.rows());
  for (std::size_t k = 0; k < ensemble.size(); ++k) sum += sigmoid(ensemble.member(k).predict(x));
  return sum / static_cast<double>(ensemble.size());
}

namespace {

std::vector<double> gather(const Vector& v, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[static_cast<Eigen::Index>(i)]);
  return out;
}

std::optional<double> validation_ece(const Vector& p, const PUDataset& val, std::size_t bins) {
  if (!val.has_truth()) return std::nullopt;
  const auto& truth = val.truth(EvaluationOnly{});
  return ece(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), truth, bins);
}

double score_from(const Vector& p, const PUDataset& val, ValidationCriterion criterion) {
  if (criterion == ValidationCriterion::accuracy) {
    const auto& truth = val.truth(EvaluationOnly{});
    return accuracy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), truth);
  }
  std::vector<std::size_t> rest;
  rest.reserve(val.size());
  for (std::size_t i = 0; i < val.size(); ++i)
    if (val.membership(i) != Membership::positive) rest.push_back(i);
  if (val.positives().empty() || rest.empty())
    throw ConfigError("PU-AUC validation needs labeled positives and unlabeled samples");
  return pu_auc(gather(p, val.positives()), gather(p, rest));
}

}  // namespace

double validation_score(const Ensemble& ensemble, const PUDataset& validation,
                        ValidationCriterion criterion) {
  return score_from(ensemble_probability(ensemble, validation.features()), validation, criterion);
}

InnerResult train_inner(Ensemble& ensemble, const PUDataset& train, const PUDataset& validation,
                        const EngineConfig& cfg, const SeedStreams& streams, std::size_t iteration,
                        RunLog& log) {
  const PuLossConfig loss_cfg{cfg.puupl.prior, cfg.puupl.loss, cfg.puupl.lambda};
  const auto pu_loss = make_pu_loss(loss_cfg);

  AdamOptions adam_opts;
  adam_opts.learning_rate = cfg.optimizer.learning_rate;
  adam_opts.weight_decay = cfg.optimizer.weight_decay;
  adam_opts.lr_decay_gamma = cfg.optimizer.lr_decay_gamma;
  std::vector<AdamState> optimizers;
  for (std::size_t k = 0; k < ensemble.size(); ++k)
    optimizers.emplace_back(ensemble.member(k).parameter_count(), adam_opts);

  const Matrix& x = train.features();
  const auto labels = train.labels();
  const std::vector<std::size_t>& positives = train.positives();
  std::vector<std::size_t> others;
  others.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.membership(i) != Membership::positive) others.push_back(i);

  // Every minibatch gets at least one labeled positive.
  const std::size_t bs = cfg.optimizer.batch_size;
  std::size_t n_batches = (train.size() + bs - 1) / bs;
  if (!positives.empty()) n_batches = std::min(n_batches, positives.size());
  n_batches = std::max<std::size_t>(n_batches, 1);

  const bool dropout = cfg.model.dropout_p > 0.0;
  InnerResult result;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.puupl.epochs_per_iteration; ++epoch) {
    double sum_total = 0.0, sum_pu = 0.0, sum_pl = 0.0;
    std::size_t n_steps = 0;

    for (std::size_t k = 0; k < ensemble.size(); ++k) {
      Mlp& model = ensemble.member(k);
      auto rng = streams.engine("batches", {iteration, epoch, k});
      std::vector<std::size_t> p_order = positives;
      std::vector<std::size_t> o_order = others;
      std::shuffle(p_order.begin(), p_order.end(), rng);
      std::shuffle(o_order.begin(), o_order.end(), rng);

      std::vector<std::vector<std::size_t>> batches(n_batches);
      for (std::size_t j = 0; j < p_order.size(); ++j) batches[j % n_batches].push_back(p_order[j]);
      for (std::size_t j = 0; j < o_order.size(); ++j) batches[j % n_batches].push_back(o_order[j]);

      for (std::size_t b = 0; b < n_batches; ++b) {
        const auto& rows = batches[b];
        if (rows.empty()) continue;
        Matrix xb(static_cast<Eigen::Index>(rows.size()), x.cols());
        for (std::size_t r = 0; r < rows.size(); ++r)
          xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));

        const Vector logits =
            model.forward(xb, dropout, streams.seed("dropout", {iteration, epoch, k, b}));

        std::vector<double> fp, fu, fl, yl;
        std::vector<std::size_t> pos_p, pos_u, pos_l;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const double f = logits[static_cast<Eigen::Index>(r)];
          switch (train.membership(rows[r])) {
            case Membership::positive: fp.push_back(f); pos_p.push_back(r); break;
            case Membership::unlabeled: fu.push_back(f); pos_u.push_back(r); break;
            case Membership::pseudo:
              fl.push_back(f);
              yl.push_back(labels[rows[r]]);
              pos_l.push_back(r);
              break;
          }
        }
        if (fp.empty()) continue;  // only possible when P itself is empty

        const CombinedLoss loss = combined_loss(fp, fu, fl, yl, *pu_loss, cfg.puupl.lambda);
        if (!std::isfinite(loss.total)) {
          std::ostringstream msg;
          msg << "non-finite loss at iteration " << iteration << ", epoch " << epoch << ", member "
              << k << ", batch " << b << " (pu=" << loss.pu << ", pl=" << loss.pl << ")";
          throw NumericError(msg.str());
        }
        Vector upstream(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t j = 0; j < pos_p.size(); ++j) upstream[static_cast<Eigen::Index>(pos_p[j])] = loss.grad_positive[j];
        for (std::size_t j = 0; j < pos_u.size(); ++j) upstream[static_cast<Eigen::Index>(pos_u[j])] = loss.grad_unlabeled[j];
        for (std::size_t j = 0; j < pos_l.size(); ++j) upstream[static_cast<Eigen::Index>(pos_l[j])] = loss.grad_pseudo[j];

        const Vector grad = model.backward(upstream);
        adam_step(optimizers[k], model.parameters(), grad);
        sum_total += loss.total;
        sum_pu += loss.pu;
        sum_pl += loss.pl;
        ++n_steps;
      }
      model.clear_cache();
      if (!model.parameters().allFinite()) {
        std::ostringstream msg;
        msg << "non-finite parameters at iteration " << iteration << ", epoch " << epoch
            << ", member " << k;
        throw NumericError(msg.str());
      }
      decay_learning_rate(optimizers[k]);
    }

    const Vector pv = ensemble_probability(ensemble, validation.features());
    const double score = score_from(pv, validation, cfg.criterion);
    const bool improved = ensemble.offer_best(score);

    EpochRecord rec;
    rec.iteration = iteration;
    rec.epoch = epoch;
    const double denom = n_steps > 0 ? static_cast<double>(n_steps) : 1.0;
    rec.loss_total = sum_total / denom;
    rec.loss_pu = sum_pu / denom;
    rec.loss_pl = sum_pl / denom;
    rec.val_score = score;
    rec.best_score = *ensemble.best_score();
    rec.val_ece = validation_ece(pv, validation, cfg.ece_bins);
    log.epochs.push_back(rec);

    result.final_score = score;
    result.epochs_run = epoch + 1;
    since_best = improved ? 0 : since_best + 1;
    if (cfg.puupl.inner_patience > 0 && since_best >= cfg.puupl.inner_patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

struct LoopState {
  std::size_t completed = 0;
  bool finished = false;
  std::size_t stale_iterations = 0;
};

void write_atomically(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw FormatError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& dir, std::uint64_t seed, const LoopState& state,
                     const PUDataset& data, const Ensemble& ensemble, const RunLog& log) {
  std::filesystem::create_directories(dir);
  save_snapshots(dir / "init.snap", ensemble.initial());
  save_snapshots(dir / "current.snap", ensemble.snapshot());
  save_snapshots(dir / "best.snap", ensemble.best(),
                 {{"best_score", ensemble.best_score() ? *ensemble.best_score() : 0.0}});
  std::vector<int> membership;
  membership.reserve(data.size());
  for (Membership m : data.memberships()) membership.push_back(static_cast<int>(m));
  const nlohmann::json j = {
      {"seed", seed},
      {"n_train", data.size()},
      {"completed_iterations", state.completed},
      {"finished", state.finished},
      {"stale_iterations", state.stale_iterations},
      {"revision", data.revision()},
      {"membership", membership},
      {"labels", std::vector<double>(data.labels().begin(), data.labels().end())},
      {"log", log.to_json()},
  };
  write_atomically(dir / "checkpoint.json", j.dump());
}

bool load_checkpoint(const std::filesystem::path& dir, std::uint64_t seed, const PUDataset& train,
                     LoopState& state, std::optional<PUDataset>& data, Ensemble& ensemble,
                     RunLog& log) {
  const auto path = dir / "checkpoint.json";
  if (!std::filesystem::exists(path)) return false;
  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("seed").get<std::uint64_t>() != seed || j.at("n_train").get<std::size_t>() != train.size())
    throw ConfigError("checkpoint in " + dir.string() + " belongs to a different run");

  state.completed = j.at("completed_iterations").get<std::size_t>();
  state.finished = j.at("finished").get<bool>();
  state.stale_iterations = j.at("stale_iterations").get<std::size_t>();

  std::vector<Membership> membership;
  for (int m : j.at("membership").get<std::vector<int>>()) membership.push_back(static_cast<Membership>(m));
  std::vector<int> truth;
  if (train.has_truth()) truth = train.truth(EvaluationOnly{});
  data = PUDataset::restore(train.shared_features(), std::move(membership),
                            j.at("labels").get<std::vector<double>>(), std::move(truth),
                            j.at("revision").get<std::size_t>());
  log = RunLog::from_json(j.at("log"));

  const auto init = load_snapshots(dir / "init.snap");
  const auto current = load_snapshots(dir / "current.snap");
  const auto best = load_snapshots(dir / "best.snap");
  if (init.snapshots != ensemble.initial())
    throw ConfigError("checkpoint initial weights do not match the seed");
  ensemble.restore(current.snapshots);
  if (!best.snapshots.empty())
    ensemble.set_best(best.snapshots, best.header.at("best_score").get<double>());
  return true;
}

}  // namespace

RunResult run(const PUDataset& train, const PUDataset& validation, const EngineConfig& cfg,
              std::uint64_t seed, const RunOptions& options) {
  cfg.validate();
  train.check_invariants();
  const PuuplConfig& pc = cfg.puupl;
  const SeedStreams streams(seed);

  Ensemble ensemble(cfg.layer_sizes(static_cast<std::size_t>(train.features().cols())),
                    cfg.trained_members(), cfg.model.dropout_p, streams.seed("init"));

  RunLog log;
  LoopState state;
  std::optional<PUDataset> data_opt;
  bool resumed = false;
  if (!options.checkpoint_dir.empty())
    resumed = load_checkpoint(options.checkpoint_dir, seed, train, state, data_opt, ensemble, log);
  PUDataset data = data_opt ? *data_opt : train;

  const bool has_truth = data.has_truth();
  const double select_threshold =
      pc.naive_pl ? std::numeric_limits<double>::infinity() : pc.select_threshold;

  for (std::size_t it = state.completed; !state.finished && it < pc.max_iterations; ++it) {
    switch (pc.reinit) {
      case ReinitMode::same_weights: ensemble.restore_initial(); break;
      case ReinitMode::fresh:
        if (it > 0) ensemble.reinitialize(streams.seed("init", {it}));
        break;
      case ReinitMode::none: break;
    }
    if (options.hooks.on_iteration_start) options.hooks.on_iteration_start(it, ensemble, data);

    const std::optional<double> best_before = ensemble.best_score();
    const InnerResult inner = train_inner(ensemble, data, validation, cfg, streams, it, log);
    const bool improved = !best_before || *ensemble.best_score() > *best_before;

    IterationOutcome outcome;
    outcome.iteration = it;
    outcome.epochs_run = inner.epochs_run;
    outcome.val_score = inner.final_score;
    outcome.best_score = *ensemble.best_score();

    PUDataset next = data;
    bool changed = false;
    std::optional<UncertaintyReport> report;
    if (pc.pseudo_labeling) {
      const Matrix probs = predict_members(ensemble, data.features(), pc.estimator,
                                           pc.ensemble_size, streams.seed("mc", {it}));
      report = decompose(probs);
      if (!options.uncertainty_dir.empty()) {
        std::filesystem::create_directories(options.uncertainty_dir);
        std::vector<std::size_t> all(data.size());
        std::iota(all.begin(), all.end(), 0);
        std::ofstream dump(options.uncertainty_dir / ("iteration_" + std::to_string(it) + ".csv"));
        write_uncertainty_csv(dump, *report, all);
      }

      const Vector& ranked_by = report->of(pc.uncertainty);
      std::vector<Candidate> pool;
      pool.reserve(data.unlabeled().size());
      for (std::size_t i : data.unlabeled()) {
        const auto e = static_cast<Eigen::Index>(i);
        const double score = pc.naive_pl ? -std::abs(report->p_mean[e] - 0.5) : ranked_by[e];
        pool.push_back({i, score, report->p_mean[e]});
      }
      const auto selected = rank_and_select(std::move(pool), pc.max_new_labels, select_threshold);
      const auto balanced =
          balance(selected, pc.balance, balance_target(pc.balance, pc.balance_ratio, pc.prior));
      const auto removed = pc.naive_pl ? std::vector<std::size_t>{}
                                       : select_for_unlabeling(data, report->epistemic,
                                                               pc.unlabel_threshold);

      std::vector<std::size_t> added;
      for (const auto& c : balanced) added.push_back(c.index);
      for (std::size_t i : added)
        if (std::find(removed.begin(), removed.end(), i) != removed.end())
          throw std::logic_error("pseudo-label selection and removal overlap");

      next = pseudo_unlabel(data, removed);
      next = assign_pseudo_labels(next, added, report->p_mean, pc.soft_labels, pc.reassign_all);
      next.check_invariants(pc.soft_labels);
      if (next.pseudo_labeled().size() + removed.size() != data.pseudo_labeled().size() + added.size())
        throw std::logic_error("pseudo-label bookkeeping drifted");

      outcome.n_selected = selected.size();
      outcome.n_newly_labeled = added.size();
      outcome.n_unlabeled_back = removed.size();
      if (has_truth) {
        const auto& truth = data.truth(EvaluationOnly{});
        if (!added.empty()) {
          std::size_t hits = 0;
          for (const auto& c : balanced) hits += ((c.p_mean >= 0.5 ? 1 : 0) == truth[c.index]);
          outcome.pl_accuracy = static_cast<double>(hits) / static_cast<double>(added.size());
        }
        if (!next.pseudo_labeled().empty()) {
          std::vector<double> stored, target;
          for (std::size_t i : next.pseudo_labeled()) {
            stored.push_back(next.labels()[i]);
            target.push_back(truth[i]);
          }
          outcome.pl_nll = nll(stored, target);
        }
      }
      changed = !added.empty() || !removed.empty() ||
                !std::equal(next.labels().begin(), next.labels().end(), data.labels().begin());
    }
    outcome.size_p = next.positives().size();
    outcome.size_u = next.unlabeled().size();
    outcome.size_l = next.pseudo_labeled().size();
    log.iterations.push_back(outcome);
    if (options.hooks.on_iteration_end)
      options.hooks.on_iteration_end(outcome, data, next, report ? &*report : nullptr);
    data = std::move(next);

    state.completed = it + 1;
    state.stale_iterations = improved ? 0 : state.stale_iterations + 1;
    if (!pc.pseudo_labeling || !changed) state.finished = true;
    if (pc.patience > 0 && state.stale_iterations >= pc.patience) state.finished = true;
    if (!options.checkpoint_dir.empty())
      save_checkpoint(options.checkpoint_dir, seed, state, data, ensemble, log);
  }

  ensemble.restore_best();
  std::optional<EvalReport> test_report;
  if (options.test) {
    const Vector p = ensemble_probability(ensemble, options.test->features);
    test_report = evaluate_predictions(
        std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), options.test->truth,
        cfg.ece_bins);
    if (has_truth && !data.pseudo_labeled().empty()) {
      const auto& truth = data.truth(EvaluationOnly{});
      std::vector<double> stored, target;
      for (std::size_t i : data.pseudo_labeled()) {
        stored.push_back(data.labels()[i]);
        target.push_back(truth[i]);
      }
      test_report->pl_nll = nll(stored, target);
    }
  }

  const double best_score = *ensemble.best_score();
  return RunResult{std::move(log), ensemble.best(), best_score, test_report, std::move(data),
                   state.completed, resumed};
}

GridSearchResult prior_grid_search(const PUDataset& train, const PUDataset& validation,
                                   const EngineConfig& cfg, std::span<const double> grid,
                                   std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("prior grid is empty");
  GridSearchResult out;
  std::optional<double> best;
  for (double prior : grid) {
    EngineConfig c = cfg;
    c.puupl.prior = prior;
    c.puupl.pseudo_labeling = false;
    c.puupl.max_iterations = 1;
    c.criterion = ValidationCriterion::pu_auc;
    const RunResult r = run(train, validation, c, seed);
    out.scores.emplace_back(prior, r.best_score);
    if (!best || r.best_score > *best) {
      best = r.best_score;
      out.best_prior = prior;
    }
  }
  return out;
}

}  // namespace puupl
