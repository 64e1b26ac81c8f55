#include "puupl/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "puupl/errors.hpp"

namespace puupl {

using nlohmann::json;

namespace {

template <class E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> names;

  const char* to_string(E v) const {
    for (const auto& [e, s] : names)
      if (e == v) return s;
    return "?";
  }
  E parse(const std::string& key, const json& j) const {
    if (!j.is_string()) throw ConfigError(key + ": expected a string");
    const auto s = j.get<std::string>();
    std::string allowed;
    for (const auto& [e, n] : names) {
      if (s == n) return e;
      allowed += allowed.empty() ? n : std::string(", ") + n;
    }
    throw ConfigError(key + ": '" + s + "' is not one of " + allowed);
  }
};

const EnumNames<DataSource> kSources{{{DataSource::gaussians, "gaussians"},
                                      {DataSource::idx, "idx"},
                                      {DataSource::csv, "csv"}}};
const EnumNames<BalanceMode> kBalance{{{BalanceMode::equal, "equal"},
                                       {BalanceMode::prior_ratio, "prior_ratio"},
                                       {BalanceMode::none, "none"}}};
const EnumNames<ReinitMode> kReinit{{{ReinitMode::same_weights, "same_weights"},
                                     {ReinitMode::fresh, "fresh"},
                                     {ReinitMode::none, "none"}}};
const EnumNames<UncertaintyKind> kUncertainty{{{UncertaintyKind::epistemic, "epistemic"},
                                               {UncertaintyKind::aleatoric, "aleatoric"},
                                               {UncertaintyKind::total, "total"}}};
const EnumNames<EstimatorKind> kEstimator{{{EstimatorKind::ensemble, "ensemble"},
                                           {EstimatorKind::mc_dropout, "mc_dropout"}}};
const EnumNames<PuLossKind> kLoss{{{PuLossKind::nnpu, "nnpu"}, {PuLossKind::upu, "upu"}}};
const EnumNames<ValidationCriterion> kCriterion{{{ValidationCriterion::pu_auc, "pu_auc"},
                                                 {ValidationCriterion::accuracy, "accuracy"}}};

constexpr double kDefaultMcDropout = 0.15;

// Rejects keys of `user` that do not occur in `reference`, recursing into
// objects. Keys listed in `free_form` may hold arbitrary objects.
void check_keys(const json& user, const json& reference, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError((prefix.empty() ? "config" : prefix) + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown key '" + path + "'");
    const json& ref = reference.at(key);
    if (ref.is_object() && path != "dataset.bias_weights") check_keys(value, ref, path);
  }
}

// Typed accessor that reports the dotted key on failure.
class Reader {
 public:
  Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      node = &node->at(path.substr(start, dot - start));
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }
  bool has(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const auto key = path.substr(start, dot - start);
      if (!node->is_object() || !node->contains(key)) return false;
      node = &node->at(key);
      if (dot == std::string::npos) return true;
      start = dot + 1;
    }
  }

  double real(const std::string& path) const {
    const json& j = at(path);
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
  }
  std::size_t count(const std::string& path) const {
    const json& j = at(path);
    if (!j.is_number_integer() || j.get<long long>() < 0)
      throw ConfigError(path + ": expected a non-negative integer");
    return j.get<std::size_t>();
  }
  bool flag(const std::string& path) const {
    const json& j = at(path);
    if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
    return j.get<bool>();
  }
  std::string text(const std::string& path) const {
    const json& j = at(path);
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
  }
  template <class T>
  std::vector<T> list(const std::string& path) const {
    const json& j = at(path);
    if (!j.is_array()) throw ConfigError(path + ": expected a list");
    std::vector<T> out;
    for (const auto& v : j) {
      if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(path + ": expected a list of numbers");
      } else {
        if (!v.is_number_integer()) throw ConfigError(path + ": expected a list of integers");
        if constexpr (std::is_unsigned_v<T>)
          if (v.get<long long>() < 0) throw ConfigError(path + ": entries must be non-negative");
      }
      out.push_back(v.get<T>());
    }
    return out;
  }
  template <class E>
  E choice(const std::string& path, const EnumNames<E>& names) const {
    return names.parse(path, at(path));
  }

 private:
  const json& root_;
};

void merge_into(json& base, const json& user) {
  for (const auto& [key, value] : user.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object() && key != "bias_weights")
      merge_into(base[key], value);
    else
      base[key] = value;
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void require_file(const std::string& key, const std::string& path) {
  require(!path.empty(), key + ": missing dataset path");
  require(std::filesystem::exists(path), key + ": file '" + path + "' does not exist");
}

}  // namespace

json to_json(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  const auto& e = cfg.engine;
  const auto& p = e.puupl;
  json bias = json::object();
  for (const auto& [k, w] : d.bias_weights) bias[std::to_string(k)] = w;
  return {
      {"dataset",
       {{"source", kSources.to_string(d.source)},
        {"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"test_images", d.test_images},
        {"test_labels", d.test_labels},
        {"train_csv", d.train_csv},
        {"test_csv", d.test_csv},
        {"positive_class_ids", d.positive_class_ids},
        {"n_labeled_positives", d.n_labeled_positives},
        {"bias_weights", bias},
        {"validation_size", d.validation_size},
        {"labeled_fraction_matched", d.labeled_fraction_matched},
        {"max_train_samples", d.max_train_samples},
        {"max_test_samples", d.max_test_samples},
        {"gaussians",
         {{"n", d.gaussians.n},
          {"n_test", d.gaussians.n_test},
          {"prior", d.gaussians.prior},
          {"separation", d.gaussians.separation},
          {"dim", d.gaussians.dim}}}}},
      {"network", {{"hidden", e.model.hidden}, {"dropout", e.model.dropout_p}}},
      {"optimizer",
       {{"lr", e.optimizer.learning_rate},
        {"batch_size", e.optimizer.batch_size},
        {"weight_decay", e.optimizer.weight_decay},
        {"lr_decay_gamma", e.optimizer.lr_decay_gamma}}},
      {"puupl",
       {{"lambda", p.lambda},
        {"ensemble_size", p.ensemble_size},
        {"max_new_labels", p.max_new_labels == kUnlimited ? json("inf") : json(p.max_new_labels)},
        {"select_threshold", p.select_threshold},
        {"unlabel_threshold", p.unlabel_threshold},
        {"balance_ratio", p.balance_ratio},
        {"max_iterations", p.max_iterations},
        {"epochs_per_iteration", p.epochs_per_iteration},
        {"patience", p.patience},
        {"inner_patience", p.inner_patience},
        {"reassign_all", p.reassign_all},
        {"balance", kBalance.to_string(p.balance)},
        {"reinit", kReinit.to_string(p.reinit)},
        {"soft_labels", p.soft_labels},
        {"uncertainty", kUncertainty.to_string(p.uncertainty)},
        {"estimator", kEstimator.to_string(p.estimator)},
        {"naive_pl", p.naive_pl},
        {"pseudo_labeling", p.pseudo_labeling},
        {"prior", p.prior},
        {"loss", kLoss.to_string(p.loss)}}},
      {"eval",
       {{"criterion", kCriterion.to_string(e.criterion)},
        {"bins", e.ece_bins},
        {"dump_uncertainty", cfg.dump_uncertainty}}},
      {"seeds", cfg.seeds},
      {"output_dir", cfg.output_dir},
      {"prior_grid", cfg.prior_grid},
  };
}

RunConfig parse_config_json(const json& user) {
  const json defaults = to_json(RunConfig{});
  check_keys(user, defaults, "");
  json merged = defaults;
  merge_into(merged, user);
  const Reader r(merged);

  RunConfig cfg;
  auto& d = cfg.dataset;
  d.source = r.choice("dataset.source", kSources);
  d.train_images = r.text("dataset.train_images");
  d.train_labels = r.text("dataset.train_labels");
  d.test_images = r.text("dataset.test_images");
  d.test_labels = r.text("dataset.test_labels");
  d.train_csv = r.text("dataset.train_csv");
  d.test_csv = r.text("dataset.test_csv");
  d.positive_class_ids = r.list<int>("dataset.positive_class_ids");
  d.n_labeled_positives = r.count("dataset.n_labeled_positives");
  const json& bias = r.at("dataset.bias_weights");
  if (!bias.is_object()) throw ConfigError("dataset.bias_weights: expected an object");
  for (const auto& [k, w] : bias.items()) {
    int id = 0;
    std::istringstream ks(k);
    if (!(ks >> id) || !ks.eof())
      throw ConfigError("dataset.bias_weights: key '" + k + "' is not a class id");
    if (!w.is_number()) throw ConfigError("dataset.bias_weights." + k + ": expected a number");
    d.bias_weights[id] = w.get<double>();
  }
  d.validation_size = r.count("dataset.validation_size");
  d.labeled_fraction_matched = r.flag("dataset.labeled_fraction_matched");
  d.max_train_samples = r.count("dataset.max_train_samples");
  d.max_test_samples = r.count("dataset.max_test_samples");
  d.gaussians.n = r.count("dataset.gaussians.n");
  d.gaussians.n_test = r.count("dataset.gaussians.n_test");
  d.gaussians.prior = r.real("dataset.gaussians.prior");
  d.gaussians.separation = r.real("dataset.gaussians.separation");
  d.gaussians.dim = r.count("dataset.gaussians.dim");

  auto& e = cfg.engine;
  e.model.hidden = r.list<std::size_t>("network.hidden");
  e.model.dropout_p = r.real("network.dropout");
  e.optimizer.learning_rate = r.real("optimizer.lr");
  e.optimizer.batch_size = r.count("optimizer.batch_size");
  e.optimizer.weight_decay = r.real("optimizer.weight_decay");
  e.optimizer.lr_decay_gamma = r.real("optimizer.lr_decay_gamma");

  auto& p = e.puupl;
  p.lambda = r.real("puupl.lambda");
  p.ensemble_size = r.count("puupl.ensemble_size");
  const json& t = r.at("puupl.max_new_labels");
  if (t.is_string()) {
    if (t.get<std::string>() != "inf")
      throw ConfigError("puupl.max_new_labels: expected a non-negative integer or \"inf\"");
    p.max_new_labels = kUnlimited;
  } else {
    p.max_new_labels = r.count("puupl.max_new_labels");
  }
  p.select_threshold = r.real("puupl.select_threshold");
  p.unlabel_threshold = r.real("puupl.unlabel_threshold");
  p.balance_ratio = r.real("puupl.balance_ratio");
  p.max_iterations = r.count("puupl.max_iterations");
  p.epochs_per_iteration = r.count("puupl.epochs_per_iteration");
  p.patience = r.count("puupl.patience");
  p.inner_patience = r.count("puupl.inner_patience");
  p.reassign_all = r.flag("puupl.reassign_all");
  p.balance = r.choice("puupl.balance", kBalance);
  p.reinit = r.choice("puupl.reinit", kReinit);
  p.soft_labels = r.flag("puupl.soft_labels");
  p.uncertainty = r.choice("puupl.uncertainty", kUncertainty);
  p.estimator = r.choice("puupl.estimator", kEstimator);
  p.naive_pl = r.flag("puupl.naive_pl");
  p.pseudo_labeling = r.flag("puupl.pseudo_labeling");
  p.prior = r.real("puupl.prior");
  p.loss = r.choice("puupl.loss", kLoss);

  e.criterion = r.choice("eval.criterion", kCriterion);
  e.ece_bins = r.count("eval.bins");
  cfg.dump_uncertainty = r.flag("eval.dump_uncertainty");

  cfg.seeds = r.list<std::uint64_t>("seeds");
  cfg.output_dir = r.text("output_dir");
  cfg.prior_grid = r.list<double>("prior_grid");

  if (p.estimator == EstimatorKind::mc_dropout && !Reader(user).has("network.dropout"))
    e.model.dropout_p = kDefaultMcDropout;

  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + err.what());
  }
  return parse_config_json(j);
}

void RunConfig::validate() const {
  engine.validate();
  const auto& d = dataset;
  require(!seeds.empty(), "seeds: at least one seed is required");
  require(!output_dir.empty(), "output_dir: must not be empty");
  require(!d.positive_class_ids.empty(), "dataset.positive_class_ids: must not be empty");
  require(d.n_labeled_positives >= 1, "dataset.n_labeled_positives: must be at least 1");
  require(d.validation_size >= 1, "dataset.validation_size: must be at least 1");
  if (engine.criterion == ValidationCriterion::pu_auc)
    require(d.labeled_fraction_matched,
            "eval.criterion: pu_auc needs dataset.labeled_fraction_matched = true");
  for (double prior : prior_grid)
    require(prior > 0.0 && prior < 1.0, "prior_grid: every prior must lie in (0,1)");
  if (!d.bias_weights.empty()) {
    double sum = 0.0;
    for (const auto& [k, w] : d.bias_weights) {
      require(w >= 0.0, "dataset.bias_weights: weights must be non-negative");
      sum += w;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "dataset.bias_weights: weights must sum to 1");
  }

  switch (d.source) {
    case DataSource::gaussians: {
      const auto& g = d.gaussians;
      require(g.n >= 2, "dataset.gaussians.n: must be at least 2");
      require(g.n_test >= 1, "dataset.gaussians.n_test: must be at least 1");
      require(g.prior > 0.0 && g.prior < 1.0, "dataset.gaussians.prior: must lie in (0,1)");
      require(g.dim >= 1, "dataset.gaussians.dim: must be at least 1");
      require(g.separation >= 0.0, "dataset.gaussians.separation: must be >= 0");
      require(d.validation_size < g.n, "dataset.validation_size: must be below dataset.gaussians.n");
      const auto positives = static_cast<std::size_t>(std::llround(g.prior * static_cast<double>(g.n)));
      require(d.n_labeled_positives <= positives,
              "dataset.n_labeled_positives: exceeds the number of positives");
      break;
    }
    case DataSource::idx:
      require_file("dataset.train_images", d.train_images);
      require_file("dataset.train_labels", d.train_labels);
      require_file("dataset.test_images", d.test_images);
      require_file("dataset.test_labels", d.test_labels);
      break;
    case DataSource::csv:
      require_file("dataset.train_csv", d.train_csv);
      require_file("dataset.test_csv", d.test_csv);
      break;
  }
  if (d.max_train_samples > 0)
    require(d.validation_size < d.max_train_samples,
            "dataset.validation_size: must be below dataset.max_train_samples");
}

void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  json j = to_json(cfg);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const auto key = dotted_key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("unknown key '" + dotted_key + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parsed;
  cfg = parse_config_json(j);
}

}  // namespace puupl
