#include "puupl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "puupl/errors.hpp"
#include "puupl/random.hpp"

namespace puupl {

std::size_t LabeledDataset::positive_count() const {
  return static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1));
}

double LabeledDataset::positive_fraction() const {
  if (truth.empty()) return 0.0;
  return static_cast<double>(positive_count()) / static_cast<double>(truth.size());
}

LabeledDataset make_gaussians(std::size_t n, double prior, double separation, std::size_t dim,
                              std::uint64_t seed) {
  if (!(prior > 0.0 && prior < 1.0)) throw ConfigError("make_gaussians: prior must lie in (0,1)");
  if (n < 2) throw ConfigError("make_gaussians: n must be at least 2");
  if (dim < 1) throw ConfigError("make_gaussians: dim must be at least 1");
  if (!(separation >= 0.0)) throw ConfigError("make_gaussians: separation must be >= 0");

  const SeedStreams streams(seed);
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * prior));

  std::vector<int> cls(n, 0);
  std::fill(cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
  auto shuffle_rng = streams.engine("labels");
  std::shuffle(cls.begin(), cls.end(), shuffle_rng);

  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  auto rng = streams.engine("features");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) out.features(i, d) = normal(rng);
    out.features(i, 0) += (cls[i] == 1 ? 0.5 : -0.5) * separation;
  }
  out.class_ids = cls;
  out.truth = std::move(cls);
  return out;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t offset) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    std::ostringstream msg;
    msg << path << ": truncated header at byte offset " << offset;
    throw FormatError(msg.str());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    std::ostringstream msg;
    msg << path << ": bad IDX magic 0x" << std::hex << got << " (expected 0x" << want
        << ") at byte offset 0";
    throw FormatError(msg.str());
  }
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = open_binary(images_path);
  expect_magic(read_be32(img, images_path, 0), 0x00000803u, images_path);
  const std::uint32_t n_images = read_be32(img, images_path, 4);
  const std::uint32_t rows = read_be32(img, images_path, 8);
  const std::uint32_t cols = read_be32(img, images_path, 12);

  auto lab = open_binary(labels_path);
  expect_magic(read_be32(lab, labels_path, 0), 0x00000801u, labels_path);
  const std::uint32_t n_labels = read_be32(lab, labels_path, 4);

  if (n_images != n_labels) {
    std::ostringstream msg;
    msg << "IDX length mismatch: " << images_path << " has " << n_images << " images but "
        << labels_path << " has " << n_labels << " labels (count field at byte offset 4)";
    throw FormatError(msg.str());
  }

  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> buf(std::size_t{n_images} * pixels);
  img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(img.gcount()) != buf.size()) {
    std::ostringstream msg;
    msg << images_path << ": truncated pixel data at byte offset " << 16 + img.gcount()
        << " (expected " << 16 + buf.size() << " bytes)";
    throw FormatError(msg.str());
  }
  std::vector<unsigned char> lbuf(n_labels);
  lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()));
  if (static_cast<std::size_t>(lab.gcount()) != lbuf.size()) {
    std::ostringstream msg;
    msg << labels_path << ": truncated label data at byte offset " << 8 + lab.gcount()
        << " (expected " << 8 + lbuf.size() << " bytes)";
    throw FormatError(msg.str());
  }

  LabeledDataset out;
  out.features.resize(n_images, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n_images; ++i)
    for (std::size_t j = 0; j < pixels; ++j) out.features(i, j) = buf[i * pixels + j];
  out.class_ids.assign(lbuf.begin(), lbuf.end());
  return out;
}

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file at byte offset 0");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label")
    throw FormatError(path + ": header must be f0,...,fk,label at byte offset 0");
  for (std::size_t j = 0; j + 1 < header.size(); ++j)
    if (header[j] != "f" + std::to_string(j))
      throw FormatError(path + ": unexpected header column '" + header[j] + "' at byte offset 0");

  const std::size_t dim = header.size() - 1;
  std::vector<double> values;
  std::vector<int> classes;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col < dim) {
          values.push_back(std::stod(cell, &used));
        } else if (col == dim) {
          classes.push_back(std::stoi(cell, &used));
        }
        if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
          throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path + ": unparsable value '" + cell + "' at byte offset " +
                          std::to_string(line_offset));
      }
      ++col;
    }
    if (col != dim + 1)
      throw FormatError(path + ": expected " + std::to_string(dim + 1) + " columns at byte offset " +
                        std::to_string(line_offset));
  }
  if (classes.empty()) throw FormatError(path + ": no data rows");

  LabeledDataset out;
  out.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(classes.size()),
                                    static_cast<Eigen::Index>(dim));
  out.class_ids = std::move(classes);
  return out;
}

LabeledDataset binarize(const LabeledDataset& data, std::span<const int> positive_class_ids) {
  if (positive_class_ids.empty()) throw ConfigError("binarize: positive_class_ids is empty");
  for (int id : positive_class_ids)
    if (std::find(data.class_ids.begin(), data.class_ids.end(), id) == data.class_ids.end())
      throw ConfigError("binarize: class id " + std::to_string(id) + " does not occur in the data");
  LabeledDataset out = data;
  out.truth.resize(data.class_ids.size());
  for (std::size_t i = 0; i < data.class_ids.size(); ++i) {
    const bool pos = std::find(positive_class_ids.begin(), positive_class_ids.end(),
                               data.class_ids[i]) != positive_class_ids.end();
    out.truth[i] = pos ? 1 : 0;
  }
  return out;
}

LabeledDataset take_rows(const LabeledDataset& data, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(rows[r]));
    if (!data.class_ids.empty()) out.class_ids.push_back(data.class_ids[rows[r]]);
    if (!data.truth.empty()) out.truth.push_back(data.truth[rows[r]]);
  }
  return out;
}

LabeledDataset subsample(const LabeledDataset& data, std::size_t n, std::uint64_t seed) {
  if (n >= data.size()) return data;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return take_rows(data, idx);
}

Standardizer Standardizer::fit(const Matrix& train) {
  if (train.size() == 0) throw ConfigError("standardize: training matrix is empty");
  Standardizer s;
  s.mean = train.mean();
  const double var = (train.array() - s.mean).square().mean();
  s.std = std::sqrt(var);
  if (!(s.std > 0.0) || !std::isfinite(s.std)) s.std = 1.0;
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  return ((x.array() - mean) / std).matrix();
}

Standardizer standardize(LabeledDataset& train, std::span<LabeledDataset* const> others) {
  const Standardizer s = Standardizer::fit(train.features);
  train.features = s.apply(train.features);
  for (LabeledDataset* o : others) o->features = s.apply(o->features);
  return s;
}

// ---------------------------------------------------------------------------
// PUDataset

PUDataset::PUDataset(std::shared_ptr<const Matrix> features,
                     std::span<const std::size_t> labeled_positives, std::vector<int> truth)
    : features_(std::move(features)), truth_(std::move(truth)) {
  const auto n = static_cast<std::size_t>(features_->rows());
  if (!truth_.empty() && truth_.size() != n)
    throw ConfigError("PUDataset: truth length does not match feature rows");
  labels_.assign(n, 0.0);
  membership_.assign(n, Membership::unlabeled);
  for (std::size_t i : labeled_positives) {
    if (i >= n) throw ConfigError("PUDataset: labeled positive index out of range");
    if (membership_[i] == Membership::positive)
      throw ConfigError("PUDataset: duplicate labeled positive index");
    membership_[i] = Membership::positive;
    labels_[i] = 1.0;
  }
  rebuild_sets();
}

PUDataset PUDataset::restore(std::shared_ptr<const Matrix> features,
                             std::vector<Membership> membership, std::vector<double> labels,
                             std::vector<int> truth, std::size_t revision) {
  PUDataset d;
  d.features_ = std::move(features);
  d.membership_ = std::move(membership);
  d.labels_ = std::move(labels);
  d.truth_ = std::move(truth);
  d.revision_ = revision;
  if (d.membership_.size() != static_cast<std::size_t>(d.features_->rows()) ||
      d.labels_.size() != d.membership_.size())
    throw FormatError("PUDataset::restore: stored state does not match feature rows");
  d.rebuild_sets();
  d.check_invariants();
  return d;
}

void PUDataset::rebuild_sets() {
  positives_.clear();
  unlabeled_.clear();
  pseudo_.clear();
  for (std::size_t i = 0; i < membership_.size(); ++i) {
    switch (membership_[i]) {
      case Membership::positive: positives_.push_back(i); break;
      case Membership::unlabeled: unlabeled_.push_back(i); break;
      case Membership::pseudo: pseudo_.push_back(i); break;
    }
  }
}

const std::vector<int>& PUDataset::truth(EvaluationOnly) const {
  if (truth_.empty()) throw UsageError("PUDataset: no ground truth attached");
  return truth_;
}

PUDataset PUDataset::with_pseudo_labels(std::span<const std::size_t> indices,
                                        std::span<const double> values) const {
  if (indices.size() != values.size())
    throw UsageError("with_pseudo_labels: indices and values differ in length");
  PUDataset next = *this;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size() || membership_[i] == Membership::positive)
      throw UsageError("with_pseudo_labels: index " + std::to_string(i) + " is not in U or L");
    if (!(values[k] >= 0.0 && values[k] <= 1.0))
      throw UsageError("with_pseudo_labels: label outside [0,1]");
    next.membership_[i] = Membership::pseudo;
    next.labels_[i] = values[k];
  }
  next.rebuild_sets();
  ++next.revision_;
  return next;
}

PUDataset PUDataset::with_unlabeled(std::span<const std::size_t> indices) const {
  PUDataset next = *this;
  for (std::size_t i : indices) {
    if (i >= size() || membership_[i] != Membership::pseudo)
      throw UsageError("with_unlabeled: index " + std::to_string(i) + " is not in L");
    next.membership_[i] = Membership::unlabeled;
    next.labels_[i] = 0.0;
  }
  next.rebuild_sets();
  ++next.revision_;
  return next;
}

void PUDataset::check_invariants(bool strict_soft_labels) const {
  if (positives_.size() + unlabeled_.size() + pseudo_.size() != size())
    throw std::logic_error("PUDataset: P, U, L do not partition the index range");
  for (std::size_t i : positives_)
    if (labels_[i] != 1.0) throw std::logic_error("PUDataset: label of a P sample is not 1");
  for (std::size_t i : unlabeled_)
    if (labels_[i] != 0.0) throw std::logic_error("PUDataset: label of a U sample is not 0");
  for (std::size_t i : pseudo_) {
    const double y = labels_[i];
    const bool ok = strict_soft_labels ? (y > 0.0 && y < 1.0) : (y >= 0.0 && y <= 1.0);
    if (!ok) throw std::logic_error("PUDataset: pseudo-label out of range");
  }
}

// ---------------------------------------------------------------------------
// PU-ification and splitting

void BiasSpec::validate(std::size_t n_samples) const {
  if (subgroup_ids.size() != n_samples)
    throw ConfigError("bias: subgroup_ids length does not match the dataset");
  if (sampling_weights.empty()) throw ConfigError("bias: sampling_weights is empty");
  double total = 0.0;
  for (const auto& [group, w] : sampling_weights) {
    if (!(w >= 0.0)) throw ConfigError("bias: weight for subgroup " + std::to_string(group) + " is negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("bias: sampling_weights must sum to 1");
}

PUDataset pu_ify(const LabeledDataset& data, std::size_t n_labeled_positives,
                 const std::optional<BiasSpec>& bias, std::uint64_t seed) {
  if (data.truth.size() != data.size())
    throw ConfigError("pu_ify: dataset has no binary truth (binarize it first)");
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.truth[i] == 1) positives.push_back(i);
  if (n_labeled_positives > positives.size())
    throw ConfigError("pu_ify: n_labeled_positives (" + std::to_string(n_labeled_positives) +
                      ") exceeds the number of true positives (" + std::to_string(positives.size()) + ")");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  if (!bias) {
    std::shuffle(positives.begin(), positives.end(), rng);
    chosen.assign(positives.begin(), positives.begin() + static_cast<std::ptrdiff_t>(n_labeled_positives));
  } else {
    bias->validate(data.size());
    std::map<int, std::vector<std::size_t>> pools;
    for (std::size_t i : positives) pools[bias->subgroup_ids[i]].push_back(i);
    for (auto& [g, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (chosen.size() < n_labeled_positives) {
      // Renormalise over subgroups that still have unlabeled positives.
      std::vector<std::pair<int, double>> live;
      double total = 0.0;
      for (const auto& [g, w] : bias->sampling_weights) {
        auto it = pools.find(g);
        if (w > 0.0 && it != pools.end() && !it->second.empty()) {
          live.emplace_back(g, w);
          total += w;
        }
      }
      if (live.empty())
        throw ConfigError("pu_ify: bias weights cannot supply " + std::to_string(n_labeled_positives) +
                          " labeled positives");
      double u = unif(rng) * total;
      int group = live.back().first;
      for (const auto& [g, w] : live) {
        if (u < w) {
          group = g;
          break;
        }
        u -= w;
      }
      auto& pool = pools[group];
      chosen.push_back(pool.back());
      pool.pop_back();
    }
  }
  std::sort(chosen.begin(), chosen.end());
  auto features = std::make_shared<const Matrix>(data.features);
  return PUDataset(std::move(features), chosen, data.truth);
}

std::size_t matched_validation_positives(std::size_t validation_size,
                                         std::size_t n_labeled_positives, std::size_t n_train) {
  if (n_train == 0) return 0;
  return static_cast<std::size_t>(std::llround(static_cast<double>(validation_size) *
                                               static_cast<double>(n_labeled_positives) /
                                               static_cast<double>(n_train)));
}

SplitResult split(const LabeledDataset& data, const SplitSpec& spec,
                  std::size_t n_labeled_positives, const std::optional<BiasSpec>& bias) {
  if (spec.validation_size == 0) throw ConfigError("split: validation_size must be positive");
  if (spec.validation_size >= data.size())
    throw ConfigError("split: validation_size (" + std::to_string(spec.validation_size) +
                      ") must be smaller than the dataset (" + std::to_string(data.size()) + ")");

  const SeedStreams streams(spec.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = streams.engine("holdout");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.validation_size));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(spec.validation_size), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const LabeledDataset train = take_rows(data, train_rows);
  const LabeledDataset val = take_rows(data, val_rows);

  auto sub_bias = [&](std::span<const std::size_t> rows) -> std::optional<BiasSpec> {
    if (!bias) return std::nullopt;
    BiasSpec b;
    b.sampling_weights = bias->sampling_weights;
    for (std::size_t r : rows) b.subgroup_ids.push_back(bias->subgroup_ids.at(r));
    return b;
  };

  const std::size_t n_val_pos =
      spec.labeled_fraction_matched
          ? matched_validation_positives(spec.validation_size, n_labeled_positives, train.size())
          : 0;
  return SplitResult{
      pu_ify(train, n_labeled_positives, sub_bias(train_rows), streams.seed("label_train")),
      pu_ify(val, std::min(n_val_pos, val.positive_count()), sub_bias(val_rows),
             streams.seed("label_validation")),
  };
}

}  // namespace puupl
