#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace puupl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Fully labeled data as it comes off disk or out of a generator.
/// `class_ids` holds the raw class (digit, cluster); `truth` the binary
/// target once a positive class set has been chosen.
struct LabeledDataset {
  Matrix features;
  std::vector<int> class_ids;
  std::vector<int> truth;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t positive_count() const;
  double positive_fraction() const;
};

// Two isotropic unit-variance Gaussians centred at (+-separation/2, 0, ...).
// Class 1 sits on the positive side; round(n * prior) samples are class 1.
LabeledDataset make_gaussians(std::size_t n, double prior, double separation, std::size_t dim,
                              std::uint64_t seed);

// IDX (big-endian) image/label pair, e.g. the MNIST distribution files.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with header f0,...,fk,label. `label` is an integer class id.
LabeledDataset load_csv(const std::string& path);

LabeledDataset binarize(const LabeledDataset& data, std::span<const int> positive_class_ids);
LabeledDataset take_rows(const LabeledDataset& data, std::span<const std::size_t> rows);
// Uniform subsample without replacement, order preserved. n >= size() is a copy.
LabeledDataset subsample(const LabeledDataset& data, std::size_t n, std::uint64_t seed);

/// Affine map x -> (x - mean) / std using one global mean and std over all
/// feature entries of the training matrix.
struct Standardizer {
  double mean = 0.0;
  double std = 1.0;

  static Standardizer fit(const Matrix& train);
  Matrix apply(const Matrix& x) const;
};

// Fits on `train` and applies the same map to `train` and every `others`.
Standardizer standardize(LabeledDataset& train, std::span<LabeledDataset* const> others = {});

enum class Membership : std::uint8_t { positive, unlabeled, pseudo };

/// Tag type required to read hidden ground truth. Only evaluation code
/// constructs one; training code has no reason to.
struct EvaluationOnly {
  explicit EvaluationOnly() = default;
};

/// Positive-unlabeled training data with the P/U/L bookkeeping.
///
/// Instances are immutable; pseudo-labeling produces a new revision that
/// shares the feature matrix with its parent. Invariants:
///  - P, U and L partition {0..n-1};
///  - labels are 1 on P and 0 on U;
///  - labels on L lie in [0,1] (strictly inside with soft labels).
class PUDataset {
 public:
  PUDataset(std::shared_ptr<const Matrix> features, std::span<const std::size_t> labeled_positives,
            std::vector<int> truth = {});

  const Matrix& features() const { return *features_; }
  const std::shared_ptr<const Matrix>& shared_features() const { return features_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t revision() const { return revision_; }

  std::span<const double> labels() const { return labels_; }
  Membership membership(std::size_t i) const { return membership_[i]; }
  std::span<const Membership> memberships() const { return membership_; }

  const std::vector<std::size_t>& positives() const { return positives_; }
  const std::vector<std::size_t>& unlabeled() const { return unlabeled_; }
  const std::vector<std::size_t>& pseudo_labeled() const { return pseudo_; }

  bool has_truth() const { return !truth_.empty(); }
  const std::vector<int>& truth(EvaluationOnly) const;

  // Moves `indices` from U into L (or relabels them if already in L).
  PUDataset with_pseudo_labels(std::span<const std::size_t> indices,
                               std::span<const double> values) const;
  // Moves `indices` from L back to U with label 0.
  PUDataset with_unlabeled(std::span<const std::size_t> indices) const;

  // Rebuilds a revision from stored membership/labels (checkpoint resume).
  static PUDataset restore(std::shared_ptr<const Matrix> features,
                           std::vector<Membership> membership, std::vector<double> labels,
                           std::vector<int> truth, std::size_t revision);

  // Throws std::logic_error when an invariant is broken.
  void check_invariants(bool strict_soft_labels = false) const;

 private:
  PUDataset() = default;
  void rebuild_sets();

  std::shared_ptr<const Matrix> features_;
  std::vector<double> labels_;
  std::vector<Membership> membership_;
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> unlabeled_;
  std::vector<std::size_t> pseudo_;
  std::vector<int> truth_;
  std::size_t revision_ = 0;
};

/// Per-sample subgroup ids with the probability of drawing a labeled
/// positive from each subgroup.
struct BiasSpec {
  std::vector<int> subgroup_ids;
  std::map<int, double> sampling_weights;

  void validate(std::size_t n_samples) const;
};

// Chooses n_labeled_positives true positives as P; everything else is U.
PUDataset pu_ify(const LabeledDataset& data, std::size_t n_labeled_positives,
                 const std::optional<BiasSpec>& bias, std::uint64_t seed);

struct SplitSpec {
  std::size_t validation_size = 0;
  bool labeled_fraction_matched = true;
  std::uint64_t seed = 0;
};

struct SplitResult {
  PUDataset train;
  PUDataset validation;
};

// Labeled positives the validation split receives for a given train labeling.
std::size_t matched_validation_positives(std::size_t validation_size,
                                         std::size_t n_labeled_positives, std::size_t n_train);

// Holds out a validation split first, then PU-ifies train and validation
// independently. With labeled_fraction_matched the validation split gets
// round(validation_size * |P| / n_train) labeled positives, otherwise none
// (a fully unlabeled split meant for accuracy-based validation).
SplitResult split(const LabeledDataset& data, const SplitSpec& spec,
                  std::size_t n_labeled_positives, const std::optional<BiasSpec>& bias = {});

}  // namespace puupl
