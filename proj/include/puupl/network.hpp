#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "puupl/dataset.hpp"

namespace puupl {

double sigmoid(double logit);
Vector sigmoid(const Vector& logits);

/// Flat copy of every parameter plus the layer sizes it belongs to.
struct ParamSnapshot {
  std::vector<std::size_t> layer_sizes;
  Vector values;

  friend bool operator==(const ParamSnapshot& a, const ParamSnapshot& b) {
    return a.layer_sizes == b.layer_sizes && a.values.size() == b.values.size() &&
           (a.values.array() == b.values.array()).all();
  }
};

/// Fully connected ReLU network with a single output logit.
///
/// All weights and biases live in one contiguous vector, laid out layer
/// by layer as W (fan_in x fan_out, row-major) followed by b. The optimizer
/// and snapshots operate on that vector directly.
///
/// Dropout (inverted) is applied to hidden activations only; a mask is a
/// pure function of the dropout seed.
class Mlp {
 public:
  explicit Mlp(std::vector<std::size_t> layer_sizes, double dropout_p = 0.0);

  // He-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_size() const { return layer_sizes_.front(); }
  double dropout_p() const { return dropout_p_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  // Forward pass that keeps the activations needed by backward().
  Vector forward(const Matrix& batch, bool dropout_active = false, std::uint64_t dropout_seed = 0);
  // Same computation without touching the cache.
  Vector predict(const Matrix& batch, bool dropout_active = false,
                 std::uint64_t dropout_seed = 0) const;

  // Gradient of sum_i upstream[i] * logit_i w.r.t. every parameter, using
  // the last forward() call. Throws UsageError when there is none.
  Vector backward(const Vector& upstream) const;
  void clear_cache() { cache_.reset(); }

  ParamSnapshot snapshot() const;
  void restore(const ParamSnapshot& snap);

 private:
  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer (post activation/dropout)
    std::vector<Matrix> gates;   // d activation / d pre-activation for hidden layers
  };

  Vector run(const Matrix& batch, bool dropout_active, std::uint64_t dropout_seed,
             Cache* cache) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<std::size_t> layer_sizes_;
  std::vector<std::size_t> offsets_;
  double dropout_p_;
  Vector params_;
  std::optional<Cache> cache_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  double lr_decay_gamma = 0.99;
};

struct AdamState {
  AdamOptions options;
  Vector first_moment;
  Vector second_moment;
  std::uint64_t step = 0;
  double learning_rate = 0.0;  // current, after decay

  AdamState(std::size_t n_params, const AdamOptions& opts);
};

// One bias-corrected Adam update. Weight decay is added to the gradient
// as wd * theta before the moment updates.
void adam_step(AdamState& state, Vector& params, const Vector& grads);
// Exponential learning-rate decay, called once per epoch.
void decay_learning_rate(AdamState& state);

// Snapshot files: 8-byte magic "PUUPLSNP", u64 LE header length, a JSON
// header, then every snapshot's values as little-endian float64.
void save_snapshots(const std::filesystem::path& path, std::span<const ParamSnapshot> snaps,
                    const nlohmann::json& extra = nlohmann::json::object());
struct SnapshotFile {
  std::vector<ParamSnapshot> snapshots;
  nlohmann::json header;
};
SnapshotFile load_snapshots(const std::filesystem::path& path);

}  // namespace puupl
