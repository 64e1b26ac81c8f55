#include "puupl/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "puupl/errors.hpp"

namespace puupl {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& logits) {
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
  return out;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, double dropout_p)
    : layer_sizes_(std::move(layer_sizes)), dropout_p_(dropout_p) {
  if (layer_sizes_.size() < 2) throw ConfigError("Mlp: need at least an input and an output layer");
  if (layer_sizes_.back() != 1) throw ConfigError("Mlp: output layer must have width 1");
  for (std::size_t s : layer_sizes_)
    if (s == 0) throw ConfigError("Mlp: layer widths must be positive");
  if (!(dropout_p_ >= 0.0 && dropout_p_ < 1.0)) throw ConfigError("Mlp: dropout_p must lie in [0,1)");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t fan_in = layer_sizes_[l];
    const std::size_t fan_out = layer_sizes_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t off = offsets_[l];
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) params_[static_cast<Eigen::Index>(off + k)] = dist(rng);
    for (std::size_t k = 0; k < fan_out; ++k) params_[static_cast<Eigen::Index>(off + fan_in * fan_out + k)] = 0.0;
  }
  cache_.reset();
}

Vector Mlp::run(const Matrix& batch, bool dropout_active, std::uint64_t dropout_seed,
                Cache* cache) const {
  if (static_cast<std::size_t>(batch.cols()) != input_size())
    throw UsageError("Mlp: batch width " + std::to_string(batch.cols()) + " does not match input size " +
                     std::to_string(input_size()));
  const bool use_dropout = dropout_active && dropout_p_ > 0.0;
  std::mt19937_64 rng(dropout_seed);
  std::bernoulli_distribution keep(1.0 - dropout_p_);
  const double scale = use_dropout ? 1.0 / (1.0 - dropout_p_) : 1.0;

  const std::size_t n_layers = layer_sizes_.size() - 1;
  Matrix act = batch;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(layer_sizes_[l]);
    const auto fan_out = static_cast<Eigen::Index>(layer_sizes_[l + 1]);
    const double* base = params_.data() + offsets_[l];
    Eigen::Map<const Matrix> w(base, fan_in, fan_out);
    Eigen::Map<const Eigen::RowVectorXd> b(base + fan_in * fan_out, fan_out);

    Matrix z = act * w;
    z.rowwise() += b;
    if (cache) cache->inputs.push_back(std::move(act));
    if (l + 1 == n_layers) {
      act = std::move(z);
      break;
    }
    Matrix gate(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        double g = z(i, j) > 0.0 ? 1.0 : 0.0;
        if (use_dropout) g = keep(rng) ? g * scale : 0.0;
        gate(i, j) = g;
      }
    }
    act = z.cwiseProduct(gate);
    if (cache) cache->gates.push_back(std::move(gate));
  }
  return act.col(0);
}

Vector Mlp::forward(const Matrix& batch, bool dropout_active, std::uint64_t dropout_seed) {
  Cache c;
  Vector out = run(batch, dropout_active, dropout_seed, &c);
  cache_ = std::move(c);
  return out;
}

Vector Mlp::predict(const Matrix& batch, bool dropout_active, std::uint64_t dropout_seed) const {
  return run(batch, dropout_active, dropout_seed, nullptr);
}

Vector Mlp::backward(const Vector& upstream) const {
  if (!cache_) throw UsageError("Mlp::backward called without a cached forward pass");
  const Cache& c = *cache_;
  if (upstream.size() != c.inputs.front().rows())
    throw UsageError("Mlp::backward: upstream gradient length does not match the cached batch");

  Vector grad = Vector::Zero(params_.size());
  const std::size_t n_layers = layer_sizes_.size() - 1;
  Matrix delta = upstream;  // d loss / d pre-activation of the current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(layer_sizes_[l]);
    const auto fan_out = static_cast<Eigen::Index>(layer_sizes_[l + 1]);
    double* gbase = grad.data() + offsets_[l];
    Eigen::Map<Matrix> gw(gbase, fan_in, fan_out);
    Eigen::Map<Eigen::RowVectorXd> gb(gbase + fan_in * fan_out, fan_out);
    gw.noalias() = c.inputs[l].transpose() * delta;
    gb = delta.colwise().sum();
    if (l == 0) break;
    Eigen::Map<const Matrix> w(params_.data() + offsets_[l], fan_in, fan_out);
    Matrix upstream_act = delta * w.transpose();
    delta = upstream_act.cwiseProduct(c.gates[l - 1]);
  }
  return grad;
}

ParamSnapshot Mlp::snapshot() const { return ParamSnapshot{layer_sizes_, params_}; }

void Mlp::restore(const ParamSnapshot& snap) {
  if (snap.layer_sizes != layer_sizes_ || snap.values.size() != params_.size())
    throw ShapeError("Mlp::restore: snapshot shape does not match the model");
  params_ = snap.values;
  cache_.reset();
}

// ---------------------------------------------------------------------------

AdamState::AdamState(std::size_t n_params, const AdamOptions& opts)
    : options(opts),
      first_moment(Vector::Zero(static_cast<Eigen::Index>(n_params))),
      second_moment(Vector::Zero(static_cast<Eigen::Index>(n_params))),
      learning_rate(opts.learning_rate) {}

void adam_step(AdamState& s, Vector& params, const Vector& grads) {
  if (grads.size() != params.size() || s.first_moment.size() != params.size())
    throw UsageError("adam_step: parameter, gradient and moment lengths differ");
  const AdamOptions& o = s.options;
  ++s.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i] + o.weight_decay * params[i];
    s.first_moment[i] = o.beta1 * s.first_moment[i] + (1.0 - o.beta1) * g;
    s.second_moment[i] = o.beta2 * s.second_moment[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = s.first_moment[i] / bc1;
    const double v_hat = s.second_moment[i] / bc2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

void decay_learning_rate(AdamState& s) { s.learning_rate *= s.options.lr_decay_gamma; }

// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'P', 'U', 'U', 'P', 'L', 'S', 'N', 'P'};
}

void save_snapshots(const std::filesystem::path& path, std::span<const ParamSnapshot> snaps,
                    const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["format"] = "f64le";
  header["members"] = snaps.size();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : snaps) shapes.push_back({{"layer_sizes", s.layer_sizes}, {"count", s.values.size()}});
  header["snapshots"] = shapes;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write snapshot file " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& s : snaps)
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(s.values.size())));
  if (!out) throw FormatError("failed writing snapshot file " + path.string());
}

SnapshotFile load_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open snapshot file " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": bad snapshot magic at byte offset 0");
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len))
    throw FormatError(path.string() + ": truncated header length at byte offset 8");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw FormatError(path.string() + ": truncated JSON header at byte offset 16");

  SnapshotFile file;
  try {
    file.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed JSON header at byte offset 16: " + e.what());
  }
  std::size_t offset = 16 + len;
  for (const auto& shape : file.header.at("snapshots")) {
    ParamSnapshot s;
    s.layer_sizes = shape.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto count = shape.at("count").get<std::size_t>();
    s.values.resize(static_cast<Eigen::Index>(count));
    if (!in.read(reinterpret_cast<char*>(s.values.data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
      throw FormatError(path.string() + ": truncated parameter data at byte offset " + std::to_string(offset));
    offset += count * sizeof(double);
    file.snapshots.push_back(std::move(s));
  }
  return file;
}

}  // namespace puupl
