#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "horq/binary_gemm.hpp"
#include "horq/errors.hpp"
#include "horq/quantize.hpp"
#include "horq/tensor.hpp"

namespace horq {

enum class LayerKind { FullyConnected, Conv };
enum class Activation { None, HardTanh, Relu };

struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  std::size_t fan_in = 0, fan_out = 0;
  bool quantized = false;
  std::size_t order = 2;
  Activation activation = Activation::None;
};

inline float activate(Activation a, float z) {
  switch (a) {
    case Activation::None: return z;
    case Activation::HardTanh: return std::clamp(z, -1.0f, 1.0f);
    case Activation::Relu: return z > 0.0f ? z : 0.0f;
  }
  return z;
}

/// Derivative factor of the activation at pre-activation z; boundary points
/// count as pass-through.
inline float activate_gate(Activation a, float z) {
  switch (a) {
    case Activation::None: return 1.0f;
    case Activation::HardTanh: return std::abs(z) <= 1.0f ? 1.0f : 0.0f;
    case Activation::Relu: return z > 0.0f ? 1.0f : 0.0f;
  }
  return 1.0f;
}

struct LayerGrad {
  Matrix dw;
  std::vector<float> db;
};

/// Everything backward needs from one layer's forward pass. Quantized layers
/// keep the reconstructed operands: the straight-through rule differentiates
/// the layer as if those dense values had been used directly.
struct LayerCache {
  Matrix input;
  Matrix preact;
  Matrix recon_w;
  Matrix recon_x;
  double rel_residual = 0.0;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  double mean_rel_residual = 0.0;
};

namespace detail {

inline double frob2(const Matrix& m) {
  double acc = 0.0;
  for (float v : m.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

inline double frob2_diff(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    acc += d * d;
  }
  return acc;
}

inline Matrix submatrix_cols(const Matrix& m, std::size_t first, std::size_t last) {
  Matrix out(m.rows(), last - first);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = first; c < last; ++c) out.at(r, c - first) = m.at(r, c);
  return out;
}

}  // namespace detail

/// Multilayer perceptron over real-valued master weights. Quantized layers
/// re-derive their binary form from the masters on every forward call; the
/// binary side is never stored, let alone updated.
class Network {
public:
  Network(std::vector<LayerSpec> specs, std::uint64_t seed) : specs_(std::move(specs)) {
    if (specs_.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t l = 0; l < specs_.size(); ++l) {
      const LayerSpec& s = specs_[l];
      if (s.kind != LayerKind::FullyConnected)
        throw ConfigError("the trainer supports fully connected layers only");
      if (s.fan_in == 0 || s.fan_out == 0)
        throw ConfigError("layer fan_in/fan_out must be positive");
      if (s.quantized && s.order < 1)
        throw ConfigError("quantized layers need order >= 1");
      if (l > 0 && s.fan_in != specs_[l - 1].fan_out)
        throw ConfigError("layer " + std::to_string(l) + " fan_in does not chain");
    }
    std::mt19937_64 rng(seed);
    for (const LayerSpec& s : specs_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      Matrix w(s.fan_out, s.fan_in);
      for (float& v : w.data()) v = static_cast<float>(dist(rng));
      weights_.push_back(std::move(w));
      biases_.emplace_back(s.fan_out, 0.0f);
    }
  }

  std::size_t depth() const { return specs_.size(); }
  const LayerSpec& spec(std::size_t l) const { return specs_[l]; }
  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  std::vector<float>& bias(std::size_t l) { return biases_[l]; }
  const std::vector<float>& bias(std::size_t l) const { return biases_[l]; }

  /// Batch forward, one sample per column. Pass a cache to enable backward.
  Matrix forward(const Matrix& x, ForwardCache* cache = nullptr) const {
    if (x.rows() != specs_.front().fan_in)
      throw ShapeError("forward: input rows do not match layer 0 fan_in");
    if (x.cols() == 0) throw ShapeError("forward: empty batch");
    if (cache) {
      cache->layers.clear();
      cache->layers.reserve(depth());
    }
    double rel_sum = 0.0;
    std::size_t rel_count = 0;
    Matrix cur = x;
    for (std::size_t l = 0; l < depth(); ++l) {
      const LayerSpec& s = specs_[l];
      LayerCache lc;
      Matrix z;
      if (s.quantized) {
        const QuantizedMatrix qw = quantize_weights(weights_[l]);
        const QuantizedMatrix qx = quantize_input(cur, s.order);
        z = binary_gemm(qw, qx);
        lc.recon_w = reconstruct(qw);
        lc.recon_x = reconstruct(qx);
        const double denom = detail::frob2(cur);
        lc.rel_residual = denom > 0.0 ? detail::frob2_diff(cur, lc.recon_x) / denom : 0.0;
        rel_sum += lc.rel_residual;
        ++rel_count;
      } else {
        z = gemm(weights_[l], cur);
      }
      for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) z.at(r, c) += biases_[l][r];
      Matrix act(z.rows(), z.cols());
      for (std::size_t i = 0; i < z.size(); ++i)
        act.data()[i] = activate(s.activation, z.data()[i]);
      if (cache) {
        lc.input = std::move(cur);
        lc.preact = std::move(z);
        cache->layers.push_back(std::move(lc));
      }
      cur = std::move(act);
    }
    if (cache) cache->mean_rel_residual = rel_count ? rel_sum / static_cast<double>(rel_count) : 0.0;
    return cur;
  }

  /// Straight-through backward. Quantized layers differentiate through the
  /// reconstructed operands; the gradient reaching a quantized layer's input
  /// is gated by |input| <= 1, while weight gradients pass unclipped and the
  /// scales are treated as constants.
  std::vector<LayerGrad> backward(const ForwardCache& cache, const Matrix& dlogits) const {
    if (cache.layers.size() != depth())
      throw ConfigError("backward: forward cache missing or stale");
    std::vector<LayerGrad> grads(depth());
    Matrix d = dlogits;
    for (std::size_t l = depth(); l-- > 0;) {
      const LayerSpec& s = specs_[l];
      const LayerCache& lc = cache.layers[l];
      if (d.rows() != s.fan_out || d.cols() != lc.preact.cols())
        throw ShapeError("backward: gradient shape does not match layer output");
      Matrix dz = d;
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz.data()[i] *= activate_gate(s.activation, lc.preact.data()[i]);
      LayerGrad& g = grads[l];
      g.db.assign(s.fan_out, 0.0f);
      for (std::size_t r = 0; r < dz.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < dz.cols(); ++c) acc += static_cast<double>(dz.at(r, c));
        g.db[r] = static_cast<float>(acc);
      }
      const Matrix& x_eff = s.quantized ? lc.recon_x : lc.input;
      g.dw = gemm_nt(dz, x_eff);
      if (l > 0) {
        const Matrix& w_eff = s.quantized ? lc.recon_w : weights_[l];
        Matrix dx = gemm_tn(w_eff, dz);
        if (s.quantized)
          for (std::size_t i = 0; i < dx.size(); ++i)
            if (std::abs(lc.input.data()[i]) > 1.0f) dx.data()[i] = 0.0f;
        d = std::move(dx);
      }
    }
    return grads;
  }

  /// Plain SGD step on the master weights.
  void apply(std::span<const LayerGrad> grads, double lr) {
    if (grads.size() != depth()) throw ConfigError("apply: one gradient per layer required");
    for (std::size_t l = 0; l < depth(); ++l) {
      Matrix& w = weights_[l];
      for (std::size_t i = 0; i < w.size(); ++i)
        w.data()[i] = static_cast<float>(static_cast<double>(w.data()[i]) -
                                         lr * static_cast<double>(grads[l].dw.data()[i]));
      for (std::size_t r = 0; r < biases_[l].size(); ++r)
        biases_[l][r] = static_cast<float>(static_cast<double>(biases_[l][r]) -
                                           lr * static_cast<double>(grads[l].db[r]));
    }
  }

private:
  std::vector<LayerSpec> specs_;
  std::vector<Matrix> weights_;
  std::vector<std::vector<float>> biases_;
};

struct LossValue {
  double loss = 0.0;
  Matrix grad;
};

namespace detail {

inline void check_labels(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.cols())
    throw ShapeError("loss: one label per logits column required");
  for (std::size_t label : labels)
    if (label >= logits.rows()) throw DomainError("loss: label out of range");
}

}  // namespace detail

/// One-vs-all squared hinge (L2-SVM) over class margins, averaged per sample.
inline LossValue hinge_l2svm(const Matrix& logits, std::span<const std::size_t> labels) {
  detail::check_labels(logits, labels);
  const double inv_b = 1.0 / static_cast<double>(logits.cols());
  LossValue out;
  out.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < logits.cols(); ++j)
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      const double t = c == labels[j] ? 1.0 : -1.0;
      const double margin = 1.0 - t * static_cast<double>(logits.at(c, j));
      if (margin > 0.0) {
        out.loss += margin * margin * inv_b;
        out.grad.at(c, j) = static_cast<float>(-2.0 * t * margin * inv_b);
      }
    }
  return out;
}

/// Cross-entropy over softmax probabilities, averaged per sample.
inline LossValue softmax_xent(const Matrix& logits, std::span<const std::size_t> labels) {
  detail::check_labels(logits, labels);
  const double inv_b = 1.0 / static_cast<double>(logits.cols());
  LossValue out;
  out.grad = Matrix(logits.rows(), logits.cols());
  std::vector<double> p(logits.rows());
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.rows(); ++c)
      zmax = std::max(zmax, static_cast<double>(logits.at(c, j)));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      p[c] = std::exp(static_cast<double>(logits.at(c, j)) - zmax);
      sum += p[c];
    }
    for (std::size_t c = 0; c < logits.rows(); ++c) {
      p[c] /= sum;
      const double onehot = c == labels[j] ? 1.0 : 0.0;
      out.grad.at(c, j) = static_cast<float>((p[c] - onehot) * inv_b);
    }
    out.loss += -std::log(p[labels[j]]) * inv_b;
  }
  return out;
}

enum class Loss { HingeL2Svm, SoftmaxXent };

inline LossValue compute_loss(Loss kind, const Matrix& logits,
                              std::span<const std::size_t> labels) {
  return kind == Loss::HingeL2Svm ? hinge_l2svm(logits, labels)
                                  : softmax_xent(logits, labels);
}

/// Column-per-sample dataset.
struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// Two Gaussian blobs in the plane: class 0 around (-2,-2), class 1 around
/// (+2,+2), unit spread, classes alternating so every prefix stays balanced.
inline Dataset make_blobs(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw DomainError("make_blobs: count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.features = Matrix(2, count);
  d.labels.resize(count);
  d.num_classes = 2;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % 2;
    const double mu = label == 0 ? -2.0 : 2.0;
    d.features.at(0, i) = static_cast<float>(mu + noise(rng));
    d.features.at(1, i) = static_cast<float>(mu + noise(rng));
    d.labels[i] = label;
  }
  return d;
}

/// Four tight clusters at (+-1, +-1); the label is the XOR of the corner signs.
inline Dataset make_xor(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw DomainError("make_xor: count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  Dataset d;
  d.features = Matrix(2, count);
  d.labels.resize(count);
  d.num_classes = 2;
  for (std::size_t i = 0; i < count; ++i) {
    const double sx = (i & 1) ? 1.0 : -1.0;
    const double sy = (i & 2) ? 1.0 : -1.0;
    d.features.at(0, i) = static_cast<float>(sx + noise(rng));
    d.features.at(1, i) = static_cast<float>(sy + noise(rng));
    d.labels[i] = sx * sy > 0.0 ? 0 : 1;
  }
  return d;
}

/// Text rows of "label,feature,feature,...". Every row must carry the same
/// feature count; labels are nonnegative integers and the class count is
/// max(label)+1.
inline Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<float>> rows;
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<float> row;
    bool first = true;
    while (std::getline(fields, cell, ',')) {
      std::size_t used = 0;
      try {
        if (first) {
          const long long label = std::stoll(cell, &used);
          if (label < 0) throw IoError("negative label");
          labels.push_back(static_cast<std::size_t>(label));
          first = false;
        } else {
          row.push_back(std::stof(cell, &used));
        }
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed cell '" +
                      cell + "'");
      }
      if (used != cell.size())
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed cell '" +
                      cell + "'");
    }
    if (first)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": missing label");
    if (row.empty())
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": row has no features");
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": no samples");
  Dataset d;
  d.features = Matrix(rows.front().size(), rows.size());
  d.labels = std::move(labels);
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < rows[j].size(); ++i) d.features.at(i, j) = rows[j][i];
  d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  for (float v : d.features.data())
    if (!std::isfinite(v)) throw IoError(path.string() + ": non-finite feature");
  return d;
}

/// Fixed per-feature affine transform fitted once on the training set.
struct Standardizer {
  std::vector<float> mean, scale;
};

inline Standardizer fit_standardizer(const Dataset& d) {
  Standardizer s;
  const std::size_t dim = d.features.rows();
  const double inv_n = 1.0 / static_cast<double>(d.features.cols());
  s.mean.resize(dim);
  s.scale.resize(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d.features.cols(); ++c)
      mean += static_cast<double>(d.features.at(r, c)) * inv_n;
    double var = 0.0;
    for (std::size_t c = 0; c < d.features.cols(); ++c) {
      const double dev = static_cast<double>(d.features.at(r, c)) - mean;
      var += dev * dev * inv_n;
    }
    s.mean[r] = static_cast<float>(mean);
    s.scale[r] = var > 0.0 ? static_cast<float>(1.0 / std::sqrt(var)) : 1.0f;
  }
  return s;
}

inline void standardize(const Standardizer& s, Dataset& d) {
  if (s.mean.size() != d.features.rows())
    throw ShapeError("standardize: dimension mismatch");
  for (std::size_t r = 0; r < d.features.rows(); ++r)
    for (std::size_t c = 0; c < d.features.cols(); ++c)
      d.features.at(r, c) = (d.features.at(r, c) - s.mean[r]) * s.scale[r];
}

struct TrainConfig {
  std::vector<LayerSpec> layers;
  Loss loss = Loss::HingeL2Svm;
  double lr = 0.01;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double mean_rel_residual = 0.0;
};

struct TrainOutcome {
  Network net;
  std::vector<EpochMetrics> trace;
};

inline std::size_t argmax_column(const Matrix& m, std::size_t c) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < m.rows(); ++r)
    if (m.at(r, c) > m.at(best, c)) best = r;
  return best;
}

inline double evaluate_accuracy(const Network& net, const Dataset& data) {
  const Matrix logits = net.forward(data.features);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < data.size(); ++j)
    if (argmax_column(logits, j) == data.labels[j]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Mini-batch SGD over the dataset in storage order; batches are deterministic
/// functions of (config, dataset), so a seed pins the whole trace.
inline TrainOutcome train_loop(const TrainConfig& cfg, const Dataset& data) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.lr < 0.0) throw ConfigError("train: learning rate must be nonnegative");
  if (data.size() == 0) throw ConfigError("train: empty dataset");
  Network net(cfg.layers, cfg.seed);
  if (data.features.rows() != cfg.layers.front().fan_in)
    throw ConfigError("train: dataset dimension does not match layer 0 fan_in");
  if (data.num_classes > cfg.layers.back().fan_out)
    throw ConfigError("train: network emits fewer classes than the dataset uses");

  const std::size_t n = data.size();
  std::vector<EpochMetrics> trace;
  trace.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0, rel_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n);
      const Matrix x = detail::submatrix_cols(data.features, start, stop);
      const std::span<const std::size_t> labels(data.labels.data() + start, stop - start);
      ForwardCache cache;
      const Matrix logits = net.forward(x, &cache);
      const LossValue lv = compute_loss(cfg.loss, logits, labels);
      const double b = static_cast<double>(stop - start);
      loss_sum += lv.loss * b;
      rel_sum += cache.mean_rel_residual * b;
      for (std::size_t j = 0; j < labels.size(); ++j)
        if (argmax_column(logits, j) == labels[j]) ++correct;
      const std::vector<LayerGrad> grads = net.backward(cache, lv.grad);
      net.apply(grads, cfg.lr);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    m.mean_rel_residual = rel_sum / static_cast<double>(n);
    trace.push_back(m);
  }
  return {std::move(net), std::move(trace)};
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              std::span<const EpochMetrics> trace) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,mean_rel_residual_per_quantized_layer\n";
  out << std::setprecision(10);
  for (const EpochMetrics& m : trace)
    out << m.epoch << ',' << m.train_loss << ',' << m.train_acc << ','
        << m.mean_rel_residual << '\n';
  detail::spill(path, out.str());
}

}  // namespace horq
