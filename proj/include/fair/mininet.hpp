// Copyright 2026 The FAIR-Pruner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Desk-scale dense ReLU classifier with softmax cross-entropy head, trained
// by minibatch SGD. Exists to produce a real model whose hidden layers can be
// scored, pruned and fine-tuned end to end.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fair/common.hpp"
#include "fair/diagnostics.hpp"
#include "fair/dumpio.hpp"
#include "fair/planner.hpp"

namespace fair::mininet {

struct Dataset {
  std::size_t features = 0;
  std::vector<double> x;  // [n, features]
  std::vector<std::uint32_t> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * features, features);
  }
  std::size_t classes() const {
    return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  }
  void push_back(std::span<const double> features_row, std::uint32_t label) {
    x.insert(x.end(), features_row.begin(), features_row.end());
    y.push_back(label);
  }
  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features;
    for (auto i : idx) out.push_back(row(i), y[i]);
    return out;
  }
};

struct Splits {
  Dataset train, prune, test;
};

/// Gaussian blobs: K centers with coordinates ~ N(0, separation^2), samples
/// = center + N(0, I). Labels cycle through the classes so every class is
/// represented in any split of at least 2K samples.
struct BlobSpec {
  std::size_t classes = 10;
  std::size_t dim = 16;
  double separation = 1.0;
  std::uint64_t seed = 0;
};

inline std::vector<double> blob_centers(const BlobSpec& spec) {
  std::mt19937_64 rng(stream_seed(spec.seed, "blob-centers"));
  std::normal_distribution<double> gauss(0.0, spec.separation);
  std::vector<double> centers(spec.classes * spec.dim);
  for (auto& c : centers) c = gauss(rng);
  return centers;
}

inline Dataset make_blobs(const BlobSpec& spec, std::size_t n, std::string_view stream) {
  require(spec.classes >= 2 && spec.dim >= 1, ErrorKind::invalid_input,
          "blobs need at least 2 classes and 1 feature");
  const auto centers = blob_centers(spec);
  std::mt19937_64 rng(stream_seed(spec.seed, stream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.features = spec.dim;
  data.x.resize(n * spec.dim);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::uint32_t>(i % spec.classes);
    data.y[i] = k;
    for (std::size_t c = 0; c < spec.dim; ++c)
      data.x[i * spec.dim + c] = centers[k * spec.dim + c] + gauss(rng);
  }
  return data;
}

inline Splits make_blob_splits(const BlobSpec& spec, std::size_t n_train, std::size_t n_prune,
                               std::size_t n_test) {
  return {make_blobs(spec, n_train, "blob-train"), make_blobs(spec, n_prune, "blob-prune"),
          make_blobs(spec, n_test, "blob-test")};
}

/// CSV with a header row. The column named "label" holds class indices; an
/// optional "split" column tags rows train/prune/test; every other column is
/// a numeric feature. Without a split column all three splits are the whole
/// file.
inline Splits load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path.string());
  auto split_line = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::invalid_input,
          path.string() + ": empty CSV");
  const auto header = split_line(line);
  std::ptrdiff_t label_col = -1, split_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") label_col = static_cast<std::ptrdiff_t>(c);
    if (header[c] == "split") split_col = static_cast<std::ptrdiff_t>(c);
  }
  require(label_col >= 0, ErrorKind::invalid_input, path.string() + ": no 'label' column");
  const std::size_t p = header.size() - 1 - (split_col >= 0 ? 1 : 0);

  Splits out;
  for (auto* d : {&out.train, &out.prune, &out.test}) d->features = p;
  std::vector<double> row(p);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(cells.size() == header.size(), ErrorKind::invalid_input, where + ": wrong column count");
    std::uint32_t label = 0;
    std::string tag;
    std::size_t f = 0;
    try {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (static_cast<std::ptrdiff_t>(c) == label_col) {
          const long v = std::stol(cells[c]);
          require(v >= 0, ErrorKind::invalid_input, where + ": negative label");
          label = static_cast<std::uint32_t>(v);
        } else if (static_cast<std::ptrdiff_t>(c) == split_col) {
          tag = cells[c];
        } else {
          row[f++] = std::stod(cells[c]);
        }
      }
    } catch (const std::logic_error&) {
      fail(ErrorKind::invalid_input, where + ": non-numeric value");
    }
    require(all_finite(row), ErrorKind::invalid_input, where + ": non-finite feature");
    if (split_col < 0) {
      for (auto* d : {&out.train, &out.prune, &out.test}) d->push_back(row, label);
    } else if (tag == "train") {
      out.train.push_back(row, label);
    } else if (tag == "prune") {
      out.prune.push_back(row, label);
    } else if (tag == "test") {
      out.test.push_back(row, label);
    } else {
      fail(ErrorKind::invalid_input, where + ": unknown split '" + tag + "'");
    }
  }
  return out;
}

/// Dense layer: `units` rows of `fan_in` weights plus one bias per unit.
struct Layer {
  std::size_t units = 0;
  std::size_t fan_in = 0;
  std::vector<double> weights;  // [units, fan_in]
  std::vector<double> bias;

  std::span<const double> row(std::size_t j) const {
    return std::span<const double>(weights).subspan(j * fan_in, fan_in);
  }
  bool operator==(const Layer&) const = default;
};

struct MiniNet {
  std::vector<Layer> layers;  // hidden layers then the output layer
  std::uint64_t seed = 0;
  std::uint32_t epochs_trained = 0;

  std::size_t inputs() const { return layers.front().fan_in; }
  std::size_t outputs() const { return layers.back().units; }
  std::size_t hidden_layers() const { return layers.size() - 1; }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s{inputs()};
    for (const auto& l : layers) s.push_back(l.units);
    return s;
  }
  planner::ModelShape shape() const { return {sizes()}; }

  bool operator==(const MiniNet&) const = default;
};

inline void check_net(const MiniNet& net) {
  require(!net.layers.empty(), ErrorKind::invalid_input, "network has no layers");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    require(layer.units > 0 && layer.fan_in > 0, ErrorKind::invalid_input,
            "layer " + std::to_string(l) + " is empty");
    require(layer.weights.size() == layer.units * layer.fan_in &&
                layer.bias.size() == layer.units,
            ErrorKind::invalid_input, "layer " + std::to_string(l) + " storage mismatch");
    if (l > 0)
      require(layer.fan_in == net.layers[l - 1].units, ErrorKind::invalid_input,
              "layer " + std::to_string(l) + " fan-in does not match previous width");
  }
}

/// He-style scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
inline MiniNet init(std::span<const std::size_t> sizes, std::uint64_t seed) {
  require(sizes.size() >= 2, ErrorKind::invalid_input, "need at least input and output sizes");
  for (auto s : sizes) require(s > 0, ErrorKind::invalid_input, "layer sizes must be positive");
  MiniNet net;
  net.seed = seed;
  std::mt19937_64 rng(stream_seed(seed, "init"));
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    Layer layer;
    layer.units = sizes[l];
    layer.fan_in = sizes[l - 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.fan_in));
    std::uniform_real_distribution<double> uni(-limit, limit);
    layer.weights.resize(layer.units * layer.fan_in);
    for (auto& w : layer.weights) w = uni(rng);
    layer.bias.assign(layer.units, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline MiniNet init(std::initializer_list<std::size_t> sizes, std::uint64_t seed) {
  return init(std::span<const std::size_t>(sizes.begin(), sizes.size()), seed);
}

struct ForwardResult {
  std::vector<double> logits;
  std::vector<std::vector<double>> hidden;  // post-ReLU outputs per hidden layer
};

inline void affine(const Layer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(layer.units);
  for (std::size_t j = 0; j < layer.units; ++j) {
    const double* w = layer.weights.data() + j * layer.fan_in;
    double acc = layer.bias[j];
    for (std::size_t c = 0; c < layer.fan_in; ++c) acc += w[c] * in[c];
    out[j] = acc;
  }
}

inline ForwardResult forward(const MiniNet& net, std::span<const double> x) {
  require(x.size() == net.inputs(), ErrorKind::invalid_input,
          "forward: input has " + std::to_string(x.size()) + " features, net expects " +
              std::to_string(net.inputs()));
  ForwardResult r;
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    affine(net.layers[l], cur, next);
    if (l + 1 < net.layers.size()) {
      for (auto& v : next) v = v > 0.0 ? v : 0.0;
      r.hidden.push_back(next);
    }
    std::swap(cur, next);
  }
  r.logits = std::move(cur);
  return r;
}

/// -log softmax(logits)[label], computed with a shifted log-sum-exp.
inline double cross_entropy(std::span<const double> logits, std::uint32_t label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return std::log(s) + mx - logits[label];
}

/// Parameter-shaped accumulator for loss gradients.
struct Gradients {
  std::vector<std::vector<double>> weights, bias;

  explicit Gradients(const MiniNet& net) {
    for (const auto& l : net.layers) {
      weights.emplace_back(l.weights.size(), 0.0);
      bias.emplace_back(l.bias.size(), 0.0);
    }
  }
  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
  }
};

/// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> pre, post;  // per layer
  std::vector<double> delta, delta_prev;
};

/// Adds d loss / d params for one sample into `grads`; returns the loss.
/// Hidden outputs are left in ws.post.
inline double accumulate_gradient(const MiniNet& net, std::span<const double> x,
                                  std::uint32_t label, Gradients& grads, Workspace& ws) {
  const std::size_t L = net.layers.size();
  ws.pre.resize(L);
  ws.post.resize(L);
  std::span<const double> in = x;
  for (std::size_t l = 0; l < L; ++l) {
    affine(net.layers[l], in, ws.pre[l]);
    ws.post[l] = ws.pre[l];
    if (l + 1 < L)
      for (auto& v : ws.post[l]) v = v > 0.0 ? v : 0.0;
    in = ws.post[l];
  }
  const auto& logits = ws.pre[L - 1];
  require(label < logits.size(), ErrorKind::invalid_input,
          "label " + std::to_string(label) + " out of range for " +
              std::to_string(logits.size()) + " outputs");
  const double loss = cross_entropy(logits, label);

  // d loss / d logits = softmax - onehot
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  ws.delta.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) s += (ws.delta[k] = std::exp(logits[k] - mx));
  for (auto& v : ws.delta) v /= s;
  ws.delta[label] -= 1.0;

  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = net.layers[l];
    std::span<const double> a_prev = l == 0 ? x : std::span<const double>(ws.post[l - 1]);
    auto& gw = grads.weights[l];
    auto& gb = grads.bias[l];
    for (std::size_t j = 0; j < layer.units; ++j) {
      const double dj = ws.delta[j];
      gb[j] += dj;
      if (dj == 0.0) continue;
      double* g = gw.data() + j * layer.fan_in;
      for (std::size_t c = 0; c < layer.fan_in; ++c) g[c] += dj * a_prev[c];
    }
    if (l == 0) break;
    ws.delta_prev.assign(layer.fan_in, 0.0);
    for (std::size_t j = 0; j < layer.units; ++j) {
      const double dj = ws.delta[j];
      if (dj == 0.0) continue;
      const double* w = layer.weights.data() + j * layer.fan_in;
      for (std::size_t c = 0; c < layer.fan_in; ++c) ws.delta_prev[c] += w[c] * dj;
    }
    // ReLU derivative is the indicator of a positive pre-activation.
    const auto& z = ws.pre[l - 1];
    for (std::size_t c = 0; c < layer.fan_in; ++c)
      if (!(z[c] > 0.0)) ws.delta_prev[c] = 0.0;
    std::swap(ws.delta, ws.delta_prev);
  }
  return loss;
}

/// Sum of per-sample losses over `data`.
inline double total_loss(const MiniNet& net, const Dataset& data) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    sum += cross_entropy(forward(net, data.row(i)).logits, data.y[i]);
  return sum;
}

struct Metrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

inline Metrics evaluate(const MiniNet& net, const Dataset& data) {
  require(data.size() > 0, ErrorKind::invalid_input, "evaluate: empty split");
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto logits = forward(net, data.row(i)).logits;
    const auto pred = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (pred == data.y[i]) ++correct;
    loss += cross_entropy(logits, data.y[i]);
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, loss / n};
}

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;  // batch-order stream
};

struct TrainResult {
  MiniNet net;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

/// Minibatch SGD on mean softmax cross-entropy. Each epoch visits the data in
/// an order drawn from (seed, epoch index).
inline TrainResult train(MiniNet net, const Dataset& data, const TrainConfig& cfg) {
  check_net(net);
  require(data.size() > 0, ErrorKind::invalid_input, "train: empty dataset");
  require(cfg.lr >= 0.0 && std::isfinite(cfg.lr), ErrorKind::invalid_input,
          "train: learning rate must be finite and non-negative");
  require(cfg.batch_size > 0, ErrorKind::invalid_input, "train: batch size must be positive");
  require(data.features == net.inputs(), ErrorKind::invalid_input,
          "train: dataset has " + std::to_string(data.features) + " features, net expects " +
              std::to_string(net.inputs()));

  TrainResult result;
  Gradients grads(net);
  Workspace ws;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(stream_seed(cfg.seed, "batch", net.epochs_trained));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t k = start; k < stop; ++k)
        epoch_loss += accumulate_gradient(net, data.row(order[k]), data.y[order[k]], grads, ws);
      if (cfg.lr == 0.0) continue;
      const double step = cfg.lr / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
          layer.weights[i] -= step * grads.weights[l][i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
          layer.bias[i] -= step * grads.bias[l][i];
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) +
                            " (non-finite loss)");
    for (const auto& layer : net.layers)
      if (!all_finite(layer.weights) || !all_finite(layer.bias))
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) +
                              " (non-finite parameters)");
    result.loss_trace.push_back(epoch_loss);
    ++net.epochs_trained;
  }
  result.net = std::move(net);
  return result;
}

/// Fine-tuning is plain training continued from the given (pruned) weights.
inline MiniNet finetune(MiniNet net, const Dataset& data, std::size_t epochs, double lr,
                        std::size_t batch_size, std::uint64_t seed) {
  return train(std::move(net), data, {epochs, lr, batch_size, seed}).net;
}

/// Everything recorded for one hidden layer over the pruning split, in
/// 64-bit precision. Gradients are sums over samples.
struct LayerCapture {
  std::uint32_t layer_id = 0;
  std::size_t units = 0, fan_in = 0, samples = 0;
  std::vector<double> activations;  // [n, units]
  std::vector<std::uint32_t> labels;
  std::vector<double> weight_grad, bias_grad, weights, bias;

  diagnostics::LayerDumps to_dumps() const {
    using dumpio::DumpKind;
    const auto J = static_cast<std::uint32_t>(units);
    const auto n = static_cast<std::uint32_t>(samples);
    const auto d = static_cast<std::uint32_t>(fan_in);
    diagnostics::LayerDumps out;
    out.acts = dumpio::make_activation_dump<double>(layer_id, n, J, 1, activations, labels);
    out.wgrad = dumpio::make_matrix_dump<double>(DumpKind::weight_grad, layer_id, J, d, n,
                                                 weight_grad);
    out.bgrad = dumpio::make_matrix_dump<double>(DumpKind::bias_grad, layer_id, J, 1, n,
                                                 bias_grad);
    out.w = dumpio::make_matrix_dump<double>(DumpKind::weights, layer_id, J, d, 0, weights);
    out.b = dumpio::make_matrix_dump<double>(DumpKind::biases, layer_id, J, 1, 0, bias);
    for (const auto* dump : {&out.acts, &out.wgrad, &out.bgrad, &out.w, &out.b})
      dumpio::validate(*dump);
    return out;
  }
};

struct Capture {
  std::vector<LayerCapture> layers;
  double loss_sum = 0.0;
};

/// Runs the pruning split through the net, recording post-ReLU outputs of
/// every hidden layer and the loss gradients of their parameters summed
/// sequentially over samples.
inline Capture capture(const MiniNet& net, const Dataset& prune) {
  check_net(net);
  require(prune.size() > 0, ErrorKind::invalid_input, "capture: empty pruning split");
  Gradients grads(net);
  Workspace ws;
  Capture cap;
  const std::size_t H = net.hidden_layers();
  cap.layers.resize(H);
  for (std::size_t l = 0; l < H; ++l) {
    auto& lc = cap.layers[l];
    lc.layer_id = static_cast<std::uint32_t>(l);
    lc.units = net.layers[l].units;
    lc.fan_in = net.layers[l].fan_in;
    lc.samples = prune.size();
    lc.activations.reserve(prune.size() * lc.units);
    lc.labels = prune.y;
  }
  for (std::size_t i = 0; i < prune.size(); ++i) {
    cap.loss_sum += accumulate_gradient(net, prune.row(i), prune.y[i], grads, ws);
    for (std::size_t l = 0; l < H; ++l)
      cap.layers[l].activations.insert(cap.layers[l].activations.end(), ws.post[l].begin(),
                                       ws.post[l].end());
  }
  for (std::size_t l = 0; l < H; ++l) {
    auto& lc = cap.layers[l];
    lc.weight_grad = grads.weights[l];
    lc.bias_grad = grads.bias[l];
    lc.weights = net.layers[l].weights;
    lc.bias = net.layers[l].bias;
  }
  return cap;
}

// FPM1 checkpoint, little-endian:
//   "FPM1" | version u32 = 1 | seed u64 | epochs_trained u32 | layer count
//   u32 (including output) | input width u32 | per layer: units u32 |
//   per layer: weights f64[units*fan_in], bias f64[units]

inline constexpr std::array<char, 4> kCheckpointMagic = {'F', 'P', 'M', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

struct Reader {
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;

  std::uint64_t get(int n) {
    require(pos + static_cast<std::size_t>(n) <= bytes.size(), ErrorKind::invalid_input,
            "checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
  }
  double f64() { return std::bit_cast<double>(get(8)); }
};

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const MiniNet& net) {
  check_net(net);
  std::vector<unsigned char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put(out, kCheckpointVersion, 4);
  detail::put(out, net.seed, 8);
  detail::put(out, net.epochs_trained, 4);
  detail::put(out, net.layers.size(), 4);
  detail::put(out, net.inputs(), 4);
  for (const auto& l : net.layers) detail::put(out, l.units, 4);
  for (const auto& l : net.layers) {
    for (double w : l.weights) detail::put(out, std::bit_cast<std::uint64_t>(w), 8);
    for (double b : l.bias) detail::put(out, std::bit_cast<std::uint64_t>(b), 8);
  }
  return out;
}

inline MiniNet decode_checkpoint(std::span<const unsigned char> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kCheckpointMagic.data(), 4) == 0,
          ErrorKind::invalid_input, "not an FPM1 checkpoint (bad magic)");
  detail::Reader r{bytes, 4};
  const auto version = r.get(4);
  require(version == kCheckpointVersion, ErrorKind::invalid_input,
          "unsupported checkpoint version " + std::to_string(version));
  MiniNet net;
  net.seed = r.get(8);
  net.epochs_trained = static_cast<std::uint32_t>(r.get(4));
  const auto count = r.get(4);
  require(count >= 1 && count < 4096, ErrorKind::invalid_input, "bad checkpoint layer count");
  std::size_t fan_in = r.get(4);
  net.layers.resize(count);
  for (auto& l : net.layers) {
    l.fan_in = fan_in;
    l.units = r.get(4);
    require(l.units > 0 && l.fan_in > 0, ErrorKind::invalid_input, "empty layer in checkpoint");
    require(l.units * l.fan_in <= (bytes.size() - r.pos) / 8, ErrorKind::invalid_input,
            "checkpoint truncated");
    fan_in = l.units;
  }
  for (auto& l : net.layers) {
    l.weights.resize(l.units * l.fan_in);
    l.bias.resize(l.units);
    for (auto& w : l.weights) w = r.f64();
    for (auto& b : l.bias) b = r.f64();
    require(all_finite(l.weights) && all_finite(l.bias), ErrorKind::invalid_input,
            "non-finite parameter in checkpoint");
  }
  require(r.pos == bytes.size(), ErrorKind::invalid_input, "trailing bytes in checkpoint");
  return net;
}

inline void save_checkpoint(const std::filesystem::path& path, const MiniNet& net) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::invalid_input, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::internal, "write failed: " + path.string());
}

inline MiniNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fair::mininet
