#include "srn/lipnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "srn/errors.hpp"
#include "srn/rng.hpp"

namespace srn::lipnet {

namespace {

// max_j |x_j - w_j| and the first j attaining it.
inline double linf_distance(const double* x, const double* w, std::size_t n,
                            std::uint32_t* arg, double* sign) {
  double best = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = std::abs(x[j] - w[j]);
    best = d > best ? d : best;
  }
  if (arg != nullptr) {
    std::size_t j = 0;
    while (j + 1 < n && std::abs(x[j] - w[j]) != best) ++j;
    *arg = static_cast<std::uint32_t>(j);
    *sign = n == 0 ? 0.0 : (x[j] - w[j] >= 0.0 ? 1.0 : -1.0);
  }
  return best;
}

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += row[c];
  }
  if (m.rows() > 0) {
    for (auto& v : mean) v /= static_cast<double>(m.rows());
  }
  return mean;
}

std::vector<double> column_stddevs(const Matrix& m, const std::vector<double>& mean) {
  std::vector<double> var(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) var[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
  }
  for (auto& v : var) v = m.rows() > 0 ? std::sqrt(v / static_cast<double>(m.rows())) : 0.0;
  return var;
}

Matrix scale_inputs(const Matrix& x, const std::vector<double>& scale) {
  Matrix out = x;
  if (scale.empty()) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] *= scale[c];
  }
  return out;
}

void subtract_rowwise(Matrix& m, const std::vector<double>& v) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] -= v[c];
  }
}

// q^p for p a power of two.
inline double pow2k(double q, int p) {
  for (; p > 1; p >>= 1) q *= q;
  return q;
}

// ||x - w||_p, scaled by the max so that q^p cannot overflow.
inline double lp_distance(const double* x, const double* w, std::size_t n, int p) {
  const double top = linf_distance(x, w, n, nullptr, nullptr);
  if (top == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += pow2k(std::abs(x[j] - w[j]) / top, p);
  return top * std::pow(sum, 1.0 / p);
}

Matrix layer_forward(const LinfLayer& layer, const Matrix& x, LayerCache* cache,
                     int relax_p = 0) {
  const std::size_t batch = x.rows();
  Matrix out(batch, layer.units);
  if (relax_p > 0) {
    if (cache != nullptr) {
      cache->input = x;
      cache->norm.assign(batch * layer.units, 0.0);
    }
    for (std::size_t s = 0; s < batch; ++s) {
      const double* xs = x.row(s).data();
      for (std::size_t o = 0; o < layer.units; ++o) {
        const double d =
            lp_distance(xs, layer.weights.data() + o * layer.inputs, layer.inputs, relax_p);
        if (cache != nullptr) cache->norm[s * layer.units + o] = d;
        out(s, o) = d + layer.biases[o];
      }
    }
    return out;
  }
  if (cache != nullptr) {
    cache->argmax.assign(batch * layer.units, 0);
    cache->sign.assign(batch * layer.units, 0.0);
  }
  for (std::size_t s = 0; s < batch; ++s) {
    const double* xs = x.row(s).data();
    for (std::size_t o = 0; o < layer.units; ++o) {
      const std::size_t k = s * layer.units + o;
      const double d = linf_distance(xs, layer.weights.data() + o * layer.inputs, layer.inputs,
                                     cache ? &cache->argmax[k] : nullptr,
                                     cache ? &cache->sign[k] : nullptr);
      out(s, o) = d + layer.biases[o];
    }
  }
  return out;
}

void check_input(const LipschitzNetwork& net, std::size_t dim) {
  if (net.layers().empty()) throw ContractError("lipnet: network has no layers");
  if (dim != net.input_dim()) {
    throw ContractError("lipnet: input has dimension " + std::to_string(dim) + ", expected " +
                        std::to_string(net.input_dim()));
  }
}

}  // namespace

double unit_forward(std::span<const double> x, std::span<const double> w, double b) {
  if (x.size() != w.size()) {
    throw ContractError("unit_forward: x and w differ in length (" + std::to_string(x.size()) +
                        " vs " + std::to_string(w.size()) + ")");
  }
  return linf_distance(x.data(), w.data(), x.size(), nullptr, nullptr) + b;
}

LipschitzNetwork::LipschitzNetwork(std::size_t input_dim, const std::vector<std::size_t>& sizes,
                                   bool center_last) {
  if (input_dim == 0 || sizes.empty()) throw ParameterError("lipnet: empty architecture");
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    if (sizes[l] == 0) throw ParameterError("lipnet: layer with zero units");
    LinfLayer layer;
    layer.inputs = in;
    layer.units = sizes[l];
    layer.weights.assign(in * sizes[l], 0.0);
    layer.biases.assign(sizes[l], 0.0);
    layer.centering = center_last || l + 1 < sizes.size();
    layer.running_mean.assign(sizes[l], 0.0);
    layers_.push_back(std::move(layer));
    in = sizes[l];
  }
}

void LipschitzNetwork::set_input_scale(std::vector<double> scale) {
  if (!scale.empty() && scale.size() != input_dim()) {
    throw ParameterError("set_input_scale: length " + std::to_string(scale.size()) +
                         " does not match input dimension " + std::to_string(input_dim()));
  }
  for (double v : scale) {
    if (!(v > 0.0 && v <= 1.0)) throw ParameterError("set_input_scale: factors must lie in (0, 1]");
  }
  input_scale_ = std::move(scale);
}

std::vector<double> contraction_scale(const Matrix& x) {
  const auto sd = column_stddevs(x, column_means(x));
  std::vector<double> nonzero;
  for (double v : sd) {
    if (v > 0.0) nonzero.push_back(v);
  }
  std::vector<double> scale(x.cols(), 1.0);
  if (nonzero.empty()) return scale;
  const auto mid = nonzero.begin() + static_cast<std::ptrdiff_t>(nonzero.size() / 2);
  std::nth_element(nonzero.begin(), mid, nonzero.end());
  const double ref = *mid;
  for (std::size_t j = 0; j < sd.size(); ++j) {
    if (sd[j] > ref) scale[j] = ref / sd[j];
  }
  return scale;
}

std::vector<double> LipschitzNetwork::forward(std::span<const double> x) const {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.row(0).begin());
  const Matrix out = forward(m);
  return {out.row(0).begin(), out.row(0).end()};
}

Matrix LipschitzNetwork::forward(const Matrix& x) const {
  check_input(*this, x.cols());
  Matrix cur = scale_inputs(x, input_scale_);
  for (const auto& layer : layers_) {
    cur = layer_forward(layer, cur, nullptr);
    if (layer.centering) subtract_rowwise(cur, layer.running_mean);
  }
  return cur;
}

Matrix forward_cached(const LipschitzNetwork& net, const Matrix& x, Mode mode,
                      ForwardCache& cache, int relax_p) {
  check_input(net, x.cols());
  if (relax_p < 0 || (relax_p & (relax_p - 1)) != 0) {
    throw ParameterError("forward_cached: relaxation p must be a power of two");
  }
  cache.mode = mode;
  cache.relax_p = relax_p;
  cache.layers.assign(net.layers().size(), {});
  Matrix cur = scale_inputs(x, net.input_scale());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    auto& lc = cache.layers[l];
    cur = layer_forward(layer, cur, &lc, relax_p);
    if (layer.centering) {
      if (mode == Mode::train) {
        lc.batch_mean = column_means(cur);
        subtract_rowwise(cur, lc.batch_mean);
      } else {
        subtract_rowwise(cur, layer.running_mean);
      }
    }
  }
  cache.output = cur;
  return cur;
}

void update_running_means(LipschitzNetwork& net, const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::train) return;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    if (!layer.centering) continue;
    const auto& mean = cache.layers[l].batch_mean;
    for (std::size_t o = 0; o < layer.units; ++o) {
      layer.running_mean[o] = momentum * layer.running_mean[o] + (1.0 - momentum) * mean[o];
    }
  }
}

Matrix centering_forward(const Matrix& batch, std::vector<double>& running_mean, Mode mode,
                         double momentum) {
  if (running_mean.size() != batch.cols()) {
    throw ContractError("centering_forward: running mean has the wrong length");
  }
  Matrix out = batch;
  if (mode == Mode::train) {
    const auto mean = column_means(batch);
    subtract_rowwise(out, mean);
    for (std::size_t c = 0; c < mean.size(); ++c) {
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
    }
  } else {
    subtract_rowwise(out, running_mean);
  }
  return out;
}

Gradients backward(const LipschitzNetwork& net, const ForwardCache& cache,
                   const Matrix& grad_output) {
  const std::size_t batch = grad_output.rows();
  if (cache.layers.size() != net.layers().size() || grad_output.cols() != net.output_dim()) {
    throw ContractError("lipnet backward: cache does not match the network");
  }
  Gradients grads;
  grads.weights.resize(net.layers().size());
  grads.biases.resize(net.layers().size());

  Matrix g = grad_output;
  for (std::size_t l = net.layers().size(); l-- > 0;) {
    const auto& layer = net.layers()[l];
    const auto& lc = cache.layers[l];
    if (layer.centering && cache.mode == Mode::train) {
      subtract_rowwise(g, column_means(g));
    }
    auto& dw = grads.weights[l];
    auto& db = grads.biases[l];
    dw.assign(layer.weights.size(), 0.0);
    db.assign(layer.units, 0.0);
    Matrix gin(batch, layer.inputs);
    if (cache.relax_p > 0) {
      // d||x - w||_p / dx_j = sign(x_j - w_j) (|x_j - w_j| / ||x - w||_p)^(p-1)
      for (std::size_t s = 0; s < batch; ++s) {
        const double* xs = lc.input.row(s).data();
        double* gs = gin.row(s).data();
        for (std::size_t o = 0; o < layer.units; ++o) {
          const double go = g(s, o);
          const double norm = lc.norm[s * layer.units + o];
          db[o] += go;
          if (go == 0.0 || norm == 0.0) continue;
          const double* w = layer.weights.data() + o * layer.inputs;
          double* dwo = dw.data() + o * layer.inputs;
          for (std::size_t j = 0; j < layer.inputs; ++j) {
            const double d = xs[j] - w[j];
            const double q = std::abs(d) / norm;
            if (q == 0.0) continue;
            const double v = go * std::copysign(pow2k(q, cache.relax_p) / q, d);
            dwo[j] -= v;
            gs[j] += v;
          }
        }
      }
      g = std::move(gin);
      continue;
    }
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t o = 0; o < layer.units; ++o) {
        const double go = g(s, o);
        if (go == 0.0) continue;
        const std::size_t k = s * layer.units + o;
        const std::size_t j = lc.argmax[k];
        const double sg = go * lc.sign[k];
        db[o] += go;
        dw[o * layer.inputs + j] -= sg;
        gin(s, j) += sg;
      }
    }
    g = std::move(gin);
  }
  grads.input = scale_inputs(g, net.input_scale());
  return grads;
}

std::vector<double> input_gradient(const LipschitzNetwork& net, std::span<const double> x,
                                   std::span<const double> grad_logits) {
  Matrix in(1, x.size());
  std::copy(x.begin(), x.end(), in.row(0).begin());
  ForwardCache cache;
  forward_cached(net, in, Mode::inference, cache);
  Matrix g(1, grad_logits.size());
  std::copy(grad_logits.begin(), grad_logits.end(), g.row(0).begin());
  const Gradients grads = backward(net, cache, g);
  return {grads.input.row(0).begin(), grads.input.row(0).end()};
}

LipschitzNetwork init_network(const Matrix& x, const std::vector<std::size_t>& sizes,
                              std::uint64_t seed, bool center_last,
                              std::vector<double> input_scale) {
  if (x.rows() == 0) throw ParameterError("init_network: no training data");
  LipschitzNetwork net(x.cols(), sizes, center_last);
  net.set_input_scale(std::move(input_scale));
  Rng rng(seed);
  Matrix act = scale_inputs(x, net.input_scale());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    const auto mean = column_means(act);
    const auto sd = column_stddevs(act, mean);
    for (std::size_t o = 0; o < layer.units; ++o) {
      for (std::size_t j = 0; j < layer.inputs; ++j) {
        layer.weights[o * layer.inputs + j] = mean[j] + rng.uniform(-1.0, 1.0) * sd[j];
      }
    }
    act = layer_forward(layer, act, nullptr);
    if (layer.centering) {
      layer.running_mean = column_means(act);
      subtract_rowwise(act, layer.running_mean);
    }
  }
  return net;
}

int predict(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double margin(std::span<const double> logits, int true_class) {
  if (logits.size() < 2) throw ParameterError("margin: needs at least two classes");
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= logits.size()) {
    throw ParameterError("margin: class index out of range");
  }
  double other = -INFINITY;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) != true_class) other = std::max(other, logits[i]);
  }
  return logits[true_class] - other;
}

double loss_and_gradient(std::span<const double> logits, int true_class, LossKind kind,
                         double margin_target, double temperature, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto c = static_cast<std::size_t>(true_class);
  if (kind == LossKind::hinge) {
    std::size_t rival = c == 0 ? 1 : 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (i != c && logits[i] > logits[rival]) rival = i;
    }
    const double slack = margin_target - (logits[c] - logits[rival]);
    if (slack <= 0.0) return 0.0;
    grad[c] = -1.0;
    grad[rival] = 1.0;
    return slack;
  }
  const double inv_t = 1.0 / temperature;
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp((logits[i] - top) * inv_t);
    z += grad[i];
  }
  for (auto& g : grad) g = g / z * inv_t;
  grad[c] -= inv_t;
  return std::log(z) - (logits[c] - top) * inv_t;
}

int relax_p_at(const TrainConfig& config, std::size_t epoch) {
  if (config.relax_p_start <= 0) return 0;
  const auto relaxed = static_cast<std::size_t>(config.relax_fraction *
                                                static_cast<double>(config.epochs));
  if (epoch >= relaxed) return 0;
  int levels = 1;
  for (int p = config.relax_p_start; p < config.relax_p_max; p *= 2) ++levels;
  const auto level = static_cast<int>(epoch * static_cast<std::size_t>(levels) / relaxed);
  return config.relax_p_start << level;
}

TrainResult train(const Matrix& x, std::span<const int> labels, const TrainConfig& config) {
  if (x.rows() != labels.size()) throw ParameterError("train: vectors and labels differ in count");
  if (x.rows() < 2) throw ParameterError("train: need at least two samples");
  if (config.layer_sizes.empty()) throw ParameterError("train: empty architecture");
  if (config.batch_size < 2) throw ParameterError("train: batch size must be >= 2");
  const auto is_pow2 = [](int v) { return v > 0 && (v & (v - 1)) == 0; };
  if (config.relax_p_start != 0 &&
      (!is_pow2(config.relax_p_start) || !is_pow2(config.relax_p_max) ||
       config.relax_p_max < config.relax_p_start)) {
    throw ParameterError("train: relaxation p values must be powers of two with start <= max");
  }
  const std::size_t classes = config.layer_sizes.back();
  if (classes < 2) throw ParameterError("train: need at least two classes");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ParameterError("train: label out of range");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.split(1).shuffle(order);
  const auto n_val = static_cast<std::size_t>(config.validation_fraction *
                                              static_cast<double>(x.rows()));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    Matrix m(idx.size(), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(x.row(idx[r]).begin(), x.row(idx[r]).end(), m.row(r).begin());
    }
    return m;
  };

  const Matrix x_train = gather(train_idx);
  TrainResult result;
  std::vector<double> scale;
  if (config.contract_inputs) scale = contraction_scale(x_train);
  result.net = init_network(x_train, config.layer_sizes, rng.split(2).next_u64(),
                            config.center_last_layer, scale);
  auto& net = result.net;

  double gamma = config.margin_target;
  if (gamma <= 0.0) {
    const Matrix scaled = scale_inputs(x_train, net.input_scale());
    const auto mean = column_means(scaled);
    const auto sd = column_stddevs(scaled, mean);
    gamma = std::accumulate(sd.begin(), sd.end(), 0.0) / static_cast<double>(sd.size());
    if (!(gamma > 0.0)) gamma = 1.0;
  }
  result.margin_target = gamma;

  optim::Optimizer opt(config.optimizer);
  for (const auto& layer : net.layers()) {
    opt.add_block(layer.weights.size());
    opt.add_block(layer.biases.size());
  }

  const Matrix x_val = gather(val_idx);
  std::vector<double> grad_row(classes);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    opt.set_epoch(epoch);
    const int relax_p = relax_p_at(config, epoch);
    Rng epoch_rng = rng.split(100 + epoch);
    epoch_rng.shuffle(train_idx);

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    double margin_sum = 0.0;
    const std::size_t n = train_idx.size();
    for (std::size_t start = 0; start < n;) {
      std::size_t end = std::min(n, start + config.batch_size);
      if (n - end == 1) end = n;  // never leave a singleton batch
      const std::vector<std::size_t> batch_idx(train_idx.begin() + start, train_idx.begin() + end);
      const Matrix xb = gather(batch_idx);
      ForwardCache cache;
      const Matrix logits = forward_cached(net, xb, Mode::train, cache, relax_p);
      Matrix grad(xb.rows(), classes);
      const double scale = 1.0 / static_cast<double>(xb.rows());
      for (std::size_t s = 0; s < xb.rows(); ++s) {
        const int y = labels[batch_idx[s]];
        const double l = loss_and_gradient(logits.row(s), y, config.loss, gamma,
                                           config.temperature, grad_row);
        if (!std::isfinite(l)) {
          std::ostringstream msg;
          msg << "train: non-finite loss at epoch " << epoch << ", batch starting at " << start
              << " (learning rate " << opt.learning_rate() << ")";
          throw DivergenceError(msg.str());
        }
        loss_sum += l;
        margin_sum += margin(logits.row(s), y);
        if (predict(logits.row(s)) == y) ++correct;
        for (std::size_t c = 0; c < classes; ++c) grad(s, c) = grad_row[c] * scale;
      }
      const Gradients g = backward(net, cache, grad);

      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      for (std::size_t l = 0; l < net.layers().size(); ++l) {
        params.emplace_back(net.layers()[l].weights);
        grads.emplace_back(g.weights[l]);
        params.emplace_back(net.layers()[l].biases);
        grads.emplace_back(g.biases[l]);
      }
      opt.step(params, grads);
      update_running_means(net, cache, config.centering_momentum);
      start = end;
    }
    stats.loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    stats.mean_margin = margin_sum / static_cast<double>(n);
    if (x_val.rows() > 0) {
      const Matrix out = net.forward(x_val);
      std::size_t ok = 0;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        if (predict(out.row(r)) == labels[val_idx[r]]) ++ok;
      }
      stats.validation_accuracy = static_cast<double>(ok) / static_cast<double>(out.rows());
    }
    for (const auto& layer : net.layers()) {
      for (double w : layer.weights) {
        if (!std::isfinite(w)) {
          throw DivergenceError("train: non-finite weight after epoch " + std::to_string(epoch));
        }
      }
    }
    result.history.push_back(stats);
  }
  return result;
}

CertificationRecord certify_logits(std::span<const double> logits, int true_class, double k,
                                   std::size_t sample_id) {
  if (!(k > 0.0)) throw ParameterError("certify: Lipschitz constant must be positive");
  CertificationRecord rec;
  rec.sample_id = sample_id;
  rec.true_class = true_class;
  rec.predicted = predict(logits);
  rec.margin = margin(logits, true_class);
  rec.lipschitz_constant = k;
  rec.certified_radius = rec.correct() ? std::max(rec.margin, 0.0) / (2.0 * k) : 0.0;
  return rec;
}

CertificationRecord certify(const LipschitzNetwork& net, std::span<const double> x,
                            int true_class, double k, std::size_t sample_id) {
  const auto logits = net.forward(x);
  return certify_logits(logits, true_class, k, sample_id);
}

double certified_robust_accuracy(std::span<const CertificationRecord> records, double eps) {
  if (records.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& r : records) {
    if (r.correct() && r.margin > 0.0 && r.certified_radius >= eps) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

double clean_accuracy(std::span<const CertificationRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& r : records) ok += r.correct() ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

}  // namespace srn::lipnet
