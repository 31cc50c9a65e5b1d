#include "srn/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "srn/errors.hpp"
#include "srn/rng.hpp"

namespace srn::baseline {

namespace {

constexpr std::size_t H = DeepSetNet::kHidden;
constexpr std::size_t K = DeepSetNet::kTop;

void check_net(const DeepSetNet& net) {
  if (net.w1.size() != H * 2 || net.b1.size() != H || net.w2.size() != H * H ||
      net.b2.size() != H || net.wh.size() != net.classes * DeepSetNet::feature_dim() ||
      net.bh.size() != net.classes) {
    throw ContractError("deepset: parameter shapes do not match the architecture");
  }
}

}  // namespace

DeepSetNet make_deepset(std::size_t classes, double input_scale, std::uint64_t seed) {
  if (classes < 2) throw ParameterError("make_deepset: need at least two classes");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
    throw ParameterError("make_deepset: input scale must be positive");
  }
  DeepSetNet net;
  net.classes = classes;
  net.input_scale = input_scale;
  Rng rng(seed);
  auto fill = [&](std::vector<double>& w, std::size_t size, std::size_t fan_in) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
    w.resize(size);
    for (auto& v : w) v = rng.uniform(-a, a);
  };
  fill(net.w1, H * 2, 2);
  fill(net.w2, H * H, H);
  fill(net.wh, classes * DeepSetNet::feature_dim(), DeepSetNet::feature_dim());
  net.b1.assign(H, 0.0);
  net.b2.assign(H, 0.0);
  net.bh.assign(classes, 0.0);
  return net;
}

std::vector<double> deepset_forward(const DeepSetNet& net, const PersistenceDiagram& d) {
  DeepSetCache cache;
  return deepset_forward(net, d, cache);
}

std::vector<double> deepset_forward(const DeepSetNet& net, const PersistenceDiagram& d,
                                    DeepSetCache& cache) {
  check_net(net);
  cache.points = d.points;
  cache.n_real = d.points.size();
  if (cache.points.size() < K) cache.points.resize(K, DiagramPoint{0.0, 0.0});
  const std::size_t n = cache.points.size();
  const double inv = 1.0 / net.input_scale;

  cache.h1.assign(n * H, 0.0);
  cache.h2.assign(n * H, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = cache.points[i].birth * inv;
    const double x1 = cache.points[i].death * inv;
    double* h1 = cache.h1.data() + i * H;
    double* h2 = cache.h2.data() + i * H;
    for (std::size_t k = 0; k < H; ++k) {
      h1[k] = std::max(0.0, net.w1[2 * k] * x0 + net.w1[2 * k + 1] * x1 + net.b1[k]);
    }
    for (std::size_t k = 0; k < H; ++k) {
      double z = net.b2[k];
      for (std::size_t j = 0; j < H; ++j) z += net.w2[k * H + j] * h1[j];
      h2[k] = std::max(0.0, z);
    }
  }

  // Top-K per feature, largest first; equal values keep the lower index.
  cache.top.assign(H * K, 0);
  cache.features.assign(DeepSetNet::feature_dim(), 0.0);
  std::vector<std::uint32_t> idx(n);
  for (std::size_t k = 0; k < H; ++k) {
    std::iota(idx.begin(), idx.end(), 0u);
    std::partial_sort(idx.begin(), idx.begin() + K, idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double va = cache.h2[a * H + k];
      const double vb = cache.h2[b * H + k];
      return va > vb || (va == vb && a < b);
    });
    for (std::size_t t = 0; t < K; ++t) {
      cache.top[k * K + t] = idx[t];
      cache.features[k * K + t] = cache.h2[idx[t] * H + k];
    }
  }

  cache.logits.assign(net.classes, 0.0);
  const std::size_t f = DeepSetNet::feature_dim();
  for (std::size_t c = 0; c < net.classes; ++c) {
    double z = net.bh[c];
    for (std::size_t j = 0; j < f; ++j) z += net.wh[c * f + j] * cache.features[j];
    cache.logits[c] = z;
  }
  return cache.logits;
}

DeepSetGradients deepset_backward(const DeepSetNet& net, const DeepSetCache& cache,
                                  std::span<const double> dlogits) {
  check_net(net);
  if (dlogits.size() != net.classes) throw ContractError("deepset_backward: wrong gradient length");
  const std::size_t n = cache.points.size();
  const std::size_t f = DeepSetNet::feature_dim();
  const double inv = 1.0 / net.input_scale;

  DeepSetGradients g;
  g.wh.assign(net.wh.size(), 0.0);
  g.bh.assign(dlogits.begin(), dlogits.end());
  std::vector<double> dfeat(f, 0.0);
  for (std::size_t c = 0; c < net.classes; ++c) {
    for (std::size_t j = 0; j < f; ++j) {
      g.wh[c * f + j] = dlogits[c] * cache.features[j];
      dfeat[j] += dlogits[c] * net.wh[c * f + j];
    }
  }

  std::vector<double> dh2(n * H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    for (std::size_t t = 0; t < K; ++t) dh2[cache.top[k * K + t] * H + k] += dfeat[k * K + t];
  }

  g.w1.assign(net.w1.size(), 0.0);
  g.b1.assign(H, 0.0);
  g.w2.assign(net.w2.size(), 0.0);
  g.b2.assign(H, 0.0);
  g.points.assign(cache.n_real, DiagramPoint{0.0, 0.0});
  std::vector<double> dz1(H);
  for (std::size_t i = 0; i < n; ++i) {
    const double* h1 = cache.h1.data() + i * H;
    const double* h2 = cache.h2.data() + i * H;
    std::fill(dz1.begin(), dz1.end(), 0.0);
    bool any = false;
    for (std::size_t k = 0; k < H; ++k) {
      const double dz2 = h2[k] > 0.0 ? dh2[i * H + k] : 0.0;
      if (dz2 == 0.0) continue;
      any = true;
      g.b2[k] += dz2;
      for (std::size_t j = 0; j < H; ++j) {
        g.w2[k * H + j] += dz2 * h1[j];
        dz1[j] += dz2 * net.w2[k * H + j];
      }
    }
    if (!any) continue;
    const double x0 = cache.points[i].birth * inv;
    const double x1 = cache.points[i].death * inv;
    double dx0 = 0.0;
    double dx1 = 0.0;
    for (std::size_t k = 0; k < H; ++k) {
      const double dz = h1[k] > 0.0 ? dz1[k] : 0.0;
      if (dz == 0.0) continue;
      g.b1[k] += dz;
      g.w1[2 * k] += dz * x0;
      g.w1[2 * k + 1] += dz * x1;
      dx0 += dz * net.w1[2 * k];
      dx1 += dz * net.w1[2 * k + 1];
    }
    if (i < cache.n_real) g.points[i] = DiagramPoint{dx0 * inv, dx1 * inv};
  }
  return g;
}

DeepSetTrainResult train_deepset(std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, const DeepSetTrainConfig& config) {
  if (diagrams.size() != labels.size()) {
    throw ParameterError("train_deepset: diagrams and labels differ in count");
  }
  if (diagrams.size() < 2) throw ParameterError("train_deepset: need at least two samples");
  if (config.batch_size == 0) throw ParameterError("train_deepset: batch size must be positive");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= config.classes) {
      throw ParameterError("train_deepset: label out of range");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(diagrams.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.split(1).shuffle(order);
  const auto n_val = static_cast<std::size_t>(config.validation_fraction *
                                              static_cast<double>(diagrams.size()));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  // Scale: root mean square of the training coordinates.
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i : train_idx) {
    for (const auto& p : diagrams[i].points) {
      sq += p.birth * p.birth + p.death * p.death;
      count += 2;
    }
  }
  const double scale = count > 0 && sq > 0.0 ? std::sqrt(sq / static_cast<double>(count)) : 1.0;

  DeepSetTrainResult result;
  result.net = make_deepset(config.classes, scale, rng.split(2).next_u64());
  auto& net = result.net;

  optim::Optimizer opt(config.optimizer);
  for (auto* block : {&net.w1, &net.b1, &net.w2, &net.b2, &net.wh, &net.bh}) {
    opt.add_block(block->size());
  }

  std::vector<double> grad_row(config.classes);
  DeepSetCache cache;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    opt.set_epoch(epoch);
    rng.split(100 + epoch).shuffle(train_idx);
    lipnet::EpochStats stats;
    stats.epoch = epoch;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    double margin_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
      const double w = 1.0 / static_cast<double>(end - start);
      DeepSetGradients acc;
      acc.w1.assign(net.w1.size(), 0.0);
      acc.b1.assign(net.b1.size(), 0.0);
      acc.w2.assign(net.w2.size(), 0.0);
      acc.b2.assign(net.b2.size(), 0.0);
      acc.wh.assign(net.wh.size(), 0.0);
      acc.bh.assign(net.bh.size(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = train_idx[b];
        const auto logits = deepset_forward(net, diagrams[i], cache);
        const double l = lipnet::loss_and_gradient(logits, labels[i], lipnet::LossKind::cross_entropy,
                                                   0.0, 1.0, grad_row);
        if (!std::isfinite(l)) {
          throw DivergenceError("train_deepset: non-finite loss at epoch " +
                                std::to_string(epoch) + ", sample " + std::to_string(i));
        }
        loss_sum += l;
        margin_sum += lipnet::margin(logits, labels[i]);
        if (lipnet::predict(logits) == labels[i]) ++correct;
        for (auto& v : grad_row) v *= w;
        const auto g = deepset_backward(net, cache, grad_row);
        auto add = [](std::vector<double>& a, const std::vector<double>& b) {
          for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        };
        add(acc.w1, g.w1);
        add(acc.b1, g.b1);
        add(acc.w2, g.w2);
        add(acc.b2, g.b2);
        add(acc.wh, g.wh);
        add(acc.bh, g.bh);
      }
      const std::vector<std::span<double>> params{net.w1, net.b1, net.w2, net.b2, net.wh, net.bh};
      const std::vector<std::span<const double>> grads{acc.w1, acc.b1, acc.w2,
                                                       acc.b2, acc.wh, acc.bh};
      opt.step(params, grads);
    }
    const auto n = static_cast<double>(train_idx.size());
    stats.loss = loss_sum / n;
    stats.train_accuracy = static_cast<double>(correct) / n;
    stats.mean_margin = margin_sum / n;
    if (!val_idx.empty()) {
      std::size_t ok = 0;
      for (std::size_t i : val_idx) {
        if (lipnet::predict(deepset_forward(net, diagrams[i])) == labels[i]) ++ok;
      }
      stats.validation_accuracy = static_cast<double>(ok) / static_cast<double>(val_idx.size());
    }
    result.history.push_back(stats);
  }
  return result;
}

}  // namespace srn::baseline
