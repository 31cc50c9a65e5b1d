#include "srn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "srn/errors.hpp"
#include "srn/optim.hpp"
#include "srn/rng.hpp"

namespace srn::model {

namespace {

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }
double softplus_inverse(double w) { return w > 30.0 ? w : std::log(std::expm1(w)); }
double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

Matrix vectorize_rows(std::span<const PersistenceDiagram> diagrams,
                      std::span<const std::size_t> rows, metric::MetricParams p,
                      const stablerank::Reparameterization& rep, std::size_t dim) {
  Matrix x(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto v = stablerank::stable_rank_vector(diagrams[rows[r]], p, rep, dim);
    std::copy(v.values.begin(), v.values.end(), x.row(r).begin());
  }
  return x;
}

// Joint training of the network and the mixture parameters of F. Same
// protocol as lipnet::train, with the vectors recomputed from the current F
// for every batch.
SrnTrainResult train_joint(std::span<const PersistenceDiagram> diagrams, std::span<const int> labels,
                           metric::MetricParams p, const stablerank::Reparameterization& rep0,
                           std::size_t dim, const SrnTrainConfig& config) {
  const auto& cfg = config.net;
  const std::size_t classes = cfg.layer_sizes.back();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(diagrams.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.split(1).shuffle(order);
  const auto n_val = static_cast<std::size_t>(cfg.validation_fraction *
                                              static_cast<double>(diagrams.size()));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  // Free parameters: (softplus^-1 w, mu, log s) per component.
  auto comps = rep0.components();
  std::vector<double> theta;
  for (const auto& c : comps) {
    theta.push_back(softplus_inverse(c.weight));
    theta.push_back(c.mean);
    theta.push_back(std::log(c.stddev));
  }
  auto current_rep = [&] {
    for (std::size_t k = 0; k < comps.size(); ++k) {
      comps[k] = {softplus(theta[3 * k]), theta[3 * k + 1], std::exp(theta[3 * k + 2])};
    }
    return stablerank::Reparameterization::gaussian_mixture(comps);
  };

  SrnTrainResult result;
  auto rep = current_rep();
  const Matrix x_train = vectorize_rows(diagrams, train_idx, p, rep, dim);
  std::vector<double> scale;
  if (cfg.contract_inputs) scale = lipnet::contraction_scale(x_train);
  lipnet::LipschitzNetwork net = lipnet::init_network(x_train, cfg.layer_sizes,
                                                      rng.split(2).next_u64(),
                                                      cfg.center_last_layer, scale);
  double gamma = cfg.margin_target;
  if (gamma <= 0.0) {
    double total = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double mean = 0.0;
      double var = 0.0;
      for (std::size_t r = 0; r < x_train.rows(); ++r) mean += x_train(r, j);
      mean /= static_cast<double>(x_train.rows());
      for (std::size_t r = 0; r < x_train.rows(); ++r) {
        var += (x_train(r, j) - mean) * (x_train(r, j) - mean);
      }
      total += std::sqrt(var / static_cast<double>(x_train.rows())) *
               (scale.empty() ? 1.0 : scale[j]);
    }
    gamma = total > 0.0 ? total / static_cast<double>(dim) : 1.0;
  }
  result.margin_target = gamma;

  optim::Optimizer opt(cfg.optimizer);
  for (const auto& layer : net.layers()) {
    opt.add_block(layer.weights.size());
    opt.add_block(layer.biases.size());
  }
  optim::OptimizerConfig rep_cfg = cfg.optimizer;
  rep_cfg.learning_rate = config.reparam_learning_rate;
  optim::Optimizer rep_opt(rep_cfg);
  rep_opt.add_block(theta.size());

  std::vector<double> grad_row(classes);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_epoch(epoch);
    rep_opt.set_epoch(epoch);
    const int relax_p = lipnet::relax_p_at(cfg, epoch);
    rng.split(100 + epoch).shuffle(train_idx);
    lipnet::EpochStats stats;
    stats.epoch = epoch;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    double margin_sum = 0.0;
    const std::size_t n = train_idx.size();
    for (std::size_t start = 0; start < n;) {
      std::size_t end = std::min(n, start + cfg.batch_size);
      if (n - end == 1) end = n;
      const std::span<const std::size_t> rows(train_idx.data() + start, end - start);
      const Matrix xb = vectorize_rows(diagrams, rows, p, rep, dim);
      lipnet::ForwardCache cache;
      const Matrix logits = lipnet::forward_cached(net, xb, lipnet::Mode::train, cache, relax_p);
      Matrix grad(xb.rows(), classes);
      const double w = 1.0 / static_cast<double>(xb.rows());
      for (std::size_t s = 0; s < xb.rows(); ++s) {
        const int y = labels[rows[s]];
        const double l = lipnet::loss_and_gradient(logits.row(s), y, cfg.loss, gamma,
                                                   cfg.temperature, grad_row);
        if (!std::isfinite(l)) {
          throw DivergenceError("train_srn: non-finite loss at epoch " + std::to_string(epoch));
        }
        loss_sum += l;
        margin_sum += lipnet::margin(logits.row(s), y);
        if (lipnet::predict(logits.row(s)) == y) ++correct;
        for (std::size_t c = 0; c < classes; ++c) grad(s, c) = grad_row[c] * w;
      }
      const auto g = lipnet::backward(net, cache, grad);

      std::vector<double> dtheta(theta.size(), 0.0);
      for (std::size_t s = 0; s < xb.rows(); ++s) {
        const auto sg = stablerank::stable_rank_backward(diagrams[rows[s]], p, rep, dim,
                                                         g.input.row(s));
        for (std::size_t k = 0; k < comps.size(); ++k) {
          dtheta[3 * k] += sg.reparam[k].weight * sigmoid(theta[3 * k]);
          dtheta[3 * k + 1] += sg.reparam[k].mean;
          dtheta[3 * k + 2] += sg.reparam[k].stddev * comps[k].stddev;
        }
      }

      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      for (std::size_t l = 0; l < net.layers().size(); ++l) {
        params.emplace_back(net.layers()[l].weights);
        grads.emplace_back(g.weights[l]);
        params.emplace_back(net.layers()[l].biases);
        grads.emplace_back(g.biases[l]);
      }
      opt.step(params, grads);
      lipnet::update_running_means(net, cache, cfg.centering_momentum);
      const std::vector<std::span<double>> tp{theta};
      const std::vector<std::span<const double>> tg{dtheta};
      rep_opt.step(tp, tg);
      rep = current_rep();
      start = end;
    }
    stats.loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    stats.mean_margin = margin_sum / static_cast<double>(n);
    if (!val_idx.empty()) {
      const Matrix out = net.forward(vectorize_rows(diagrams, val_idx, p, rep, dim));
      std::size_t ok = 0;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        if (lipnet::predict(out.row(r)) == labels[val_idx[r]]) ++ok;
      }
      stats.validation_accuracy = static_cast<double>(ok) / static_cast<double>(out.rows());
    }
    result.history.push_back(stats);
  }
  result.model = SrnModel{p, rep, dim, std::move(net)};
  return result;
}

}  // namespace

std::vector<double> SrnModel::vectorize(const PersistenceDiagram& d) const {
  return stablerank::stable_rank_vector(d, p, rep, dim).values;
}

std::vector<double> SrnModel::logits(const PersistenceDiagram& d) const {
  return net.forward(vectorize(d));
}

lipnet::CertificationRecord SrnModel::certify(const PersistenceDiagram& d, int true_class,
                                              std::size_t sample_id) const {
  return lipnet::certify_logits(logits(d), true_class, lipschitz_constant(), sample_id);
}

SrnTrainResult train_srn(std::span<const PersistenceDiagram> diagrams, std::span<const int> labels,
                         metric::MetricParams p, const stablerank::Reparameterization& rep,
                         std::size_t dim, const SrnTrainConfig& config) {
  if (diagrams.size() != labels.size()) {
    throw ParameterError("train_srn: diagrams and labels differ in count");
  }
  if (dim == 0) throw ParameterError("train_srn: vector dimension must be positive");
  std::size_t truncated = 0;
  for (const auto& d : diagrams) truncated += d.rank() >= dim ? 1 : 0;

  if (config.train_reparameterization && !rep.is_identity()) {
    if (diagrams.size() < 2) throw ParameterError("train_srn: need at least two samples");
    auto result = train_joint(diagrams, labels, p, rep, dim, config);
    result.truncated_rows = truncated;
    return result;
  }

  const auto vd = stablerank::vectorize_dataset(diagrams, p, rep, dim);
  auto trained = lipnet::train(vd.vectors, labels, config.net);
  SrnTrainResult result;
  result.model = SrnModel{p, rep, dim, std::move(trained.net)};
  result.history = std::move(trained.history);
  result.margin_target = trained.margin_target;
  result.truncated_rows = truncated;
  return result;
}

}  // namespace srn::model
