#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "srn/lipnet.hpp"
#include "srn/metric.hpp"
#include "srn/stablerank.hpp"
#include "srn/types.hpp"

namespace srn::model {

/// Stable rank network: diagram -> r_{p,F} (length dim) -> L_inf network.
/// The whole map is K-Lipschitz from (diagrams, W_p) to (logits, L_inf) with
/// K = lipschitz_bound(rep).
struct SrnModel {
  metric::MetricParams p = metric::MetricParams::infinity();
  stablerank::Reparameterization rep = stablerank::Reparameterization::identity();
  std::size_t dim = 0;
  lipnet::LipschitzNetwork net;

  double lipschitz_constant() const { return stablerank::lipschitz_bound(rep); }
  std::vector<double> vectorize(const PersistenceDiagram& d) const;
  std::vector<double> logits(const PersistenceDiagram& d) const;
  lipnet::CertificationRecord certify(const PersistenceDiagram& d, int true_class,
                                      std::size_t sample_id = 0) const;
};

struct SrnTrainConfig {
  lipnet::TrainConfig net;
  /// Learn the mixture parameters of F jointly with the network (softplus
  /// weights, log standard deviations). Ignored for the identity.
  bool train_reparameterization = false;
  double reparam_learning_rate = 0.01;
};

struct SrnTrainResult {
  SrnModel model;
  std::vector<lipnet::EpochStats> history;
  double margin_target = 0.0;
  std::size_t truncated_rows = 0;  // diagrams with rank >= dim
};

/// Vectorizes with (p, rep, dim) and trains the network. With a trainable
/// mixture the vectors are recomputed every batch.
SrnTrainResult train_srn(std::span<const PersistenceDiagram> diagrams, std::span<const int> labels,
                         metric::MetricParams p, const stablerank::Reparameterization& rep,
                         std::size_t dim, const SrnTrainConfig& config);

}  // namespace srn::model
