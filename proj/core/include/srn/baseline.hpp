#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srn/lipnet.hpp"
#include "srn/optim.hpp"
#include "srn/types.hpp"

namespace srn::baseline {

/// Permutation-invariant classifier over raw diagram points: a two-layer
/// ReLU point encoder R^2 -> R^25, the 5 largest values of every encoder
/// feature (concatenated, 125 values), and an affine head.
struct DeepSetNet {
  static constexpr std::size_t kHidden = 25;
  static constexpr std::size_t kTop = 5;

  std::size_t classes = 5;
  /// Coordinates are divided by this before encoding.
  double input_scale = 1.0;
  std::vector<double> w1, b1;  // kHidden x 2
  std::vector<double> w2, b2;  // kHidden x kHidden
  std::vector<double> wh, bh;  // classes x (kHidden * kTop)

  static constexpr std::size_t feature_dim() { return kHidden * kTop; }
};

/// He-uniform weights, zero biases.
DeepSetNet make_deepset(std::size_t classes, double input_scale, std::uint64_t seed);

struct DeepSetCache {
  std::vector<DiagramPoint> points;  // padded with (0, 0) up to kTop points
  std::size_t n_real = 0;
  std::vector<double> h1, h2;        // points x kHidden, post-activation
  std::vector<std::uint32_t> top;    // kHidden x kTop point indices, by value descending
  std::vector<double> features;
  std::vector<double> logits;
};

std::vector<double> deepset_forward(const DeepSetNet& net, const PersistenceDiagram& d);
std::vector<double> deepset_forward(const DeepSetNet& net, const PersistenceDiagram& d,
                                    DeepSetCache& cache);

struct DeepSetGradients {
  std::vector<double> w1, b1, w2, b2, wh, bh;
  /// d/d(birth, death) of every real (unpadded) input point.
  std::vector<DiagramPoint> points;
};

/// Reverse pass for <dlogits, logits>. The ReLU derivative at 0 is 0 and the
/// top-5 selection routes to the cached winners.
DeepSetGradients deepset_backward(const DeepSetNet& net, const DeepSetCache& cache,
                                  std::span<const double> dlogits);

struct DeepSetTrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  optim::OptimizerConfig optimizer{optim::Kind::adam, 0.005};
  double validation_fraction = 0.1;
  std::size_t classes = 5;
  std::uint64_t seed = 0;
};

struct DeepSetTrainResult {
  DeepSetNet net;
  std::vector<lipnet::EpochStats> history;
};

/// Cross-entropy training. Deterministic given the seed; throws
/// DivergenceError on a non-finite loss.
DeepSetTrainResult train_deepset(std::span<const PersistenceDiagram> diagrams,
                                 std::span<const int> labels, const DeepSetTrainConfig& config);

}  // namespace srn::baseline
