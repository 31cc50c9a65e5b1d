#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srn/matrix.hpp"
#include "srn/optim.hpp"

namespace srn::lipnet {

/// A layer of L_inf-distance units u(x) = ||x - w||_inf + b, optionally
/// followed by feature-wise mean subtraction. 1-Lipschitz in L_inf for every
/// parameter value.
struct LinfLayer {
  std::size_t inputs = 0;
  std::size_t units = 0;
  std::vector<double> weights;  // units x inputs, row-major
  std::vector<double> biases;
  bool centering = false;
  std::vector<double> running_mean;

  std::span<const double> weight_row(std::size_t unit) const {
    return {weights.data() + unit * inputs, inputs};
  }
};

/// ||x - w||_inf + b. Throws ContractError on a length mismatch.
double unit_forward(std::span<const double> x, std::span<const double> w, double b);

class LipschitzNetwork {
 public:
  LipschitzNetwork() = default;
  /// Zero-initialized layers. Centering follows every layer but the last
  /// unless `center_last` is set.
  LipschitzNetwork(std::size_t input_dim, const std::vector<std::size_t>& sizes,
                   bool center_last = false);

  std::vector<LinfLayer>& layers() { return layers_; }
  const std::vector<LinfLayer>& layers() const { return layers_; }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().units; }

  /// Per-coordinate factors in (0, 1] applied to the input before the first
  /// layer. A contraction, so the network stays 1-Lipschitz. Empty means
  /// the identity.
  const std::vector<double>& input_scale() const { return input_scale_; }
  /// Throws ParameterError unless every factor lies in (0, 1] and the length
  /// matches input_dim() (or is zero).
  void set_input_scale(std::vector<double> scale);

  /// Inference: centering subtracts the stored running means.
  std::vector<double> forward(std::span<const double> x) const;
  Matrix forward(const Matrix& x) const;

 private:
  std::vector<LinfLayer> layers_;
  std::vector<double> input_scale_;
};

/// min(1, s_ref / std_j) per feature, with s_ref the median of the nonzero
/// feature standard deviations: shrinks high-variance features down to the
/// typical scale without ever expanding one.
std::vector<double> contraction_scale(const Matrix& x);

enum class Mode { inference, train };

struct LayerCache {
  Matrix input;                       // kept only for the l_p relaxation
  std::vector<double> norm;           // batch x units, l_p relaxation only
  std::vector<std::uint32_t> argmax;  // batch x units, coordinate attaining the max
  std::vector<double> sign;           // sign(x - w) at that coordinate, +1 at ties
  std::vector<double> batch_mean;     // train-mode centering only
};

struct ForwardCache {
  Mode mode = Mode::inference;
  int relax_p = 0;  // 0: exact L_inf units
  std::vector<LayerCache> layers;
  Matrix output;
};

/// Batched forward pass keeping what backward() needs. In train mode the
/// centering uses the batch mean; running means are left untouched (see
/// update_running_means).
///
/// A positive `relax_p` (a power of two) replaces every ||x - w||_inf by
/// ||x - w||_p. Training uses it as a smoothing of the max early on; the
/// certified network always evaluates with relax_p = 0.
Matrix forward_cached(const LipschitzNetwork& net, const Matrix& x, Mode mode,
                      ForwardCache& cache, int relax_p = 0);

/// running <- momentum * running + (1 - momentum) * batch mean.
void update_running_means(LipschitzNetwork& net, const ForwardCache& cache, double momentum);

/// Stand-alone centering. Train mode subtracts the batch mean and updates
/// `running_mean` by the moving average; inference subtracts `running_mean`.
Matrix centering_forward(const Matrix& batch, std::vector<double>& running_mean, Mode mode,
                         double momentum = 0.9);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;
};

/// Exact reverse pass for the subgradient that routes through the first
/// coordinate attaining the max.
Gradients backward(const LipschitzNetwork& net, const ForwardCache& cache,
                   const Matrix& grad_output);

/// d<grad_logits, f(x)>/dx for a single input in inference mode.
std::vector<double> input_gradient(const LipschitzNetwork& net, std::span<const double> x,
                                   std::span<const double> grad_logits);

// ---------------------------------------------------------------------------
// Training

enum class LossKind { hinge, cross_entropy };

struct TrainConfig {
  std::vector<std::size_t> layer_sizes{1200, 700, 300, 80, 5};
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  optim::OptimizerConfig optimizer{optim::Kind::adam, 0.02};
  LossKind loss = LossKind::hinge;
  /// Hinge margin target; <= 0 uses the mean std of the scaled training features.
  double margin_target = 0.0;
  double temperature = 1.0;  // cross-entropy only
  double validation_fraction = 0.1;
  double centering_momentum = 0.9;
  bool center_last_layer = false;
  /// Fit a contraction_scale() on the training vectors.
  bool contract_inputs = true;
  /// l_p relaxation schedule: p doubles from `relax_p_start` up to
  /// `relax_p_max`, spread evenly over the first `relax_fraction` of the
  /// epochs; the remaining epochs train the exact L_inf network.
  /// relax_p_start = 0 disables the relaxation.
  int relax_p_start = 8;
  int relax_p_max = 512;
  double relax_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double mean_margin = 0.0;
};

struct TrainResult {
  LipschitzNetwork net;
  std::vector<EpochStats> history;
  double margin_target = 0.0;
};

/// Data-dependent initialization. First layer: w_j = mean_j + U[-1,1] std_j
/// over the (scaled) inputs. Deeper layers: U[-1,1] scaled by the std of the
/// previous layer's centered activations on the training data.
LipschitzNetwork init_network(const Matrix& x, const std::vector<std::size_t>& sizes,
                              std::uint64_t seed, bool center_last = false,
                              std::vector<double> input_scale = {});

/// p used by the relaxation schedule at `epoch`, 0 meaning L_inf.
int relax_p_at(const TrainConfig& config, std::size_t epoch);

/// Mini-batch training with a deterministic shuffle. Throws DivergenceError
/// on a non-finite loss and ParameterError on inconsistent shapes.
TrainResult train(const Matrix& x, std::span<const int> labels, const TrainConfig& config);

/// Loss of one logit row and its gradient (written to `grad`).
double loss_and_gradient(std::span<const double> logits, int true_class, LossKind kind,
                         double margin_target, double temperature, std::span<double> grad);

// ---------------------------------------------------------------------------
// Certification

/// Argmax with ties going to the lowest index.
int predict(std::span<const double> logits);

/// f_c - max_{i != c} f_i. Negative when misclassified. Requires >= 2 logits.
double margin(std::span<const double> logits, int true_class);

struct CertificationRecord {
  std::size_t sample_id = 0;
  int predicted = 0;
  int true_class = 0;
  double margin = 0.0;
  double certified_radius = 0.0;
  double lipschitz_constant = 1.0;

  bool correct() const { return predicted == true_class; }
};

/// Radius max(M, 0) / (2K), and 0 for a misclassified sample.
CertificationRecord certify_logits(std::span<const double> logits, int true_class, double k,
                                   std::size_t sample_id = 0);
CertificationRecord certify(const LipschitzNetwork& net, std::span<const double> x,
                            int true_class, double k, std::size_t sample_id = 0);

/// Fraction of records that are correct, have a positive margin and a
/// certified radius >= eps.
double certified_robust_accuracy(std::span<const CertificationRecord> records, double eps);

/// Fraction of records that are correct.
double clean_accuracy(std::span<const CertificationRecord> records);

}  // namespace srn::lipnet
