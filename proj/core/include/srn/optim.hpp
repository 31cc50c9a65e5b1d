#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace srn::optim {

enum class Kind { sgd, adam };

Kind parse_kind(const std::string& name);
std::string to_string(Kind kind);

struct OptimizerConfig {
  Kind kind = Kind::sgd;
  double learning_rate = 0.01;
  double momentum = 0.9;       // sgd
  double beta1 = 0.9;          // adam
  double beta2 = 0.999;        // adam
  double epsilon = 1e-8;       // adam
  /// The rate is multiplied by `decay_factor` every `decay_every` epochs.
  std::size_t decay_every = 0;
  double decay_factor = 0.5;
};

/// First-order optimizer over a set of flat parameter blocks. Blocks are
/// registered once; step() receives gradients in the same order.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  void add_block(std::size_t size);
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);
  void set_epoch(std::size_t epoch);
  double learning_rate() const { return lr_; }

 private:
  OptimizerConfig config_;
  double lr_ = 0.0;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m1_;
  std::vector<std::vector<double>> m2_;
};

}  // namespace srn::optim
