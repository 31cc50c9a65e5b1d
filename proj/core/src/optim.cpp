#include "srn/optim.hpp"

#include <cmath>

#include "srn/errors.hpp"

namespace srn::optim {

Kind parse_kind(const std::string& name) {
  if (name == "sgd") return Kind::sgd;
  if (name == "adam") return Kind::adam;
  throw ParameterError("unknown optimizer '" + name + "'");
}

std::string to_string(Kind kind) { return kind == Kind::sgd ? "sgd" : "adam"; }

void Optimizer::add_block(std::size_t size) {
  m1_.emplace_back(size, 0.0);
  m2_.emplace_back(config_.kind == Kind::adam ? size : 0, 0.0);
  lr_ = config_.learning_rate;
}

void Optimizer::set_epoch(std::size_t epoch) {
  lr_ = config_.learning_rate;
  if (config_.decay_every > 0) {
    lr_ *= std::pow(config_.decay_factor, static_cast<double>(epoch / config_.decay_every));
  }
}

void Optimizer::step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b];
    auto g = grads[b];
    auto& m = m1_[b];
    if (config_.kind == Kind::sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = config_.momentum * m[i] + g[i];
        w[i] -= lr_ * m[i];
      }
    } else {
      auto& v = m2_[b];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
      }
    }
  }
}

}  // namespace srn::optim
