#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "barcodelm/autodiff.hpp"
#include "barcodelm/errors.hpp"
#include "barcodelm/tensor.hpp"

namespace barcodelm {

struct AdamWHyperparameters {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay with bias-corrected moments. Moments are created
// lazily per parameter name, zero-initialized.
template <typename T>
class AdamWState {
 public:
  explicit AdamWState(AdamWHyperparameters hyper) : hyper_(hyper) {}

  const AdamWHyperparameters& hyper() const { return hyper_; }
  std::int64_t step_count() const { return step_; }

  // Updates every parameter that has a gradient entry. `lr` overrides the
  // stored learning rate (schedules pass the per-step rate).
  void step(NamedTensors<T>& params, const NamedTensors<T>& grads, double lr) {
    ++step_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
    for (const auto& [name, grad] : grads) {
      auto pit = params.find(name);
      if (pit == params.end()) {
        throw MathError("adamw: gradient for unknown parameter '" + name + "'");
      }
      TensorData<T>& p = pit->second;
      if (!same_shape(p.shape, grad.shape)) {
        throw MathError("adamw: parameter '" + name + "' has shape " + p.shape_string() +
                        " but gradient has " + grad.shape_string());
      }
      auto& m = moment1_.try_emplace(name, TensorData<T>::zeros(p.shape)).first->second;
      auto& v = moment2_.try_emplace(name, TensorData<T>::zeros(p.shape)).first->second;
      for (std::int64_t i = 0; i < p.size(); ++i) {
        const double g = static_cast<double>(grad.v[i]);
        if (!std::isfinite(g)) {
          throw MathError("adamw: non-finite gradient in parameter '" + name +
                          "' at index " + std::to_string(i));
        }
        const double m_new = hyper_.beta1 * static_cast<double>(m.v[i]) + (1.0 - hyper_.beta1) * g;
        const double v_new =
            hyper_.beta2 * static_cast<double>(v.v[i]) + (1.0 - hyper_.beta2) * g * g;
        m.v[i] = static_cast<T>(m_new);
        v.v[i] = static_cast<T>(v_new);
        const double m_hat = m_new / bc1;
        const double v_hat = v_new / bc2;
        double value = static_cast<double>(p.v[i]);
        value -= lr * hyper_.weight_decay * value;  // decoupled decay
        value -= lr * m_hat / (std::sqrt(v_hat) + hyper_.epsilon);
        p.v[i] = static_cast<T>(value);
      }
    }
  }

  void step(NamedTensors<T>& params, const NamedTensors<T>& grads) {
    step(params, grads, hyper_.learning_rate);
  }

 private:
  AdamWHyperparameters hyper_;
  NamedTensors<T> moment1_;
  NamedTensors<T> moment2_;
  std::int64_t step_ = 0;
};

// Plain SGD, no momentum.
template <typename T>
void sgd_step(NamedTensors<T>& params, const NamedTensors<T>& grads, double lr) {
  for (const auto& [name, grad] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) {
      throw MathError("sgd: gradient for unknown parameter '" + name + "'");
    }
    TensorData<T>& p = pit->second;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const double g = static_cast<double>(grad.v[i]);
      if (!std::isfinite(g)) {
        throw MathError("sgd: non-finite gradient in parameter '" + name + "' at index " +
                        std::to_string(i));
      }
      p.v[i] = static_cast<T>(static_cast<double>(p.v[i]) - lr * g);
    }
  }
}

// lr0 * (1 - step/total_steps), clamped at zero past the end.
inline double linear_schedule(std::int64_t step, std::int64_t total_steps, double lr0) {
  if (total_steps < 1) throw ConfigError("linear_schedule: total_steps must be >= 1");
  if (step < 0) throw ConfigError("linear_schedule: step must be >= 0");
  if (step >= total_steps) return 0.0;
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

// base_lr * decay^floor(epoch / period).
inline double step_schedule(std::int64_t epoch, double base_lr, double decay = 0.5,
                            std::int64_t period = 3) {
  if (epoch < 0) throw ConfigError("step_schedule: epoch must be >= 0");
  if (period < 1) throw ConfigError("step_schedule: period must be >= 1");
  return base_lr * std::pow(decay, static_cast<double>(epoch / period));
}

}  // namespace barcodelm
