#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "hibehrt/error.hpp"
#include "hibehrt/params.hpp"

namespace hibehrt {

// Supervised three-phase schedule: linear warmup over the first 10% of
// steps, hold at the peak for the next 40%, cosine decay to 0 over the
// final 50%. Continuous at both phase boundaries.
struct ScheduleConfig {
  double peak_lr = 1e-4;
  long long total_steps = 0;
};

inline double lr_at(long long step, const ScheduleConfig& cfg) {
  const double T = static_cast<double>(cfg.total_steps);
  if (step < 0 || static_cast<double>(step) > T || cfg.total_steps <= 0)
    throw StepOutOfRange("lr_at: step " + std::to_string(step) + " outside [0, " +
                         std::to_string(cfg.total_steps) + "]");
  const double s = static_cast<double>(step);
  if (s < 0.1 * T) return cfg.peak_lr * s / (0.1 * T);
  if (s < 0.5 * T) return cfg.peak_lr;
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(M_PI * (s - 0.5 * T) / (0.5 * T)));
}

// Pretraining schedule: linear warmup over `warmup_steps`, then cosine
// decay to 0 at total_steps.
struct PretrainScheduleConfig {
  double peak_lr = 1e-4;
  long long warmup_steps = 0;
  long long total_steps = 0;
};

inline double pretrain_lr_at(long long step, const PretrainScheduleConfig& cfg) {
  if (step < 0 || step > cfg.total_steps || cfg.total_steps <= 0)
    throw StepOutOfRange("pretrain_lr_at: step out of range");
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  if (span <= 0) return cfg.peak_lr;
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step - cfg.warmup_steps) / span));
}

enum class OptimizerKind { Adam, SgdMomentum };

// Per-parameter optimizer state keyed by name; shapes mirror the store.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind) : kind_(kind) {}

  OptimizerKind kind() const { return kind_; }
  long long step_count() const { return step_; }

  // One update from the gradients currently accumulated in the store.
  void apply(ParameterStore<T>& store, double lr) {
    if (lr < 0) throw ConfigMismatch("optimizer: lr must be >= 0");
    ++step_;
    for (auto& [name, p] : store) {
      for (T g : p.grad.data)
        if (!std::isfinite(static_cast<double>(g)))
          throw NonFiniteGradient("non-finite gradient in " + name);
      if (kind_ == OptimizerKind::Adam)
        adam_update(name, p, lr);
      else
        sgd_update(name, p, lr);
    }
  }

 private:
  void adam_update(const std::string& name, Parameter<T>& p, double lr) {
    Tensor<T>& m = slot(m_, name, p);
    Tensor<T>& v = slot(v_, name, p);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = static_cast<double>(p.grad.data[k]);
      const double mk = kBeta1 * static_cast<double>(m.data[k]) + (1 - kBeta1) * g;
      const double vk = kBeta2 * static_cast<double>(v.data[k]) + (1 - kBeta2) * g * g;
      m.data[k] = static_cast<T>(mk);
      v.data[k] = static_cast<T>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      p.value.data[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + kEps));
    }
  }

  void sgd_update(const std::string& name, Parameter<T>& p, double lr) {
    Tensor<T>& vel = slot(m_, name, p);
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double vk = kMomentum * static_cast<double>(vel.data[k]) + static_cast<double>(p.grad.data[k]);
      vel.data[k] = static_cast<T>(vk);
      p.value.data[k] -= static_cast<T>(lr * vk);
    }
  }

  Tensor<T>& slot(std::map<std::string, Tensor<T>>& table, const std::string& name, const Parameter<T>& p) {
    auto it = table.find(name);
    if (it == table.end()) it = table.emplace(name, Tensor<T>::zeros(p.value.shape)).first;
    if (it->second.shape != p.value.shape)
      throw ShapeMismatch("optimizer state shape mismatch for " + name);
    return it->second;
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  static constexpr double kMomentum = 0.9;

  OptimizerKind kind_;
  long long step_ = 0;
  std::map<std::string, Tensor<T>> m_;  // Adam first moment / SGD velocity
  std::map<std::string, Tensor<T>> v_;  // Adam second moment
};

// Stops once `patience` consecutive epochs fail to set a new strict
// minimum of the validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience = 6) : patience_(patience) {}

  // Returns true when this epoch improved the best loss.
  bool observe(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      since_best_ = 0;
      return true;
    }
    ++since_best_;
    return false;
  }

  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_best_ = 0;
};

}  // namespace hibehrt
