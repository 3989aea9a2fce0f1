#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlc/nn.hpp"

namespace vlc {

// Linear warmup over the first warmup_fraction of steps, then linear decay to 0.
struct Schedule {
  double base_lr = 1e-4;
  std::size_t total_steps = 0;
  double warmup_fraction = 0.1;

  double warmup_steps() const { return warmup_fraction * static_cast<double>(total_steps); }

  double lr_at(std::size_t step) const {
    if (step > total_steps) {
      throw std::out_of_range("schedule step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
    }
    const double s = static_cast<double>(step), w = warmup_steps(), t = static_cast<double>(total_steps);
    if (s < w) return base_lr * s / w;
    if (t <= w) return base_lr;
    return base_lr * (t - s) / (t - w);
  }
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay: p *= 1 - lr * wd, then the bias-corrected Adam
// step. Moments and parameters are stored in T, the arithmetic runs in double.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  std::size_t steps_taken() const { return t_; }

  void step(ParamList<T>& params, double lr) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.tensor->numel(), T(0));
        v_.emplace_back(p.tensor->numel(), T(0));
      }
    }
    if (m_.size() != params.size()) {
      throw std::invalid_argument("optimizer state covers " + std::to_string(m_.size()) + " parameters, got " +
                                  std::to_string(params.size()));
    }
    for (const auto& p : params) {
      if (!p.tensor->has_grad()) throw std::runtime_error("parameter " + p.name + " has no gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      const double rate = lr * p.lr_scale;
      const double shrink = p.decay ? 1.0 - rate * cfg_.weight_decay : 1.0;
      auto w = p.tensor->mutable_data();
      const auto g = p.tensor->grad();
      auto& m = m_[i];
      auto& v = v_[i];
      if (m.size() != w.size()) throw std::invalid_argument("optimizer state size mismatch for " + p.name);
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g[k];
        const double mk = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
        const double vk = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        const double decayed = static_cast<double>(w[k]) * shrink;
        w[k] = static_cast<T>(decayed - rate * (mk / bc1) / (std::sqrt(vk / bc2) + cfg_.eps));
      }
    }
  }

  // Moment buffers, one per parameter in the order passed to step().
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

  void restore(std::size_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
    if (m.size() != v.size()) throw std::invalid_argument("optimizer restore: moment count mismatch");
    t_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

template <typename T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) p.tensor->zero_grad();
}

}  // namespace vlc
