#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "igt/tensor.hpp"

namespace igt {

/// Rectified Adam with decoupled weight decay.
struct RAdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Length of the SMA approximation, rho_t = rho_inf - 2 t b2^t / (1 - b2^t).
inline double radam_rho(long t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

/// True when step t applies the variance-rectified adaptive update.
inline bool radam_rectified(long t, double beta2) { return radam_rho(t, beta2) > 4.0; }

template <typename T>
class RAdam {
 public:
  explicit RAdam(RAdamConfig cfg = {}) : cfg_(cfg) {}

  const RAdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

  /// One update of every parameter from its accumulated gradient.
  /// `names` is used for error reporting only and may be empty.
  void step(std::vector<Tensor<T>>& params, double lr, const std::vector<std::string>& names = {}) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), T(0));
        v_.emplace_back(p.size(), T(0));
      }
    }
    if (m_.size() != params.size()) throw ContractError("RAdam: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad() || !all_finite_span(params[i].grad()))
        throw TrainingError("non-finite or missing gradient for parameter '" +
                            (i < names.size() ? names[i] : std::to_string(i)) + "'");
    }
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho = radam_rho(t_, b2);
    const bool rectified = rho > 4.0;
    double r = 0;
    if (rectified) r = std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));

    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].data();
      auto g = params[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const T gj = g[j];
        m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * gj);
        v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * gj * gj);
        double wj = static_cast<double>(w[j]);
        wj -= lr * cfg_.weight_decay * wj;
        const double m_hat = m[j] / bc1;
        if (rectified) {
          const double v_hat = std::sqrt(static_cast<double>(v[j]) / bc2);
          wj -= lr * r * m_hat / (v_hat + cfg_.eps);
        } else {
          wj -= lr * m_hat;
        }
        w[j] = static_cast<T>(wj);
      }
    }
  }

 private:
  static bool all_finite_span(std::span<const T> s) {
    for (T x : s)
      if (!std::isfinite(x)) return false;
    return true;
  }

  RAdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

/// Step decay: initial rate before `decay_epoch`, decayed rate from it on.
struct LrSchedule {
  double initial = 1e-3;
  double decayed = 1e-4;
  int decay_epoch = 20;
};

inline double lr_at(int epoch, const LrSchedule& s) { return epoch < s.decay_epoch ? s.initial : s.decayed; }

}  // namespace igt
