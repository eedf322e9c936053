#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "can/checks.hpp"
#include "can/model.hpp"

namespace can {

struct TrainConfig {
  double base_lr = 1.5e-3;  // referenced to batch 256; peak = base_lr * batch/256
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int warmup_epochs = 5;
  int total_epochs = 100;
  double mask_rate = 0.5;
  double sigma_max = 0.05;
  double lambda_infonce = 0.03;
  double lambda = 0.5;
  double tau = 0.1;
  std::uint64_t seed = 1;
  std::string method = "can";  // can | simclr | mae
  bool sigma_encoding = true;
  int views = 2;
  int log_every = 1;
  int checkpoint_every = 0;  // steps; 0 keeps only the final checkpoint

  // The degenerate configurations share this one code path: simclr keeps only
  // the contrastive term, mae keeps only reconstruction on a single view.
  void apply_method_preset() {
    if (method == "simclr") {
      lambda_infonce = 1.0;
      sigma_max = 0.0;
      sigma_encoding = false;
      views = 2;
    } else if (method == "mae") {
      lambda_infonce = 0.0;
      lambda = 1.0;
      sigma_max = 0.0;
      sigma_encoding = false;
      views = 1;
    } else {
      check_arg(method == "can", "train: unknown method '" + method + "'");
    }
  }

  void validate() const {
    check_arg(method == "can" || method == "simclr" || method == "mae",
              "train: method must be can, simclr or mae");
    check_arg(base_lr >= 0.0 && weight_decay >= 0.0, "train: rates must be >= 0");
    check_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
              "train: betas must be in [0,1)");
    check_arg(batch_size >= 1, "train: batch_size must be >= 1");
    check_arg(warmup_epochs >= 0 && total_epochs >= 1 && warmup_epochs <= total_epochs,
              "train: need 0 <= warmup_epochs <= total_epochs");
    check_arg(mask_rate >= 0.0 && mask_rate < 1.0, "train: mask_rate must be in [0,1)");
    check_arg(sigma_max >= 0.0, "train: sigma_max must be >= 0");
    check_arg(lambda_infonce >= 0.0 && lambda_infonce <= 1.0 && lambda >= 0.0 && lambda <= 1.0,
              "train: loss weights must be in [0,1]");
    check_arg(tau > 0.0, "train: tau must be positive");
    check_arg(views == 1 || views == 2, "train: views must be 1 or 2");
    check_arg(views == 2 || lambda_infonce == 0.0,
              "train: single-view training cannot carry a contrastive weight");
    check_arg(log_every >= 1, "train: log_every must be >= 1");
  }
};

// Linear warmup from 0 to peak over the warmup steps, then half-cosine decay
// to 0 at the total step count. Continuous at the knot.
inline double lr_at(long long step, const TrainConfig& cfg, long long steps_per_epoch) {
  check_arg(step >= 0, "lr_at: negative step");
  check_arg(steps_per_epoch >= 1, "lr_at: steps_per_epoch must be >= 1");
  const double peak = cfg.base_lr * static_cast<double>(cfg.batch_size) / 256.0;
  const long long warmup = static_cast<long long>(cfg.warmup_epochs) * steps_per_epoch;
  const long long total = static_cast<long long>(cfg.total_epochs) * steps_per_epoch;
  if (step >= total) return 0.0;
  if (warmup > 0 && step <= warmup)
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const double t = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return peak * 0.5 * (1.0 + std::cos(M_PI * t));
}

// Decoupled-weight-decay adaptive-moment update. Decay applies only to
// ParamKind::weight entries (never biases, norm parameters or the mask
// token); buffers are untouched.
template <typename S>
void adamw_update(Params<S>& params, Params<S>& grads, Params<S>& m, Params<S>& v, long long t,
                  double lr, const TrainConfig& cfg) {
  check_arg(t >= 1, "adamw: step index is 1-based");
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(t)));
  const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(t)));
  const S eps = static_cast<S>(cfg.adam_eps);
  const S step_size = static_cast<S>(lr);
  const S wd = static_cast<S>(cfg.weight_decay);

  auto prefs = collect_params(params);
  auto grefs = collect_params(grads);
  auto mrefs = collect_params(m);
  auto vrefs = collect_params(v);
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    if (prefs[i].kind == ParamKind::buffer) continue;
    MatX<S>& p = *prefs[i].mat;
    const MatX<S>& g = *grefs[i].mat;
    MatX<S>& m1 = *mrefs[i].mat;
    MatX<S>& m2 = *vrefs[i].mat;
    m1.array() = b1 * m1.array() + (S(1) - b1) * g.array();
    m2.array() = b2 * m2.array() + (S(1) - b2) * g.array().square();
    if (prefs[i].kind == ParamKind::weight) p *= (S(1) - step_size * wd);
    p.array() -= step_size * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + eps);
  }
}

}  // namespace can
