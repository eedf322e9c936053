#pragma once

#include <cmath>
#include <string>

#include "can/checks.hpp"
#include "can/common.hpp"
#include "can/patches.hpp"

namespace can {

// (lambda_infonce, lambda) parameterization of the three objective weights.
// lambda_rec = (1 - lambda_infonce) * lambda,
// lambda_denoise = (1 - lambda_infonce) * (1 - lambda); the three sum to 1.
struct LossWeights {
  double lambda_infonce = 0.03;
  double lambda = 0.5;

  double lambda_rec() const { return (1.0 - lambda_infonce) * lambda; }
  double lambda_denoise() const { return (1.0 - lambda_infonce) * (1.0 - lambda); }

  void validate() const {
    check_arg(lambda_infonce >= 0.0 && lambda_infonce <= 1.0,
              "loss weights: lambda_infonce must be in [0,1]");
    check_arg(lambda >= 0.0 && lambda <= 1.0, "loss weights: lambda must be in [0,1]");
  }
};

struct LossReport {
  double l_infonce = 0.0;
  double l_rec = 0.0;
  double l_denoise = 0.0;
  double l_total = 0.0;

  void finalize(const LossWeights& w) {
    l_total = w.lambda_infonce * l_infonce + w.lambda_rec() * l_rec +
              w.lambda_denoise() * l_denoise;
    check_run(std::isfinite(l_infonce), "loss_report: non-finite contrastive term");
    check_run(std::isfinite(l_rec), "loss_report: non-finite reconstruction term");
    check_run(std::isfinite(l_denoise), "loss_report: non-finite denoising term");
  }
};

namespace detail {

template <typename S>
void check_unit_rows(const MatX<S>& u, const char* which) {
  for (Eigen::Index r = 0; r < u.rows(); ++r)
    check_arg(std::abs(u.row(r).norm() - S(1)) < S(1e-5),
              std::string("info_nce: non-unit row in ") + which);
}

}  // namespace detail

// Contrastive loss over 2n in-batch embeddings. For image i the positive pair
// is (u1_i, u2_i); the candidate negatives for either anchor are both views of
// every other image. Each of the 2n anchors contributes
//   -log exp(p_i/tau) / (exp(p_i/tau) + sum_neg exp(<anchor, neg>/tau))
// with p_i = <u1_i, u2_i>; terms are averaged. Log-sum-exp is stabilized by
// max subtraction. Gradients w.r.t. the rows of U1/U2 are accumulated into
// dU1/dU2 scaled by `coeff` when those pointers are given.
template <typename S>
S info_nce(const MatX<S>& u1, const MatX<S>& u2, S tau, MatX<S>* du1 = nullptr,
           MatX<S>* du2 = nullptr, S coeff = S(1)) {
  const Eigen::Index n = u1.rows();
  check_arg(n >= 1, "info_nce: empty batch");
  check_arg(u2.rows() == n && u1.cols() == u2.cols(), "info_nce: shape mismatch");
  check_arg(tau > S(0), "info_nce: temperature must be positive");
  detail::check_unit_rows(u1, "u1");
  detail::check_unit_rows(u2, "u2");

  const MatX<S> s11 = u1 * u1.transpose();
  const MatX<S> s22 = u2 * u2.transpose();
  const MatX<S> s12 = u1 * u2.transpose();

  const S inv_anchors = S(1) / static_cast<S>(2 * n);
  // Softmax weight matrices for the negative terms, anchor in the row.
  MatX<S> w11 = MatX<S>::Zero(n, n), w12 = MatX<S>::Zero(n, n);
  MatX<S> w22 = MatX<S>::Zero(n, n), w21 = MatX<S>::Zero(n, n);
  VecX<S> wpos1(n), wpos2(n);

  S loss = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S pos = s12(i, i);
    for (int v = 0; v < 2; ++v) {
      S mx = pos;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const S a = v == 0 ? s11(i, j) : s12(j, i);
        const S b = v == 0 ? s12(i, j) : s22(i, j);
        mx = std::max(mx, std::max(a, b));
      }
      S z = std::exp((pos - mx) / tau);
      const S epos = z;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const S a = v == 0 ? s11(i, j) : s12(j, i);
        const S b = v == 0 ? s12(i, j) : s22(i, j);
        z += std::exp((a - mx) / tau) + std::exp((b - mx) / tau);
      }
      loss += -std::log(epos / z) * inv_anchors;

      if (du1 || du2) {
        const S wp = epos / z;
        (v == 0 ? wpos1 : wpos2)(i) = (wp - S(1)) / tau * inv_anchors * coeff;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          const S a = v == 0 ? s11(i, j) : s12(j, i);
          const S b = v == 0 ? s12(i, j) : s22(i, j);
          const S wa = std::exp((a - mx) / tau) / z / tau * inv_anchors * coeff;
          const S wb = std::exp((b - mx) / tau) / z / tau * inv_anchors * coeff;
          if (v == 0) {
            w11(i, j) = wa;
            w12(i, j) = wb;
          } else {
            w21(i, j) = wa;
            w22(i, j) = wb;
          }
        }
      }
    }
  }

  if (du1 || du2) {
    // Positive-pair terms appear once per anchor with the same similarity.
    const VecX<S> wpos = wpos1 + wpos2;
    if (du1) {
      du1->noalias() += wpos.asDiagonal() * u2;
      du1->noalias() += (w11 + w11.transpose()) * u1;
      du1->noalias() += w12 * u2;
      du1->noalias() += w21.transpose() * u2;
    }
    if (du2) {
      du2->noalias() += wpos.asDiagonal() * u1;
      du2->noalias() += (w22 + w22.transpose()) * u2;
      du2->noalias() += w21 * u1;
      du2->noalias() += w12.transpose() * u1;
    }
  }
  return loss;
}

// Squared error on masked patches only, averaged over the masked entries of
// the sample (empty masked set contributes 0).
template <typename S>
S recon_loss(const MatX<S>& clean, const MatX<S>& xhat, const MaskVector& mask,
             MatX<S>* dxhat = nullptr, S coeff = S(1)) {
  check_arg(clean.rows() == xhat.rows() && clean.cols() == xhat.cols(),
            "recon_loss: shape mismatch");
  check_arg(clean.rows() == mask.size(), "recon_loss: mask length mismatch");
  const int masked = mask.size() - mask.unmasked_count;
  if (masked == 0) return S(0);
  const S denom = S(1) / (static_cast<S>(masked) * static_cast<S>(clean.cols()));
  S acc = S(0);
  for (int t = 0; t < mask.size(); ++t) {
    if (!mask.masked(t)) continue;
    const auto resid = (xhat.row(t) - clean.row(t)).eval();
    acc += resid.squaredNorm();
    if (dxhat) dxhat->row(t) += (S(2) * denom * coeff) * resid;
  }
  return acc * denom;
}

// Squared error between the prediction and the injected noise field sigma*e,
// on unmasked patches only, averaged over their entries.
template <typename S>
S denoise_loss(const MatX<S>& noise_field, const MatX<S>& xhat, const MaskVector& mask,
               MatX<S>* dxhat = nullptr, S coeff = S(1)) {
  check_arg(noise_field.rows() == xhat.rows() && noise_field.cols() == xhat.cols(),
            "denoise_loss: shape mismatch");
  check_arg(noise_field.rows() == mask.size(), "denoise_loss: mask length mismatch");
  if (mask.unmasked_count == 0) return S(0);
  const S denom =
      S(1) / (static_cast<S>(mask.unmasked_count) * static_cast<S>(xhat.cols()));
  S acc = S(0);
  for (int t = 0; t < mask.size(); ++t) {
    if (mask.masked(t)) continue;
    const auto resid = (xhat.row(t) - noise_field.row(t)).eval();
    acc += resid.squaredNorm();
    if (dxhat) dxhat->row(t) += (S(2) * denom * coeff) * resid;
  }
  return acc * denom;
}

}  // namespace can
