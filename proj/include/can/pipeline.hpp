#pragma once

#include <vector>

#include "can/augment.hpp"
#include "can/model.hpp"
#include "can/objectives.hpp"

namespace can {

// One combined pass over a ViewBatch: both views share the encoder, the
// contrastive branch runs when lambda_infonce > 0 (and two views exist), the
// decoder branch runs when any pixel loss carries weight. Samples are stacked
// view1 first, then view2.
struct PipelineConfig {
  LossWeights weights;
  double tau = 0.1;
  bool sigma_encoding = true;
  bool train_mode = true;  // batch-norm statistics mode for the head
  bool backward = true;    // skip gradient work for loss-only evaluation
};

template <typename S>
struct PipelineResult {
  LossReport report;
  Params<S> grads;  // empty structure when cfg.backward is false
};

namespace detail {

template <typename S>
MatX<S> to_scalar(const PatchSequence& seq) {
  if constexpr (std::is_same_v<S, float>) return seq.patches;
  return seq.patches.template cast<S>();
}

}  // namespace detail

// Forward (+ backward) of the combined objective; gradients are accumulated
// into out.grads. Running batch-norm buffers update when the contrastive
// branch runs in train mode.
template <typename S>
PipelineResult<S> compute_batch_gradients(Params<S>& params, const ModelSpec& spec,
                                          const ViewBatch& batch, const PipelineConfig& cfg) {
  cfg.weights.validate();
  const int n = batch.size();
  check_arg(n >= 1, "pipeline: empty batch");
  const int views = batch.views;
  const int b = n * views;
  const int total = spec.tokens();
  const int pdim = spec.patch_dim();

  const bool want_contrastive = cfg.weights.lambda_infonce > 0.0;
  check_arg(!want_contrastive || views == 2,
            "pipeline: contrastive objective needs two views");
  const bool want_pixels =
      cfg.weights.lambda_rec() > 0.0 || cfg.weights.lambda_denoise() > 0.0;

  // Patchify all view-samples; the denoise target needs no extra pass since
  // noise field = pixels - clean, exact by construction.
  std::vector<MatX<S>> noisy(static_cast<std::size_t>(b)), clean(static_cast<std::size_t>(b));
  std::vector<TokenGatherPlan> plans(static_cast<std::size_t>(b));
  std::vector<double> sigmas(static_cast<std::size_t>(b));
  int kept = -1;
  for (int j = 0; j < b; ++j) {
    const ViewSample& vs = batch.sample(j % n, j / n);
    check_arg(vs.mask.size() == total, "pipeline: mask does not match token grid");
    noisy[static_cast<std::size_t>(j)] = detail::to_scalar<S>(patchify(vs.view.pixels, spec.patch));
    clean[static_cast<std::size_t>(j)] = detail::to_scalar<S>(patchify(vs.view.clean, spec.patch));
    plans[static_cast<std::size_t>(j)] = make_gather_plan(vs.mask);
    sigmas[static_cast<std::size_t>(j)] = vs.view.sigma;
    if (kept < 0) kept = plans[static_cast<std::size_t>(j)].kept();
    check_arg(plans[static_cast<std::size_t>(j)].kept() == kept,
              "pipeline: unmasked counts differ inside one batch");
  }

  MatX<S> stacked(static_cast<Eigen::Index>(b) * kept, pdim);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < kept; ++i)
      stacked.row(static_cast<Eigen::Index>(j) * kept + i) =
          noisy[static_cast<std::size_t>(j)].row(
              plans[static_cast<std::size_t>(j)].kept_indices[static_cast<std::size_t>(i)]);

  EncodeCache<S> enc_cache;
  MatX<S> z = encode_batch(stacked, plans, params, spec, enc_cache);

  PipelineResult<S> out;
  if (cfg.backward) out.grads = zeros_like(params);
  MatX<S> dz;
  if (cfg.backward) dz = MatX<S>::Zero(z.rows(), z.cols());

  // Contrastive branch
  if (want_contrastive) {
    HeadCache<S> head_cache;
    MatX<S> pooled = mean_pool_batch(z, b);
    MatX<S> u = head_forward(pooled, params, cfg.train_mode, head_cache);
    MatX<S> u1 = u.topRows(n), u2 = u.bottomRows(n);
    if (cfg.backward) {
      MatX<S> du1 = MatX<S>::Zero(n, u.cols()), du2 = MatX<S>::Zero(n, u.cols());
      out.report.l_infonce = static_cast<double>(
          info_nce<S>(u1, u2, static_cast<S>(cfg.tau), &du1, &du2,
                      static_cast<S>(cfg.weights.lambda_infonce)));
      MatX<S> du(b, u.cols());
      du.topRows(n) = du1;
      du.bottomRows(n) = du2;
      MatX<S> dpooled = head_backward(du, params, head_cache, out.grads);
      const S inv_seq = S(1) / static_cast<S>(kept);
      for (int j = 0; j < b; ++j)
        dz.middleRows(static_cast<Eigen::Index>(j) * kept, kept).rowwise() +=
            dpooled.row(j) * inv_seq;
    } else {
      out.report.l_infonce =
          static_cast<double>(info_nce<S>(u1, u2, static_cast<S>(cfg.tau)));
    }
  }

  // Pixel branch: reconstruction on masked patches, noise prediction on
  // unmasked ones; both read the same decoder output.
  if (want_pixels) {
    SigmaCache<S> sig_cache;
    MatX<S> sigma_emb;
    if (cfg.sigma_encoding)
      sigma_emb = embed_sigma_batch(sigmas, params, spec.encoder.width, sig_cache);
    DecodeCache<S> dec_cache;
    MatX<S> xhat =
        decode_batch(z, plans, sigma_emb, params, spec, cfg.sigma_encoding, dec_cache);

    MatX<S> dxhat;
    if (cfg.backward) dxhat = MatX<S>::Zero(xhat.rows(), xhat.cols());
    const S rec_coeff = static_cast<S>(cfg.weights.lambda_rec() / b);
    const S den_coeff = static_cast<S>(cfg.weights.lambda_denoise() / b);
    double rec_sum = 0.0, den_sum = 0.0;
    for (int j = 0; j < b; ++j) {
      const ViewSample& vs = batch.sample(j % n, j / n);
      MatX<S> xhat_j = xhat.middleRows(static_cast<Eigen::Index>(j) * total, total);
      MatX<S> noise_field =
          noisy[static_cast<std::size_t>(j)] - clean[static_cast<std::size_t>(j)];
      if (cfg.backward) {
        MatX<S> dxhat_j = MatX<S>::Zero(total, pdim);
        rec_sum += static_cast<double>(recon_loss<S>(clean[static_cast<std::size_t>(j)], xhat_j,
                                                     vs.mask, &dxhat_j, rec_coeff));
        den_sum += static_cast<double>(
            denoise_loss<S>(noise_field, xhat_j, vs.mask, &dxhat_j, den_coeff));
        dxhat.middleRows(static_cast<Eigen::Index>(j) * total, total) = dxhat_j;
      } else {
        rec_sum += static_cast<double>(
            recon_loss<S>(clean[static_cast<std::size_t>(j)], xhat_j, vs.mask));
        den_sum += static_cast<double>(denoise_loss<S>(noise_field, xhat_j, vs.mask));
      }
    }
    out.report.l_rec = rec_sum / b;
    out.report.l_denoise = den_sum / b;

    if (cfg.backward) {
      MatX<S> d_sigma_emb;
      dz += decode_backward(dxhat, params, spec, dec_cache, out.grads,
                            cfg.sigma_encoding ? &d_sigma_emb : nullptr);
      if (cfg.sigma_encoding) embed_sigma_backward(d_sigma_emb, params, sig_cache, out.grads);
    }
  }

  if (cfg.backward) encode_backward(dz, params, spec, enc_cache, out.grads);
  out.report.finalize(cfg.weights);
  return out;
}

// Forward-only loss evaluation; batch-norm buffers are left untouched.
template <typename S>
LossReport compute_losses(const Params<S>& params, const ModelSpec& spec, const ViewBatch& batch,
                          PipelineConfig cfg) {
  cfg.backward = false;
  Params<S> snapshot = params;  // train-mode BN must not mutate the caller's buffers
  PipelineResult<S> r = compute_batch_gradients(snapshot, spec, batch, cfg);
  return r.report;
}

}  // namespace can
