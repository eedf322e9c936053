#pragma once

#include <string>
#include <utility>
#include <vector>

#include "can/layers.hpp"
#include "can/patches.hpp"

namespace can {

// ---------------------------------------------------------------------------
// Architecture shape
// ---------------------------------------------------------------------------

struct TowerSpec {
  int depth = 0;
  int width = 0;
  int heads = 0;
  int mlp_dim = 0;
};

struct HeadSpec {
  int hidden_dim = 4096;
  int hidden_layers = 2;
  int out_dim = 128;
};

struct ModelSpec {
  TowerSpec encoder{6, 192, 3, 768};
  TowerSpec decoder{2, 128, 4, 512};
  HeadSpec head{1024, 2, 128};
  int patch = 4;
  int image_h = 32;
  int image_w = 32;

  int grid_h() const { return image_h / patch; }
  int grid_w() const { return image_w / patch; }
  int tokens() const { return grid_h() * grid_w(); }
  int patch_dim() const { return patch * patch * 3; }

  void validate() const {
    check_arg(encoder.width % encoder.heads == 0, "model: encoder width not divisible by heads");
    check_arg(decoder.depth == 0 || decoder.width % decoder.heads == 0,
              "model: decoder width not divisible by heads");
    check_arg(head.out_dim < encoder.width, "model: projection dim must be below encoder width");
    check_arg(encoder.width % 4 == 0, "model: encoder width must be divisible by 4");
    check_arg(decoder.depth == 0 || decoder.width % 4 == 0,
              "model: decoder width must be divisible by 4");
    check_arg(image_h % patch == 0 && image_w % patch == 0,
              "model: patch side must divide the image");
  }
};

// Desk-scale default. Encoder per the micro shape; decoder and projection head
// scaled down 4x from the full-size 8/512/16/2048 and 4096 configurations.
inline ModelSpec vit_micro(int image = 32, int patch = 4) {
  ModelSpec s;
  s.encoder = {6, 192, 3, 768};
  s.decoder = {2, 128, 4, 512};
  s.head = {1024, 2, 128};
  s.patch = patch;
  s.image_h = s.image_w = image;
  return s;
}

inline ModelSpec vit_s(int image = 224, int patch = 16) {
  ModelSpec s;
  s.encoder = {12, 384, 6, 1536};
  s.decoder = {8, 512, 16, 2048};
  s.head = {4096, 2, 128};
  s.patch = patch;
  s.image_h = s.image_w = image;
  return s;
}

inline ModelSpec vit_b(int image = 224, int patch = 16) {
  ModelSpec s = vit_s(image, patch);
  s.encoder = {12, 768, 12, 3072};
  return s;
}

inline ModelSpec vit_l(int image = 224, int patch = 16) {
  ModelSpec s = vit_s(image, patch);
  s.encoder = {24, 1024, 16, 4096};
  return s;
}

inline ModelSpec vit_h(int image = 224, int patch = 14) {
  ModelSpec s = vit_s(image, patch);
  s.encoder = {32, 1280, 16, 5120};
  return s;
}

// ---------------------------------------------------------------------------
// Fixed sinusoidal tables
// ---------------------------------------------------------------------------

// 2-D sin-cos over the patch grid: d/4 frequencies per axis, [sin(y), cos(y),
// sin(x), cos(x)] concatenated. Non-learned.
template <typename S>
MatX<S> posenc_2d(int grid_h, int grid_w, int d) {
  check_arg(d % 4 == 0, "posenc: width must be divisible by 4");
  const int quarter = d / 4;
  MatX<S> table(grid_h * grid_w, d);
  for (int gy = 0; gy < grid_h; ++gy)
    for (int gx = 0; gx < grid_w; ++gx) {
      const int t = gy * grid_w + gx;
      for (int k = 0; k < quarter; ++k) {
        const double omega =
            1.0 / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(quarter));
        table(t, k) = static_cast<S>(std::sin(gy * omega));
        table(t, quarter + k) = static_cast<S>(std::cos(gy * omega));
        table(t, 2 * quarter + k) = static_cast<S>(std::sin(gx * omega));
        table(t, 3 * quarter + k) = static_cast<S>(std::cos(gx * omega));
      }
    }
  return table;
}

// Interleaved sinusoid of the noise level. sigma lives in [0, ~0.05], so it is
// scaled by 1000 first to span a usable phase range.
template <typename S>
MatX<S> sigma_sinusoid(double sigma, int d) {
  check_arg(d % 2 == 0, "sigma sinusoid: width must be even");
  MatX<S> s(1, d);
  const double scaled = 1000.0 * sigma;
  for (int k = 0; k < d / 2; ++k) {
    const double omega = std::pow(10000.0, -2.0 * k / static_cast<double>(d));
    s(0, 2 * k) = static_cast<S>(std::sin(scaled * omega));
    s(0, 2 * k + 1) = static_cast<S>(std::cos(scaled * omega));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <typename S>
struct HeadP {
  std::vector<LinearP<S>> fcs;
  std::vector<BatchNormP<S>> bns;
  LinearP<S> out;
};

template <typename S>
struct SigmaMlpP {
  LinearP<S> fc1, fc2;
};

template <typename S>
struct Params {
  LinearP<S> patch_embed;  // p*p*3 -> d
  TowerP<S> encoder;
  MatX<S> mask_token;  // 1 x d
  LinearP<S> dec_in;   // d -> decoder width
  TowerP<S> decoder;
  LinearP<S> dec_out;  // decoder width -> p*p*3
  HeadP<S> head;
  SigmaMlpP<S> sigma_mlp;  // d -> d -> d
  MatX<S> posenc_enc;  // T x d, fixed
  MatX<S> posenc_dec;  // T x d, fixed
};

namespace detail {

template <typename S, typename F>
void visit_linear(LinearP<S>& p, const std::string& name, F&& f) {
  f(name + ".w", p.w, ParamKind::weight);
  f(name + ".b", p.b, ParamKind::no_decay);
}

template <typename S, typename F>
void visit_ln(LayerNormP<S>& p, const std::string& name, F&& f) {
  f(name + ".g", p.gain, ParamKind::no_decay);
  f(name + ".b", p.bias, ParamKind::no_decay);
}

template <typename S, typename F>
void visit_tower(TowerP<S>& p, const std::string& name, F&& f) {
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string b = name + ".blk" + std::to_string(i);
    visit_ln(p.blocks[i].ln1, b + ".ln1", f);
    visit_linear(p.blocks[i].wq, b + ".wq", f);
    visit_linear(p.blocks[i].wk, b + ".wk", f);
    visit_linear(p.blocks[i].wv, b + ".wv", f);
    visit_linear(p.blocks[i].wo, b + ".wo", f);
    visit_ln(p.blocks[i].ln2, b + ".ln2", f);
    visit_linear(p.blocks[i].fc1, b + ".fc1", f);
    visit_linear(p.blocks[i].fc2, b + ".fc2", f);
  }
  visit_ln(p.ln_final, name + ".lnf", f);
}

}  // namespace detail

template <typename S, typename F>
void visit_params(Params<S>& p, F&& f) {
  detail::visit_linear(p.patch_embed, "embed", f);
  detail::visit_tower(p.encoder, "enc", f);
  f(std::string("mask_token"), p.mask_token, ParamKind::no_decay);
  detail::visit_linear(p.dec_in, "dec_in", f);
  detail::visit_tower(p.decoder, "dec", f);
  detail::visit_linear(p.dec_out, "dec_out", f);
  for (std::size_t i = 0; i < p.head.fcs.size(); ++i) {
    detail::visit_linear(p.head.fcs[i], "head.fc" + std::to_string(i), f);
    const std::string bn = "head.bn" + std::to_string(i);
    f(bn + ".g", p.head.bns[i].gain, ParamKind::no_decay);
    f(bn + ".b", p.head.bns[i].bias, ParamKind::no_decay);
    f(bn + ".rm", p.head.bns[i].run_mean, ParamKind::buffer);
    f(bn + ".rv", p.head.bns[i].run_var, ParamKind::buffer);
  }
  detail::visit_linear(p.head.out, "head.out", f);
  detail::visit_linear(p.sigma_mlp.fc1, "sigma.fc1", f);
  detail::visit_linear(p.sigma_mlp.fc2, "sigma.fc2", f);
}

template <typename S>
std::vector<ParamRef<S>> collect_params(Params<S>& p) {
  std::vector<ParamRef<S>> refs;
  visit_params(p, [&](const std::string& name, MatX<S>& m, ParamKind kind) {
    refs.push_back({name, &m, kind});
  });
  return refs;
}

template <typename S>
void alloc_tower(TowerP<S>& t, const TowerSpec& spec) {
  t.blocks.resize(static_cast<std::size_t>(spec.depth));
  for (auto& b : t.blocks) {
    b.ln1.init(spec.width);
    b.ln2.init(spec.width);
    b.wq.init(spec.width, spec.width);
    b.wk.init(spec.width, spec.width);
    b.wv.init(spec.width, spec.width);
    b.wo.init(spec.width, spec.width);
    b.fc1.init(spec.width, spec.mlp_dim);
    b.fc2.init(spec.mlp_dim, spec.width);
  }
  t.ln_final.init(spec.width);
}

// Truncated-normal (std 0.02) weights, zero biases, uniform fan-based init for
// the patch embedding, unit norm gains.
template <typename S>
Params<S> init_params(const ModelSpec& spec, Rng rng) {
  spec.validate();
  Params<S> p;
  const int d = spec.encoder.width;
  p.patch_embed.init(spec.patch_dim(), d);
  alloc_tower(p.encoder, spec.encoder);
  p.mask_token.setZero(1, d);
  p.dec_in.init(d, spec.decoder.depth > 0 ? spec.decoder.width : 1);
  alloc_tower(p.decoder, spec.decoder);
  p.dec_out.init(spec.decoder.depth > 0 ? spec.decoder.width : 1, spec.patch_dim());
  p.head.fcs.resize(static_cast<std::size_t>(spec.head.hidden_layers));
  p.head.bns.resize(static_cast<std::size_t>(spec.head.hidden_layers));
  int in = d;
  for (int i = 0; i < spec.head.hidden_layers; ++i) {
    p.head.fcs[static_cast<std::size_t>(i)].init(in, spec.head.hidden_dim);
    p.head.bns[static_cast<std::size_t>(i)].init(spec.head.hidden_dim);
    in = spec.head.hidden_dim;
  }
  p.head.out.init(in, spec.head.out_dim);
  p.sigma_mlp.fc1.init(d, d);
  p.sigma_mlp.fc2.init(d, d);

  visit_params(p, [&](const std::string& name, MatX<S>& m, ParamKind kind) {
    if (kind != ParamKind::weight) return;
    Rng stream = rng.derive(std::hash<std::string>{}(name));
    if (name == "embed.w")
      fill_glorot_uniform(m, stream);
    else
      fill_trunc_normal(m, stream, 0.02);
  });
  Rng mt = rng.derive(std::hash<std::string>{}("mask_token"));
  fill_trunc_normal(p.mask_token, mt, 0.02);

  p.posenc_enc = posenc_2d<S>(spec.grid_h(), spec.grid_w(), d);
  p.posenc_dec = posenc_2d<S>(spec.grid_h(), spec.grid_w(), d);
  return p;
}

// Same structure, all optimizable entries zeroed; used for gradients and
// optimizer moments.
template <typename S>
Params<S> zeros_like(Params<S>& model) {
  Params<S> z = model;
  visit_params(z, [](const std::string&, MatX<S>& m, ParamKind) { m.setZero(); });
  z.posenc_enc.resize(0, 0);
  z.posenc_dec.resize(0, 0);
  return z;
}

// ---------------------------------------------------------------------------
// Encoder: patch-embed unmasked patches, add the positional encoding of each
// patch's original grid position, run the pre-norm tower. No class token.
// ---------------------------------------------------------------------------

template <typename S>
struct EncodeCache {
  MatX<S> patches;  // (B*T') x p*p*3
  TowerCache<S> tower;
  std::vector<TokenGatherPlan> plans;
  int batch = 0;
  int seq = 0;
};

template <typename S>
MatX<S> encode_batch(const MatX<S>& patches, const std::vector<TokenGatherPlan>& plans,
                     const Params<S>& params, const ModelSpec& spec, EncodeCache<S>& cache) {
  const int batch = static_cast<int>(plans.size());
  check_arg(batch >= 1, "encode: empty batch");
  const int seq = plans[0].kept();
  check_arg(seq >= 1, "encode: need at least one unmasked token");
  check_arg(patches.rows() == static_cast<Eigen::Index>(batch) * seq,
            "encode: patch rows do not match plans");
  check_arg(patches.cols() == spec.patch_dim(), "encode: patch width mismatch");

  cache.patches = patches;
  cache.plans = plans;
  cache.batch = batch;
  cache.seq = seq;

  MatX<S> x = patches * params.patch_embed.w;
  x.rowwise() += params.patch_embed.b.row(0);
  for (int s = 0; s < batch; ++s) {
    check_arg(plans[static_cast<std::size_t>(s)].kept() == seq,
              "encode: ragged plans in one batch");
    for (int i = 0; i < seq; ++i)
      x.row(static_cast<Eigen::Index>(s) * seq + i) +=
          params.posenc_enc.row(plans[static_cast<std::size_t>(s)].kept_indices[i]);
  }
  const TowerDims dims{spec.encoder.depth, spec.encoder.width, spec.encoder.heads,
                       spec.encoder.mlp_dim};
  return tower_forward(x, params.encoder, dims, batch, cache.tower, "encoder");
}

template <typename S>
MatX<S> encode_backward(const MatX<S>& dz, const Params<S>& params, const ModelSpec& spec,
                        const EncodeCache<S>& cache, Params<S>& grads) {
  const TowerDims dims{spec.encoder.depth, spec.encoder.width, spec.encoder.heads,
                       spec.encoder.mlp_dim};
  MatX<S> dx = tower_backward(dz, params.encoder, dims, cache.tower, grads.encoder);
  grads.patch_embed.w.noalias() += cache.patches.transpose() * dx;
  grads.patch_embed.b.row(0) += dx.colwise().sum();
  return dx * params.patch_embed.w.transpose();  // gradient w.r.t. input patches
}

// Single-sample convenience matching the op contract.
template <typename S>
MatX<S> encode(const MatX<S>& unmasked_patches, const TokenGatherPlan& plan,
               const Params<S>& params, const ModelSpec& spec) {
  EncodeCache<S> cache;
  return encode_batch(unmasked_patches, std::vector<TokenGatherPlan>{plan}, params, spec, cache);
}

// ---------------------------------------------------------------------------
// Mean pool + projection head. Batch norm runs over the batch dimension, so
// the head consumes all pooled rows at once; rows come out L2-normalized.
// ---------------------------------------------------------------------------

template <typename S>
MatX<S> mean_pool_batch(const MatX<S>& z, int batch) {
  const int seq = static_cast<int>(z.rows()) / batch;
  MatX<S> pooled(batch, z.cols());
  for (int s = 0; s < batch; ++s)
    pooled.row(s) = z.middleRows(static_cast<Eigen::Index>(s) * seq, seq).colwise().mean();
  return pooled;
}

template <typename S>
struct HeadCache {
  std::vector<MatX<S>> fc_in;      // input to each hidden linear
  std::vector<MatX<S>> bn_out;     // post-norm pre-relu
  std::vector<BnCache<S>> bn;
  MatX<S> out_in;                  // input to final linear
  MatX<S> raw;                     // pre-normalization output
  VecX<S> norms;
};

template <typename S>
MatX<S> head_forward(const MatX<S>& pooled, Params<S>& params, bool train, HeadCache<S>& cache,
                     S bn_momentum = S(0.9)) {
  const std::size_t layers = params.head.fcs.size();
  cache.fc_in.resize(layers);
  cache.bn_out.resize(layers);
  cache.bn.resize(layers);
  MatX<S> x = pooled;
  for (std::size_t i = 0; i < layers; ++i) {
    cache.fc_in[i] = x;
    MatX<S> lin = x * params.head.fcs[i].w;
    lin.rowwise() += params.head.fcs[i].b.row(0);
    MatX<S> norm = batchnorm_forward(lin, params.head.bns[i], train, bn_momentum, cache.bn[i]);
    cache.bn_out[i] = norm;
    x = norm.cwiseMax(S(0));
  }
  cache.out_in = x;
  cache.raw = x * params.head.out.w;
  cache.raw.rowwise() += params.head.out.b.row(0);

  cache.norms.resize(cache.raw.rows());
  MatX<S> u(cache.raw.rows(), cache.raw.cols());
  for (Eigen::Index r = 0; r < cache.raw.rows(); ++r) {
    const S n = cache.raw.row(r).norm();
    check_run(n > S(1e-12), "projection head produced a zero vector (collapse)");
    cache.norms(r) = n;
    u.row(r) = cache.raw.row(r) / n;
  }
  return u;
}

template <typename S>
MatX<S> head_backward(const MatX<S>& du, const Params<S>& params, const HeadCache<S>& cache,
                      Params<S>& grads) {
  MatX<S> draw(du.rows(), du.cols());
  for (Eigen::Index r = 0; r < du.rows(); ++r) {
    const S n = cache.norms(r);
    const auto u = cache.raw.row(r) / n;
    const S proj = u.dot(du.row(r));
    draw.row(r) = (du.row(r) - proj * u) / n;
  }
  grads.head.out.w.noalias() += cache.out_in.transpose() * draw;
  grads.head.out.b.row(0) += draw.colwise().sum();
  MatX<S> dx = draw * params.head.out.w.transpose();
  for (int i = static_cast<int>(params.head.fcs.size()) - 1; i >= 0; --i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    MatX<S> drelu =
        (cache.bn_out[ui].array() > S(0)).template cast<S>() * dx.array();
    MatX<S> dlin =
        batchnorm_backward(drelu, params.head.bns[ui], cache.bn[ui], grads.head.bns[ui]);
    grads.head.fcs[ui].w.noalias() += cache.fc_in[ui].transpose() * dlin;
    grads.head.fcs[ui].b.row(0) += dlin.colwise().sum();
    dx = dlin * params.head.fcs[ui].w.transpose();
  }
  return dx;
}

// Eval-mode single-sample wrapper matching the op contract: mean over tokens,
// MLP head with running statistics, L2 normalize.
template <typename S>
VecX<S> pool_and_project(const MatX<S>& z, Params<S>& params) {
  check_arg(z.rows() >= 1, "pool_and_project: empty token set");
  HeadCache<S> cache;
  MatX<S> pooled = mean_pool_batch(z, 1);
  MatX<S> u = head_forward(pooled, params, /*train=*/false, cache);
  return u.row(0).transpose();
}

// ---------------------------------------------------------------------------
// Noise-level embedding: interleaved sinusoid -> 2-layer MLP into R^d.
// ---------------------------------------------------------------------------

template <typename S>
struct SigmaCache {
  MatX<S> sin;    // B x d
  MatX<S> h_pre;  // B x d
  MatX<S> h_act;
};

template <typename S>
MatX<S> embed_sigma_batch(const std::vector<double>& sigmas, const Params<S>& params, int d,
                          SigmaCache<S>& cache) {
  const int b = static_cast<int>(sigmas.size());
  cache.sin.resize(b, d);
  for (int i = 0; i < b; ++i) {
    check_arg(sigmas[static_cast<std::size_t>(i)] >= 0.0 &&
                  std::isfinite(sigmas[static_cast<std::size_t>(i)]),
              "embed_sigma: sigma must be finite and >= 0");
    cache.sin.row(i) = sigma_sinusoid<S>(sigmas[static_cast<std::size_t>(i)], d).row(0);
  }
  cache.h_pre = cache.sin * params.sigma_mlp.fc1.w;
  cache.h_pre.rowwise() += params.sigma_mlp.fc1.b.row(0);
  cache.h_act = cache.h_pre.unaryExpr([](S v) { return gelu(v); });
  MatX<S> out = cache.h_act * params.sigma_mlp.fc2.w;
  out.rowwise() += params.sigma_mlp.fc2.b.row(0);
  return out;
}

template <typename S>
void embed_sigma_backward(const MatX<S>& demb, const Params<S>& params,
                          const SigmaCache<S>& cache, Params<S>& grads) {
  grads.sigma_mlp.fc2.w.noalias() += cache.h_act.transpose() * demb;
  grads.sigma_mlp.fc2.b.row(0) += demb.colwise().sum();
  MatX<S> dh = demb * params.sigma_mlp.fc2.w.transpose();
  dh.array() *= cache.h_pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
  grads.sigma_mlp.fc1.w.noalias() += cache.sin.transpose() * dh;
  grads.sigma_mlp.fc1.b.row(0) += dh.colwise().sum();
}

template <typename S>
MatX<S> embed_sigma(double sigma, const Params<S>& params, int d) {
  SigmaCache<S> cache;
  return embed_sigma_batch(std::vector<double>{sigma}, params, d, cache);
}

// ---------------------------------------------------------------------------
// Decoder: scatter encoded tokens with the learned mask embedding, add the
// decoder positional table and the noise-level embedding to every token,
// project to decoder width, run the tower, project to pixel space. Produces
// predictions for all T positions.
// ---------------------------------------------------------------------------

template <typename S>
struct DecodeCache {
  MatX<S> full;  // (B*T) x d post scatter/posenc/sigma
  TowerCache<S> tower;
  MatX<S> tower_out;  // (B*T) x dd
  std::vector<TokenGatherPlan> plans;
  int batch = 0;
  bool used_sigma = false;
};

template <typename S>
MatX<S> decode_batch(const MatX<S>& z, const std::vector<TokenGatherPlan>& plans,
                     const MatX<S>& sigma_emb, const Params<S>& params, const ModelSpec& spec,
                     bool use_sigma, DecodeCache<S>& cache) {
  check_arg(spec.decoder.depth > 0, "decode: decoder has zero depth");
  const int batch = static_cast<int>(plans.size());
  const int total = plans[0].total();
  const int kept = plans[0].kept();
  check_arg(z.rows() == static_cast<Eigen::Index>(batch) * kept, "decode: token count mismatch");

  cache.plans = plans;
  cache.batch = batch;
  cache.used_sigma = use_sigma;
  cache.full.resize(static_cast<Eigen::Index>(batch) * total, z.cols());
  for (int s = 0; s < batch; ++s) {
    const TokenGatherPlan& plan = plans[static_cast<std::size_t>(s)];
    check_arg(plan.total() == total && plan.kept() == kept, "decode: ragged plans");
    for (int t = 0; t < total; ++t) {
      const int src = plan.inverse_map[static_cast<std::size_t>(t)];
      auto row = cache.full.row(static_cast<Eigen::Index>(s) * total + t);
      if (src >= 0)
        row = z.row(static_cast<Eigen::Index>(s) * kept + src);
      else
        row = params.mask_token.row(0);
      row += params.posenc_dec.row(t);
      if (use_sigma) row += sigma_emb.row(s);
    }
  }

  MatX<S> x = cache.full * params.dec_in.w;
  x.rowwise() += params.dec_in.b.row(0);
  const TowerDims dims{spec.decoder.depth, spec.decoder.width, spec.decoder.heads,
                       spec.decoder.mlp_dim};
  cache.tower_out = tower_forward(x, params.decoder, dims, batch, cache.tower, "decoder");
  MatX<S> xhat = cache.tower_out * params.dec_out.w;
  xhat.rowwise() += params.dec_out.b.row(0);
  check_finite(xhat, "decoder output projection");
  return xhat;  // (B*T) x p*p*3
}

// Returns gradient w.r.t. z; d_sigma_emb receives the per-sample gradient of
// the noise-level embedding when it was used.
template <typename S>
MatX<S> decode_backward(const MatX<S>& dxhat, const Params<S>& params, const ModelSpec& spec,
                        const DecodeCache<S>& cache, Params<S>& grads, MatX<S>* d_sigma_emb) {
  const int batch = cache.batch;
  const int total = cache.plans[0].total();
  const int kept = cache.plans[0].kept();

  grads.dec_out.w.noalias() += cache.tower_out.transpose() * dxhat;
  grads.dec_out.b.row(0) += dxhat.colwise().sum();
  MatX<S> dtower = dxhat * params.dec_out.w.transpose();

  const TowerDims dims{spec.decoder.depth, spec.decoder.width, spec.decoder.heads,
                       spec.decoder.mlp_dim};
  MatX<S> dx = tower_backward(dtower, params.decoder, dims, cache.tower, grads.decoder);

  grads.dec_in.w.noalias() += cache.full.transpose() * dx;
  grads.dec_in.b.row(0) += dx.colwise().sum();
  MatX<S> dfull = dx * params.dec_in.w.transpose();

  MatX<S> dz(static_cast<Eigen::Index>(batch) * kept, dfull.cols());
  if (d_sigma_emb && cache.used_sigma) d_sigma_emb->setZero(batch, dfull.cols());
  for (int s = 0; s < batch; ++s) {
    const TokenGatherPlan& plan = cache.plans[static_cast<std::size_t>(s)];
    for (int t = 0; t < total; ++t) {
      const auto row = dfull.row(static_cast<Eigen::Index>(s) * total + t);
      const int src = plan.inverse_map[static_cast<std::size_t>(t)];
      if (src >= 0)
        dz.row(static_cast<Eigen::Index>(s) * kept + src) = row;
      else
        grads.mask_token.row(0) += row;
      if (d_sigma_emb && cache.used_sigma) d_sigma_emb->row(s) += row;
    }
  }
  return dz;
}

// Single-sample convenience matching the op contract.
template <typename S>
MatX<S> decode(const MatX<S>& z, const TokenGatherPlan& plan, const MatX<S>& sigma_emb,
               const Params<S>& params, const ModelSpec& spec) {
  DecodeCache<S> cache;
  return decode_batch(z, std::vector<TokenGatherPlan>{plan}, sigma_emb, params, spec,
                      /*use_sigma=*/true, cache);
}

}  // namespace can
