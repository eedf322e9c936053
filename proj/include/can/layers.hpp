#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "can/checks.hpp"
#include "can/common.hpp"
#include "can/rng.hpp"
#include "can/threading.hpp"

namespace can {

// ---------------------------------------------------------------------------
// Parameter containers. Everything is a row-major MatX<S>; biases and norm
// parameters are 1 x width rows. visit/collect provide a stable enumeration
// order shared by the optimizer, the checkpoint writer and the test harness.
// ---------------------------------------------------------------------------

enum class ParamKind { weight, no_decay, buffer };

template <typename S>
struct ParamRef {
  std::string name;
  MatX<S>* mat;
  ParamKind kind;
};

template <typename S>
struct LinearP {
  MatX<S> w;  // in x out
  MatX<S> b;  // 1 x out

  void init(int in, int out) {
    w.setZero(in, out);
    b.setZero(1, out);
  }
};

template <typename S>
struct LayerNormP {
  MatX<S> gain, bias;  // 1 x d

  void init(int d) {
    gain.setOnes(1, d);
    bias.setZero(1, d);
  }
};

template <typename S>
struct BatchNormP {
  MatX<S> gain, bias;          // 1 x d
  MatX<S> run_mean, run_var;   // 1 x d buffers, momentum-averaged biased stats

  void init(int d) {
    gain.setOnes(1, d);
    bias.setZero(1, d);
    run_mean.setZero(1, d);
    run_var.setOnes(1, d);
  }
};

template <typename S>
struct BlockP {
  LayerNormP<S> ln1, ln2;
  LinearP<S> wq, wk, wv, wo;
  LinearP<S> fc1, fc2;
};

template <typename S>
struct TowerP {
  std::vector<BlockP<S>> blocks;
  LayerNormP<S> ln_final;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename S>
inline S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865475244)));
}

template <typename S>
inline S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865475244)));
  const S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014326779);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// LayerNorm over rows
// ---------------------------------------------------------------------------

template <typename S>
struct LnCache {
  MatX<S> xhat;
  VecX<S> rstd;
};

template <typename S>
MatX<S> layernorm_forward(const MatX<S>& x, const LayerNormP<S>& p, LnCache<S>& cache,
                          S eps = S(1e-6)) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  MatX<S> y(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const S mu = x.row(r).mean();
    const S var = (x.row(r).array() - mu).square().mean();
    const S rstd = S(1) / std::sqrt(var + eps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mu) * rstd;
    y.row(r) = cache.xhat.row(r).cwiseProduct(p.gain.row(0)) + p.bias.row(0);
  }
  return y;
}

template <typename S>
MatX<S> layernorm_backward(const MatX<S>& dy, const LayerNormP<S>& p, const LnCache<S>& cache,
                           LayerNormP<S>& grads) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  MatX<S> dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto xhat = cache.xhat.row(r).array();
    const auto dxhat = dy.row(r).array() * p.gain.row(0).array();
    const S m1 = dxhat.mean();
    const S m2 = (dxhat * xhat).mean();
    dx.row(r) = (cache.rstd(r) * (dxhat - m1 - xhat * m2)).matrix();
    grads.gain.row(0).array() += dy.row(r).array() * xhat;
    grads.bias.row(0) += dy.row(r);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm over columns (batch dimension). Training mode normalizes with the
// biased batch variance and folds the same statistic into the running
// buffers, so train and eval agree once the buffers have converged.
// ---------------------------------------------------------------------------

template <typename S>
struct BnCache {
  MatX<S> xhat;
  MatX<S> rstd;      // 1 x d
  MatX<S> centered;  // x - mu
  bool train = true;
};

template <typename S>
MatX<S> batchnorm_forward(const MatX<S>& x, BatchNormP<S>& p, bool train, S momentum,
                          BnCache<S>& cache, S eps = S(1e-5)) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.train = train;
  MatX<S> mean(1, d), var(1, d);
  if (train) {
    mean = x.colwise().mean();
    cache.centered = x.rowwise() - mean.row(0);
    var = cache.centered.array().square().colwise().mean();
    p.run_mean = momentum * p.run_mean + (S(1) - momentum) * mean;
    p.run_var = momentum * p.run_var + (S(1) - momentum) * var;
  } else {
    mean = p.run_mean;
    var = p.run_var;
    cache.centered = x.rowwise() - mean.row(0);
  }
  cache.rstd = (var.array() + eps).rsqrt();
  cache.xhat = cache.centered.array().rowwise() * cache.rstd.row(0).array();
  MatX<S> y = cache.xhat.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.bias.row(0);
  return y;
}

template <typename S>
MatX<S> batchnorm_backward(const MatX<S>& dy, const BatchNormP<S>& p, const BnCache<S>& cache,
                           BatchNormP<S>& grads) {
  const Eigen::Index n = dy.rows();
  grads.gain.row(0).array() += (dy.array() * cache.xhat.array()).colwise().sum();
  grads.bias.row(0).array() += dy.array().colwise().sum();
  MatX<S> dxhat = dy.array().rowwise() * p.gain.row(0).array();
  if (!cache.train) {
    return dxhat.array().rowwise() * cache.rstd.row(0).array();
  }
  const S invn = S(1) / static_cast<S>(n);
  MatX<S> sum_dxhat = dxhat.colwise().sum();            // 1 x d
  MatX<S> sum_dxhat_xhat =
      (dxhat.array() * cache.xhat.array()).colwise().sum();  // 1 x d
  MatX<S> dx = dxhat;
  dx.array().rowwise() -= invn * sum_dxhat.row(0).array();
  dx.array() -= cache.xhat.array().rowwise() *
                (invn * sum_dxhat_xhat.row(0).array());
  dx.array().rowwise() *= cache.rstd.row(0).array();
  return dx;
}

// ---------------------------------------------------------------------------
// Pre-norm transformer tower over a batch of B sequences of uniform length L,
// stacked as a (B*L) x d matrix. Row-wise ops run as single GEMMs; attention
// runs per sample (disjoint row blocks, parallelized deterministically).
// ---------------------------------------------------------------------------

template <typename S>
struct BlockCache {
  MatX<S> x_in;
  LnCache<S> ln1;
  MatX<S> a;  // normalized input to attention
  MatX<S> q, k, v, ctx;
  std::vector<MatX<S>> probs;  // B * heads entries, each L x L
  MatX<S> x_mid;
  LnCache<S> ln2;
  MatX<S> m;      // normalized input to mlp
  MatX<S> h_pre;  // pre-activation
  MatX<S> h_act;
};

template <typename S>
struct TowerCache {
  std::vector<BlockCache<S>> blocks;
  LnCache<S> ln_f;
  int batch = 0;
  int seq = 0;
};

struct TowerDims {
  int depth, width, heads, mlp;
};

template <typename S>
void check_finite(const MatX<S>& x, const std::string& where) {
  check_run(x.allFinite(), "non-finite activations in " + where);
}

template <typename S>
MatX<S> tower_forward(const MatX<S>& x_in, const TowerP<S>& p, const TowerDims& dims, int batch,
                      TowerCache<S>& cache, const std::string& tag) {
  const int L = static_cast<int>(x_in.rows()) / batch;
  const int dh = dims.width / dims.heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  cache.batch = batch;
  cache.seq = L;
  cache.blocks.resize(static_cast<std::size_t>(dims.depth));

  MatX<S> x = x_in;
  for (int layer = 0; layer < dims.depth; ++layer) {
    BlockCache<S>& bc = cache.blocks[static_cast<std::size_t>(layer)];
    const BlockP<S>& bp = p.blocks[static_cast<std::size_t>(layer)];
    bc.x_in = x;

    bc.a = layernorm_forward(x, bp.ln1, bc.ln1);
    bc.q.noalias() = bc.a * bp.wq.w;
    bc.q.rowwise() += bp.wq.b.row(0);
    bc.k.noalias() = bc.a * bp.wk.w;
    bc.k.rowwise() += bp.wk.b.row(0);
    bc.v.noalias() = bc.a * bp.wv.w;
    bc.v.rowwise() += bp.wv.b.row(0);

    bc.ctx.resize(bc.q.rows(), bc.q.cols());
    bc.probs.assign(static_cast<std::size_t>(batch) * dims.heads, MatX<S>());
    parallel_for(batch, [&](int s) {
      for (int h = 0; h < dims.heads; ++h) {
        auto qs = bc.q.block(s * L, h * dh, L, dh);
        auto ks = bc.k.block(s * L, h * dh, L, dh);
        auto vs = bc.v.block(s * L, h * dh, L, dh);
        MatX<S> att = (qs * ks.transpose()) * scale;  // L x L
        for (int r = 0; r < L; ++r) {
          const S mx = att.row(r).maxCoeff();
          att.row(r) = (att.row(r).array() - mx).exp();
          att.row(r) /= att.row(r).sum();
        }
        bc.ctx.block(s * L, h * dh, L, dh).noalias() = att * vs;
        bc.probs[static_cast<std::size_t>(s) * dims.heads + h] = std::move(att);
      }
    });

    MatX<S> attn_out = bc.ctx * bp.wo.w;
    attn_out.rowwise() += bp.wo.b.row(0);
    bc.x_mid = x + attn_out;

    bc.m = layernorm_forward(bc.x_mid, bp.ln2, bc.ln2);
    bc.h_pre.noalias() = bc.m * bp.fc1.w;
    bc.h_pre.rowwise() += bp.fc1.b.row(0);
    bc.h_act = bc.h_pre.unaryExpr([](S v) { return gelu(v); });
    MatX<S> mlp_out = bc.h_act * bp.fc2.w;
    mlp_out.rowwise() += bp.fc2.b.row(0);
    x = bc.x_mid + mlp_out;
    check_finite(x, tag + " block " + std::to_string(layer));
  }
  MatX<S> y = layernorm_forward(x, p.ln_final, cache.ln_f);
  check_finite(y, tag + " final norm");
  return y;
}

template <typename S>
MatX<S> tower_backward(const MatX<S>& dy, const TowerP<S>& p, const TowerDims& dims,
                       const TowerCache<S>& cache, TowerP<S>& grads) {
  const int batch = cache.batch;
  const int L = cache.seq;
  const int dh = dims.width / dims.heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  MatX<S> dx = layernorm_backward(dy, p.ln_final, cache.ln_f, grads.ln_final);
  for (int layer = dims.depth - 1; layer >= 0; --layer) {
    const BlockCache<S>& bc = cache.blocks[static_cast<std::size_t>(layer)];
    const BlockP<S>& bp = p.blocks[static_cast<std::size_t>(layer)];
    BlockP<S>& bg = grads.blocks[static_cast<std::size_t>(layer)];

    // MLP branch
    MatX<S> dh_act = dx * bp.fc2.w.transpose();
    bg.fc2.w.noalias() += bc.h_act.transpose() * dx;
    bg.fc2.b.row(0) += dx.colwise().sum();
    MatX<S> dh_pre =
        dh_act.array() * bc.h_pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
    MatX<S> dm = dh_pre * bp.fc1.w.transpose();
    bg.fc1.w.noalias() += bc.m.transpose() * dh_pre;
    bg.fc1.b.row(0) += dh_pre.colwise().sum();
    MatX<S> dx_mid = dx + layernorm_backward(dm, bp.ln2, bc.ln2, bg.ln2);

    // Attention branch
    MatX<S> dctx = dx_mid * bp.wo.w.transpose();
    bg.wo.w.noalias() += bc.ctx.transpose() * dx_mid;
    bg.wo.b.row(0) += dx_mid.colwise().sum();

    MatX<S> dq(bc.q.rows(), bc.q.cols()), dk(bc.q.rows(), bc.q.cols()),
        dv(bc.q.rows(), bc.q.cols());
    parallel_for(batch, [&](int s) {
      for (int h = 0; h < dims.heads; ++h) {
        const MatX<S>& att = bc.probs[static_cast<std::size_t>(s) * dims.heads + h];
        auto qs = bc.q.block(s * L, h * dh, L, dh);
        auto ks = bc.k.block(s * L, h * dh, L, dh);
        auto vs = bc.v.block(s * L, h * dh, L, dh);
        auto dctxs = dctx.block(s * L, h * dh, L, dh);
        MatX<S> datt = dctxs * vs.transpose();  // L x L
        dv.block(s * L, h * dh, L, dh).noalias() = att.transpose() * dctxs;
        // softmax rows: ds = p .* (datt - rowsum(datt .* p))
        MatX<S> dscore(L, L);
        for (int r = 0; r < L; ++r) {
          const S dot = att.row(r).dot(datt.row(r));
          dscore.row(r) = att.row(r).array() * (datt.row(r).array() - dot);
        }
        dscore *= scale;
        dq.block(s * L, h * dh, L, dh).noalias() = dscore * ks;
        dk.block(s * L, h * dh, L, dh).noalias() = dscore.transpose() * qs;
      }
    });

    MatX<S> da = dq * bp.wq.w.transpose();
    da.noalias() += dk * bp.wk.w.transpose();
    da.noalias() += dv * bp.wv.w.transpose();
    bg.wq.w.noalias() += bc.a.transpose() * dq;
    bg.wq.b.row(0) += dq.colwise().sum();
    bg.wk.w.noalias() += bc.a.transpose() * dk;
    bg.wk.b.row(0) += dk.colwise().sum();
    bg.wv.w.noalias() += bc.a.transpose() * dv;
    bg.wv.b.row(0) += dv.colwise().sum();

    dx = dx_mid + layernorm_backward(da, bp.ln1, bc.ln1, bg.ln1);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Initialization helpers
// ---------------------------------------------------------------------------

template <typename S>
void fill_trunc_normal(MatX<S>& m, Rng& rng, double stddev = 0.02) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v;
      do {
        v = rng.normal() * stddev;
      } while (std::abs(v) > 2.0 * stddev);
      m(i, j) = static_cast<S>(v);
    }
}

template <typename S>
void fill_glorot_uniform(MatX<S>& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace can
