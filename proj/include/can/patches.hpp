#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "can/checks.hpp"
#include "can/common.hpp"
#include "can/image.hpp"
#include "can/rng.hpp"

namespace can {

// An image decomposed into T = grid_h * grid_w patches of side p. Patch t
// covers rows [floor(t / grid_w) * p, ...) and cols [(t mod grid_w) * p, ...);
// inside a patch, entries run row-major as (py, px, channel). This ordering is
// part of the checkpoint and feature-cache contract; do not change it.
template <typename S>
struct PatchSequenceT {
  MatX<S> patches;  // T x (p*p*3)
  int grid_h = 0;
  int grid_w = 0;
  int patch = 0;

  int count() const { return grid_h * grid_w; }
};

using PatchSequence = PatchSequenceT<float>;

// Per-view masking plan. bits[t] == 1 means patch t is hidden from the
// encoder; exactly size() - unmasked_count bits are set on every draw.
struct MaskVector {
  std::vector<std::uint8_t> bits;
  int unmasked_count = 0;

  int size() const { return static_cast<int>(bits.size()); }
  bool masked(int t) const { return bits[static_cast<std::size_t>(t)] != 0; }
};

// Gather/scatter bookkeeping: kept_indices lists unmasked positions in
// increasing order; inverse_map[t] is the gathered row holding token t, or -1
// where the mask embedding goes.
struct TokenGatherPlan {
  std::vector<int> kept_indices;
  std::vector<int> inverse_map;

  int total() const { return static_cast<int>(inverse_map.size()); }
  int kept() const { return static_cast<int>(kept_indices.size()); }
};

template <typename S>
PatchSequenceT<S> patchify(const MatX<S>& image, int h, int w, int p) {
  check_arg(p > 0, "patchify: patch side must be positive");
  check_arg(h > 0 && w > 0, "patchify: empty image");
  check_arg(h % p == 0 && w % p == 0,
            "patchify: patch side " + std::to_string(p) + " does not divide " +
                std::to_string(h) + "x" + std::to_string(w));
  check_arg(image.rows() == h && image.cols() == static_cast<Eigen::Index>(w) * 3,
            "patchify: image buffer does not match stated dimensions");

  PatchSequenceT<S> seq;
  seq.grid_h = h / p;
  seq.grid_w = w / p;
  seq.patch = p;
  seq.patches.resize(seq.count(), p * p * 3);
  for (int t = 0; t < seq.count(); ++t) {
    const int y0 = (t / seq.grid_w) * p;
    const int x0 = (t % seq.grid_w) * p;
    S* row = seq.patches.row(t).data();
    for (int py = 0; py < p; ++py)
      for (int px = 0; px < p; ++px)
        for (int c = 0; c < 3; ++c)
          *row++ = image(y0 + py, static_cast<Eigen::Index>(x0 + px) * 3 + c);
  }
  return seq;
}

inline PatchSequence patchify(const Image& img, int p) {
  Eigen::Map<const MatF> m(img.data.data(), img.h, static_cast<Eigen::Index>(img.w) * 3);
  return patchify<float>(MatF(m), img.h, img.w, p);
}

template <typename S>
MatX<S> unpatchify(const PatchSequenceT<S>& seq) {
  const int p = seq.patch;
  MatX<S> image(seq.grid_h * p, static_cast<Eigen::Index>(seq.grid_w) * p * 3);
  for (int t = 0; t < seq.count(); ++t) {
    const int y0 = (t / seq.grid_w) * p;
    const int x0 = (t % seq.grid_w) * p;
    const S* row = seq.patches.row(t).data();
    for (int py = 0; py < p; ++py)
      for (int px = 0; px < p; ++px)
        for (int c = 0; c < 3; ++c)
          image(y0 + py, static_cast<Eigen::Index>(x0 + px) * 3 + c) = *row++;
  }
  return image;
}

// T' = T - round(mask_rate * T), ties rounding half away from zero. Uniform
// over all subsets of the required size: shuffle 0..T-1, mask the prefix.
inline int unmasked_count_for(int total, double mask_rate) {
  check_arg(mask_rate >= 0.0 && mask_rate < 1.0, "sample_mask: mask_rate must be in [0,1)");
  const int masked = static_cast<int>(std::llround(mask_rate * total));
  return total - masked;
}

inline MaskVector sample_mask(int total, double mask_rate, Rng& rng) {
  check_arg(total >= 1, "sample_mask: need at least one patch");
  const int keep = unmasked_count_for(total, mask_rate);
  check_arg(keep >= 1, "sample_mask: masking rate leaves no unmasked patch");

  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  MaskVector mask;
  mask.bits.assign(static_cast<std::size_t>(total), 0);
  mask.unmasked_count = keep;
  for (int i = 0; i < total - keep; ++i) mask.bits[static_cast<std::size_t>(order[i])] = 1;
  return mask;
}

inline TokenGatherPlan make_gather_plan(const MaskVector& mask) {
  TokenGatherPlan plan;
  plan.inverse_map.assign(static_cast<std::size_t>(mask.size()), -1);
  plan.kept_indices.reserve(static_cast<std::size_t>(mask.unmasked_count));
  for (int t = 0; t < mask.size(); ++t) {
    if (!mask.masked(t)) {
      plan.inverse_map[static_cast<std::size_t>(t)] = plan.kept();
      plan.kept_indices.push_back(t);
    }
  }
  return plan;
}

template <typename S>
std::pair<MatX<S>, TokenGatherPlan> gather_unmasked(const MatX<S>& tokens,
                                                    const MaskVector& mask) {
  check_arg(tokens.rows() == mask.size(), "gather_unmasked: mask length mismatch");
  TokenGatherPlan plan = make_gather_plan(mask);
  MatX<S> kept(plan.kept(), tokens.cols());
  for (int i = 0; i < plan.kept(); ++i) kept.row(i) = tokens.row(plan.kept_indices[i]);
  return {std::move(kept), std::move(plan)};
}

template <typename S>
MatX<S> scatter_with_mask_token(const MatX<S>& encoded, const TokenGatherPlan& plan,
                                const VecX<S>& mask_token) {
  check_arg(encoded.rows() == plan.kept(), "scatter_with_mask_token: plan/token count mismatch");
  check_arg(encoded.cols() == mask_token.size() || plan.kept() == 0,
            "scatter_with_mask_token: mask token width mismatch");
  MatX<S> out(plan.total(), mask_token.size());
  for (int t = 0; t < plan.total(); ++t) {
    const int src = plan.inverse_map[static_cast<std::size_t>(t)];
    if (src >= 0)
      out.row(t) = encoded.row(src);
    else
      out.row(t) = mask_token.transpose();
  }
  return out;
}

}  // namespace can
