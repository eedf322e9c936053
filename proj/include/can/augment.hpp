#pragma once

#include <utility>
#include <vector>

#include "can/image.hpp"
#include "can/patches.hpp"
#include "can/rng.hpp"

namespace can {

// SimCLR-style augmentation stack. Order per view is fixed:
// random resized crop -> horizontal flip -> color jitter
// (brightness, contrast, saturation, hue with strength multipliers
// 0.8/0.8/0.8/0.2) -> grayscale -> gaussian blur, output clamped to [0,1].
struct AugmentConfig {
  double crop_scale_lo = 0.08;
  double crop_scale_hi = 1.0;
  double aspect_lo = 3.0 / 4.0;
  double aspect_hi = 4.0 / 3.0;
  double jitter_strength = 1.0;
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  double flip_prob = 0.5;
  int out_h = 32;
  int out_w = 32;

  void validate() const;
};

// One augmented view plus the additive noise that was injected into it.
// pixels == clean + sigma * noise holds elementwise by construction.
struct NoisedView {
  Image pixels;
  Image clean;
  float sigma = 0.0f;
  Image noise;  // standard-normal field e
};

struct ViewSample {
  NoisedView view;
  MaskVector mask;
};

// Two independently augmented, noised, masked views per image.
struct ViewBatch {
  std::vector<ViewSample> view1;
  std::vector<ViewSample> view2;  // empty when the pipeline runs single-view
  int views = 2;

  int size() const { return static_cast<int>(view1.size()); }
  const ViewSample& sample(int i, int v) const { return v == 0 ? view1[i] : view2[i]; }
};

Image resize_bilinear(const Image& src, int out_h, int out_w);
Image augment_view(const Image& src, const AugmentConfig& cfg, Rng rng);

std::pair<Image, Image> two_views(const Image& image, const AugmentConfig& cfg, Rng& rng);

NoisedView add_noise(const Image& view, double sigma_max, Rng& rng);

// Per view: augment -> add noise -> (patchify happens at the model boundary)
// -> mask. Every stochastic draw comes from a stream derived from
// (rng, image index, view index), so workers can run images concurrently.
ViewBatch build_view_batch(const std::vector<Image>& images, const AugmentConfig& cfg,
                           double mask_rate, double sigma_max, int patch, const Rng& rng,
                           int views = 2);

}  // namespace can
