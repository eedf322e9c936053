#include "can/augment.hpp"

#include <algorithm>
#include <cmath>

#include "can/threading.hpp"

namespace can {
namespace {

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

void apply_brightness(Image& img, float factor) {
  for (float& v : img.data) v *= factor;
  img.clamp01();
}

void apply_contrast(Image& img, float factor) {
  double acc = 0.0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) acc += luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
  const float mean = static_cast<float>(acc / (static_cast<double>(img.h) * img.w));
  for (float& v : img.data) v = mean + factor * (v - mean);
  img.clamp01();
}

void apply_saturation(Image& img, float factor) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float g = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = g + factor * (img.at(y, x, c) - g);
    }
  img.clamp01();
}

// Hue shift as a fraction of the color wheel, via RGB<->HSV.
void apply_hue(Image& img, float shift) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
      const float mx = std::max({r, g, b});
      const float mn = std::min({r, g, b});
      const float d = mx - mn;
      float h = 0.0f;
      if (d > 0.0f) {
        if (mx == r)
          h = std::fmod((g - b) / d, 6.0f);
        else if (mx == g)
          h = (b - r) / d + 2.0f;
        else
          h = (r - g) / d + 4.0f;
        h /= 6.0f;
        if (h < 0.0f) h += 1.0f;
      }
      const float s = mx > 0.0f ? d / mx : 0.0f;
      const float v = mx;
      h = h + shift;
      h -= std::floor(h);
      const float hh = h * 6.0f;
      const int sector = static_cast<int>(hh) % 6;
      const float f = hh - std::floor(hh);
      const float p = v * (1.0f - s);
      const float q = v * (1.0f - s * f);
      const float t = v * (1.0f - s * (1.0f - f));
      switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
      }
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  img.clamp01();
}

void apply_grayscale(Image& img) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const float g = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
      img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = g;
    }
}

// Separable truncated gaussian, kernel sigma ~ U[0.1, 2.0], kernel size 10%
// of the image side rounded up to odd, clamp-to-edge padding.
void apply_blur(Image& img, float kernel_sigma) {
  const int side = std::max(img.h, img.w);
  int ksize = (side + 9) / 10;
  if (ksize % 2 == 0) ++ksize;
  if (ksize < 3) ksize = 3;
  const int radius = ksize / 2;
  std::vector<float> kernel(static_cast<std::size_t>(ksize));
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    const float v = std::exp(-0.5f * (i * i) / (kernel_sigma * kernel_sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (float& v : kernel) v /= sum;

  Image tmp(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, img.w - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(y, xx, c);
        }
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, img.h - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(yy, x, c);
        }
        img.at(y, x, c) = acc;
      }
}

void flip_horizontal(Image& img) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w / 2; ++x)
      for (int c = 0; c < 3; ++c) std::swap(img.at(y, x, c), img.at(y, img.w - 1 - x, c));
}

Image crop_resize(const Image& src, int y0, int x0, int ch, int cw, int out_h, int out_w) {
  Image region(ch, cw);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < 3; ++c) region.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return resize_bilinear(region, out_h, out_w);
}

}  // namespace

void AugmentConfig::validate() const {
  check_arg(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0,
            "augment: crop scale range must satisfy 0 < lo <= hi <= 1");
  check_arg(aspect_lo > 0.0 && aspect_lo <= aspect_hi, "augment: bad aspect range");
  for (double p : {grayscale_prob, blur_prob, flip_prob})
    check_arg(p >= 0.0 && p <= 1.0, "augment: probabilities must be in [0,1]");
  check_arg(jitter_strength >= 0.0, "augment: jitter strength must be >= 0");
  check_arg(out_h > 0 && out_w > 0, "augment: output size must be positive");
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.h == out_h && src.w == out_w) return src;
  Image dst(out_h, out_w);
  const float sy = static_cast<float>(src.h) / out_h;
  const float sx = static_cast<float>(src.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
    const int y0 = std::min(static_cast<int>(fy), src.h - 1);
    const int y1 = std::min(y0 + 1, src.h - 1);
    const float wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
      const int x0 = std::min(static_cast<int>(fx), src.w - 1);
      const int x1 = std::min(x0 + 1, src.w - 1);
      const float wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const float top = (1.0f - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const float bot = (1.0f - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = (1.0f - wy) * top + wy * bot;
      }
    }
  }
  return dst;
}

Image augment_view(const Image& src, const AugmentConfig& cfg, Rng rng) {
  cfg.validate();
  check_arg(src.h > 0 && src.w > 0, "augment: empty source image");

  // Random resized crop: sample area and aspect, resample on degenerate
  // geometry, fall back to a center crop after repeated misses.
  int ch = src.h, cw = src.w, y0 = 0, x0 = 0;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double area = rng.uniform(cfg.crop_scale_lo, cfg.crop_scale_hi) *
                        static_cast<double>(src.h) * src.w;
    const double log_lo = std::log(cfg.aspect_lo), log_hi = std::log(cfg.aspect_hi);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const int h = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    const int w = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    if (h >= 1 && w >= 1 && h <= src.h && w <= src.w) {
      ch = h;
      cw = w;
      y0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(src.h - h + 1)));
      x0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(src.w - w + 1)));
      found = true;
    }
  }
  if (!found) {
    const double scale = std::sqrt(0.5 * (cfg.crop_scale_lo + cfg.crop_scale_hi));
    ch = std::max(1, static_cast<int>(std::lround(src.h * scale)));
    cw = std::max(1, static_cast<int>(std::lround(src.w * scale)));
    y0 = (src.h - ch) / 2;
    x0 = (src.w - cw) / 2;
  }
  Image out = crop_resize(src, y0, x0, ch, cw, cfg.out_h, cfg.out_w);

  if (rng.bernoulli(cfg.flip_prob)) flip_horizontal(out);

  if (cfg.jitter_strength > 0.0) {
    const float s = static_cast<float>(cfg.jitter_strength);
    const float b = static_cast<float>(rng.uniform(std::max(0.0, 1.0 - 0.8 * s), 1.0 + 0.8 * s));
    const float c = static_cast<float>(rng.uniform(std::max(0.0, 1.0 - 0.8 * s), 1.0 + 0.8 * s));
    const float sat = static_cast<float>(rng.uniform(std::max(0.0, 1.0 - 0.8 * s), 1.0 + 0.8 * s));
    const float hue = static_cast<float>(rng.uniform(-0.2 * s, 0.2 * s));
    apply_brightness(out, b);
    apply_contrast(out, c);
    apply_saturation(out, sat);
    apply_hue(out, hue);
  }

  if (rng.bernoulli(cfg.grayscale_prob)) apply_grayscale(out);
  if (rng.bernoulli(cfg.blur_prob)) apply_blur(out, static_cast<float>(rng.uniform(0.1, 2.0)));

  out.clamp01();
  return out;
}

std::pair<Image, Image> two_views(const Image& image, const AugmentConfig& cfg, Rng& rng) {
  Image v1 = augment_view(image, cfg, rng.derive(1));
  Image v2 = augment_view(image, cfg, rng.derive(2));
  return {std::move(v1), std::move(v2)};
}

NoisedView add_noise(const Image& view, double sigma_max, Rng& rng) {
  check_arg(sigma_max >= 0.0, "add_noise: sigma_max must be >= 0");
  NoisedView nv;
  nv.clean = view;
  nv.sigma = static_cast<float>(sigma_max > 0.0 ? rng.uniform(0.0, sigma_max) : 0.0);
  nv.noise = Image(view.h, view.w);
  nv.pixels = view;
  for (std::size_t i = 0; i < nv.noise.data.size(); ++i) {
    nv.noise.data[i] = static_cast<float>(rng.normal());
    nv.pixels.data[i] = nv.clean.data[i] + nv.sigma * nv.noise.data[i];
  }
  return nv;
}

ViewBatch build_view_batch(const std::vector<Image>& images, const AugmentConfig& cfg,
                           double mask_rate, double sigma_max, int patch, const Rng& rng,
                           int views) {
  check_arg(!images.empty(), "build_view_batch: empty image list");
  check_arg(views == 1 || views == 2, "build_view_batch: views must be 1 or 2");
  cfg.validate();
  const int grid = (cfg.out_h / patch) * (cfg.out_w / patch);
  check_arg(cfg.out_h % patch == 0 && cfg.out_w % patch == 0,
            "build_view_batch: patch side must divide the view size");
  check_arg(unmasked_count_for(grid, mask_rate) >= 1,
            "build_view_batch: masking leaves no unmasked patch");

  const int n = static_cast<int>(images.size());
  ViewBatch batch;
  batch.views = views;
  batch.view1.resize(static_cast<std::size_t>(n));
  if (views == 2) batch.view2.resize(static_cast<std::size_t>(n));

  parallel_for(n * views, [&](int job) {
    const int i = job % n;
    const int v = job / n;
    Rng stream = rng.derive(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(v + 1));
    Rng aug_rng = stream.derive(11);
    Rng noise_rng = stream.derive(12);
    Rng mask_rng = stream.derive(13);
    ViewSample s;
    s.view = add_noise(augment_view(images[static_cast<std::size_t>(i)], cfg, aug_rng),
                       sigma_max, noise_rng);
    s.mask = sample_mask(grid, mask_rate, mask_rng);
    (v == 0 ? batch.view1 : batch.view2)[static_cast<std::size_t>(i)] = std::move(s);
  });
  return batch;
}

}  // namespace can
