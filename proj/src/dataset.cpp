#include "can/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "can/checks.hpp"

namespace can {
namespace {

constexpr int kCifarSide = 32;
constexpr int kCifarPlane = kCifarSide * kCifarSide;
constexpr int kCifarRecord = 1 + 3 * kCifarPlane;

}  // namespace

Dataset load_cifar10_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_run(static_cast<bool>(in), "cifar10: cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<long long>(in.tellg());
  in.seekg(0);
  check_arg(bytes > 0 && bytes % kCifarRecord == 0,
            "cifar10: " + path + " is not a whole number of 3073-byte records");

  Dataset ds;
  ds.num_classes = 10;
  const long long n = bytes / kCifarRecord;
  ds.items.reserve(static_cast<std::size_t>(n));
  std::vector<unsigned char> rec(kCifarRecord);
  for (long long r = 0; r < n; ++r) {
    in.read(reinterpret_cast<char*>(rec.data()), kCifarRecord);
    check_run(static_cast<bool>(in), "cifar10: short read in " + path);
    LabeledImage li;
    li.label = rec[0];
    check_arg(li.label < 10, "cifar10: label byte out of range in " + path);
    li.image = Image(kCifarSide, kCifarSide);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < kCifarSide; ++y)
        for (int x = 0; x < kCifarSide; ++x)
          li.image.at(y, x, c) =
              static_cast<float>(rec[1 + c * kCifarPlane + y * kCifarSide + x]) / 255.0f;
    ds.items.push_back(std::move(li));
  }
  return ds;
}

Dataset load_cifar10_dir(const std::string& dir, bool train) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) {
      const fs::path p = fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(p)) files.push_back(p.string());
    }
  } else {
    const fs::path p = fs::path(dir) / "test_batch.bin";
    if (fs::exists(p)) files.push_back(p.string());
  }
  check_arg(!files.empty(), "cifar10: no batch files found under " + dir);
  Dataset ds;
  ds.num_classes = 10;
  for (const auto& f : files) {
    Dataset part = load_cifar10_file(f);
    ds.items.insert(ds.items.end(), std::make_move_iterator(part.items.begin()),
                    std::make_move_iterator(part.items.end()));
  }
  return ds;
}

void write_cifar10_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check_run(static_cast<bool>(out), "cifar10: cannot write " + path);
  std::vector<unsigned char> rec(kCifarRecord);
  for (const auto& li : ds.items) {
    check_arg(li.image.h == kCifarSide && li.image.w == kCifarSide,
              "cifar10: writer requires 32x32 images");
    check_arg(li.label >= 0 && li.label < 10, "cifar10: label out of range");
    rec[0] = static_cast<unsigned char>(li.label);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < kCifarSide; ++y)
        for (int x = 0; x < kCifarSide; ++x) {
          const float v = std::clamp(li.image.at(y, x, c), 0.0f, 1.0f);
          rec[1 + c * kCifarPlane + y * kCifarSide + x] =
              static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    out.write(reinterpret_cast<const char*>(rec.data()), kCifarRecord);
  }
  check_run(static_cast<bool>(out), "cifar10: write failed for " + path);
}

namespace {

struct Palette {
  float fg[3];
  float bg[3];
};

Palette random_palette(Rng& rng) {
  Palette p;
  for (int c = 0; c < 3; ++c) {
    p.fg[c] = static_cast<float>(rng.uniform(0.1, 1.0));
    p.bg[c] = static_cast<float>(rng.uniform(0.0, 0.9));
  }
  // Keep some contrast between the two colors.
  float dist = 0.0f;
  for (int c = 0; c < 3; ++c) dist += std::abs(p.fg[c] - p.bg[c]);
  if (dist < 0.6f) p.fg[0] = std::min(1.0f, p.bg[0] + 0.7f);
  return p;
}

float blend(float a, float b, float t) { return a + (b - a) * t; }

// family 0: horizontal stripes     5: horizontal gradient
//        1: vertical stripes       6: vertical gradient
//        2: diagonal stripes       7: centered filled rectangle
//        3: checkerboard           8: two-tone halves
//        4: radial gradient        9: concentric rings
void paint_family(Image& img, int family, Rng& rng) {
  const Palette pal = random_palette(rng);
  const double freq = rng.uniform(1.5, 3.5);
  const double phase = rng.uniform(0.0, 6.283185307179586);
  const double cx = img.w * rng.uniform(0.35, 0.65);
  const double cy = img.h * rng.uniform(0.35, 0.65);
  const double r0 = std::min(img.h, img.w) * rng.uniform(0.18, 0.32);
  const bool flip = rng.bernoulli(0.5);

  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double u = (x + 0.5) / img.w;
      const double v = (y + 0.5) / img.h;
      float t = 0.0f;
      switch (family) {
        case 0: t = 0.5f + 0.5f * static_cast<float>(std::sin(2 * M_PI * freq * v + phase)); break;
        case 1: t = 0.5f + 0.5f * static_cast<float>(std::sin(2 * M_PI * freq * u + phase)); break;
        case 2:
          t = 0.5f + 0.5f * static_cast<float>(std::sin(2 * M_PI * freq * (u + v) + phase));
          break;
        case 3: {
          const int q = (static_cast<int>(u * 2 * freq) + static_cast<int>(v * 2 * freq)) % 2;
          t = static_cast<float>(q);
          break;
        }
        case 4: {
          const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy) /
                           (0.5 * std::hypot(img.w, img.h));
          t = static_cast<float>(std::clamp(d, 0.0, 1.0));
          break;
        }
        case 5: t = static_cast<float>(u); break;
        case 6: t = static_cast<float>(v); break;
        case 7: {
          const bool inside = std::abs(x + 0.5 - cx) < r0 && std::abs(y + 0.5 - cy) < r0;
          t = inside ? 1.0f : 0.0f;
          break;
        }
        case 8: t = (flip ? u : v) < 0.5 ? 0.0f : 1.0f; break;
        default: {
          const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
          t = 0.5f + 0.5f * static_cast<float>(std::sin(2 * M_PI * d / (r0 + 2.0) + phase));
          break;
        }
      }
      if (flip && family <= 3) t = 1.0f - t;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = blend(pal.bg[c], pal.fg[c], t);
    }
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  check_arg(cfg.count >= 1, "synthetic: count must be >= 1");
  check_arg(cfg.num_classes >= 2 && cfg.num_classes <= 10,
            "synthetic: num_classes must be in [2,10]");
  check_arg(cfg.height > 0 && cfg.width > 0, "synthetic: bad image size");

  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.items.resize(static_cast<std::size_t>(cfg.count));
  Rng root(cfg.seed);
  for (int i = 0; i < cfg.count; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i) + 1);
    LabeledImage& li = ds.items[static_cast<std::size_t>(i)];
    li.label = i % cfg.num_classes;  // balanced by construction
    li.image = Image(cfg.height, cfg.width);
    paint_family(li.image, li.label, rng);
    if (cfg.pixel_noise > 0.0)
      for (float& v : li.image.data)
        v += static_cast<float>(cfg.pixel_noise * rng.normal());
    li.image.clamp01();
  }
  return ds;
}

}  // namespace can
