#pragma once

#include <vector>

#include "can/checks.hpp"

namespace can {

// H x W x 3 interleaved RGB, row-major, values in [0, 1] once normalized.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> data;  // size h * w * 3

  Image() = default;
  Image(int h_, int w_, float fill = 0.0f)
      : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }

  void clamp01() {
    for (float& v : data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
};

}  // namespace can
