#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spend::nnet {

/// One frame's feature maps: channels x height x width, row-major.
template <class T>
struct Tensor {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T(0))
      : c(channels), h(height), w(width), v(channels * height * width, fill) {}

  void resize(std::size_t channels, std::size_t height, std::size_t width) {
    c = channels, h = height, w = width;
    v.assign(channels * height * width, T(0));
  }

  std::size_t plane() const { return h * w; }
  T* channel(std::size_t k) { return v.data() + k * plane(); }
  const T* channel(std::size_t k) const { return v.data() + k * plane(); }
  T& at(std::size_t k, std::size_t y, std::size_t x) { return v[(k * h + y) * w + x]; }
  T at(std::size_t k, std::size_t y, std::size_t x) const { return v[(k * h + y) * w + x]; }
};

}  // namespace spend::nnet
