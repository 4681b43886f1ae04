#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spend {

/// Every failure the toolkit reports to callers.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis : std::uint8_t { X = 0, Y = 1, W = 2 };

inline constexpr std::array<Axis, 3> kAllAxes{Axis::X, Axis::Y, Axis::W};

/// "x", "y" or "w" (the spectral axis).
std::string_view axis_name(Axis a);

/// Accepts x, y, w, omega.
Axis parse_axis(std::string_view s);

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nw = 0;

  std::size_t extent(Axis a) const {
    return a == Axis::X ? nx : a == Axis::Y ? ny : nw;
  }
  std::size_t size() const { return nx * ny * nw; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// A two-dimensional frame, row-major.
class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Image(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::optional<double> pixel_size_nm;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Hyperspectral stack indexed (x, y, w), spectral axis fastest in memory.
class HyperCube {
 public:
  HyperCube() = default;
  HyperCube(Dims dims, float fill = 0.0f);
  HyperCube(Dims dims, std::vector<float> values);

  const Dims& dims() const { return dims_; }
  std::size_t nx() const { return dims_.nx; }
  std::size_t ny() const { return dims_.ny; }
  std::size_t nw() const { return dims_.nw; }
  std::size_t extent(Axis a) const { return dims_.extent(a); }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t w) const {
    return (x * dims_.ny + y) * dims_.nw + w;
  }
  float& operator()(std::size_t x, std::size_t y, std::size_t w) { return data_[index(x, y, w)]; }
  float operator()(std::size_t x, std::size_t y, std::size_t w) const {
    return data_[index(x, y, w)];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Spectrum of pixel (x, y).
  std::span<const float> spectrum(std::size_t x, std::size_t y) const {
    return std::span<const float>(data_).subspan(index(x, y, 0), dims_.nw);
  }

  std::optional<std::vector<double>> wavenumbers;
  std::optional<double> pixel_size_nm;
  Axis fast_axis = Axis::X;

  /// Throws Error on non-finite values, zero extents or a bad wavenumber list.
  void validate() const;

  /// Same geometry and metadata, new values.
  HyperCube with_data(std::vector<float> values) const;

  friend bool operator==(const HyperCube&, const HyperCube&) = default;

 private:
  Dims dims_;
  std::vector<float> data_;
};

/// Plane perpendicular to `axis` at `index`. Rows/cols are the remaining
/// axes in (x, y, w) order.
Image slice_frame(const HyperCube& cube, Axis axis, std::size_t index);

/// Writes `frame` back into the plane at `index` along `axis`.
void put_frame(HyperCube& cube, Axis axis, std::size_t index, const Image& frame);

/// (rows, cols) of a frame perpendicular to `axis`.
std::pair<std::size_t, std::size_t> frame_shape(const Dims& dims, Axis axis);

/// All 1-D lines running along one axis. Line ids enumerate the two other
/// axes in (x, y, w) order; element t of a line sits at start(id) + t * stride.
struct Lines {
  std::size_t count = 0;
  std::size_t length = 0;
  std::size_t stride = 0;
  std::size_t inner = 0;
  std::size_t outer_stride = 0;
  std::size_t inner_stride = 0;

  std::size_t start(std::size_t id) const {
    return (id / inner) * outer_stride + (id % inner) * inner_stride;
  }
};

Lines lines_along(const Dims& dims, Axis axis);

}  // namespace spend
