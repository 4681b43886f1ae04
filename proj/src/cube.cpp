#include "spend/cube.hpp"

#include <cmath>

namespace spend {

std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::X:
      return "x";
    case Axis::Y:
      return "y";
    case Axis::W:
      return "w";
  }
  return "?";
}

Axis parse_axis(std::string_view s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "w" || s == "omega" || s == "\xCF\x89") return Axis::W;
  throw Error("unknown axis '" + std::string(s) + "' (expected x, y or w)");
}

Image::Image(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Image::Image(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw Error("image payload has " + std::to_string(data_.size()) + " values, expected " +
                std::to_string(rows * cols));
  }
}

HyperCube::HyperCube(Dims dims, float fill) : dims_(dims), data_(dims.size(), fill) {}

HyperCube::HyperCube(Dims dims, std::vector<float> values)
    : dims_(dims), data_(std::move(values)) {
  if (data_.size() != dims_.size()) {
    throw Error("cube payload has " + std::to_string(data_.size()) + " values, expected " +
                std::to_string(dims_.size()));
  }
}

void HyperCube::validate() const {
  if (dims_.nx == 0 || dims_.ny == 0 || dims_.nw == 0) {
    throw Error("cube dimensions must all be >= 1");
  }
  if (data_.size() != dims_.size()) throw Error("cube payload does not match dimensions");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error("cube contains a non-finite value at flat index " + std::to_string(i));
    }
  }
  if (wavenumbers) {
    const auto& wn = *wavenumbers;
    if (wn.size() != dims_.nw) {
      throw Error("wavenumber list has " + std::to_string(wn.size()) + " entries, expected " +
                  std::to_string(dims_.nw));
    }
    if (wn.size() >= 2) {
      const bool increasing = wn[1] > wn[0];
      for (std::size_t i = 1; i < wn.size(); ++i) {
        const bool ok = increasing ? wn[i] > wn[i - 1] : wn[i] < wn[i - 1];
        if (!ok || !std::isfinite(wn[i])) throw Error("wavenumbers must be strictly monotone");
      }
    }
  }
  if (pixel_size_nm && !(*pixel_size_nm > 0.0)) throw Error("pixel size must be positive");
}

HyperCube HyperCube::with_data(std::vector<float> values) const {
  HyperCube out(dims_, std::move(values));
  out.wavenumbers = wavenumbers;
  out.pixel_size_nm = pixel_size_nm;
  out.fast_axis = fast_axis;
  return out;
}

std::pair<std::size_t, std::size_t> frame_shape(const Dims& d, Axis axis) {
  switch (axis) {
    case Axis::X:
      return {d.ny, d.nw};
    case Axis::Y:
      return {d.nx, d.nw};
    case Axis::W:
      return {d.nx, d.ny};
  }
  return {0, 0};
}

Lines lines_along(const Dims& d, Axis axis) {
  Lines l;
  const std::size_t slab = d.ny * d.nw;
  l.length = d.extent(axis);
  switch (axis) {
    case Axis::X:
      l.stride = slab;
      l.count = d.ny * d.nw;
      l.inner = d.nw, l.outer_stride = d.nw, l.inner_stride = 1;
      break;
    case Axis::Y:
      l.stride = d.nw;
      l.count = d.nx * d.nw;
      l.inner = d.nw, l.outer_stride = slab, l.inner_stride = 1;
      break;
    case Axis::W:
      l.stride = 1;
      l.count = d.nx * d.ny;
      l.inner = d.ny, l.outer_stride = slab, l.inner_stride = d.nw;
      break;
  }
  return l;
}

Image slice_frame(const HyperCube& cube, Axis axis, std::size_t index) {
  if (index >= cube.extent(axis)) {
    throw Error("slice index " + std::to_string(index) + " out of range for axis " +
                std::string(axis_name(axis)) + " of extent " +
                std::to_string(cube.extent(axis)));
  }
  const auto [rows, cols] = frame_shape(cube.dims(), axis);
  Image out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      switch (axis) {
        case Axis::X:
          out(r, c) = cube(index, r, c);
          break;
        case Axis::Y:
          out(r, c) = cube(r, index, c);
          break;
        case Axis::W:
          out(r, c) = cube(r, c, index);
          break;
      }
    }
  }
  out.pixel_size_nm = cube.pixel_size_nm;
  return out;
}

void put_frame(HyperCube& cube, Axis axis, std::size_t index, const Image& frame) {
  const auto [rows, cols] = frame_shape(cube.dims(), axis);
  if (index >= cube.extent(axis) || frame.rows() != rows || frame.cols() != cols) {
    throw Error("frame does not fit the cube along axis " + std::string(axis_name(axis)));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      switch (axis) {
        case Axis::X:
          cube(index, r, c) = frame(r, c);
          break;
        case Axis::Y:
          cube(r, index, c) = frame(r, c);
          break;
        case Axis::W:
          cube(r, c, index) = frame(r, c);
          break;
      }
    }
  }
}

}  // namespace spend
