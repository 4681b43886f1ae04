#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "spend/cube.hpp"

namespace spend::png {

/// 8-bit grayscale PNG, rows top to bottom.
void write_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                std::span<const std::uint8_t> pixels);

/// Linear min..max stretch of a frame.
void write_image(const std::filesystem::path& path, const Image& img);

/// Density scatter of points within [lo, hi]^2 on a size x size canvas.
void write_scatter(const std::filesystem::path& path,
                   std::span<const std::pair<double, double>> points, double lo, double hi,
                   std::size_t size = 256);

/// Polyline y(x) with x in [0, x_max] and y in [y_lo, y_hi].
void write_curve(const std::filesystem::path& path,
                 std::span<const std::pair<double, double>> points, double x_max, double y_lo,
                 double y_hi, std::size_t width = 320, std::size_t height = 200);

}  // namespace spend::png
