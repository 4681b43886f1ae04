#include "spend/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace spend::png {

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

void put_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& body) {
  std::vector<std::uint8_t> buf;
  put_u32(buf, static_cast<std::uint32_t>(body.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), body.begin(), body.end());
  const uLong crc = crc32(0L, buf.data() + 4, static_cast<uInt>(buf.size() - 4));
  put_u32(buf, static_cast<std::uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height || width == 0 || height == 0) {
    throw Error("png: pixel buffer does not match " + std::to_string(width) + "x" +
                std::to_string(height));
  }
  std::vector<std::uint8_t> raw;
  raw.reserve(height * (width + 1));
  for (std::size_t r = 0; r < height; ++r) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r * width),
               pixels.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error("png: deflate failed");
  }
  z.resize(zlen);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(kSig), 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit gray, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  if (!out) throw Error("I/O failure writing " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const auto d = img.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const float span = *hi - *lo;
  std::vector<std::uint8_t> px(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    px[i] = span > 0 ? static_cast<std::uint8_t>(std::lround(255.0f * (d[i] - *lo) / span)) : 0;
  }
  write_gray(path, img.cols(), img.rows(), px);
}

void write_scatter(const std::filesystem::path& path,
                   std::span<const std::pair<double, double>> points, double lo, double hi,
                   std::size_t size) {
  std::vector<std::uint32_t> counts(size * size, 0);
  for (const auto& [u, v] : points) {
    const double fu = (u - lo) / (hi - lo), fv = (v - lo) / (hi - lo);
    if (!(fu >= 0 && fu < 1 && fv >= 0 && fv < 1)) continue;
    const auto c = static_cast<std::size_t>(fu * static_cast<double>(size));
    const auto r = size - 1 - static_cast<std::size_t>(fv * static_cast<double>(size));
    ++counts[r * size + c];
  }
  const std::uint32_t peak = std::max<std::uint32_t>(1, *std::max_element(counts.begin(), counts.end()));
  std::vector<std::uint8_t> px(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    px[i] = counts[i] ? static_cast<std::uint8_t>(
                            64 + std::lround(191.0 * std::log1p(counts[i]) / std::log1p(peak)))
                      : 0;
  }
  write_gray(path, size, size, px);
}

void write_curve(const std::filesystem::path& path,
                 std::span<const std::pair<double, double>> points, double x_max, double y_lo,
                 double y_hi, std::size_t width, std::size_t height) {
  std::vector<std::uint8_t> px(width * height, 255);
  auto plot = [&](double x, double y) {
    const double fx = x / x_max, fy = (y - y_lo) / (y_hi - y_lo);
    if (!(fx >= 0 && fx <= 1 && fy >= 0 && fy <= 1)) return;
    const auto c = std::min(width - 1, static_cast<std::size_t>(fx * static_cast<double>(width - 1)));
    const auto r = height - 1 - std::min(height - 1, static_cast<std::size_t>(fy * static_cast<double>(height - 1)));
    px[r * width + c] = 0;
  };
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto [x0, y0] = points[i];
    const auto [x1, y1] = points[i + 1];
    for (int s = 0; s <= 64; ++s) {
      const double t = s / 64.0;
      plot(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
    }
  }
  write_gray(path, width, height, px);
}

}  // namespace spend::png
