#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spend/cube.hpp"
#include "spend/matrix.hpp"
#include "spend/metrics.hpp"

namespace spend::test {

/// Per-binary scratch directory, emptied on first use.
inline std::filesystem::path scratch(const std::string& sub = "") {
  static const std::filesystem::path root = [] {
    const char* env = std::getenv("SPEND_TEST_TMP");
    std::filesystem::path p =
        env ? env : std::filesystem::temp_directory_path() / "spend_test";
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
  }();
  if (sub.empty()) return root;
  const auto p = root / sub;
  std::filesystem::create_directories(p);
  return p;
}

inline HyperCube random_cube(Dims d, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> v(d.size());
  for (auto& x : v) x = static_cast<float>(u(rng));
  return HyperCube(d, std::move(v));
}

inline Image random_image(std::size_t rows, std::size_t cols, std::uint64_t seed,
                          double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image im(rows, cols);
  for (auto& x : im.data()) x = static_cast<float>(u(rng));
  return im;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Discrete Frechet distance by enumerating every monotone coupling path.
inline double frechet_brute_force(const metrics::Curve& p, const metrics::Curve& q) {
  const auto dist = [&](std::size_t i, std::size_t j) {
    return std::hypot(p[i].x - q[j].x, p[i].y - q[j].y);
  };
  double best = std::numeric_limits<double>::infinity();
  // Walk all paths from (0,0) to (n-1,m-1) with steps (1,0), (0,1), (1,1).
  std::vector<std::pair<std::size_t, std::size_t>> stack_pos{{0, 0}};
  std::vector<double> stack_max{dist(0, 0)};
  while (!stack_pos.empty()) {
    const auto [i, j] = stack_pos.back();
    const double cur = stack_max.back();
    stack_pos.pop_back();
    stack_max.pop_back();
    if (cur >= best) continue;
    if (i + 1 == p.size() && j + 1 == q.size()) {
      best = cur;
      continue;
    }
    if (i + 1 < p.size()) {
      stack_pos.push_back({i + 1, j});
      stack_max.push_back(std::max(cur, dist(i + 1, j)));
    }
    if (j + 1 < q.size()) {
      stack_pos.push_back({i, j + 1});
      stack_max.push_back(std::max(cur, dist(i, j + 1)));
    }
    if (i + 1 < p.size() && j + 1 < q.size()) {
      stack_pos.push_back({i + 1, j + 1});
      stack_max.push_back(std::max(cur, dist(i + 1, j + 1)));
    }
  }
  return best;
}

/// Two-sided spectral density of a unit-free AR(1) process at frequency f.
inline double ar1_psd(double variance, double rho, double f) {
  return variance * (1 - rho * rho) / (1 + rho * rho - 2 * rho * std::cos(2 * M_PI * f));
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Naive matrix product.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline double frobenius(const Matrix& m) {
  double s = 0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace spend::test
