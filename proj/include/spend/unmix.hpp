#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spend/cube.hpp"
#include "spend/matrix.hpp"

namespace spend {

/// Pixels as rows in raster order: row = x * ny + y.
struct DataMatrix {
  Matrix values;
  std::size_t nx = 0;
  std::size_t ny = 0;
};

inline std::size_t raster_row(std::size_t x, std::size_t y, std::size_t ny) { return x * ny + y; }

/// Bilinear decomposition D = C S + E, with S holding one spectrum per row.
struct UnmixResult {
  Matrix C;  // pixels x K, nonnegative
  Matrix S;  // K x n_w
  Matrix E;  // pixels x n_w
  std::size_t K = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective;          // ||D - C S||_F after each full iteration
  std::vector<std::size_t> collapsed;     // components reinitialised by MCR
};

DataMatrix reshape_cube(const HyperCube& cube);
HyperCube unreshape_cube(const DataMatrix& d);

/// One concentration column back onto the (x, y) grid.
Image unreshape(std::span<const double> column, std::size_t nx, std::size_t ny);

/// All K columns of C as a cube with K spectral frames.
HyperCube maps_to_cube(const Matrix& C, std::size_t nx, std::size_t ny);

Matrix column(const Matrix& m, std::size_t c);

namespace unmix {

/// Cyclic coordinate descent on  1/2 c'Gc - b'c + lambda * sum(c),
/// optionally with c >= 0. `c` is the warm start and the result.
struct CdOptions {
  double lambda = 0.0;
  bool nonneg = true;
  double tol = 1e-6;  // relative KKT tolerance
  std::size_t max_sweeps = 100000;
};

struct CdStats {
  std::size_t sweeps = 0;
  double kkt = 0.0;  // relative KKT violation on exit
};

CdStats coordinate_descent(std::span<const double> gram, std::span<const double> b,
                           std::span<double> c, const CdOptions& opts);

/// max over coordinates of the KKT violation divided by max(|b|, lambda).
double kkt_violation(std::span<const double> gram, std::span<const double> b,
                     std::span<const double> c, double lambda, bool nonneg);

}  // namespace unmix

/// Row-wise nonnegative LASSO against fixed reference spectra S (K x n_w).
UnmixResult lasso_unmix(const DataMatrix& D, const Matrix& S, double lambda);

struct McrOptions {
  std::size_t max_iter = 500;
  double tol = 1e-10;  // relative change of ||E||_F
  bool nonneg_c = true;
  bool nonneg_s = true;
  bool fix_s = false;
};

UnmixResult mcr_als(const DataMatrix& D, const Matrix& S_init, const McrOptions& opts = {});

struct PhasorMap {
  std::size_t nx = 0;
  std::size_t ny = 0;
  int harmonic = 1;
  std::vector<double> g;  // raster order
  std::vector<double> s;
  std::vector<std::uint8_t> dark;  // nonpositive total intensity, mapped to (0, 0)
};

/// G = sum_n I(n) e^{-2 pi i h n / N} / sum_n I(n);  g = Re G, s = Im G.
/// A delta at frame k lands at angle -2 pi h k / N (clockwise in k).
PhasorMap spectral_phasor(const HyperCube& cube, int harmonic = 1);

using PhasorPoint = std::pair<double, double>;

bool point_in_polygon(PhasorPoint p, std::span<const PhasorPoint> polygon);

struct PhasorSelection {
  std::vector<std::size_t> pixels;  // raster rows
  std::vector<double> spectrum;     // mean spectrum of the selected pixels
};

PhasorSelection phasor_select(const PhasorMap& map, std::span<const PhasorPoint> polygon,
                              const HyperCube& cube, const std::string& name = "polygon");

}  // namespace spend
