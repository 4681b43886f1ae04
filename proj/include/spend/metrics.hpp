#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spend/cube.hpp"

namespace spend::metrics {

/// Mean local SSIM over every full 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range max(range(a), range(b)).
double ssim(const Image& a, const Image& b);

/// 10 log10(peak^2 / MSE) with peak = range of the reference `a`.
/// Returns +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

/// Mean squared difference over every voxel.
double mse(const HyperCube& a, const HyperCube& b);

/// Pixels given as raster indices x * ny + y. Signal mean and background
/// sample std are pooled over the ROI pixels and every spectral frame.
double snr(const HyperCube& cube, std::span<const std::size_t> signal_roi,
           std::span<const std::size_t> background_roi);

/// snr(denoised) / snr(raw).
double snr_gain(const HyperCube& raw, const HyperCube& denoised,
                std::span<const std::size_t> signal_roi, std::span<const std::size_t> background_roi);

struct FrcCurve {
  std::vector<double> frequency;    // r / side, r = 0 .. side / 2
  std::vector<double> correlation;  // raw ring correlation
  std::vector<double> smoothed;     // 3-point moving average
  double cutoff_frequency = 0.5;
  bool cutoff_found = false;        // false: never dropped below 1/7, cutoff set to Nyquist
  double resolution_px = 2.0;       // 1 / cutoff_frequency
  std::optional<double> resolution_nm;
};

inline constexpr double kFrcThreshold = 1.0 / 7.0;

/// Fourier ring correlation with integer-radius rings of width 1. Images are
/// center-cropped to the largest square; the side must be at least 16.
FrcCurve frc_resolution(const Image& a, const Image& b);

struct Point2 {
  double x;
  double y;
};

using Curve = std::vector<Point2>;

/// Discrete Frechet distance with Euclidean point distance.
double frechet_distance(const Curve& p, const Curve& q);

/// Spectrum as (wavenumber or index, intensity / max |intensity|). Returns
/// an empty curve for an all-zero spectrum.
Curve spectrum_curve(std::span<const float> spectrum, const std::vector<double>* wavenumbers);

struct DistortionMap {
  Image map;                        // nx rows by ny columns
  std::vector<std::uint8_t> flagged;  // raster order; zero spectrum in either cube
  double mean = 0;                  // over unflagged pixels
};

DistortionMap spectral_distortion_map(const HyperCube& cube, const HyperCube& reference);

struct TTest {
  double t;
  double p;
  double df;
};

/// Two-sided Welch t-test.
TTest welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace spend::metrics
