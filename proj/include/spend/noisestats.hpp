#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spend/cube.hpp"

namespace spend::noisestats {

struct PsdPoint {
  double frequency;  // cycles / pixel
  double power;
};

/// One-sided mean periodogram over every line along `axis`, line mean
/// removed, rectangular window. Bins k = 0..n/2 at f = k/n, scaled so that
/// sum(power) / n equals the mean (population) line variance.
std::vector<PsdPoint> axis_psd(const HyperCube& cube, Axis axis);

/// Median filter within every plane perpendicular to `normal`, reflected borders.
HyperCube median_filter_planes(const HyperCube& cube, Axis normal, std::size_t window = 5);

/// Per-frame (x-y plane) median filter.
HyperCube median_filter_frames(const HyperCube& cube, std::size_t window = 5);

/// Noise estimate for statistics along `axis`: cube - signal when a signal
/// estimate is supplied, otherwise cube minus its 5x5 median taken in the
/// planes perpendicular to `axis`. Filtering only across the axis leaves the
/// correlation along it intact, so the three axes are compared fairly.
HyperCube noise_residual(const HyperCube& cube, const HyperCube* signal_estimate = nullptr,
                         Axis axis = Axis::W);

/// Pooled Pearson correlation between each value and its successor along
/// `axis`. Throws if either side has zero variance.
double lag1_correlation(const HyperCube& noise, Axis axis);

/// lag1_correlation of noise_residual(cube, signal_estimate, axis).
double adjacent_pcc(const HyperCube& cube, Axis axis,
                    const HyperCube* signal_estimate = nullptr);

/// Mean over lines of mean|first difference| / line std. Scale-free, and
/// decreasing in the lag-1 correlation.
double fluctuation(const HyperCube& noise, Axis axis);

struct MeanStd {
  double mean;
  double std;
};

/// (mean, sample std) of every full tile x tile spatial block of every
/// spectral frame. Partial edge tiles are dropped.
std::vector<MeanStd> noise_vs_signal(const HyperCube& cube, std::size_t tile);

struct LineFit {
  double slope;
  double intercept;
};

/// Ordinary least squares std = intercept + slope * mean.
LineFit fit_noise_vs_signal(const std::vector<MeanStd>& samples);

struct NoiseReport {
  std::array<std::vector<PsdPoint>, 3> psd;
  std::array<double, 3> pcc{};
  std::vector<MeanStd> noise_vs_signal;
  LineFit noise_vs_signal_fit{};
  std::size_t tile = 0;
  std::array<double, 3> fluctuation{};
  Axis selected_axis = Axis::W;
  std::string noise_estimate;  // "signal_estimate" or "median5x5_plane_residual"
};

/// Relative window within which fluctuation scores count as tied; ties go
/// to w, then y, then x.
inline constexpr double kFluctuationTie = 0.05;

Axis argmax_fluctuation(const std::array<double, 3>& fluct, double tie = kFluctuationTie);

/// Picks the permutation axis as the one with the highest noise fluctuation.
std::pair<Axis, NoiseReport> select_permutation_axis(
    const HyperCube& cube, const HyperCube* signal_estimate = nullptr);

nlohmann::json report_to_json(const NoiseReport& r);

}  // namespace spend::noisestats
