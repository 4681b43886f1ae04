#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spend::baseline {

struct ArplsConfig {
  double lambda = 1e5;
  double ratio = 0.05;
  int max_iter = 50;
  int diff_order = 2;

  void validate() const;
};

struct ArplsResult {
  std::vector<double> z;  // baseline
  std::vector<double> w;  // final weights, each in (0, 1]
  int iterations = 0;     // linear solves performed
  bool converged = false;
  /// Fewer than two points fell below the baseline, so the weight update
  /// had no spread to work with; z is the last solve.
  bool degenerate = false;
};

/// Solves (W + lambda D'D) z = W x for the pentadiagonal system built from
/// the second-difference matrix D, via banded LDL' plus one refinement step.
std::vector<double> penalized_solve(std::span<const double> x, std::span<const double> w,
                                    double lambda);

/// ||(W + lambda D'D) z - W x||_2, for checking a solve.
double penalized_residual(std::span<const double> x, std::span<const double> w, double lambda,
                          std::span<const double> z);

/// Asymmetrically reweighted penalized least squares. Weights start at 1;
/// after each solve, with d = x - z and m, s the mean and sample std of the
/// negative d values, points below the baseline get weight 1 and the rest
/// 1 / (1 + exp(2 (d - (-m + 2 s)) / s)). Stops once
/// ||w_old - w_new|| / ||w_old|| < ratio.
ArplsResult arpls(std::span<const double> x, const ArplsConfig& cfg = {});

/// x minus its arPLS baseline.
std::vector<double> peak_extract(std::span<const double> x, const ArplsConfig& cfg = {});

}  // namespace spend::baseline
