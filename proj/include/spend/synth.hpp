#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spend/cube.hpp"
#include "spend/unmix.hpp"

namespace spend::synth {

struct SpatialShape {
  enum class Kind { Disk, Blob, Constant };
  Kind kind = Kind::Disk;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;  // disk radius, or blob Gaussian sigma
  double amplitude = 1.0;
};

/// Lorentzian line; width is the FWHM in frames. Width 0 is a delta at an
/// integer center.
struct Peak {
  double center = 0.0;
  double width = 1.0;
  double height = 1.0;
};

struct Component {
  std::string name;
  std::vector<SpatialShape> shapes;
  std::vector<Peak> peaks;
};

struct PhantomSpec {
  Dims dims;
  std::vector<Component> components;
  double background = 0.0;
  Axis fast_axis = Axis::X;
  std::optional<double> pixel_size_nm;
  std::optional<std::pair<double, double>> wavenumber_axis;  // (start, step)

  void validate() const;
};

struct NoiseSpec {
  double sigma_iid = 0.0;
  double rho_fast = 0.0;
  double sigma_corr = 0.0;
  double k_resonance = 0.0;
  double poisson_gain = 0.0;
  std::uint64_t seed = 0;
  /// Axis carrying the AR(1) noise; defaults to the cube's fast axis.
  std::optional<Axis> corr_axis;

  void validate() const;
};

struct Phantom {
  HyperCube clean;
  UnmixResult truth;
};

/// clean = float(sum_k C_k(x,y) S_k(w) + background); truth.E holds the
/// background, so float(C S + E) reproduces clean bit for bit.
Phantom make_phantom(const PhantomSpec& spec);

/// Spectrum of one component sampled on nw frames.
std::vector<double> component_spectrum(const Component& c, std::size_t nw);

/// noisy = clean (or its Poisson resample) + iid + AR(1) + resonance noise.
/// Bit-identical for equal inputs regardless of thread count.
HyperCube corrupt(const HyperCube& clean, const NoiseSpec& noise);

// JSON forms (strict: unknown keys are rejected).
PhantomSpec phantom_from_json(const nlohmann::json& j);
nlohmann::json phantom_to_json(const PhantomSpec& s);
NoiseSpec noise_from_json(const nlohmann::json& j);
nlohmann::json noise_to_json(const NoiseSpec& n);

}  // namespace spend::synth
