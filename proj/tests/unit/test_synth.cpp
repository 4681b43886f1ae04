#include "doctest.h"
#include "spend/parallel.hpp"
#include "spend/synth.hpp"
#include "support.hpp"

using namespace spend;
using synth::SpatialShape;

namespace {

synth::PhantomSpec delta_spec() {
  synth::PhantomSpec s;
  s.dims = Dims{3, 4, 5};
  s.components = {{"delta", {{SpatialShape::Kind::Constant, 0, 0, 1, 1.0}}, {{2, 0, 1.0}}}};
  return s;
}

synth::PhantomSpec two_disks() {
  synth::PhantomSpec s;
  s.dims = Dims{24, 20, 16};
  s.components = {{"a", {{SpatialShape::Kind::Disk, 6, 6, 4, 1.0}}, {{4, 3, 1.0}}},
                  {"b", {{SpatialShape::Kind::Disk, 17, 13, 5, 2.0}}, {{11, 2, 0.7}}}};
  s.wavenumber_axis = std::make_pair(1500.0, 2.0);
  s.pixel_size_nm = 100.0;
  return s;
}

// Pooled lag-1 correlation along x or y computed from first principles.
double lag1(const HyperCube& n, Axis axis) {
  std::vector<double> a, b;
  for (std::size_t x = 0; x < n.nx(); ++x)
    for (std::size_t y = 0; y < n.ny(); ++y)
      for (std::size_t w = 0; w < n.nw(); ++w) {
        if (axis == Axis::X && x + 1 < n.nx()) a.push_back(n(x, y, w)), b.push_back(n(x + 1, y, w));
        if (axis == Axis::Y && y + 1 < n.ny()) a.push_back(n(x, y, w)), b.push_back(n(x, y + 1, w));
        if (axis == Axis::W && w + 1 < n.nw()) a.push_back(n(x, y, w)), b.push_back(n(x, y, w + 1));
      }
  return test::pearson(a, b);
}

HyperCube difference(const HyperCube& a, const HyperCube& b) {
  std::vector<float> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
  return a.with_data(std::move(v));
}

}  // namespace

TEST_CASE("delta phantom is one at a single frame") {
  const auto ph = synth::make_phantom(delta_spec());
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t w = 0; w < 5; ++w) CHECK(ph.clean(x, y, w) == (w == 2 ? 1.0f : 0.0f));
}

TEST_CASE("disjoint disks carry exactly one reference spectrum") {
  const auto spec = two_disks();
  const auto ph = synth::make_phantom(spec);
  const auto sa = synth::component_spectrum(spec.components[0], 16);
  const auto sb = synth::component_spectrum(spec.components[1], 16);
  int inside_a = 0, inside_b = 0;
  for (std::size_t x = 0; x < 24; ++x)
    for (std::size_t y = 0; y < 20; ++y) {
      const double da = std::hypot(x - 6.0, y - 6.0), db = std::hypot(x - 17.0, y - 13.0);
      for (std::size_t w = 0; w < 16; ++w) {
        const float expect = da <= 4 ? float(sa[w]) : db <= 5 ? float(2.0 * sb[w]) : 0.0f;
        CHECK(ph.clean(x, y, w) == expect);
      }
      inside_a += da <= 4, inside_b += db <= 5;
    }
  CHECK(inside_a > 0);
  CHECK(inside_b > 0);
  REQUIRE(ph.clean.wavenumbers);
  CHECK(ph.clean.wavenumbers->at(3) == 1506.0);
  CHECK(ph.clean.pixel_size_nm == 100.0);
}

TEST_CASE("truth reconstructs the clean cube bit for bit") {
  auto spec = two_disks();
  spec.background = 0.3;
  spec.components[1].shapes.push_back({SpatialShape::Kind::Blob, 10, 10, 3, 0.5});
  const auto ph = synth::make_phantom(spec);
  const auto& t = ph.truth;
  double worst = 0;
  for (std::size_t p = 0; p < t.C.rows(); ++p)
    for (std::size_t w = 0; w < 16; ++w) {
      double v = t.E(p, w);
      for (std::size_t k = 0; k < t.K; ++k) v += t.C(p, k) * t.S(k, w);
      worst = std::max(worst, std::abs(double(float(v)) - ph.clean.data()[p * 16 + w]));
    }
  CHECK(worst == 0.0);
  for (float v : ph.clean.data()) CHECK(v >= 0.0f);
}

TEST_CASE("lorentzian width is the full width at half maximum") {
  synth::Component c{"c", {}, {{10, 4, 2.0}}};
  const auto s = synth::component_spectrum(c, 21);
  CHECK(s[10] == doctest::Approx(2.0));
  CHECK(s[8] == doctest::Approx(1.0));
  CHECK(s[12] == doctest::Approx(1.0));
}

TEST_CASE("invalid phantom specs are rejected") {
  auto s = delta_spec();
  s.components.clear();
  CHECK_THROWS_AS(synth::make_phantom(s), Error);
  s = delta_spec();
  s.components[0].peaks[0].center = 5;
  CHECK_THROWS_AS(synth::make_phantom(s), Error);
  s = delta_spec();
  s.components[0].shapes[0].amplitude = -1;
  CHECK_THROWS_AS(synth::make_phantom(s), Error);
  s = delta_spec();
  s.components[0].peaks[0].center = 2.5;
  CHECK_THROWS_AS(synth::make_phantom(s), Error);
}

TEST_CASE("invalid noise specs are rejected") {
  const HyperCube c(Dims{4, 4, 4});
  synth::NoiseSpec n;
  n.rho_fast = 1.0;
  CHECK_THROWS_AS(synth::corrupt(c, n), Error);
  n.rho_fast = 0.0;
  n.sigma_iid = -0.1;
  CHECK_THROWS_AS(synth::corrupt(c, n), Error);
}

TEST_CASE("zero noise is the identity") {
  const auto ph = synth::make_phantom(two_disks());
  synth::NoiseSpec n;
  n.seed = 99;
  CHECK(synth::corrupt(ph.clean, n) == ph.clean);
}

TEST_CASE("AR(1) noise correlates only along the fast axis") {
  const HyperCube zero(Dims{256, 256, 8});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    synth::NoiseSpec n;
    n.sigma_corr = 1.0;
    n.rho_fast = 0.6;
    n.seed = seed;
    const HyperCube noisy = synth::corrupt(zero, n);
    CHECK(std::abs(lag1(noisy, Axis::X) - 0.6) < 0.05);
    CHECK(std::abs(lag1(noisy, Axis::Y)) < 0.05);
    double s2 = 0;
    for (float v : noisy.data()) s2 += double(v) * v;
    CHECK(std::sqrt(s2 / noisy.size()) == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("AR(1) noise follows the chosen axis") {
  HyperCube zero(Dims{32, 32, 64});
  synth::NoiseSpec n;
  n.sigma_corr = 1.0;
  n.rho_fast = 0.7;
  n.seed = 5;
  n.corr_axis = Axis::W;
  const HyperCube noisy = synth::corrupt(zero, n);
  CHECK(std::abs(lag1(noisy, Axis::W) - 0.7) < 0.05);
  CHECK(std::abs(lag1(noisy, Axis::X)) < 0.05);
  zero.fast_axis = Axis::Y;
  n.corr_axis.reset();
  const HyperCube along_y = synth::corrupt(zero, n);
  CHECK(std::abs(lag1(along_y, Axis::Y) - 0.7) < 0.05);
  CHECK(std::abs(lag1(along_y, Axis::W)) < 0.05);
}

TEST_CASE("resonance noise scales with the signal") {
  synth::PhantomSpec s;
  s.dims = Dims{64, 64, 32};
  s.components = {{"peak", {{SpatialShape::Kind::Constant, 0, 0, 1, 1.0}}, {{16, 4, 5.0}}}};
  const auto ph = synth::make_phantom(s);
  synth::NoiseSpec n;
  n.k_resonance = 0.2;
  n.seed = 11;
  const HyperCube noise = difference(synth::corrupt(ph.clean, n), ph.clean);
  double m = 0, s2 = 0;
  const std::size_t P = 64 * 64;
  for (std::size_t p = 0; p < P; ++p) m += noise.data()[p * 32 + 16];
  m /= P;
  for (std::size_t p = 0; p < P; ++p) s2 += std::pow(noise.data()[p * 32 + 16] - m, 2);
  const double sd = std::sqrt(s2 / (P - 1));
  CHECK(std::abs(sd - 0.2 * 5.0) < 0.1 * 0.2 * 5.0);
}

TEST_CASE("iid noise is uncorrelated and mean free") {
  const auto ph = synth::make_phantom(two_disks());
  synth::NoiseSpec n;
  n.sigma_iid = 0.5;
  n.seed = 21;
  const HyperCube noise = difference(synth::corrupt(ph.clean, n), ph.clean);
  for (Axis a : kAllAxes) CHECK(std::abs(lag1(noise, a)) < 0.05);
  double m = 0;
  for (float v : noise.data()) m += v;
  m /= noise.size();
  CHECK(std::abs(m) <= 3 * 0.5 / std::sqrt(double(noise.size())));
}

TEST_CASE("poisson term preserves the mean") {
  synth::PhantomSpec s;
  s.dims = Dims{64, 64, 4};
  s.components = {{"flat", {{SpatialShape::Kind::Constant, 0, 0, 1, 1.0}}, {{1, 0, 20.0}}}};
  const auto ph = synth::make_phantom(s);
  synth::NoiseSpec n;
  n.poisson_gain = 0.5;
  n.seed = 4;
  const HyperCube noisy = synth::corrupt(ph.clean, n);
  double m = 0, s2 = 0;
  const std::size_t P = 64 * 64;
  for (std::size_t p = 0; p < P; ++p) m += noisy.data()[p * 4 + 1];
  m /= P;
  for (std::size_t p = 0; p < P; ++p) s2 += std::pow(noisy.data()[p * 4 + 1] - m, 2);
  CHECK(std::abs(m - 20.0) < 3 * std::sqrt(10.0 / P));
  CHECK(s2 / (P - 1) == doctest::Approx(0.5 * 20.0).epsilon(0.1));
}

TEST_CASE("corrupt is deterministic and independent of thread count") {
  const auto ph = synth::make_phantom(two_disks());
  synth::NoiseSpec n{0.2, 0.6, 0.4, 0.15, 0.0, 17, std::nullopt};
  const HyperCube a = synth::corrupt(ph.clean, n);
  set_threads(4);
  const HyperCube b = synth::corrupt(ph.clean, n);
  set_threads(1);
  CHECK(a == b);
  CHECK(synth::corrupt(ph.clean, n) == a);
  n.seed = 18;
  CHECK_FALSE(synth::corrupt(ph.clean, n) == a);
}

TEST_CASE("spec JSON round trips and rejects unknown keys") {
  const auto spec = two_disks();
  const auto j = synth::phantom_to_json(spec);
  CHECK(synth::phantom_to_json(synth::phantom_from_json(j)) == j);
  auto bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(synth::phantom_from_json(bad), Error);

  synth::NoiseSpec n{0.1, 0.5, 0.2, 0.05, 0.0, 3, Axis::W};
  const auto nj = synth::noise_to_json(n);
  CHECK(synth::noise_to_json(synth::noise_from_json(nj)) == nj);
  auto nbad = nj;
  nbad["sigma"] = 1;
  CHECK_THROWS_AS(synth::noise_from_json(nbad), Error);
}
