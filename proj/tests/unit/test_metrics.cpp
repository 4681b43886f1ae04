#include <complex>
#include <numbers>

#include "doctest.h"
#include "spend/metrics.hpp"
#include "spend/parallel.hpp"
#include "support.hpp"

using namespace spend;
using namespace spend::metrics;

namespace {

Image smooth_image(std::size_t rows, std::size_t cols) {
  Image im(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      im(i, j) = static_cast<float>(std::sin(0.3 * i) * std::cos(0.2 * j) + 0.01 * i * j);
  return im;
}

Image add_noise(const Image& a, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, sd);
  Image b = a;
  for (float& v : b.data()) v = static_cast<float>(v + n(rng));
  return b;
}

double image_range(const Image& im) {
  const auto [lo, hi] = std::minmax_element(im.data().begin(), im.data().end());
  return *hi - *lo;
}

// Windowed SSIM evaluated window by window with an explicit 2-D Gaussian.
double ssim_direct(const Image& a, const Image& b) {
  double w[11][11], ws = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) ws += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double L = std::max(image_range(a), image_range(b));
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0;
  int count = 0;
  for (std::size_t r = 0; r + 11 <= a.rows(); ++r)
    for (std::size_t c = 0; c + 11 <= a.cols(); ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) ma += w[i][j] / ws * a(r + i, c + j), mb += w[i][j] / ws * b(r + i, c + j);
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double da = a(r + i, c + j) - ma, db = b(r + i, c + j) - mb;
          va += w[i][j] / ws * da * da, vb += w[i][j] / ws * db * db, cov += w[i][j] / ws * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

// Ring correlation from a direct 2-D DFT with centred frequency indices.
std::vector<double> frc_direct(const Image& a, const Image& b) {
  const int s = static_cast<int>(a.rows());
  std::vector<std::complex<double>> cross(s / 2 + 1);
  std::vector<double> pa(s / 2 + 1), pb(s / 2 + 1);
  for (int ku = -s / 2 + 1; ku <= s / 2; ++ku)
    for (int kv = -s / 2 + 1; kv <= s / 2; ++kv) {
      std::complex<double> fa, fb;
      for (int x = 0; x < s; ++x)
        for (int y = 0; y < s; ++y) {
          const auto e = std::polar(1.0, -2 * std::numbers::pi * (ku * x + kv * y) / s);
          fa += double(a(x, y)) * e;
          fb += double(b(x, y)) * e;
        }
      const int r = static_cast<int>(std::lround(std::hypot(ku, kv)));
      if (r > s / 2) continue;
      cross[r] += fa * std::conj(fb);
      pa[r] += std::norm(fa);
      pb[r] += std::norm(fb);
    }
  std::vector<double> out;
  for (int r = 0; r <= s / 2; ++r) out.push_back(std::abs(cross[r]) / std::sqrt(pa[r] * pb[r]));
  return out;
}

Curve random_curve(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Curve c(n);
  for (auto& p : c) p = {u(rng), u(rng)};
  return c;
}

std::vector<std::size_t> pixels_where(const HyperCube& c, bool (*pred)(std::size_t, std::size_t)) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < c.nx(); ++x)
    for (std::size_t y = 0; y < c.ny(); ++y)
      if (pred(x, y)) out.push_back(x * c.ny() + y);
  return out;
}

double sample_std(const std::vector<double>& v) {
  double m = 0, s = 0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

TEST_CASE("ssim") {
  const Image a = smooth_image(24, 20);
  SUBCASE("matches a window-by-window evaluation") {
    const Image b = add_noise(a, 0.2, 1);
    CHECK(ssim(a, b) == doctest::Approx(ssim_direct(a, b)).epsilon(1e-9));
  }
  SUBCASE("is one for identical images") { CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12)); }
  SUBCASE("heavy noise destroys structure") {
    CHECK(ssim(a, add_noise(a, image_range(a), 2)) < 0.3);
  }
  SUBCASE("inverted stripes anticorrelate") {
    Image s(20, 20);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j) s(i, j) = static_cast<float>(j % 2);
    Image inv = s;
    for (float& v : inv.data()) v = 1 - v;
    CHECK(ssim(s, inv) < -0.95);
  }
  SUBCASE("constant images") {
    CHECK(ssim(Image(12, 12, 2.0f), Image(12, 12, 2.0f)) == 1.0);
    CHECK_THROWS_AS(ssim(Image(12, 12, 2.0f), Image(12, 12, 3.0f)), Error);
    CHECK_THROWS_AS(ssim(Image(10, 12), Image(10, 12)), Error);
    CHECK_THROWS_AS(ssim(Image(12, 12), Image(12, 13)), Error);
  }
}

TEST_CASE("psnr") {
  Image a(10, 10);
  a(0, 0) = 1.0f;
  Image b = a;
  CHECK(psnr(a, b) == std::numeric_limits<double>::infinity());
  // One error of 1 over 100 pixels: MSE 0.01, peak 1.
  b(5, 5) = 1.0f;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

  const Image ref = smooth_image(32, 32);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 0.1);
  Image full = ref, half = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double e = n(rng);
    full.data()[i] = static_cast<float>(ref.data()[i] + e);
    half.data()[i] = static_cast<float>(ref.data()[i] + e / 2);
  }
  CHECK(psnr(ref, half) - psnr(ref, full) == doctest::Approx(20 * std::log10(2.0)).epsilon(1e-4));
  CHECK(psnr(ref, half) > psnr(ref, full));
}

TEST_CASE("snr gain") {
  const Dims d{16, 16, 6};
  HyperCube clean(d);
  const auto in_signal = [](std::size_t x, std::size_t) { return x < 8; };
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t w = 0; w < 6; ++w) clean(x, y, w) = 5.0f;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  HyperCube raw = clean, den = clean;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double e = n(rng), f = n(rng);
    raw.data()[i] = static_cast<float>(clean.data()[i] + 0.8 * e);
    den.data()[i] = static_cast<float>(clean.data()[i] + 0.1 * f);
  }
  const auto sig = pixels_where(clean, +in_signal);
  const auto bg = pixels_where(clean, +[](std::size_t x, std::size_t) { return x >= 8; });

  CHECK(snr_gain(raw, raw, sig, bg) == doctest::Approx(1.0).epsilon(1e-12));

  const auto direct_snr = [&](const HyperCube& c) {
    double m = 0;
    std::size_t k = 0;
    for (std::size_t p : sig)
      for (float v : c.spectrum(p / 16, p % 16)) m += v, ++k;
    std::vector<double> b;
    for (std::size_t p : bg)
      for (float v : c.spectrum(p / 16, p % 16)) b.push_back(v);
    return (m / k) / sample_std(b);
  };
  const double gain = snr_gain(raw, den, sig, bg);
  CHECK(gain == doctest::Approx(direct_snr(den) / direct_snr(raw)).epsilon(1e-9));
  CHECK(gain == doctest::Approx(8.0).epsilon(0.1));

  CHECK_THROWS_AS(snr_gain(raw, den, sig, sig), Error);
  CHECK_THROWS_AS(snr(clean, sig, bg), Error);
  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(snr(raw, none, bg), Error);
}

TEST_CASE("fourier ring correlation") {
  SUBCASE("matches a direct transform") {
    const Image a = test::random_image(16, 16, 5), b = add_noise(a, 0.5, 6);
    const FrcCurve c = frc_resolution(a, b);
    const auto ref = frc_direct(a, b);
    REQUIRE(c.correlation.size() == ref.size());
    for (std::size_t r = 0; r < ref.size(); ++r) CHECK(c.correlation[r] == doctest::Approx(ref[r]).epsilon(1e-9));
    for (std::size_t r = 1; r < c.frequency.size(); ++r) CHECK(c.frequency[r] > c.frequency[r - 1]);
    CHECK(c.frequency.back() == 0.5);
  }
  SUBCASE("identical images never lose correlation") {
    Image a = test::random_image(32, 32, 7);
    a.pixel_size_nm = 120.0;
    const FrcCurve c = frc_resolution(a, a);
    for (double v : c.correlation) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(c.cutoff_found);
    CHECK(c.cutoff_frequency == 0.5);
    CHECK(c.resolution_px == 2.0);
    REQUIRE(c.resolution_nm);
    CHECK(*c.resolution_nm == 240.0);
  }
  SUBCASE("independent noise is uncorrelated at every ring") {
    const Image a = test::random_image(64, 64, 8), b = test::random_image(64, 64, 9);
    const FrcCurve c = frc_resolution(a, b);
    // Count the frequency samples per ring to set the random-phase bound.
    std::vector<int> count(33, 0);
    for (int u = 0; u < 64; ++u)
      for (int v = 0; v < 64; ++v) {
        const int fu = u <= 32 ? u : u - 64, fv = v <= 32 ? v : v - 64;
        const auto r = std::lround(std::hypot(fu, fv));
        if (r <= 32) ++count[r];
      }
    for (std::size_t r = 1; r < c.correlation.size(); ++r) CHECK(c.correlation[r] < 3.0 / std::sqrt(count[r]));
    CHECK(c.cutoff_found);
  }
  SUBCASE("symmetric in its arguments") {
    const Image a = test::random_image(20, 24, 10), b = add_noise(a, 0.3, 11);
    const FrcCurve ab = frc_resolution(a, b), ba = frc_resolution(b, a);
    for (std::size_t r = 0; r < ab.correlation.size(); ++r)
      CHECK(std::abs(ab.correlation[r] - ba.correlation[r]) < 1e-9);
    CHECK(ab.frequency.size() == 11);
  }
  SUBCASE("small images are rejected") {
    CHECK_THROWS_AS(frc_resolution(Image(15, 40), Image(15, 40)), Error);
  }
}

TEST_CASE("discrete frechet distance") {
  std::mt19937_64 rng(12);
  SUBCASE("agrees with exhaustive coupling search") {
    for (int t = 0; t < 600; ++t) {
      const Curve p = random_curve(rng, 1 + rng() % 8), q = random_curve(rng, 1 + rng() % 8);
      CHECK(frechet_distance(p, q) == doctest::Approx(test::frechet_brute_force(p, q)).epsilon(1e-12));
    }
  }
  SUBCASE("is a metric") {
    for (int t = 0; t < 200; ++t) {
      const Curve p = random_curve(rng, 2 + rng() % 10), q = random_curve(rng, 2 + rng() % 10),
                  r = random_curve(rng, 2 + rng() % 10);
      CHECK(frechet_distance(p, p) == 0.0);
      CHECK(frechet_distance(p, q) == frechet_distance(q, p));
      CHECK(frechet_distance(p, r) <= frechet_distance(p, q) + frechet_distance(q, r) + 1e-9);
    }
  }
  SUBCASE("parallel segments are their offset apart") {
    Curve p, q;
    for (int i = 0; i < 9; ++i) p.push_back({double(i), 0.0}), q.push_back({double(i), 0.35});
    CHECK(frechet_distance(p, q) == doctest::Approx(0.35).epsilon(1e-12));
  }
  SUBCASE("empty curves are rejected") { CHECK_THROWS_AS(frechet_distance({}, {{0, 0}}), Error); }
}

TEST_CASE("spectral distortion map") {
  const HyperCube ref = test::random_cube(Dims{4, 5, 8}, 13, 0.1, 1.0);
  SUBCASE("identical cubes") {
    const DistortionMap m = spectral_distortion_map(ref, ref);
    for (float v : m.map.data()) CHECK(v == 0.0f);
    CHECK(m.mean == 0.0);
  }
  SUBCASE("per-pixel scaling is normalised away") {
    std::vector<float> v(ref.data().begin(), ref.data().end());
    for (float& x : v) x *= 3.0f;
    const DistortionMap m = spectral_distortion_map(ref.with_data(std::move(v)), ref);
    for (float d : m.map.data()) CHECK(d < 1e-6);
  }
  SUBCASE("a shifted spectrum at one pixel") {
    HyperCube cube = ref;
    for (std::size_t w = 0; w < 8; ++w) cube(2, 3, w) = ref(2, 3, (w + 1) % 8);
    const DistortionMap m = spectral_distortion_map(cube, ref);
    const auto normalised = [](const HyperCube& c) {
      double peak = 0;
      for (std::size_t w = 0; w < 8; ++w) peak = std::max(peak, double(c(2, 3, w)));
      Curve out;
      for (std::size_t w = 0; w < 8; ++w) out.push_back({double(w), c(2, 3, w) / peak});
      return out;
    };
    const double expect = test::frechet_brute_force(normalised(cube), normalised(ref));
    CHECK(m.map(2, 3) == doctest::Approx(expect).epsilon(1e-6));
    for (std::size_t p = 0; p < 20; ++p)
      if (p != 2 * 5 + 3) CHECK(m.map.data()[p] == 0.0f);
    CHECK(m.mean == doctest::Approx(m.map(2, 3) / 20.0).epsilon(1e-6));
  }
  SUBCASE("zero spectra are flagged and left out of the mean") {
    HyperCube cube = ref;
    for (std::size_t w = 0; w < 8; ++w) cube(0, 0, w) = 0.0f;
    const DistortionMap m = spectral_distortion_map(cube, ref);
    CHECK(m.flagged[0]);
    CHECK(m.mean == 0.0);
  }
  SUBCASE("thread count does not matter") {
    const HyperCube noisy = test::random_cube(Dims{4, 5, 8}, 14, 0.1, 1.0);
    const DistortionMap a = spectral_distortion_map(noisy, ref);
    set_threads(4);
    const DistortionMap b = spectral_distortion_map(noisy, ref);
    set_threads(1);
    CHECK(a.map == b.map);
    CHECK(a.mean == b.mean);
  }
}

TEST_CASE("welch t-test matches high-precision references") {
  struct Case {
    std::vector<double> a, b;
    double t, df, p;
  };
  const std::vector<Case> cases{
      {{0, 0, 0, 1}, {10, 10, 10, 11}, -28.284271247461901, 6.0, 1.2927505965951294e-7},
      {{1, 2, 3, 4, 5}, {2, 3, 4, 5, 6}, -1.0, 8.0, 0.34659350708733425},
      {{1.5, 2.5, 2.0, 3.1, 2.2}, {1.9, 2.8, 3.3, 2.9, 3.6, 4.1}, -2.0621130339350433, 8.9868988950101926,
       0.069287986651063529},
      {{10.1, 9.8, 10.4, 10.0}, {10.2, 10.5, 9.9, 10.6, 10.3, 10.1, 10.4}, -1.362304469350247,
       6.1638285337591998, 0.22078039874731673},
      {{0.1, 0.2}, {0.3, 0.5}, -2.2360679774997897, 1.4705882352941176, 0.19872738893452614},
      {{-3, -1, 0, 2, 5, 7}, {1, 1.5, 2, 2.5}, -0.052895987092365121, 5.4303104527093829, 0.95970623330851445},
      {{100, 102, 98, 101, 99, 100.5, 101.5}, {90, 110, 95, 105, 100}, 0.07990948717610218, 4.1823942641969033,
       0.93998784252295029},
      {{1e-3, 2e-3, 1.5e-3, 1.2e-3}, {1.1e-3, 2.2e-3, 1.9e-3, 1.6e-3, 1.4e-3}, -0.74229929594477407,
       6.5141365306566836, 0.48380461272145502},
      {{5, 6, 7, 8, 9, 10, 11, 12}, {5.5, 6.5, 7.5, 8.5}, 1.3887301496588272, 9.84688995215311,
       0.19552259622687499},
      {{3.0, 3.0, 3.0, 3.1}, {2.0, 4.0, 6.0, 8.0, 10.0}, -2.1033140568798009, 4.0024998694661628,
       0.10322304249781742},
  };
  for (const auto& c : cases) {
    const TTest r = welch_t_test(c.a, c.b);
    CHECK(r.t == doctest::Approx(c.t).epsilon(1e-9));
    CHECK(r.df == doctest::Approx(c.df).epsilon(1e-9));
    CHECK(std::abs(r.p - c.p) <= 1e-9 * c.p);
  }
  CHECK(welch_t_test(cases[0].a, cases[0].b).p < 1e-3);
}

TEST_CASE("welch t-test edge cases") {
  const std::vector<double> g{1.0, 2.5, 3.0, 4.2};
  const TTest same = welch_t_test(g, g);
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> one{1.0}, flat{2.0, 2.0, 2.0};
  CHECK_THROWS_AS(welch_t_test(one, g), Error);
  CHECK_THROWS_AS(welch_t_test(flat, flat), Error);
  CHECK_NOTHROW(welch_t_test(flat, g));
}
