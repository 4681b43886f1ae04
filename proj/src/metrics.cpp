#include "spend/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <set>

#include "spend/fft.hpp"
#include "spend/parallel.hpp"

namespace spend::metrics {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()) + " differ");
  }
}

double range_of(const Image& im) {
  const auto [lo, hi] = std::minmax_element(im.data().begin(), im.data().end());
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

// Valid-mode separable filter of a row-major field with a 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& f, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size(), orow = rows - n + 1, ocol = cols - n + 1;
  std::vector<double> tmp(rows * ocol, 0.0), out(orow * ocol, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ocol; ++c) {
      double s = 0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * f[r * cols + c + t];
      tmp[r * ocol + c] = s;
    }
  }
  for (std::size_t r = 0; r < orow; ++r) {
    for (std::size_t c = 0; c < ocol; ++c) {
      double s = 0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * tmp[(r + t) * ocol + c];
      out[r * ocol + c] = s;
    }
  }
  return out;
}

double pooled_mean(const HyperCube& c, std::span<const std::size_t> roi) {
  double s = 0;
  const std::size_t n = c.nw();
  for (std::size_t p : roi) {
    for (std::size_t k = 0; k < n; ++k) s += c.data()[p * n + k];
  }
  return s / static_cast<double>(roi.size() * n);
}

double pooled_std(const HyperCube& c, std::span<const std::size_t> roi) {
  const double m = pooled_mean(c, roi);
  const std::size_t n = c.nw();
  double ss = 0;
  for (std::size_t p : roi) {
    for (std::size_t k = 0; k < n; ++k) {
      const double d = c.data()[p * n + k] - m;
      ss += d * d;
    }
  }
  const std::size_t count = roi.size() * n;
  if (count < 2) throw Error("snr: background ROI needs at least two values");
  return std::sqrt(ss / static_cast<double>(count - 1));
}

void check_rois(const HyperCube& c, std::span<const std::size_t> sig, std::span<const std::size_t> bg) {
  if (sig.empty() || bg.empty()) throw Error("snr: ROIs must be nonempty");
  const std::size_t P = c.nx() * c.ny();
  std::set<std::size_t> s(sig.begin(), sig.end());
  for (std::size_t p : sig) {
    if (p >= P) throw Error("snr: signal ROI pixel " + std::to_string(p) + " out of range");
  }
  for (std::size_t p : bg) {
    if (p >= P) throw Error("snr: background ROI pixel " + std::to_string(p) + " out of range");
    if (s.count(p)) throw Error("snr: ROIs overlap at pixel " + std::to_string(p));
  }
}

Image center_square(const Image& im) {
  const std::size_t s = std::min(im.rows(), im.cols());
  const std::size_t r0 = (im.rows() - s) / 2, c0 = (im.cols() - s) / 2;
  Image out(s, s);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) out(r, c) = im(r0 + r, c0 + c);
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same(a, b, "ssim");
  constexpr std::size_t win = 11;
  if (a.rows() < win || a.cols() < win) throw Error("ssim: images smaller than the 11x11 window");
  const double L = std::max(range_of(a), range_of(b));
  if (L == 0) {
    if (a == b) return 1.0;
    throw Error("ssim: both images are constant but differ");
  }
  std::vector<double> k(win);
  double ks = 0;
  for (std::size_t t = 0; t < win; ++t) {
    const double x = static_cast<double>(t) - 5.0;
    k[t] = std::exp(-x * x / (2 * 1.5 * 1.5));
    ks += k[t];
  }
  for (double& v : k) v /= ks;

  const std::size_t R = a.rows(), C = a.cols(), n = R * C;
  std::vector<double> fa(n), fb(n), faa(n), fbb(n), fab(n);
  for (std::size_t i = 0; i < n; ++i) {
    fa[i] = a.data()[i];
    fb[i] = b.data()[i];
    faa[i] = fa[i] * fa[i];
    fbb[i] = fb[i] * fb[i];
    fab[i] = fa[i] * fb[i];
  }
  const auto ma = filter_valid(fa, R, C, k), mb = filter_valid(fb, R, C, k);
  const auto saa = filter_valid(faa, R, C, k), sbb = filter_valid(fbb, R, C, k),
             sab = filter_valid(fab, R, C, k);
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double total = 0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i],
                 cov = sab[i] - ma[i] * mb[i];
    total += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) /
             ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(ma.size());
}

double psnr(const Image& a, const Image& b) {
  require_same(a, b, "psnr");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    se += d * d;
  }
  if (se == 0) return std::numeric_limits<double>::infinity();
  const double peak = range_of(a);
  if (peak == 0) throw Error("psnr: reference image has zero range");
  return 10.0 * std::log10(peak * peak / (se / static_cast<double>(a.size())));
}

double mse(const HyperCube& a, const HyperCube& b) {
  if (a.dims() != b.dims()) throw Error("mse: cube shapes differ");
  const auto da = a.data(), db = b.data();
  const auto partial = block_partials(da.size(), 1 << 14, 0.0, [&](std::size_t i, double& acc) {
    const double d = static_cast<double>(da[i]) - db[i];
    acc += d * d;
  });
  double s = 0;
  for (double p : partial) s += p;
  return s / static_cast<double>(da.size());
}

double snr(const HyperCube& cube, std::span<const std::size_t> signal_roi,
           std::span<const std::size_t> background_roi) {
  check_rois(cube, signal_roi, background_roi);
  const double sd = pooled_std(cube, background_roi);
  if (sd == 0) throw Error("snr: background has zero standard deviation");
  return pooled_mean(cube, signal_roi) / sd;
}

double snr_gain(const HyperCube& raw, const HyperCube& denoised,
                std::span<const std::size_t> signal_roi, std::span<const std::size_t> background_roi) {
  if (raw.dims() != denoised.dims()) throw Error("snr_gain: cube shapes differ");
  return snr(denoised, signal_roi, background_roi) / snr(raw, signal_roi, background_roi);
}

FrcCurve frc_resolution(const Image& a_in, const Image& b_in) {
  require_same(a_in, b_in, "frc");
  const Image a = center_square(a_in), b = center_square(b_in);
  const std::size_t s = a.rows();
  if (s < 16) throw Error("frc: square side " + std::to_string(s) + " is below 16");
  std::vector<double> va(a.data().begin(), a.data().end()), vb(b.data().begin(), b.data().end());
  const auto Fa = fft::dft2(va, s, s), Fb = fft::dft2(vb, s, s);

  const std::size_t rings = s / 2 + 1;
  std::vector<std::complex<double>> cross(rings);
  std::vector<double> pa(rings, 0.0), pb(rings, 0.0);
  const auto freq = [s](std::size_t u) {
    return u <= s / 2 ? static_cast<double>(u) : static_cast<double>(u) - static_cast<double>(s);
  };
  for (std::size_t u = 0; u < s; ++u) {
    for (std::size_t v = 0; v < s; ++v) {
      const auto r = static_cast<std::size_t>(std::lround(std::hypot(freq(u), freq(v))));
      if (r >= rings) continue;
      const auto fa = Fa[u * s + v], fb = Fb[u * s + v];
      cross[r] += fa * std::conj(fb);
      pa[r] += std::norm(fa);
      pb[r] += std::norm(fb);
    }
  }
  FrcCurve c;
  for (std::size_t r = 0; r < rings; ++r) {
    c.frequency.push_back(static_cast<double>(r) / static_cast<double>(s));
    double v;
    if (pa[r] == 0 && pb[r] == 0) {
      v = 1.0;
    } else if (pa[r] == 0 || pb[r] == 0) {
      v = 0.0;
    } else {
      v = std::abs(cross[r]) / std::sqrt(pa[r] * pb[r]);
    }
    c.correlation.push_back(v);
  }
  for (std::size_t r = 0; r < rings; ++r) {
    const std::size_t lo = r == 0 ? 0 : r - 1, hi = std::min(rings - 1, r + 1);
    double sum = 0;
    for (std::size_t t = lo; t <= hi; ++t) sum += c.correlation[t];
    c.smoothed.push_back(sum / static_cast<double>(hi - lo + 1));
  }
  for (std::size_t r = 1; r < rings; ++r) {
    if (c.smoothed[r] < kFrcThreshold) {
      c.cutoff_frequency = c.frequency[r];
      c.cutoff_found = true;
      break;
    }
  }
  c.resolution_px = 1.0 / c.cutoff_frequency;
  if (a_in.pixel_size_nm) c.resolution_nm = *a_in.pixel_size_nm * c.resolution_px;
  return c;
}

double frechet_distance(const Curve& p, const Curve& q) {
  if (p.empty() || q.empty()) throw Error("frechet_distance: empty curve");
  const std::size_t n = p.size(), m = q.size();
  const auto dist = [&](std::size_t i, std::size_t j) {
    return std::hypot(p[i].x - q[j].x, p[i].y - q[j].y);
  };
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = dist(i, j);
      double best;
      if (i == 0 && j == 0) {
        best = d;
      } else if (i == 0) {
        best = std::max(cur[j - 1], d);
      } else if (j == 0) {
        best = std::max(prev[j], d);
      } else {
        best = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
      }
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

Curve spectrum_curve(std::span<const float> spectrum, const std::vector<double>* wavenumbers) {
  double peak = 0;
  for (float v : spectrum) peak = std::max(peak, std::abs(static_cast<double>(v)));
  if (peak == 0) return {};
  Curve c(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    c[k] = {wavenumbers ? (*wavenumbers)[k] : static_cast<double>(k), spectrum[k] / peak};
  }
  return c;
}

DistortionMap spectral_distortion_map(const HyperCube& cube, const HyperCube& reference) {
  if (cube.dims() != reference.dims()) throw Error("spectral_distortion_map: cube shapes differ");
  const std::size_t nx = cube.nx(), ny = cube.ny();
  const std::vector<double>* wn = reference.wavenumbers ? &*reference.wavenumbers : nullptr;
  DistortionMap out{Image(nx, ny), std::vector<std::uint8_t>(nx * ny, 0), 0.0};
  parallel_for(nx * ny, [&](std::size_t p) {
    const Curve a = spectrum_curve(cube.spectrum(p / ny, p % ny), wn);
    const Curve b = spectrum_curve(reference.spectrum(p / ny, p % ny), wn);
    if (a.empty() || b.empty()) {
      out.flagged[p] = 1;
      return;
    }
    out.map.data()[p] = static_cast<float>(frechet_distance(a, b));
  });
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < nx * ny; ++p) {
    if (!out.flagged[p]) sum += out.map.data()[p], ++count;
  }
  out.mean = count ? sum / static_cast<double>(count) : 0.0;
  return out;
}

TTest welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("welch_t_test: each group needs at least 2 values");
  const auto stats = [](std::span<const double> g) {
    double m = 0;
    for (double v : g) m += v;
    m /= static_cast<double>(g.size());
    double ss = 0;
    for (double v : g) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(g.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double sa = va / static_cast<double>(a.size()), sb = vb / static_cast<double>(b.size());
  if (sa + sb == 0) throw Error("welch_t_test: both groups have zero variance");
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) /
                    (sa * sa / static_cast<double>(a.size() - 1) +
                     sb * sb / static_cast<double>(b.size() - 1));
  const double p = boost::math::ibeta(df / 2, 0.5, df / (df + t * t));
  return {t, p, df};
}

}  // namespace spend::metrics
