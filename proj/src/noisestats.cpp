#include "spend/noisestats.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "spend/fft.hpp"
#include "spend/parallel.hpp"

namespace spend::noisestats {

namespace {

constexpr std::size_t kLineBlock = 64;

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

void require_extent(const HyperCube& cube, Axis axis, std::size_t min, const char* what) {
  if (cube.extent(axis) < min) {
    throw Error(std::string(what) + ": axis " + std::string(axis_name(axis)) + " has extent " +
                std::to_string(cube.extent(axis)) + ", need >= " + std::to_string(min));
  }
}

}  // namespace

std::vector<PsdPoint> axis_psd(const HyperCube& cube, Axis axis) {
  require_extent(cube, axis, 4, "axis_psd");
  const Lines lines = lines_along(cube.dims(), axis);
  const std::size_t n = lines.length, bins = n / 2 + 1;
  const fft::RealDft dft(n);
  const auto data = cube.data();

  struct Acc {
    std::vector<double> power;
  };
  const auto partial = block_partials(
      lines.count, kLineBlock, Acc{std::vector<double>(bins, 0.0)},
      [&](std::size_t id, Acc& acc) {
        std::vector<double> line(n);
        std::vector<std::complex<double>> spec(bins);
        const std::size_t s = lines.start(id);
        double mean = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          line[t] = data[s + t * lines.stride];
          mean += line[t];
        }
        mean /= static_cast<double>(n);
        for (auto& v : line) v -= mean;
        dft.forward(line, spec);
        for (std::size_t k = 0; k < bins; ++k) {
          const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
          acc.power[k] += (edge ? 1.0 : 2.0) * std::norm(spec[k]) / static_cast<double>(n);
        }
      });

  std::vector<double> total(bins, 0.0);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < bins; ++k) total[k] += p.power[k];
  }
  std::vector<PsdPoint> out(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    out[k] = {static_cast<double>(k) / static_cast<double>(n),
              total[k] / static_cast<double>(lines.count)};
  }
  return out;
}

HyperCube median_filter_planes(const HyperCube& cube, Axis normal, std::size_t window) {
  if (window % 2 == 0 || window == 0) throw Error("median window must be odd");
  const Dims d = cube.dims();
  const std::array<std::size_t, 3> ext{d.nx, d.ny, d.nw};
  const auto n = static_cast<std::size_t>(normal);
  const std::size_t u = n == 0 ? 1 : 0, v = n == 2 ? 1 : 2;
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<float> out(cube.size());
  parallel_for(d.nx, [&](std::size_t x) {
    std::vector<float> buf(window * window);
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t w = 0; w < d.nw; ++w) {
        const std::array<std::size_t, 3> at{x, y, w};
        std::array<std::size_t, 3> q = at;
        std::size_t k = 0;
        for (std::ptrdiff_t du = -half; du <= half; ++du) {
          q[u] = reflect(static_cast<std::ptrdiff_t>(at[u]) + du, ext[u]);
          for (std::ptrdiff_t dv = -half; dv <= half; ++dv) {
            q[v] = reflect(static_cast<std::ptrdiff_t>(at[v]) + dv, ext[v]);
            buf[k++] = cube(q[0], q[1], q[2]);
          }
        }
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k / 2),
                         buf.end());
        out[cube.index(x, y, w)] = buf[k / 2];
      }
    }
  });
  return cube.with_data(std::move(out));
}

HyperCube median_filter_frames(const HyperCube& cube, std::size_t window) {
  return median_filter_planes(cube, Axis::W, window);
}

HyperCube noise_residual(const HyperCube& cube, const HyperCube* signal_estimate, Axis axis) {
  std::vector<float> out(cube.size());
  if (signal_estimate) {
    if (signal_estimate->dims() != cube.dims()) {
      throw Error("signal estimate shape does not match the cube");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = cube.data()[i] - signal_estimate->data()[i];
    }
  } else {
    const HyperCube med = median_filter_planes(cube, axis, 5);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cube.data()[i] - med.data()[i];
  }
  return cube.with_data(std::move(out));
}

double lag1_correlation(const HyperCube& noise, Axis axis) {
  require_extent(noise, axis, 2, "adjacent_pcc");
  const Lines lines = lines_along(noise.dims(), axis);
  const auto data = noise.data();
  const std::size_t pairs_per_line = lines.length - 1;

  struct Sums {
    double a = 0, b = 0;
  };
  const auto first = block_partials(lines.count, kLineBlock, Sums{}, [&](std::size_t id, Sums& s) {
    const std::size_t st = lines.start(id);
    for (std::size_t t = 0; t < pairs_per_line; ++t) {
      s.a += data[st + t * lines.stride];
      s.b += data[st + (t + 1) * lines.stride];
    }
  });
  Sums tot;
  for (const auto& s : first) tot.a += s.a, tot.b += s.b;
  const double n = static_cast<double>(lines.count * pairs_per_line);
  const double ma = tot.a / n, mb = tot.b / n;

  struct Moments {
    double aa = 0, bb = 0, ab = 0;
  };
  const auto second =
      block_partials(lines.count, kLineBlock, Moments{}, [&](std::size_t id, Moments& m) {
        const std::size_t st = lines.start(id);
        for (std::size_t t = 0; t < pairs_per_line; ++t) {
          const double a = data[st + t * lines.stride] - ma;
          const double b = data[st + (t + 1) * lines.stride] - mb;
          m.aa += a * a;
          m.bb += b * b;
          m.ab += a * b;
        }
      });
  Moments m;
  for (const auto& p : second) m.aa += p.aa, m.bb += p.bb, m.ab += p.ab;
  if (!(m.aa > 0.0) || !(m.bb > 0.0)) {
    throw Error("noise has zero variance along axis " + std::string(axis_name(axis)) +
                "; adjacent-pixel correlation is undefined");
  }
  return std::clamp(m.ab / std::sqrt(m.aa * m.bb), -1.0, 1.0);
}

double adjacent_pcc(const HyperCube& cube, Axis axis, const HyperCube* signal_estimate) {
  return lag1_correlation(noise_residual(cube, signal_estimate, axis), axis);
}

double fluctuation(const HyperCube& noise, Axis axis) {
  require_extent(noise, axis, 2, "fluctuation");
  const Lines lines = lines_along(noise.dims(), axis);
  const auto data = noise.data();
  struct Acc {
    double score = 0;
    std::size_t used = 0;
  };
  const auto partial = block_partials(lines.count, kLineBlock, Acc{}, [&](std::size_t id, Acc& acc) {
    const std::size_t st = lines.start(id), n = lines.length;
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += data[st + t * lines.stride];
    mean /= static_cast<double>(n);
    double var = 0.0, diff = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = data[st + t * lines.stride] - mean;
      var += v * v;
      if (t + 1 < n) diff += std::abs(static_cast<double>(data[st + (t + 1) * lines.stride]) -
                                      static_cast<double>(data[st + t * lines.stride]));
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0.0) {
      acc.score += diff / static_cast<double>(n - 1) / sd;
      ++acc.used;
    }
  });
  Acc tot;
  for (const auto& p : partial) tot.score += p.score, tot.used += p.used;
  return tot.used ? tot.score / static_cast<double>(tot.used) : 0.0;
}

std::vector<MeanStd> noise_vs_signal(const HyperCube& cube, std::size_t tile) {
  if (tile < 2) throw Error("noise_vs_signal: tile must be >= 2");
  if (tile > cube.nx() || tile > cube.ny()) {
    throw Error("noise_vs_signal: tile " + std::to_string(tile) + " is larger than the " +
                std::to_string(cube.nx()) + "x" + std::to_string(cube.ny()) + " image");
  }
  const std::size_t tx = cube.nx() / tile, ty = cube.ny() / tile;
  std::vector<MeanStd> out(cube.nw() * tx * ty);
  const double m = static_cast<double>(tile * tile);
  parallel_for(cube.nw(), [&](std::size_t w) {
    for (std::size_t i = 0; i < tx; ++i) {
      for (std::size_t j = 0; j < ty; ++j) {
        double sum = 0.0;
        for (std::size_t x = i * tile; x < (i + 1) * tile; ++x)
          for (std::size_t y = j * tile; y < (j + 1) * tile; ++y) sum += cube(x, y, w);
        const double mean = sum / m;
        double ss = 0.0;
        for (std::size_t x = i * tile; x < (i + 1) * tile; ++x)
          for (std::size_t y = j * tile; y < (j + 1) * tile; ++y) {
            const double v = cube(x, y, w) - mean;
            ss += v * v;
          }
        out[(w * tx + i) * ty + j] = {mean, std::sqrt(ss / (m - 1.0))};
      }
    }
  });
  return out;
}

LineFit fit_noise_vs_signal(const std::vector<MeanStd>& s) {
  if (s.size() < 2) throw Error("noise_vs_signal fit needs at least two samples");
  double mx = 0, my = 0;
  for (const auto& p : s) mx += p.mean, my += p.std;
  mx /= static_cast<double>(s.size());
  my /= static_cast<double>(s.size());
  double sxx = 0, sxy = 0;
  for (const auto& p : s) {
    sxx += (p.mean - mx) * (p.mean - mx);
    sxy += (p.mean - mx) * (p.std - my);
  }
  if (!(sxx > 0)) return {0.0, my};
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

Axis argmax_fluctuation(const std::array<double, 3>& f, double tie) {
  const double best = std::max({f[0], f[1], f[2]});
  for (Axis a : {Axis::W, Axis::Y, Axis::X}) {
    if (f[static_cast<std::size_t>(a)] >= best * (1.0 - tie)) return a;
  }
  return Axis::W;
}

std::pair<Axis, NoiseReport> select_permutation_axis(const HyperCube& cube,
                                                     const HyperCube* signal_estimate) {
  for (Axis a : kAllAxes) require_extent(cube, a, 4, "select_permutation_axis");
  NoiseReport r;
  r.noise_estimate = signal_estimate ? "signal_estimate" : "median5x5_plane_residual";
  for (Axis a : kAllAxes) {
    const auto i = static_cast<std::size_t>(a);
    const HyperCube noise = noise_residual(cube, signal_estimate, a);
    r.psd[i] = axis_psd(noise, a);
    r.pcc[i] = lag1_correlation(noise, a);
    r.fluctuation[i] = fluctuation(noise, a);
  }
  r.tile = std::min<std::size_t>({8, cube.nx(), cube.ny()});
  r.noise_vs_signal = noise_vs_signal(cube, r.tile);
  r.noise_vs_signal_fit = fit_noise_vs_signal(r.noise_vs_signal);
  r.selected_axis = argmax_fluctuation(r.fluctuation);
  return {r.selected_axis, std::move(r)};
}

nlohmann::json report_to_json(const NoiseReport& r) {
  nlohmann::json j;
  j["selected_axis"] = std::string(axis_name(r.selected_axis));
  j["noise_estimate"] = r.noise_estimate;
  for (Axis a : kAllAxes) {
    const auto i = static_cast<std::size_t>(a);
    const std::string name(axis_name(a));
    j["pcc"][name] = r.pcc[i];
    j["fluctuation"][name] = r.fluctuation[i];
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.psd[i]) curve.push_back({p.frequency, p.power});
    j["psd"][name] = std::move(curve);
  }
  j["noise_vs_signal"]["tile"] = r.tile;
  j["noise_vs_signal"]["slope"] = r.noise_vs_signal_fit.slope;
  j["noise_vs_signal"]["intercept"] = r.noise_vs_signal_fit.intercept;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.noise_vs_signal) pts.push_back({p.mean, p.std});
  j["noise_vs_signal"]["samples"] = std::move(pts);
  return j;
}

}  // namespace spend::noisestats
