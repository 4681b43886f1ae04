#include "spend/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spend/cube.hpp"

namespace spend::baseline {

void ArplsConfig::validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw Error("arpls lambda must be positive");
  if (!(ratio > 0 && ratio < 1)) throw Error("arpls ratio must lie in (0, 1)");
  if (max_iter < 1) throw Error("arpls max_iter must be >= 1");
  if (diff_order != 2) throw Error("arpls supports difference order 2 only");
}

namespace {

// Symmetric pentadiagonal matrix: main diagonal, first and second superdiagonals.
struct Band {
  std::vector<double> d0, d1, d2;
};

Band system(std::span<const double> w, double lambda) {
  const std::size_t n = w.size();
  Band a{std::vector<double>(w.begin(), w.end()), std::vector<double>(n, 0.0),
         std::vector<double>(n, 0.0)};
  const double c[3] = {1.0, -2.0, 1.0};
  for (std::size_t r = 0; r + 2 < n; ++r) {
    for (std::size_t i = 0; i < 3; ++i) {
      a.d0[r + i] += lambda * c[i] * c[i];
      if (i < 2) a.d1[r + i] += lambda * c[i] * c[i + 1];
    }
    a.d2[r] += lambda * c[0] * c[2];
  }
  return a;
}

std::vector<double> multiply(const Band& a, std::span<const double> z) {
  const std::size_t n = z.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = a.d0[i] * z[i];
    if (i + 1 < n) s += a.d1[i] * z[i + 1];
    if (i + 2 < n) s += a.d2[i] * z[i + 2];
    if (i >= 1) s += a.d1[i - 1] * z[i - 1];
    if (i >= 2) s += a.d2[i - 2] * z[i - 2];
    y[i] = s;
  }
  return y;
}

struct Ldl {
  std::vector<double> diag, l1, l2;  // l1[i] = L(i, i-1), l2[i] = L(i, i-2)

  explicit Ldl(const Band& a) {
    const std::size_t n = a.d0.size();
    diag.assign(n, 0.0);
    l1.assign(n + 1, 0.0);
    l2.assign(n + 2, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double dj = a.d0[j];
      if (j >= 1) dj -= l1[j] * l1[j] * diag[j - 1];
      if (j >= 2) dj -= l2[j] * l2[j] * diag[j - 2];
      if (!(dj > 0)) throw Error("arpls: system is not positive definite");
      diag[j] = dj;
      double off = a.d1[j];
      if (j >= 1) off -= l2[j + 1] * l1[j] * diag[j - 1];
      l1[j + 1] = off / dj;
      l2[j + 2] = a.d2[j] / dj;
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    const std::size_t n = b.size();
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= 1) y[i] -= l1[i] * y[i - 1];
      if (i >= 2) y[i] -= l2[i] * y[i - 2];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= diag[i];
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 < n) y[i] -= l1[i + 1] * y[i + 1];
      if (i + 2 < n) y[i] -= l2[i + 2] * y[i + 2];
    }
    return y;
  }
};

void check_input(std::span<const double> x) {
  if (x.size() < 3) throw Error("arpls needs at least 3 points, got " + std::to_string(x.size()));
  for (double v : x) {
    if (!std::isfinite(v)) throw Error("arpls input contains a non-finite value");
  }
}

}  // namespace

std::vector<double> penalized_solve(std::span<const double> x, std::span<const double> w,
                                    double lambda) {
  if (w.size() != x.size()) throw Error("arpls: weight and signal lengths differ");
  const Band a = system(w, lambda);
  const Ldl f(a);
  std::vector<double> b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) b[i] = w[i] * x[i];
  std::vector<double> z = f.solve(b);
  const auto az = multiply(a, z);
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - az[i];
  const auto dz = f.solve(r);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += dz[i];
  return z;
}

double penalized_residual(std::span<const double> x, std::span<const double> w, double lambda,
                          std::span<const double> z) {
  const auto az = multiply(system(w, lambda), z);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = az[i] - w[i] * x[i];
    s += r * r;
  }
  return std::sqrt(s);
}

ArplsResult arpls(std::span<const double> x, const ArplsConfig& cfg) {
  cfg.validate();
  check_input(x);
  const std::size_t n = x.size();
  ArplsResult res;
  res.w.assign(n, 1.0);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    res.z = penalized_solve(x, res.w, cfg.lambda);
    res.iterations = it;

    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - res.z[i];
      if (d < 0) sum += d, ++count;
    }
    if (count < 2) {
      res.degenerate = true;
      break;
    }
    const double m = sum / static_cast<double>(count);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - res.z[i];
      if (d < 0) ss += (d - m) * (d - m);
    }
    const double s = std::sqrt(ss / static_cast<double>(count - 1));
    if (!(s > 0)) {
      res.degenerate = true;
      break;
    }

    std::vector<double> w(n);
    double change = 0, norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - res.z[i];
      if (d < 0) {
        w[i] = 1.0;
      } else {
        const double arg = std::min(700.0, 2.0 * (d - (-m + 2.0 * s)) / s);
        w[i] = 1.0 / (1.0 + std::exp(arg));
      }
      change += (res.w[i] - w[i]) * (res.w[i] - w[i]);
      norm += res.w[i] * res.w[i];
    }
    res.w = std::move(w);
    if (std::sqrt(change) / std::sqrt(norm) < cfg.ratio) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<double> peak_extract(std::span<const double> x, const ArplsConfig& cfg) {
  const ArplsResult r = arpls(x, cfg);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - r.z[i];
  return out;
}

}  // namespace spend::baseline
