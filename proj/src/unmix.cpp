#include "spend/unmix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spend/parallel.hpp"

namespace spend {

DataMatrix reshape_cube(const HyperCube& cube) {
  DataMatrix d{Matrix(cube.nx() * cube.ny(), cube.nw()), cube.nx(), cube.ny()};
  const auto src = cube.data();
  std::copy(src.begin(), src.end(), d.values.data().begin());
  return d;
}

HyperCube unreshape_cube(const DataMatrix& d) {
  if (d.values.rows() != d.nx * d.ny) {
    throw Error("unreshape: " + std::to_string(d.values.rows()) + " rows for a " +
                std::to_string(d.nx) + "x" + std::to_string(d.ny) + " grid");
  }
  HyperCube cube(Dims{d.nx, d.ny, d.values.cols()});
  const auto src = d.values.data();
  std::transform(src.begin(), src.end(), cube.data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return cube;
}

Image unreshape(std::span<const double> col, std::size_t nx, std::size_t ny) {
  if (col.size() != nx * ny) {
    throw Error("unreshape: column of " + std::to_string(col.size()) + " values for a " +
                std::to_string(nx) + "x" + std::to_string(ny) + " grid");
  }
  Image im(nx, ny);
  for (std::size_t i = 0; i < col.size(); ++i) im.data()[i] = static_cast<float>(col[i]);
  return im;
}

HyperCube maps_to_cube(const Matrix& C, std::size_t nx, std::size_t ny) {
  if (C.rows() != nx * ny) throw Error("maps_to_cube: row count does not match the grid");
  HyperCube cube(Dims{nx, ny, C.cols()});
  for (std::size_t i = 0; i < C.rows() * C.cols(); ++i) cube.data()[i] = static_cast<float>(C.data()[i]);
  return cube;
}

Matrix column(const Matrix& m, std::size_t c) {
  Matrix out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) out(r, 0) = m(r, c);
  return out;
}

namespace unmix {

double kkt_violation(std::span<const double> gram, std::span<const double> b,
                     std::span<const double> c, double lambda, bool nonneg) {
  const std::size_t k = b.size();
  double scale = lambda;
  for (double v : b) scale = std::max(scale, std::abs(v));
  if (scale == 0) scale = 1;
  double worst = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double grad = -b[i];
    for (std::size_t j = 0; j < k; ++j) grad += gram[i * k + j] * c[j];
    double v;
    if (c[i] > 0) {
      v = std::abs(grad + lambda);
    } else if (c[i] < 0) {
      v = std::abs(grad - lambda);
    } else if (nonneg) {
      v = std::max(0.0, -(grad + lambda));
    } else {
      v = std::max(0.0, std::abs(grad) - lambda);
    }
    // A coordinate with no curvature cannot move; it only violates if the
    // objective decreases without bound along it, which we do not chase.
    if (gram[i * k + i] == 0) v = 0;
    worst = std::max(worst, v / scale);
  }
  return worst;
}

CdStats coordinate_descent(std::span<const double> gram, std::span<const double> b,
                           std::span<double> c, const CdOptions& opts) {
  const std::size_t k = b.size();
  if (gram.size() != k * k || c.size() != k) throw Error("coordinate_descent: size mismatch");
  CdStats st;
  st.kkt = kkt_violation(gram, b, c, opts.lambda, opts.nonneg);
  while (st.kkt > opts.tol && st.sweeps < opts.max_sweeps) {
    for (std::size_t i = 0; i < k; ++i) {
      const double gii = gram[i * k + i];
      if (gii <= 0) continue;
      double r = b[i];
      for (std::size_t j = 0; j < k; ++j) {
        if (j != i) r -= gram[i * k + j] * c[j];
      }
      if (opts.nonneg) {
        c[i] = std::max(0.0, r - opts.lambda) / gii;
      } else {
        const double mag = std::max(0.0, std::abs(r) - opts.lambda);
        c[i] = std::copysign(mag, r) / gii;
      }
    }
    ++st.sweeps;
    st.kkt = kkt_violation(gram, b, c, opts.lambda, opts.nonneg);
  }
  return st;
}

}  // namespace unmix

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(what) + " contains a non-finite value");
  }
}

void check_spectra(const Matrix& S, std::size_t n_w) {
  if (S.rows() == 0) throw Error("no reference spectra");
  if (S.cols() != n_w) {
    throw Error("reference spectra have " + std::to_string(S.cols()) + " channels, data has " +
                std::to_string(n_w));
  }
  check_finite(S.data(), "reference spectra");
  for (std::size_t k = 0; k < S.rows(); ++k) {
    const auto r = S.row(k);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0; })) {
      throw Error("reference spectrum " + std::to_string(k) + " is all zero");
    }
  }
}

// A * A^T for row-major A.
Matrix gram_rows(const Matrix& A) {
  const std::size_t k = A.rows(), n = A.cols();
  Matrix G(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0;
      for (std::size_t t = 0; t < n; ++t) s += A(i, t) * A(j, t);
      G(i, j) = G(j, i) = s;
    }
  }
  return G;
}

Matrix residual(const Matrix& D, const Matrix& C, const Matrix& S) {
  Matrix E = D;
  const std::size_t K = S.rows();
  parallel_for(D.rows(), [&](std::size_t i) {
    auto e = E.row(i);
    for (std::size_t k = 0; k < K; ++k) {
      const double c = C(i, k);
      if (c == 0) continue;
      const auto s = S.row(k);
      for (std::size_t j = 0; j < e.size(); ++j) e[j] -= c * s[j];
    }
  });
  return E;
}

double frobenius(const Matrix& E) {
  const auto d = E.data();
  const auto partial = block_partials(d.size(), 4096, 0.0,
                                      [&](std::size_t i, double& acc) { acc += d[i] * d[i]; });
  double s = 0;
  for (double p : partial) s += p;
  return std::sqrt(s);
}

// Row-wise solve of min 1/2||D_i - c S||^2 (+ lambda sum c) for every row.
std::size_t solve_rows(const Matrix& D, const Matrix& S, Matrix& C, const unmix::CdOptions& opts,
                       bool& all_converged) {
  const std::size_t K = S.rows(), n = D.cols();
  const Matrix G = gram_rows(S);
  std::vector<std::size_t> sweeps(D.rows());
  std::vector<std::uint8_t> ok(D.rows());
  parallel_for(D.rows(), [&](std::size_t i) {
    std::vector<double> b(K, 0.0);
    const auto d = D.row(i);
    for (std::size_t k = 0; k < K; ++k) {
      const auto s = S.row(k);
      double acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += s[j] * d[j];
      b[k] = acc;
    }
    const auto st = unmix::coordinate_descent(G.data(), b, C.row(i), opts);
    sweeps[i] = st.sweeps;
    ok[i] = st.kkt <= opts.tol;
  });
  all_converged = std::all_of(ok.begin(), ok.end(), [](std::uint8_t v) { return v != 0; });
  return sweeps.empty() ? 0 : *std::max_element(sweeps.begin(), sweeps.end());
}

}  // namespace

UnmixResult lasso_unmix(const DataMatrix& D, const Matrix& S, double lambda) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error("lasso lambda must be finite and >= 0");
  check_spectra(S, D.values.cols());
  check_finite(D.values.data(), "data matrix");
  UnmixResult r;
  r.K = S.rows();
  r.S = S;
  r.C = Matrix(D.values.rows(), r.K);
  unmix::CdOptions opts;
  opts.lambda = lambda;
  r.iterations = solve_rows(D.values, S, r.C, opts, r.converged);
  r.E = residual(D.values, r.C, S);
  r.objective.push_back(frobenius(r.E));
  return r;
}

UnmixResult mcr_als(const DataMatrix& D, const Matrix& S_init, const McrOptions& opts) {
  check_spectra(S_init, D.values.cols());
  check_finite(D.values.data(), "data matrix");
  if (opts.max_iter == 0) throw Error("mcr_als: max_iter must be positive");
  const Matrix& X = D.values;
  const std::size_t P = X.rows(), N = X.cols(), K = S_init.rows();
  UnmixResult r;
  r.K = K;
  r.S = S_init;
  r.C = Matrix(P, K);

  unmix::CdOptions c_opts;
  c_opts.nonneg = opts.nonneg_c;
  c_opts.tol = 1e-9;
  unmix::CdOptions s_opts;
  s_opts.nonneg = opts.nonneg_s;
  s_opts.tol = 1e-9;

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    bool ignored = false;
    solve_rows(X, r.S, r.C, c_opts, ignored);

    for (std::size_t k = 0; k < K; ++k) {
      bool dead = true;
      for (std::size_t i = 0; i < P && dead; ++i) dead = r.C(i, k) == 0;
      if (!dead) continue;
      r.collapsed.push_back(k);
      if (opts.fix_s) continue;
      const Matrix E = residual(X, r.C, r.S);
      std::size_t best = 0;
      double best_norm = -1;
      for (std::size_t i = 0; i < P; ++i) {
        double s = 0;
        for (double v : E.row(i)) s += v * v;
        if (s > best_norm) best_norm = s, best = i;
      }
      auto sk = r.S.row(k);
      const auto e = E.row(best);
      for (std::size_t j = 0; j < N; ++j) sk[j] = opts.nonneg_s ? std::max(0.0, e[j]) : e[j];
    }

    if (!opts.fix_s) {
      // Transposed problem: each spectral channel j solves for S(:, j).
      Matrix Xt(N, P), St(N, K), Ct(K, P);
      for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t j = 0; j < N; ++j) Xt(j, i) = X(i, j);
        for (std::size_t k = 0; k < K; ++k) Ct(k, i) = r.C(i, k);
      }
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < N; ++j) St(j, k) = r.S(k, j);
      }
      solve_rows(Xt, Ct, St, s_opts, ignored);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < N; ++j) r.S(k, j) = St(j, k);
      }
      for (std::size_t k = 0; k < K; ++k) {
        double m = 0;
        for (double v : r.S.row(k)) m = std::max(m, std::abs(v));
        if (m == 0) continue;
        for (double& v : r.S.row(k)) v /= m;
        for (std::size_t i = 0; i < P; ++i) r.C(i, k) *= m;
      }
    }

    r.E = residual(X, r.C, r.S);
    const double obj = frobenius(r.E);
    r.objective.push_back(obj);
    r.iterations = it;
    if (obj == 0) {
      r.converged = true;
      break;
    }
    if (it > 1) {
      const double prev = r.objective[it - 2];
      if (std::abs(prev - obj) <= opts.tol * prev) {
        r.converged = true;
        break;
      }
    }
  }
  return r;
}

PhasorMap spectral_phasor(const HyperCube& cube, int harmonic) {
  const std::size_t n = cube.nw();
  if (n < 2) throw Error("spectral_phasor needs at least 2 spectral frames");
  if (harmonic < 1) throw Error("phasor harmonic must be >= 1");
  PhasorMap m;
  m.nx = cube.nx();
  m.ny = cube.ny();
  m.harmonic = harmonic;
  const std::size_t P = m.nx * m.ny;
  m.g.assign(P, 0.0);
  m.s.assign(P, 0.0);
  m.dark.assign(P, 0);
  std::vector<double> cs(n), sn(n);
  for (std::size_t k = 0; k < n; ++k) {
    // Reduce h*k mod n first so the angle stays exact for large harmonics.
    const double a = 2.0 * std::numbers::pi * static_cast<double>((harmonic * k) % n) /
                     static_cast<double>(n);
    cs[k] = std::cos(a);
    sn[k] = -std::sin(a);
  }
  parallel_for(P, [&](std::size_t p) {
    const auto spec = cube.data().subspan(p * n, n);
    double total = 0, re = 0, im = 0;
    for (std::size_t k = 0; k < n; ++k) {
      total += spec[k];
      re += spec[k] * cs[k];
      im += spec[k] * sn[k];
    }
    if (!(total > 0)) {
      m.dark[p] = 1;
      return;
    }
    m.g[p] = re / total;
    m.s[p] = im / total;
  });
  return m;
}

bool point_in_polygon(PhasorPoint p, std::span<const PhasorPoint> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto [xi, yi] = poly[i];
    const auto [xj, yj] = poly[j];
    if ((yi > p.second) != (yj > p.second) &&
        p.first < (xj - xi) * (p.second - yi) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

PhasorSelection phasor_select(const PhasorMap& map, std::span<const PhasorPoint> polygon,
                              const HyperCube& cube, const std::string& name) {
  if (polygon.size() < 3) {
    throw Error("phasor polygon '" + name + "' has " + std::to_string(polygon.size()) +
                " vertices, need >= 3");
  }
  if (cube.nx() != map.nx || cube.ny() != map.ny) throw Error("phasor map and cube grids differ");
  PhasorSelection sel;
  for (std::size_t p = 0; p < map.g.size(); ++p) {
    if (!map.dark[p] && point_in_polygon({map.g[p], map.s[p]}, polygon)) sel.pixels.push_back(p);
  }
  if (sel.pixels.empty()) throw Error("phasor polygon '" + name + "' selects no pixels");
  const std::size_t n = cube.nw();
  sel.spectrum.assign(n, 0.0);
  for (std::size_t p : sel.pixels) {
    const auto spec = cube.data().subspan(p * n, n);
    for (std::size_t k = 0; k < n; ++k) sel.spectrum[k] += spec[k];
  }
  for (double& v : sel.spectrum) v /= static_cast<double>(sel.pixels.size());
  return sel;
}

}  // namespace spend
