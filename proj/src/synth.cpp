#include "spend/synth.hpp"

#include <cmath>
#include <random>

#include "spend/config.hpp"
#include "spend/parallel.hpp"

namespace spend::synth {

using nlohmann::json;

void PhantomSpec::validate() const {
  if (dims.nx == 0 || dims.ny == 0 || dims.nw == 0) throw Error("phantom dims must be >= 1");
  if (components.empty()) throw Error("phantom needs at least one component");
  if (!(background >= 0.0)) throw Error("phantom background must be >= 0");
  for (const auto& c : components) {
    for (const auto& s : c.shapes) {
      if (!(s.amplitude >= 0.0)) throw Error("component '" + c.name + "': amplitude < 0");
      if (s.kind != SpatialShape::Kind::Constant && !(s.radius > 0.0)) {
        throw Error("component '" + c.name + "': radius must be positive");
      }
    }
    for (const auto& p : c.peaks) {
      if (!(p.center >= 0.0 && p.center < static_cast<double>(dims.nw))) {
        throw Error("component '" + c.name + "': peak center outside [0, n_w)");
      }
      if (!(p.height >= 0.0) || !(p.width >= 0.0)) {
        throw Error("component '" + c.name + "': peak height and width must be >= 0");
      }
      if (p.width == 0.0 && p.center != std::floor(p.center)) {
        throw Error("component '" + c.name + "': a delta peak needs an integer center");
      }
    }
  }
}

void NoiseSpec::validate() const {
  if (!(sigma_iid >= 0 && sigma_corr >= 0 && k_resonance >= 0 && poisson_gain >= 0 &&
        rho_fast >= 0)) {
    throw Error("noise parameters must be >= 0");
  }
  if (!(rho_fast < 1.0)) throw Error("rho_fast must be < 1");
}

std::vector<double> component_spectrum(const Component& c, std::size_t nw) {
  std::vector<double> s(nw, 0.0);
  for (const auto& p : c.peaks) {
    if (p.width == 0.0) {
      s[static_cast<std::size_t>(p.center)] += p.height;
      continue;
    }
    const double hw = 0.5 * p.width;
    for (std::size_t n = 0; n < nw; ++n) {
      const double u = (static_cast<double>(n) - p.center) / hw;
      s[n] += p.height / (1.0 + u * u);
    }
  }
  return s;
}

namespace {

double shape_value(const SpatialShape& s, double x, double y) {
  switch (s.kind) {
    case SpatialShape::Kind::Constant:
      return s.amplitude;
    case SpatialShape::Kind::Disk: {
      const double dx = x - s.cx, dy = y - s.cy;
      return dx * dx + dy * dy <= s.radius * s.radius ? s.amplitude : 0.0;
    }
    case SpatialShape::Kind::Blob: {
      const double dx = x - s.cx, dy = y - s.cy;
      return s.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s.radius * s.radius));
    }
  }
  return 0.0;
}

enum NoiseKind : std::uint64_t { kPoisson = 1, kIid = 2, kResonance = 3, kCorrelated = 4 };

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims d = spec.dims;
  const std::size_t P = d.nx * d.ny, K = spec.components.size();

  UnmixResult truth;
  truth.K = K;
  truth.C = Matrix(P, K);
  truth.S = Matrix(K, d.nw);
  truth.E = Matrix(P, d.nw, spec.background);
  truth.converged = true;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& comp = spec.components[k];
    const auto s = component_spectrum(comp, d.nw);
    std::copy(s.begin(), s.end(), truth.S.row(k).begin());
    for (std::size_t x = 0; x < d.nx; ++x) {
      for (std::size_t y = 0; y < d.ny; ++y) {
        double v = 0.0;
        for (const auto& sh : comp.shapes) {
          v += shape_value(sh, static_cast<double>(x), static_cast<double>(y));
        }
        truth.C(raster_row(x, y, d.ny), k) = v;
      }
    }
  }

  HyperCube clean(d);
  for (std::size_t x = 0; x < d.nx; ++x) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      const auto r = raster_row(x, y, d.ny);
      for (std::size_t w = 0; w < d.nw; ++w) {
        double v = spec.background;
        for (std::size_t k = 0; k < K; ++k) v += truth.C(r, k) * truth.S(k, w);
        clean(x, y, w) = static_cast<float>(v);
      }
    }
  }
  clean.fast_axis = spec.fast_axis;
  clean.pixel_size_nm = spec.pixel_size_nm;
  if (spec.wavenumber_axis) {
    std::vector<double> wn(d.nw);
    for (std::size_t w = 0; w < d.nw; ++w) {
      wn[w] = spec.wavenumber_axis->first + spec.wavenumber_axis->second * static_cast<double>(w);
    }
    clean.wavenumbers = std::move(wn);
  }
  clean.validate();
  return {std::move(clean), std::move(truth)};
}

HyperCube corrupt(const HyperCube& clean, const NoiseSpec& noise) {
  noise.validate();
  clean.validate();
  const Dims d = clean.dims();
  const std::size_t slab = d.ny * d.nw;
  std::vector<double> base(clean.data().begin(), clean.data().end());
  std::vector<double> iid(clean.size(), 0.0), reso(clean.size(), 0.0), corr(clean.size(), 0.0);

  // Pointwise terms: one stream per x-slab.
  if (noise.poisson_gain > 0 || noise.sigma_iid > 0 || noise.k_resonance > 0) {
    parallel_for(d.nx, [&](std::size_t x) {
      const std::size_t off = x * slab;
      if (noise.poisson_gain > 0) {
        std::mt19937_64 rng(derive_seed(derive_seed(noise.seed, kPoisson), x));
        for (std::size_t i = off; i < off + slab; ++i) {
          const double mean = base[i] / noise.poisson_gain;
          if (mean > 0) {
            std::poisson_distribution<long long> pd(mean);
            base[i] = noise.poisson_gain * static_cast<double>(pd(rng));
          } else {
            base[i] = 0.0;
          }
        }
      }
      if (noise.sigma_iid > 0) {
        std::mt19937_64 rng(derive_seed(derive_seed(noise.seed, kIid), x));
        std::normal_distribution<double> nd(0.0, 1.0);
        for (std::size_t i = off; i < off + slab; ++i) iid[i] = noise.sigma_iid * nd(rng);
      }
      if (noise.k_resonance > 0) {
        std::mt19937_64 rng(derive_seed(derive_seed(noise.seed, kResonance), x));
        std::normal_distribution<double> nd(0.0, 1.0);
        for (std::size_t i = off; i < off + slab; ++i) {
          reso[i] = noise.k_resonance * std::abs(static_cast<double>(clean.data()[i])) * nd(rng);
        }
      }
    });
  }

  // AR(1) along the correlation axis, restarted (from the stationary law) on every line.
  if (noise.sigma_corr > 0) {
    const Axis axis = noise.corr_axis.value_or(clean.fast_axis);
    const Lines lines = lines_along(d, axis);
    const double rho = noise.rho_fast;
    const double innov = noise.sigma_corr * std::sqrt(1.0 - rho * rho);
    parallel_for(lines.count, [&](std::size_t line) {
      const std::size_t start = lines.start(line);
      std::mt19937_64 rng(derive_seed(derive_seed(noise.seed, kCorrelated), line));
      std::normal_distribution<double> nd(0.0, 1.0);
      double v = noise.sigma_corr * nd(rng);
      corr[start] = v;
      for (std::size_t t = 1; t < lines.length; ++t) {
        v = rho * v + innov * nd(rng);
        corr[start + t * lines.stride] = v;
      }
    });
  }

  std::vector<float> out(clean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(base[i] + iid[i] + corr[i] + reso[i]);
  }
  return clean.with_data(std::move(out));
}

// JSON ----------------------------------------------------------------------

namespace {

SpatialShape shape_from_json(const json& j) {
  config::check_keys(j, {"shape", "center", "radius", "sigma", "amplitude"}, "phantom shape");
  SpatialShape s;
  const auto kind = j.at("shape").get<std::string>();
  if (kind == "disk") {
    s.kind = SpatialShape::Kind::Disk;
    s.radius = j.at("radius").get<double>();
  } else if (kind == "blob") {
    s.kind = SpatialShape::Kind::Blob;
    s.radius = j.at("sigma").get<double>();
  } else if (kind == "constant") {
    s.kind = SpatialShape::Kind::Constant;
  } else {
    throw Error("phantom shape: unknown kind '" + kind + "'");
  }
  if (s.kind != SpatialShape::Kind::Constant) {
    const auto c = j.at("center").get<std::vector<double>>();
    if (c.size() != 2) throw Error("phantom shape: center must be [x, y]");
    s.cx = c[0];
    s.cy = c[1];
  }
  s.amplitude = config::get_or(j, "amplitude", 1.0);
  return s;
}

json shape_to_json(const SpatialShape& s) {
  json j;
  switch (s.kind) {
    case SpatialShape::Kind::Disk:
      j["shape"] = "disk";
      j["radius"] = s.radius;
      j["center"] = {s.cx, s.cy};
      break;
    case SpatialShape::Kind::Blob:
      j["shape"] = "blob";
      j["sigma"] = s.radius;
      j["center"] = {s.cx, s.cy};
      break;
    case SpatialShape::Kind::Constant:
      j["shape"] = "constant";
      break;
  }
  j["amplitude"] = s.amplitude;
  return j;
}

}  // namespace

PhantomSpec phantom_from_json(const json& j) {
  config::check_keys(j, {"version", "dims", "components", "background", "fast_axis",
                         "pixel_size_nm", "wavenumbers"},
                     "phantom spec");
  config::check_version(j, 1, "phantom spec");
  PhantomSpec s;
  try {
    const auto d = j.at("dims").get<std::vector<std::size_t>>();
    if (d.size() != 3) throw Error("phantom spec: dims must be [nx, ny, nw]");
    s.dims = {d[0], d[1], d[2]};
    s.background = config::get_or(j, "background", 0.0);
    if (j.contains("fast_axis")) s.fast_axis = parse_axis(j["fast_axis"].get<std::string>());
    if (j.contains("pixel_size_nm")) s.pixel_size_nm = j["pixel_size_nm"].get<double>();
    if (j.contains("wavenumbers")) {
      const auto& w = j["wavenumbers"];
      config::check_keys(w, {"start", "step"}, "phantom wavenumbers");
      s.wavenumber_axis = std::make_pair(w.at("start").get<double>(), w.at("step").get<double>());
    }
    for (const auto& cj : j.at("components")) {
      config::check_keys(cj, {"name", "shapes", "peaks"}, "phantom component");
      Component c;
      c.name = config::get_or<std::string>(cj, "name", "c" + std::to_string(s.components.size()));
      for (const auto& sj : cj.at("shapes")) c.shapes.push_back(shape_from_json(sj));
      for (const auto& pj : cj.at("peaks")) {
        config::check_keys(pj, {"center", "width", "height"}, "phantom peak");
        c.peaks.push_back({pj.at("center").get<double>(), pj.at("width").get<double>(),
                           pj.at("height").get<double>()});
      }
      s.components.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("phantom spec: ") + e.what());
  }
  s.validate();
  return s;
}

json phantom_to_json(const PhantomSpec& s) {
  json j;
  j["version"] = 1;
  j["dims"] = {s.dims.nx, s.dims.ny, s.dims.nw};
  j["background"] = s.background;
  j["fast_axis"] = std::string(axis_name(s.fast_axis));
  if (s.pixel_size_nm) j["pixel_size_nm"] = *s.pixel_size_nm;
  if (s.wavenumber_axis) {
    j["wavenumbers"] = {{"start", s.wavenumber_axis->first}, {"step", s.wavenumber_axis->second}};
  }
  j["components"] = json::array();
  for (const auto& c : s.components) {
    json cj;
    cj["name"] = c.name;
    cj["shapes"] = json::array();
    for (const auto& sh : c.shapes) cj["shapes"].push_back(shape_to_json(sh));
    cj["peaks"] = json::array();
    for (const auto& p : c.peaks) {
      cj["peaks"].push_back({{"center", p.center}, {"width", p.width}, {"height", p.height}});
    }
    j["components"].push_back(std::move(cj));
  }
  return j;
}

NoiseSpec noise_from_json(const json& j) {
  config::check_keys(j, {"version", "sigma_iid", "rho_fast", "sigma_corr", "k_resonance",
                         "poisson_gain", "seed", "corr_axis"},
                     "noise spec");
  config::check_version(j, 1, "noise spec");
  NoiseSpec n;
  try {
    n.sigma_iid = config::get_or(j, "sigma_iid", 0.0);
    n.rho_fast = config::get_or(j, "rho_fast", 0.0);
    n.sigma_corr = config::get_or(j, "sigma_corr", 0.0);
    n.k_resonance = config::get_or(j, "k_resonance", 0.0);
    n.poisson_gain = config::get_or(j, "poisson_gain", 0.0);
    n.seed = config::get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("corr_axis")) n.corr_axis = parse_axis(j["corr_axis"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(std::string("noise spec: ") + e.what());
  }
  n.validate();
  return n;
}

json noise_to_json(const NoiseSpec& n) {
  json j;
  j["version"] = 1;
  j["sigma_iid"] = n.sigma_iid;
  j["rho_fast"] = n.rho_fast;
  j["sigma_corr"] = n.sigma_corr;
  j["k_resonance"] = n.k_resonance;
  j["poisson_gain"] = n.poisson_gain;
  j["seed"] = n.seed;
  if (n.corr_axis) j["corr_axis"] = std::string(axis_name(*n.corr_axis));
  return j;
}

}  // namespace spend::synth
