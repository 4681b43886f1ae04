#include "spend/permute.hpp"

#include "spend/config.hpp"

namespace spend::permute {

namespace {

Dims with_extent(Dims d, Axis axis, std::size_t n) {
  (axis == Axis::X ? d.nx : axis == Axis::Y ? d.ny : d.nw) = n;
  return d;
}

HyperCube empty_like(const HyperCube& c, Dims d) {
  HyperCube out(d);
  out.fast_axis = c.fast_axis;
  out.pixel_size_nm = c.pixel_size_nm;
  return out;
}

}  // namespace

std::size_t input_source(std::size_t i, std::size_t m) {
  const std::size_t half = m / 2;
  return i < half ? 2 * i : 2 * (i - half) + 1;
}

std::size_t target_source(std::size_t i, std::size_t m) {
  const std::size_t half = m / 2;
  return i < half ? 2 * i + 1 : 2 * (i - half);
}

void copy_plane(const HyperCube& src, std::size_t from, HyperCube& dst, std::size_t to, Axis axis) {
  const auto [rows, cols] = frame_shape(src.dims(), axis);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      switch (axis) {
        case Axis::X:
          dst(to, r, c) = src(from, r, c);
          break;
        case Axis::Y:
          dst(r, to, c) = src(r, from, c);
          break;
        case Axis::W:
          dst(r, c, to) = src(r, c, from);
          break;
      }
    }
  }
}

PairSet split_permute(const HyperCube& cube, Axis axis) {
  const std::size_t n = cube.extent(axis);
  if (n < 2) {
    throw Error("split_permute: axis " + std::string(axis_name(axis)) + " has extent " +
                std::to_string(n) + ", need >= 2");
  }
  const std::size_t m = 2 * (n / 2);
  const Dims d = with_extent(cube.dims(), axis, m);
  PairSet p{empty_like(cube, d), empty_like(cube, d), axis, n, n % 2 == 1};
  for (std::size_t i = 0; i < m; ++i) {
    copy_plane(cube, input_source(i, m), p.input, i, axis);
    copy_plane(cube, target_source(i, m), p.target, i, axis);
  }
  if (cube.wavenumbers && axis != Axis::W) {
    p.input.wavenumbers = cube.wavenumbers;
    p.target.wavenumbers = cube.wavenumbers;
  }
  return p;
}

std::pair<HyperCube, HyperCube> restore_order(const PairSet& p) {
  const std::size_t m = 2 * (p.n_original / 2);
  if (p.input.dims() != p.target.dims()) throw Error("restore_order: input/target shapes differ");
  if (p.input.extent(p.axis) != m) {
    throw Error("restore_order: stack extent " + std::to_string(p.input.extent(p.axis)) +
                " does not match n_original " + std::to_string(p.n_original));
  }
  if (p.parity_dropped != (p.n_original % 2 == 1)) {
    throw Error("restore_order: parity_dropped disagrees with n_original");
  }
  HyperCube a = empty_like(p.input, p.input.dims());
  HyperCube b = empty_like(p.target, p.target.dims());
  a.wavenumbers = p.input.wavenumbers;
  b.wavenumbers = p.target.wavenumbers;
  for (std::size_t i = 0; i < m; ++i) {
    copy_plane(p.input, i, a, input_source(i, m), p.axis);
    copy_plane(p.target, i, b, target_source(i, m), p.axis);
  }
  return {std::move(a), std::move(b)};
}

nlohmann::json meta_to_json(const PairSet& p) {
  return {{"version", 1},
          {"axis", std::string(axis_name(p.axis))},
          {"n_original", p.n_original},
          {"parity_dropped", p.parity_dropped},
          {"convention",
           "0-based slices; input = evens then odds, target = odds then evens; odd extents drop "
           "the last slice"}};
}

void apply_meta(const nlohmann::json& j, PairSet& p) {
  config::check_keys(j, {"version", "axis", "n_original", "parity_dropped", "convention"},
                     "pair metadata");
  config::check_version(j, 1, "pair metadata");
  p.axis = parse_axis(j.at("axis").get<std::string>());
  p.n_original = j.at("n_original").get<std::size_t>();
  p.parity_dropped = j.at("parity_dropped").get<bool>();
}

}  // namespace spend::permute
