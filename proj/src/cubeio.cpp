#include "spend/cubeio.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace spend {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::vector<unsigned char> to_le_bytes(std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(u & 0xffu);
    bytes[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xffu);
    bytes[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xffu);
    bytes[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xffu);
  }
  return bytes;
}

std::uint32_t crc_of(const std::vector<unsigned char>& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

json read_sidecar(const fs::path& stem) {
  const fs::path meta = fs::path(stem).concat(".json");
  std::ifstream in(meta);
  if (!in) throw Error("cannot open cube header " + meta.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed cube header " + meta.string() + ": " + e.what());
  }
}

}  // namespace

fs::path cube_stem(const fs::path& p) {
  const auto ext = p.extension();
  if (ext == ".json" || ext == ".raw") return fs::path(p).replace_extension();
  return p;
}

std::uint32_t payload_crc32(const HyperCube& cube) { return crc_of(to_le_bytes(cube.data())); }

void save_cube(const HyperCube& cube, const fs::path& path, std::optional<std::uint64_t> seed) {
  cube.validate();
  const fs::path stem = cube_stem(path);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

  const auto bytes = to_le_bytes(cube.data());
  json meta;
  meta["version"] = kFormatVersion;
  meta["dims"] = {cube.nx(), cube.ny(), cube.nw()};
  meta["axis_order"] = "xyw";
  meta["dtype"] = "f32le";
  meta["fast_axis"] = std::string(axis_name(cube.fast_axis));
  meta["checksum"] = crc_of(bytes);
  if (cube.wavenumbers) meta["wavenumbers"] = *cube.wavenumbers;
  if (cube.pixel_size_nm) meta["pixel_size_nm"] = *cube.pixel_size_nm;
  if (seed) meta["seed"] = *seed;

  {
    std::ofstream raw(fs::path(stem).concat(".raw"), std::ios::binary | std::ios::trunc);
    if (!raw) throw Error("cannot write " + stem.string() + ".raw");
    raw.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!raw) throw Error("I/O failure writing " + stem.string() + ".raw");
  }
  std::ofstream js(fs::path(stem).concat(".json"), std::ios::trunc);
  if (!js) throw Error("cannot write " + stem.string() + ".json");
  js << meta.dump(2) << '\n';
  if (!js) throw Error("I/O failure writing " + stem.string() + ".json");
}

HyperCube load_cube(const fs::path& path) {
  const fs::path stem = cube_stem(path);
  const json meta = read_sidecar(stem);

  std::array<std::size_t, 3> dims{};
  std::string order;
  std::uint32_t checksum = 0;
  try {
    if (meta.at("dtype").get<std::string>() != "f32le") {
      throw Error("unsupported dtype in " + stem.string() + ".json");
    }
    const auto d = meta.at("dims").get<std::vector<std::size_t>>();
    if (d.size() != 3) throw Error("cube header must list exactly 3 dims");
    std::copy(d.begin(), d.end(), dims.begin());
    order = meta.value("axis_order", std::string("xyw"));
    checksum = meta.at("checksum").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw Error("malformed cube header " + stem.string() + ".json: " + e.what());
  }
  std::string sorted = order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != "wxy") throw Error("axis_order must be a permutation of x, y, w; got " + order);
  for (auto n : dims) {
    if (n == 0) throw Error("cube dimensions must all be >= 1");
  }

  std::ifstream raw(fs::path(stem).concat(".raw"), std::ios::binary);
  if (!raw) throw Error("cannot open cube payload " + stem.string() + ".raw");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)),
                                   std::istreambuf_iterator<char>());
  const std::size_t expected = dims[0] * dims[1] * dims[2];
  if (bytes.size() != expected * 4) {
    throw Error("dimension mismatch: header " + std::to_string(dims[0]) + "x" +
                std::to_string(dims[1]) + "x" + std::to_string(dims[2]) + " needs " +
                std::to_string(expected * 4) + " payload bytes, file has " +
                std::to_string(bytes.size()));
  }
  if (crc_of(bytes) != checksum) throw Error("checksum mismatch in " + stem.string() + ".raw");

  std::vector<float> stored(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    stored[i] = std::bit_cast<float>(u);
  }

  // Position of each canonical axis in the stored order.
  std::array<std::size_t, 3> pos{};
  for (std::size_t k = 0; k < 3; ++k) {
    pos[static_cast<std::size_t>(parse_axis(std::string(1, order[k])))] = k;
  }
  const Dims canon{dims[pos[0]], dims[pos[1]], dims[pos[2]]};
  std::vector<float> values;
  if (order == "xyw") {
    values = std::move(stored);
  } else {
    values.resize(expected);
    std::array<std::size_t, 3> stride{dims[1] * dims[2], dims[2], 1};
    std::size_t i = 0;
    for (std::size_t x = 0; x < canon.nx; ++x)
      for (std::size_t y = 0; y < canon.ny; ++y)
        for (std::size_t w = 0; w < canon.nw; ++w)
          values[i++] = stored[x * stride[pos[0]] + y * stride[pos[1]] + w * stride[pos[2]]];
  }

  HyperCube cube(canon, std::move(values));
  try {
    if (meta.contains("wavenumbers")) {
      cube.wavenumbers = meta["wavenumbers"].get<std::vector<double>>();
    }
    if (meta.contains("pixel_size_nm")) cube.pixel_size_nm = meta["pixel_size_nm"].get<double>();
    if (meta.contains("fast_axis")) {
      cube.fast_axis = parse_axis(meta["fast_axis"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error("malformed cube header " + stem.string() + ".json: " + e.what());
  }
  cube.validate();
  return cube;
}

std::optional<std::uint64_t> load_cube_seed(const fs::path& path) {
  const json meta = read_sidecar(cube_stem(path));
  if (!meta.contains("seed")) return std::nullopt;
  return meta["seed"].get<std::uint64_t>();
}

}  // namespace spend
