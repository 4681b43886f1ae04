#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "spend/cube.hpp"

namespace spend {

// On-disk cube: `<stem>.json` sidecar plus `<stem>.raw` little-endian f32
// payload in (x, y, w) order with w fastest. The sidecar carries dims,
// axis_order, dtype ("f32le"), optional wavenumbers / pixel_size_nm,
// fast_axis and the CRC32 of the payload bytes.

/// `a`, `a.json` and `a.raw` all name the same cube.
std::filesystem::path cube_stem(const std::filesystem::path& p);

void save_cube(const HyperCube& cube, const std::filesystem::path& path,
               std::optional<std::uint64_t> seed = std::nullopt);

HyperCube load_cube(const std::filesystem::path& path);

/// CRC32 of the payload as it is written to disk.
std::uint32_t payload_crc32(const HyperCube& cube);

/// Seed recorded in a cube sidecar, if any.
std::optional<std::uint64_t> load_cube_seed(const std::filesystem::path& path);

}  // namespace spend
