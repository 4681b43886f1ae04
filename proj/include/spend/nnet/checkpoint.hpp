#pragma once

#include <filesystem>

#include "spend/nnet/model.hpp"

namespace spend::nnet {

/// Layout: 8-byte magic "SPENDCK1", little-endian u64 header length, JSON
/// header (version, config, axis, input_scale, history, parameter count,
/// payload CRC32), then the parameters as little-endian 32-bit floats.
void save_checkpoint(const DenoiserModel& model, const std::filesystem::path& path);
DenoiserModel load_checkpoint(const std::filesystem::path& path);

}  // namespace spend::nnet
