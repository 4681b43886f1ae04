#include "spend/nnet/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "spend/nnet/train.hpp"

namespace spend::nnet {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'E', 'N', 'D', 'C', 'K', '1'};
constexpr int kVersion = 1;

std::vector<unsigned char> encode(const std::vector<float>& p) {
  std::vector<unsigned char> out(p.size() * 4);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(p[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  return out;
}

std::uint32_t crc(const std::vector<unsigned char>& bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

void save_checkpoint(const DenoiserModel& model, const std::filesystem::path& path) {
  const auto payload = encode(model.params);
  nlohmann::json h;
  h["version"] = kVersion;
  h["config"] = model_config_to_json(model.config);
  h["axis"] = std::string(axis_name(model.axis));
  h["input_scale"] = model.input_scale;
  h["diverged"] = model.diverged;
  h["param_count"] = model.params.size();
  h["payload_crc32"] = crc(payload);
  h["dtype"] = "f32le";
  auto& hist = h["history"] = nlohmann::json::array();
  for (const auto& r : model.history) hist.push_back({r.epoch, r.train_loss, r.val_loss});
  const std::string header = h.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, 8);
  std::uint64_t len = header.size();
  unsigned char lb[8];
  for (int b = 0; b < 8; ++b) lb[b] = static_cast<unsigned char>(len >> (8 * b));
  out.write(reinterpret_cast<const char*>(lb), 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

DenoiserModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  unsigned char lb[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error("not a checkpoint (bad magic): " + path.string());
  }
  if (!in.read(reinterpret_cast<char*>(lb), 8)) throw Error("truncated checkpoint " + path.string());
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(lb[b]) << (8 * b);
  if (len > (1u << 26)) throw Error("checkpoint header too large: " + path.string());
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
    throw Error("truncated checkpoint header " + path.string());
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint header " + path.string() + ": " + e.what());
  }
  if (h.value("version", 0) != kVersion) throw Error("unsupported checkpoint version in " + path.string());

  DenoiserModel m = build_model(model_config_from_json(h.at("config")));
  const std::size_t count = h.at("param_count").get<std::size_t>();
  if (count != m.params.size()) {
    throw Error("checkpoint has " + std::to_string(count) + " parameters, config implies " +
                std::to_string(m.params.size()));
  }
  std::vector<unsigned char> payload(count * 4);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()))) {
    throw Error("truncated checkpoint payload " + path.string());
  }
  if (crc(payload) != h.at("payload_crc32").get<std::uint32_t>()) {
    throw Error("checkpoint payload checksum mismatch in " + path.string());
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    m.params[i] = std::bit_cast<float>(u);
    if (!std::isfinite(m.params[i])) throw Error("non-finite weight in checkpoint " + path.string());
  }
  m.axis = parse_axis(h.at("axis").get<std::string>());
  m.input_scale = h.at("input_scale").get<float>();
  m.diverged = h.value("diverged", false);
  for (const auto& r : h.at("history")) {
    m.history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
  }
  return m;
}

}  // namespace spend::nnet
