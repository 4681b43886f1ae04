#pragma once

#include <cstddef>
#include <utility>

#include "json.hpp"
#include "spend/cube.hpp"

namespace spend::permute {

/// Training pairs built from odd/even slices along one axis. Slices are
/// numbered from 0, so "even" means 0, 2, 4, ...
///   input  = [s0, s2, ..., s1, s3, ...]
///   target = [s1, s3, ..., s0, s2, ...]
/// An unpaired last slice (odd extent) is dropped.
struct PairSet {
  HyperCube input;
  HyperCube target;
  Axis axis = Axis::W;
  std::size_t n_original = 0;
  bool parity_dropped = false;
};

PairSet split_permute(const HyperCube& cube, Axis axis);

/// Original slice index behind frame i of the input / target stack, for a
/// permuted extent m (even).
std::size_t input_source(std::size_t i, std::size_t m);
std::size_t target_source(std::size_t i, std::size_t m);

/// Undoes the permutation of both stacks; each result equals the original
/// cube without any dropped slice.
std::pair<HyperCube, HyperCube> restore_order(const PairSet& pairs);

/// Copies the plane at `from` along `axis` of src into plane `to` of dst.
void copy_plane(const HyperCube& src, std::size_t from, HyperCube& dst, std::size_t to, Axis axis);

/// Sidecar for emitted pair stacks.
nlohmann::json meta_to_json(const PairSet& p);
void apply_meta(const nlohmann::json& j, PairSet& p);

}  // namespace spend::permute
