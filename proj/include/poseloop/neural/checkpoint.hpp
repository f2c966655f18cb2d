#pragma once

#include <filesystem>

#include "poseloop/neural/param.hpp"

namespace poseloop::neural {

// Checkpoint file: 8-byte magic, u64 little-endian header length, JSON header
// (parameter names/shapes, seed, step), then one raw f64 column-major block
// per parameter in header order. Round trips are bit-exact.
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);

// Fills an already-constructed store; throws DataError on magic/version
// mismatch, parameter name or shape mismatch, or a truncated payload.
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace poseloop::neural
