#pragma once

// Checkpoint container, little-endian throughout:
//
//   bytes 0..7    magic "AFGCKPT\0"
//   bytes 8..11   uint32 format version (1)
//   bytes 12..19  uint64 header length H
//   next H bytes  UTF-8 JSON header:
//                   {"model_config": {...},
//                    "tokenizer": {"kind": "word"|"char", "units": [...]},
//                    "params": [{"name", "shape", "trainable", "offset"}, ...],
//                    "adapters": [{"target", "rank", "alpha"}, ...],
//                    "meta": {...}}
//   remainder     float64 values of every parameter, concatenated in
//                 "params" order; "offset" counts values, not bytes
//
// Loading reproduces every parameter bit-for-bit.

#include <filesystem>

#include "afg/model/model.hpp"
#include "json.hpp"

namespace afg::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
Model load_checkpoint(const std::filesystem::path& path);
nlohmann::json load_checkpoint_meta(const std::filesystem::path& path);

}  // namespace afg::model
