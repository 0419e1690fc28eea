#ifndef GTFD_CHECKPOINT_HPP
#define GTFD_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "gtfd/train.hpp"

namespace gtfd {

// On-disk training snapshot. `records` holds 64-bit masters for network
// parameters and Adam moments; the file stores them as 32-bit floats in
// the record table plus a raw 64-bit section for exact resume.
struct Checkpoint {
  nlohmann::json config;  // full config document as accepted by `train`
  int64_t step = 0;
  uint64_t rng_state = 0;
  std::map<std::string, int64_t> adam_steps;   // "g", "c_yd", "c_eta"
  std::map<std::string, Tensor> records;       // "<net>/<param>" and "adam/<net>/<m|v>/<param>"
};

// File layout (all integers little-endian): "GTFD", u32 version=1,
// u32 record count, per record {u32 name length, name bytes, u32 ndim,
// u32 dims..., f32 data}, u64 JSON length + JSON bytes, then f64 data
// for every record in table order.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// TrainConfig <-> JSON with unknown-key rejection; missing keys keep
// their defaults.
nlohmann::json config_to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j);

// Trainer state capture / restore (parameters, moments, rng, step).
Checkpoint snapshot(Trainer& trainer, nlohmann::json config);
void restore(Trainer& trainer, const Checkpoint& ck);

}  // namespace gtfd

#endif
