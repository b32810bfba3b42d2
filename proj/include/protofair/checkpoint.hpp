#pragma once

#include <string>

#include "protofair/model.hpp"
#include "protofair/train_config.hpp"

namespace protofair {

inline constexpr const char* kCheckpointMagic = "PROTOFAIR-CKPT-v1";

// Binary layout: magic line, little-endian u64 JSON header length, JSON
// header (dimensions + the TrainConfig used), then the parameter matrices as
// row-major doubles in a fixed order.
void save_checkpoint(const PrototypeModel& model, const TrainConfig& config,
                     const std::string& path);

struct LoadedCheckpoint {
  PrototypeModel model;
  TrainConfig config;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace protofair
