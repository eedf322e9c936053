#pragma once

#include <cstdint>
#include <string>

#include "can/model.hpp"

namespace can {

// Checkpointable unit: parameters, optimizer moments, step counter, seed.
struct TrainState {
  ModelSpec spec;
  Params<float> params;
  Params<float> m;
  Params<float> v;
  long long step = 0;
  std::uint64_t seed = 1;
};

TrainState init_train_state(const ModelSpec& spec, std::uint64_t seed);

// Self-describing binary container: magic/version tag, the ModelSpec, named
// float32 little-endian arrays (parameters, then adam moments as "m:..." /
// "v:..."), the step counter and seed. Writes go to a temp file first and are
// renamed into place.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

// Spec stored in a checkpoint without loading the arrays.
ModelSpec peek_checkpoint_spec(const std::string& path);

}  // namespace can
