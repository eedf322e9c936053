#pragma once

#include <map>
#include <string>
#include <vector>

#include "can/augment.hpp"
#include "can/dataset.hpp"
#include "can/model.hpp"
#include "can/optimizer.hpp"

namespace can {

// Merged operator-facing configuration. Flat text config with dotted keys
// ("train.base_lr = 1.5e-3"), every field overridable by a CLI flag; the
// resolved key set is written verbatim into the output directory.
struct RunConfig {
  TrainConfig train;
  AugmentConfig aug;
  std::string model_preset = "vit-micro";
  int model_patch = 0;  // 0: preset default
  int model_image = 0;  // 0: preset default
  std::string data_kind = "synthetic";  // synthetic | cifar10
  std::string data_path;
  int data_count = 1024;
  int data_classes = 4;
  std::uint64_t data_seed = 7;
  std::string out_dir = "runs/out";

  ModelSpec model_spec() const;
  Dataset load_dataset(bool train_split = true) const;

  // Returns every offending key with a message; empty means valid.
  std::vector<std::string> validate() const;

  std::map<std::string, std::string> to_keys() const;
  void set_key(const std::string& key, const std::string& value);
  void write_resolved(const std::string& path) const;
};

// Parses "key = value" lines ('#' comments, blank lines allowed). Unknown
// keys are reported, not ignored.
RunConfig parse_config_file(const std::string& path, std::vector<std::string>& errors);

}  // namespace can
