#include "can/run_config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace can {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

ModelSpec RunConfig::model_spec() const {
  ModelSpec spec;
  const int image = model_image > 0 ? model_image : (data_kind == "synthetic" ? aug.out_h : 32);
  if (model_preset == "vit-micro")
    spec = vit_micro(image, model_patch > 0 ? model_patch : 4);
  else if (model_preset == "vit-s")
    spec = vit_s(image, model_patch > 0 ? model_patch : 16);
  else if (model_preset == "vit-b")
    spec = vit_b(image, model_patch > 0 ? model_patch : 16);
  else if (model_preset == "vit-l")
    spec = vit_l(image, model_patch > 0 ? model_patch : 16);
  else if (model_preset == "vit-h")
    spec = vit_h(image, model_patch > 0 ? model_patch : 14);
  else
    check_arg(false, "model.preset: unknown preset '" + model_preset + "'");
  return spec;
}

Dataset RunConfig::load_dataset(bool train_split) const {
  if (data_kind == "cifar10") return load_cifar10_dir(data_path, train_split);
  SyntheticConfig sc;
  sc.count = data_count;
  sc.num_classes = data_classes;
  sc.height = model_image > 0 ? model_image : aug.out_h;
  sc.width = sc.height;
  sc.seed = train_split ? data_seed : data_seed + 0x5EED;
  return make_synthetic_dataset(sc);
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> errors;
  auto expect = [&](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) errors.push_back(key + ": " + msg);
  };
  try {
    TrainConfig t = train;
    t.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("train: ") + e.what());
  }
  try {
    aug.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("aug: ") + e.what());
  }
  expect(data_kind == "synthetic" || data_kind == "cifar10", "data.kind",
         "must be synthetic or cifar10");
  if (data_kind == "cifar10")
    expect(!data_path.empty(), "data.path", "required for cifar10 datasets");
  if (data_kind == "synthetic") {
    expect(data_count >= 1, "data.count", "must be >= 1");
    expect(data_classes >= 2 && data_classes <= 10, "data.classes", "must be in [2,10]");
  }
  expect(!out_dir.empty(), "out_dir", "must not be empty");
  try {
    const ModelSpec spec = model_spec();
    spec.validate();
    expect(aug.out_h == spec.image_h && aug.out_w == spec.image_w, "aug.out",
           "augmentation output must match the model image size");
    expect(unmasked_count_for(spec.tokens(), train.mask_rate) >= 1, "mask_rate",
           "leaves no unmasked patch for this grid");
  } catch (const std::exception& e) {
    errors.push_back(std::string("model: ") + e.what());
  }
  return errors;
}

std::map<std::string, std::string> RunConfig::to_keys() const {
  std::map<std::string, std::string> kv;
  auto put = [&](const std::string& k, auto v) {
    std::ostringstream os;
    os << v;
    kv[k] = os.str();
  };
  put("method", train.method);
  put("seed", train.seed);
  put("out_dir", out_dir);
  put("mask_rate", train.mask_rate);
  put("sigma_max", train.sigma_max);
  put("lambda_infonce", train.lambda_infonce);
  put("lambda", train.lambda);
  put("tau", train.tau);
  put("base_lr", train.base_lr);
  put("weight_decay", train.weight_decay);
  put("batch_size", train.batch_size);
  put("warmup_epochs", train.warmup_epochs);
  put("total_epochs", train.total_epochs);
  put("log_every", train.log_every);
  put("checkpoint_every", train.checkpoint_every);
  put("sigma_encoding", train.sigma_encoding ? "true" : "false");
  put("views", train.views);
  put("model.preset", model_preset);
  put("model.patch", model_patch);
  put("model.image", model_image);
  put("data.kind", data_kind);
  put("data.path", data_path);
  put("data.count", data_count);
  put("data.classes", data_classes);
  put("data.seed", data_seed);
  put("aug.crop_scale_lo", aug.crop_scale_lo);
  put("aug.crop_scale_hi", aug.crop_scale_hi);
  put("aug.jitter_strength", aug.jitter_strength);
  put("aug.grayscale_prob", aug.grayscale_prob);
  put("aug.blur_prob", aug.blur_prob);
  put("aug.flip_prob", aug.flip_prob);
  put("aug.out_h", aug.out_h);
  put("aug.out_w", aug.out_w);
  return kv;
}

void RunConfig::set_key(const std::string& key, const std::string& value) {
  auto as_double = [&](double& dst) {
    try {
      dst = std::stod(value);
    } catch (...) {
      check_arg(false, key + ": not a number: '" + value + "'");
    }
  };
  auto as_int = [&](int& dst) {
    try {
      dst = std::stoi(value);
    } catch (...) {
      check_arg(false, key + ": not an integer: '" + value + "'");
    }
  };
  auto as_u64 = [&](std::uint64_t& dst) {
    try {
      dst = std::stoull(value);
    } catch (...) {
      check_arg(false, key + ": not an integer: '" + value + "'");
    }
  };
  auto as_bool = [&](bool& dst) {
    check_arg(parse_bool(value, dst), key + ": not a boolean: '" + value + "'");
  };

  if (key == "method") train.method = value;
  else if (key == "seed") as_u64(train.seed);
  else if (key == "out_dir") out_dir = value;
  else if (key == "mask_rate") as_double(train.mask_rate);
  else if (key == "sigma_max") as_double(train.sigma_max);
  else if (key == "lambda_infonce") as_double(train.lambda_infonce);
  else if (key == "lambda") as_double(train.lambda);
  else if (key == "tau") as_double(train.tau);
  else if (key == "base_lr") as_double(train.base_lr);
  else if (key == "weight_decay") as_double(train.weight_decay);
  else if (key == "batch_size") as_int(train.batch_size);
  else if (key == "warmup_epochs") as_int(train.warmup_epochs);
  else if (key == "total_epochs") as_int(train.total_epochs);
  else if (key == "log_every") as_int(train.log_every);
  else if (key == "checkpoint_every") as_int(train.checkpoint_every);
  else if (key == "sigma_encoding") as_bool(train.sigma_encoding);
  else if (key == "views") as_int(train.views);
  else if (key == "model.preset") model_preset = value;
  else if (key == "model.patch") as_int(model_patch);
  else if (key == "model.image") as_int(model_image);
  else if (key == "data.kind") data_kind = value;
  else if (key == "data.path") data_path = value;
  else if (key == "data.count") as_int(data_count);
  else if (key == "data.classes") as_int(data_classes);
  else if (key == "data.seed") as_u64(data_seed);
  else if (key == "aug.crop_scale_lo") as_double(aug.crop_scale_lo);
  else if (key == "aug.crop_scale_hi") as_double(aug.crop_scale_hi);
  else if (key == "aug.jitter_strength") as_double(aug.jitter_strength);
  else if (key == "aug.grayscale_prob") as_double(aug.grayscale_prob);
  else if (key == "aug.blur_prob") as_double(aug.blur_prob);
  else if (key == "aug.flip_prob") as_double(aug.flip_prob);
  else if (key == "aug.out_h") as_int(aug.out_h);
  else if (key == "aug.out_w") as_int(aug.out_w);
  else check_arg(false, "unknown config key '" + key + "'");
}

void RunConfig::write_resolved(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  check_run(static_cast<bool>(out), "config: cannot write " + path);
  for (const auto& [k, v] : to_keys()) out << k << " = " << v << "\n";
}

RunConfig parse_config_file(const std::string& path, std::vector<std::string>& errors) {
  RunConfig cfg;
  std::ifstream in(path);
  if (!in) {
    errors.push_back("config: cannot open " + path);
    return cfg;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set_key(key, value);
    } catch (const std::exception& e) {
      errors.push_back(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

}  // namespace can
