// Operator CLI: pretraining, probing, cost analysis, plot emission.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "can/cost_model.hpp"
#include "can/eval.hpp"
#include "can/plot.hpp"
#include "can/run_config.hpp"
#include "can/trainer.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Override {
  std::string key, value;
};

// Flags mirror config keys: dots and underscores become dashes, the train.*
// prefix is dropped (those are the primary knobs).
void add_config_flags(CLI::App* cmd, std::vector<Override>& overrides) {
  static const char* keys[] = {
      "method",         "seed",          "out_dir",        "mask_rate",
      "sigma_max",      "lambda_infonce", "lambda",        "tau",
      "base_lr",        "weight_decay",  "batch_size",     "warmup_epochs",
      "total_epochs",   "log_every",     "checkpoint_every", "sigma_encoding",
      "views",          "model.preset",  "model.patch",    "model.image",
      "data.kind",      "data.path",     "data.count",     "data.classes",
      "data.seed",      "aug.crop_scale_lo", "aug.crop_scale_hi", "aug.jitter_strength",
      "aug.grayscale_prob", "aug.blur_prob", "aug.flip_prob", "aug.out_h", "aug.out_w"};
  for (const char* key : keys) {
    std::string flag = "--";
    for (const char* c = key; *c; ++c) flag += (*c == '.' || *c == '_') ? '-' : *c;
    const std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&overrides, k](const std::string& v) { overrides.push_back({k, v}); });
  }
}

can::RunConfig resolve_config(const std::string& config_path, const std::vector<Override>& overrides,
                         bool apply_preset = true) {
  std::vector<std::string> errors;
  can::RunConfig cfg;
  if (!config_path.empty()) cfg = can::parse_config_file(config_path, errors);
  for (const auto& o : overrides) {
    try {
      cfg.set_key(o.key, o.value);
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (apply_preset && errors.empty()) cfg.train.apply_method_preset();
  if (errors.empty()) {
    const auto v = cfg.validate();
    errors.insert(errors.end(), v.begin(), v.end());
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& e : errors) os << "\n  " << e;
    throw std::invalid_argument(os.str());
  }
  return cfg;
}

int cmd_pretrain(const std::string& config_path, const std::vector<Override>& overrides,
                 const std::string& resume) {
  can::RunConfig cfg = resolve_config(config_path, overrides);
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  can::check_run(!ec, "cannot create out_dir " + cfg.out_dir);
  cfg.write_resolved((fs::path(cfg.out_dir) / "config.resolved").string());

  const can::Dataset data = cfg.load_dataset(true);
  const can::ModelSpec spec = cfg.model_spec();
  const auto result = can::train_loop(cfg.train, cfg.aug, spec, data, cfg.out_dir, resume);
  std::cout << "trained " << result.steps << " steps; final l_total=" << result.last.l_total
            << "\n  metrics:    " << result.metrics_path
            << "\n  checkpoint: " << result.checkpoint_path << "\n";
  return 0;
}

int cmd_probe(const std::string& checkpoint, const std::string& config_path,
              const std::vector<Override>& overrides, int k, int repeats,
              const std::string& out_json, const std::string& features_out) {
  can::RunConfig cfg = resolve_config(config_path, overrides, /*apply_preset=*/false);
  const can::TrainState state = can::load_checkpoint(checkpoint);
  const can::ModelSpec configured = cfg.model_spec();
  can::check_arg(configured.encoder.width == state.spec.encoder.width &&
                     configured.encoder.depth == state.spec.encoder.depth &&
                     configured.patch == state.spec.patch,
                 "probe: checkpoint spec does not match the configured model");

  const can::Dataset train_data = cfg.load_dataset(true);
  const can::Dataset test_data = cfg.load_dataset(false);
  const can::FeatureSet train_fs = can::extract_features(state, train_data);
  const can::FeatureSet test_fs = can::extract_features(state, test_data);
  if (!features_out.empty()) can::save_feature_set(features_out, train_fs);

  json out;
  out["checkpoint"] = checkpoint;
  out["train_samples"] = train_fs.size();
  out["test_samples"] = test_fs.size();
  if (k > 0) {
    const can::KShotResult r =
        can::k_shot_probe(train_fs, test_fs, k, repeats, can::Rng(cfg.train.seed));
    out["k"] = k;
    out["repeats"] = r.repeats;
    out["mean"] = r.mean;
    out["std"] = r.stddev;
    out["accuracies"] = r.accuracies;
  } else {
    out["top1"] = can::linear_probe(train_fs, test_fs);
  }
  const std::string text = out.dump(2);
  std::cout << text << "\n";
  if (!out_json.empty()) {
    std::ofstream f(out_json, std::ios::trunc);
    can::check_run(static_cast<bool>(f), "probe: cannot write " + out_json);
    f << text << "\n";
  }
  return 0;
}

int cmd_flops(const std::string& model, const std::string& method, double mask_rate,
              double mae_mask_rate, const std::string& csv_out) {
  std::vector<std::pair<std::string, can::ModelSpec>> specs;
  auto add = [&](const std::string& name) {
    if (name == "vit-micro") specs.emplace_back(name, can::vit_micro());
    else if (name == "vit-s") specs.emplace_back(name, can::vit_s());
    else if (name == "vit-b") specs.emplace_back(name, can::vit_b());
    else if (name == "vit-l") specs.emplace_back(name, can::vit_l());
    else if (name == "vit-h") specs.emplace_back(name, can::vit_h());
    else can::check_arg(false, "flops: unknown model '" + name + "'");
  };
  if (model == "all")
    for (const char* m : {"vit-s", "vit-b", "vit-l", "vit-h"}) add(m);
  else
    add(model);

  std::vector<std::string> methods;
  if (method == "all")
    methods = {"can", "simclr", "mae"};
  else
    methods = {method};

  std::vector<can::CostReport> reports;
  for (const auto& [name, spec] : specs)
    for (const auto& m : methods)
      reports.push_back(
          can::method_flops(m, spec, m == "mae" ? mae_mask_rate : mask_rate, name));

  std::cout << can::cost_report_table(reports);
  if (!csv_out.empty()) {
    std::ofstream f(csv_out, std::ios::trunc);
    can::check_run(static_cast<bool>(f), "flops: cannot write " + csv_out);
    f << can::cost_report_csv(reports);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised pretraining with combined contrastive, reconstruction and "
               "denoising objectives"};
  app.require_subcommand(1);

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "run the training loop");
  std::string pre_config, pre_resume;
  std::vector<Override> pre_overrides;
  pretrain->add_option("--config", pre_config, "key = value config file");
  pretrain->add_option("--resume", pre_resume, "checkpoint to resume from");
  add_config_flags(pretrain, pre_overrides);

  // probe
  auto* probe = app.add_subcommand("probe", "linear / k-shot probe of a frozen encoder");
  std::string probe_ckpt, probe_config, probe_out, probe_features;
  int probe_k = 0, probe_repeats = 5;
  std::vector<Override> probe_overrides;
  probe->add_option("--checkpoint", probe_ckpt, "trained checkpoint")->required();
  probe->add_option("--config", probe_config, "config file for data/model settings");
  probe->add_option("--k", probe_k, "k-shot probe with k examples per class");
  probe->add_option("--repeats", probe_repeats, "k-shot resamples");
  probe->add_option("--out", probe_out, "write accuracy JSON here");
  probe->add_option("--save-features", probe_features, "write the train feature cache here");
  add_config_flags(probe, probe_overrides);

  // flops
  auto* flops = app.add_subcommand("flops", "analytic forward-cost model");
  std::string flops_model = "vit-l", flops_method = "all", flops_csv;
  double flops_mask = 0.5, flops_mae_mask = 0.75;
  flops->add_option("--model", flops_model, "vit-micro|vit-s|vit-b|vit-l|vit-h|all");
  flops->add_option("--method", flops_method, "can|simclr|mae|all");
  flops->add_option("--mask-rate", flops_mask, "masking rate for can");
  flops->add_option("--mae-mask-rate", flops_mae_mask, "masking rate for mae");
  flops->add_option("--csv", flops_csv, "write the report CSV here");

  // plot
  auto* plot = app.add_subcommand("plot", "emit SVG charts from CSV inputs");
  plot->require_subcommand(1);
  auto* plot_loss = plot->add_subcommand("loss", "loss curves from metrics CSVs");
  std::vector<std::string> loss_inputs;
  std::string loss_out;
  plot_loss->add_option("--metrics", loss_inputs, "metrics CSV file(s)")->required();
  plot_loss->add_option("--out", loss_out, "output SVG")->required();
  auto* plot_sweep = plot->add_subcommand("sweep", "accuracy vs masking rate");
  std::string sweep_csv, sweep_out;
  plot_sweep->add_option("--csv", sweep_csv, "method,mask_rate,accuracy CSV")->required();
  plot_sweep->add_option("--out", sweep_out, "output SVG")->required();
  auto* plot_frontier = plot->add_subcommand("frontier", "accuracy vs forward FLOPs");
  std::string frontier_csv, frontier_out;
  plot_frontier->add_option("--csv", frontier_csv, "method,flops,accuracy CSV")->required();
  plot_frontier->add_option("--out", frontier_out, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(pre_config, pre_overrides, pre_resume);
    if (probe->parsed())
      return cmd_probe(probe_ckpt, probe_config, probe_overrides, probe_k, probe_repeats,
                       probe_out, probe_features);
    if (flops->parsed())
      return cmd_flops(flops_model, flops_method, flops_mask, flops_mae_mask, flops_csv);
    if (plot_loss->parsed()) {
      can::plot_loss_curves(loss_inputs, loss_out);
      std::cout << "wrote " << loss_out << "\n";
      return 0;
    }
    if (plot_sweep->parsed()) {
      can::plot_mask_rate_sweep(sweep_csv, sweep_out);
      std::cout << "wrote " << sweep_out << "\n";
      return 0;
    }
    if (plot_frontier->parsed()) {
      can::plot_flops_frontier(frontier_csv, frontier_out);
      std::cout << "wrote " << frontier_out << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
