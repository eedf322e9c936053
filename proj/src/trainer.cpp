#include "can/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>

namespace can {
namespace {

std::vector<int> epoch_order(int n, std::uint64_t seed, long long epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).derive(0xE70C5, static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);
  return order;
}

PipelineConfig pipeline_config(const TrainConfig& cfg) {
  PipelineConfig pc;
  pc.weights.lambda_infonce = cfg.lambda_infonce;
  pc.weights.lambda = cfg.lambda;
  pc.tau = cfg.tau;
  pc.sigma_encoding = cfg.sigma_encoding;
  pc.train_mode = true;
  return pc;
}

std::string format_metrics_row(long long step, double lr, const LossReport& r, long long wall_ms) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%lld", step, lr, r.l_infonce,
                r.l_rec, r.l_denoise, r.l_total, wall_ms);
  return buf;
}

}  // namespace

long long steps_per_epoch(const TrainConfig& cfg, int dataset_size) {
  check_arg(dataset_size >= 1, "train: empty dataset");
  const int batch = std::min(cfg.batch_size, dataset_size);
  return std::max<long long>(1, dataset_size / batch);
}

ViewBatch assemble_batch(const Dataset& data, const TrainConfig& cfg, const AugmentConfig& aug,
                         int patch, long long step, long long spe) {
  const long long epoch = step / spe;
  const long long slot = step % spe;
  const int batch = std::min(cfg.batch_size, data.size());
  const std::vector<int> order = epoch_order(data.size(), cfg.seed, epoch);

  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    const int idx = order[static_cast<std::size_t>((slot * batch + i) % data.size())];
    images.push_back(data.items[static_cast<std::size_t>(idx)].image);
  }
  Rng batch_rng = Rng(cfg.seed).derive(0xBA7C4, static_cast<std::uint64_t>(step));
  return build_view_batch(images, aug, cfg.mask_rate, cfg.sigma_max, patch, batch_rng,
                          cfg.views);
}

LossReport train_step(TrainState& state, const ViewBatch& batch, const TrainConfig& cfg,
                      long long spe, const std::string& last_checkpoint) {
  PipelineResult<float> result;
  try {
    result = compute_batch_gradients(state.params, state.spec, batch, pipeline_config(cfg));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) +
                             (last_checkpoint.empty()
                                  ? " (no checkpoint written yet)"
                                  : " (last good checkpoint: " + last_checkpoint + ")"));
  }
  const double lr = lr_at(state.step, cfg, spe);
  adamw_update(state.params, result.grads, state.m, state.v, state.step + 1, lr, cfg);
  state.step += 1;
  return result.report;
}

TrainLoopResult train_loop(const TrainConfig& cfg_in, const AugmentConfig& aug,
                           const ModelSpec& spec, const Dataset& data,
                           const std::string& out_dir, const std::string& resume_from) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  spec.validate();
  check_arg(data.size() >= 1, "train: dataset is empty");
  check_arg(aug.out_h == spec.image_h && aug.out_w == spec.image_w,
            "train: augmentation output size must match the model image size");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  check_run(!ec, "train: cannot create output dir " + out_dir);

  TrainState state;
  if (resume_from.empty()) {
    state = init_train_state(spec, cfg.seed);
  } else {
    state = load_checkpoint(resume_from);
    check_arg(state.spec.encoder.width == spec.encoder.width &&
                  state.spec.encoder.depth == spec.encoder.depth &&
                  state.spec.patch == spec.patch && state.spec.image_h == spec.image_h,
              "train: resume checkpoint does not match the configured model");
  }

  const long long spe = steps_per_epoch(cfg, data.size());
  const long long total_steps = spe * cfg.total_epochs;

  const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  std::ofstream metrics(metrics_path, std::ios::trunc);
  check_run(static_cast<bool>(metrics), "train: cannot write " + metrics_path);
  metrics << "step,lr,l_infonce,l_rec,l_denoise,l_total,wall_ms\n";

  TrainLoopResult out;
  out.metrics_path = metrics_path;
  std::string last_ckpt;

  // Bounded hand-off: one batch is assembled ahead while the step computes.
  auto assemble = [&](long long step) { return assemble_batch(data, cfg, aug, spec.patch, step, spe); };
  std::future<ViewBatch> next;
  if (state.step < total_steps) next = std::async(std::launch::async, assemble, state.step);

  const auto t0 = std::chrono::steady_clock::now();
  while (state.step < total_steps) {
    ViewBatch batch = next.get();
    if (state.step + 1 < total_steps)
      next = std::async(std::launch::async, assemble, state.step + 1);

    const double lr = lr_at(state.step, cfg, spe);
    const LossReport report = train_step(state, batch, cfg, spe, last_ckpt);
    const auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
            .count();
    if (state.step % cfg.log_every == 0 || state.step == total_steps)
      metrics << format_metrics_row(state.step, lr, report, wall) << "\n";
    out.last = report;

    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 &&
        state.step < total_steps) {
      const std::string path =
          (fs::path(out_dir) / ("ckpt_" + std::to_string(state.step) + ".bin")).string();
      save_checkpoint(path, state);
      last_ckpt = path;
    }
  }
  metrics.close();

  out.checkpoint_path = (fs::path(out_dir) / "final.ckpt").string();
  save_checkpoint(out.checkpoint_path, state);
  out.steps = state.step;
  return out;
}

LossReport evaluate_losses(const TrainState& state, const Dataset& data, const TrainConfig& cfg,
                           const AugmentConfig& aug, int batches, std::uint64_t eval_seed) {
  TrainConfig ecfg = cfg;
  ecfg.seed = eval_seed;
  const long long spe = steps_per_epoch(ecfg, data.size());
  PipelineConfig pc = pipeline_config(ecfg);
  pc.backward = false;
  LossReport mean;
  for (int k = 0; k < batches; ++k) {
    ViewBatch batch = assemble_batch(data, ecfg, aug, state.spec.patch, k % spe, spe);
    const LossReport r = compute_losses(state.params, state.spec, batch, pc);
    mean.l_infonce += r.l_infonce / batches;
    mean.l_rec += r.l_rec / batches;
    mean.l_denoise += r.l_denoise / batches;
  }
  LossWeights w;
  w.lambda_infonce = cfg.lambda_infonce;
  w.lambda = cfg.lambda;
  mean.finalize(w);
  return mean;
}

}  // namespace can
