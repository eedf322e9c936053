#pragma once

#include <string>
#include <vector>

#include "can/checkpoint.hpp"
#include "can/dataset.hpp"
#include "can/optimizer.hpp"
#include "can/pipeline.hpp"

namespace can {

// Full batches only; the steps-per-epoch count is the unit behind warmup and
// cosine decay.
long long steps_per_epoch(const TrainConfig& cfg, int dataset_size);

// One optimizer step over a prepared batch: forward both views through the
// shared trunk, backpropagate the combined objective, apply the decoupled
// weight-decay update. Aborts on a non-finite loss, pointing at the last
// written checkpoint.
LossReport train_step(TrainState& state, const ViewBatch& batch, const TrainConfig& cfg,
                      long long spe, const std::string& last_checkpoint = "");

// Deterministic batch assembly for a given global step: epoch-ordered seeded
// shuffling, augmentation/noise/mask streams keyed by (seed, step, image,
// view). Resume from any step reproduces the run exactly.
ViewBatch assemble_batch(const Dataset& data, const TrainConfig& cfg, const AugmentConfig& aug,
                         int patch, long long step, long long spe);

struct TrainLoopResult {
  std::string checkpoint_path;
  std::string metrics_path;
  LossReport last;
  long long steps = 0;
};

// Runs to cfg.total_epochs, writing per-step metrics CSV
// (step,lr,l_infonce,l_rec,l_denoise,l_total,wall_ms) and checkpoints under
// out_dir. Pass resume_from to continue an interrupted run. The next batch is
// assembled on a prefetch thread while the current step computes.
TrainLoopResult train_loop(const TrainConfig& cfg, const AugmentConfig& aug,
                           const ModelSpec& spec, const Dataset& data,
                           const std::string& out_dir, const std::string& resume_from = "");

// Loss-only evaluation of a state on a deterministic batch sequence.
LossReport evaluate_losses(const TrainState& state, const Dataset& data, const TrainConfig& cfg,
                           const AugmentConfig& aug, int batches, std::uint64_t eval_seed);

}  // namespace can
