#pragma once

#include <string>
#include <vector>

#include "can/checkpoint.hpp"
#include "can/dataset.hpp"

namespace can {

// Mean-pooled final encoder representations, produced with no masking and no
// noise, eval-mode statistics; the projection head is not applied.
struct FeatureSet {
  MatF features;  // N x d
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const;
};

FeatureSet extract_features(const TrainState& state, const Dataset& data, int chunk = 64);

// Versioned cache: magic, version, N, dim, float32 data, int32 labels.
void save_feature_set(const std::string& path, const FeatureSet& fs);
FeatureSet load_feature_set(const std::string& path);

// Multinomial logistic regression on standardized frozen features, minimized
// full-batch by L-BFGS with a small ridge so the optimum is unique.
struct ProbeConfig {
  double l2 = 1e-6;
  int max_iter = 500;
  double tol = 1e-6;  // max-norm of the gradient
};

double linear_probe(const FeatureSet& train, const FeatureSet& test,
                    const ProbeConfig& cfg = {});

struct KShotResult {
  double mean = 0.0;
  double stddev = 0.0;
  int repeats = 0;
  std::vector<double> accuracies;
};

// Sample k labeled examples per class from `train`, fit the probe, evaluate
// on `test`; repeat R times.
KShotResult k_shot_probe(const FeatureSet& train, const FeatureSet& test, int k, int repeats,
                         Rng rng, const ProbeConfig& cfg = {});

}  // namespace can
