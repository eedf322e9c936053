#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "can/eval.hpp"

using namespace can;
namespace fs = std::filesystem;

namespace {

ModelSpec small_spec() {
  ModelSpec spec;
  spec.encoder = {2, 16, 2, 32};
  spec.decoder = {1, 8, 2, 16};
  spec.head = {16, 2, 8};
  spec.patch = 4;
  spec.image_h = spec.image_w = 16;
  return spec;
}

Dataset small_data(int n, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.count = n;
  sc.num_classes = 4;
  sc.height = sc.width = 16;
  sc.seed = seed;
  return make_synthetic_dataset(sc);
}

// Gaussian class blobs in feature space.
FeatureSet blobs(int per_class, int classes, int dim, double separation, Rng& rng) {
  FeatureSet fs;
  fs.features.resize(per_class * classes, dim);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      for (int j = 0; j < dim; ++j)
        fs.features(row, j) =
            static_cast<float>(rng.normal() + (j == c % dim ? separation : 0.0));
      fs.labels.push_back(c);
    }
  return fs;
}

}  // namespace

TEST_CASE("feature extraction is deterministic and ignores sample order") {
  const ModelSpec spec = small_spec();
  TrainState state = init_train_state(spec, 1);
  const Dataset data = small_data(12, 5);

  const FeatureSet a = extract_features(state, data);
  const FeatureSet b = extract_features(state, data);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(a.dim() == spec.encoder.width);

  Dataset shuffled = data;
  std::reverse(shuffled.items.begin(), shuffled.items.end());
  const FeatureSet c = extract_features(state, shuffled);
  for (int i = 0; i < a.size(); ++i) {
    const int j = a.size() - 1 - i;
    CHECK((a.features.row(i) - c.features.row(j)).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(a.labels[static_cast<std::size_t>(i)] == c.labels[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("chunked extraction matches single-pass extraction") {
  const ModelSpec spec = small_spec();
  TrainState state = init_train_state(spec, 2);
  const Dataset data = small_data(10, 6);
  const FeatureSet a = extract_features(state, data, 3);
  const FeatureSet b = extract_features(state, data, 64);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("feature cache round-trips") {
  const ModelSpec spec = small_spec();
  TrainState state = init_train_state(spec, 3);
  const FeatureSet fs = extract_features(state, small_data(8, 7));
  const std::string path =
      (fs::temp_directory_path() / ("can_feat_" + std::to_string(::getpid()) + ".bin")).string();
  save_feature_set(path, fs);
  const FeatureSet back = load_feature_set(path);
  CHECK((fs.features - back.features).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(fs.labels == back.labels);
  fs::remove(path);
}

TEST_CASE("probing never mutates the encoder") {
  const ModelSpec spec = small_spec();
  TrainState state = init_train_state(spec, 4);
  const Dataset train_data = small_data(24, 8);
  const Dataset test_data = small_data(12, 9);
  const MatF snapshot = state.params.encoder.blocks[0].wq.w;
  const FeatureSet train_fs = extract_features(state, train_data);
  const FeatureSet test_fs = extract_features(state, test_data);
  linear_probe(train_fs, test_fs);
  CHECK((state.params.encoder.blocks[0].wq.w - snapshot).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("linearly separable blobs reach accuracy 1.0") {
  Rng rng(11);
  const FeatureSet train = blobs(30, 2, 8, 8.0, rng);
  const FeatureSet test = blobs(15, 2, 8, 8.0, rng);
  CHECK(linear_probe(train, test) == doctest::Approx(1.0));
}

TEST_CASE("one-hot features probe to accuracy 1.0") {
  FeatureSet train, test;
  const int classes = 4;
  train.features = MatF::Zero(40, classes);
  test.features = MatF::Zero(20, classes);
  for (int i = 0; i < 40; ++i) {
    train.features(i, i % classes) = 1.0f;
    train.labels.push_back(i % classes);
  }
  for (int i = 0; i < 20; ++i) {
    test.features(i, i % classes) = 1.0f;
    test.labels.push_back(i % classes);
  }
  CHECK(linear_probe(train, test) == doctest::Approx(1.0));
}

TEST_CASE("shuffled labels probe near chance") {
  Rng rng(13);
  double acc_sum = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    FeatureSet train = blobs(40, 4, 8, 6.0, rng);
    FeatureSet test = blobs(20, 4, 8, 6.0, rng);
    // break the feature-label association uniformly
    Rng shuffle_rng(static_cast<std::uint64_t>(s) + 100);
    for (auto& l : train.labels) l = static_cast<int>(shuffle_rng.next_below(4));
    for (auto& l : test.labels) l = static_cast<int>(shuffle_rng.next_below(4));
    acc_sum += linear_probe(train, test);
  }
  CHECK(std::abs(acc_sum / seeds - 0.25) < 0.05);
}

TEST_CASE("probe rejects degenerate inputs") {
  Rng rng(17);
  FeatureSet train = blobs(10, 2, 4, 4.0, rng);
  FeatureSet test = blobs(5, 2, 4, 4.0, rng);
  FeatureSet single = train;
  for (auto& l : single.labels) l = 0;
  CHECK_THROWS_AS(linear_probe(single, test), std::invalid_argument);

  FeatureSet extra_class = test;
  extra_class.labels[0] = 3;  // class absent from training
  CHECK_THROWS_AS(linear_probe(train, extra_class), std::invalid_argument);
}

TEST_CASE("random-feature probe on synthetic data beats chance") {
  const ModelSpec spec = small_spec();
  TrainState state = init_train_state(spec, 6);  // random init, no training
  const FeatureSet train_fs = extract_features(state, small_data(160, 21));
  const FeatureSet test_fs = extract_features(state, small_data(80, 22));
  const double acc = linear_probe(train_fs, test_fs);
  CHECK(acc > 0.25);
}

TEST_CASE("k-shot with the full class size and one repeat equals the linear probe") {
  Rng rng(19);
  const FeatureSet train = blobs(12, 3, 6, 5.0, rng);
  const FeatureSet test = blobs(6, 3, 6, 5.0, rng);
  const KShotResult r = k_shot_probe(train, test, 12, 1, Rng(1));
  CHECK(r.repeats == 1);
  CHECK(r.mean == doctest::Approx(linear_probe(train, test)));
}

TEST_CASE("uninformative features give chance-level k-shot accuracy") {
  FeatureSet train, test;
  train.features = MatF::Constant(20, 4, 0.5f);
  test.features = MatF::Constant(10, 4, 0.5f);
  for (int i = 0; i < 20; ++i) train.labels.push_back(i % 2);
  for (int i = 0; i < 10; ++i) test.labels.push_back(i % 2);
  const KShotResult r = k_shot_probe(train, test, 1, 8, Rng(2));
  CHECK(r.mean == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("k-shot mean accuracy is non-decreasing in k on separable data") {
  Rng rng(23);
  const FeatureSet train = blobs(30, 4, 8, 2.0, rng);
  const FeatureSet test = blobs(15, 4, 8, 2.0, rng);
  double prev = -1.0;
  for (int k : {1, 5, 10, 25}) {
    const KShotResult r = k_shot_probe(train, test, k, 6, Rng(3));
    CHECK(r.mean >= prev - 0.02);  // allow resampling jitter
    prev = r.mean;
  }
}

TEST_CASE("k-shot rejects k beyond the class size") {
  Rng rng(29);
  const FeatureSet train = blobs(5, 2, 4, 4.0, rng);
  const FeatureSet test = blobs(5, 2, 4, 4.0, rng);
  CHECK_THROWS_AS(k_shot_probe(train, test, 6, 2, Rng(4)), std::invalid_argument);
}

TEST_CASE("k-shot resample variance shrinks as k grows") {
  Rng rng(31);
  const FeatureSet train = blobs(40, 4, 8, 1.5, rng);
  const FeatureSet test = blobs(20, 4, 8, 1.5, rng);
  double var_small = 0.0, var_large = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    var_small += k_shot_probe(train, test, 2, 6, Rng(seed)).stddev / 10.0;
    var_large += k_shot_probe(train, test, 30, 6, Rng(seed)).stddev / 10.0;
  }
  CHECK(var_large < var_small);
}
