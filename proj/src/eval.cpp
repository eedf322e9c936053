#include "can/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>

#include "can/augment.hpp"
#include "can/pipeline.hpp"

namespace can {

int FeatureSet::num_classes() const {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return mx + 1;
}

FeatureSet extract_features(const TrainState& state, const Dataset& data, int chunk) {
  const ModelSpec& spec = state.spec;
  spec.validate();
  check_arg(data.size() >= 1, "extract_features: empty dataset");
  check_arg(chunk >= 1, "extract_features: chunk must be >= 1");

  const int total = spec.tokens();
  MaskVector none;
  none.bits.assign(static_cast<std::size_t>(total), 0);
  none.unmasked_count = total;
  const TokenGatherPlan full_plan = make_gather_plan(none);

  FeatureSet fs;
  fs.features.resize(data.size(), spec.encoder.width);
  fs.labels.resize(static_cast<std::size_t>(data.size()));

  Params<float>& params = const_cast<TrainState&>(state).params;
  for (int start = 0; start < data.size(); start += chunk) {
    const int b = std::min(chunk, data.size() - start);
    MatF stacked(static_cast<Eigen::Index>(b) * total, spec.patch_dim());
    std::vector<TokenGatherPlan> plans(static_cast<std::size_t>(b), full_plan);
    for (int i = 0; i < b; ++i) {
      const LabeledImage& item = data.items[static_cast<std::size_t>(start + i)];
      Image sized = resize_bilinear(item.image, spec.image_h, spec.image_w);
      stacked.middleRows(static_cast<Eigen::Index>(i) * total, total) =
          patchify(sized, spec.patch).patches;
      fs.labels[static_cast<std::size_t>(start + i)] = item.label;
    }
    EncodeCache<float> cache;
    MatF z = encode_batch(stacked, plans, params, spec, cache);
    fs.features.middleRows(start, b) = mean_pool_batch(z, b);
  }
  return fs;
}

namespace {

constexpr char kFeatMagic[8] = {'C', 'A', 'N', 'F', 'E', 'A', 'T', '1'};

}  // namespace

void save_feature_set(const std::string& path, const FeatureSet& fs) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check_run(static_cast<bool>(out), "features: cannot write " + tmp);
    out.write(kFeatMagic, 8);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t n = static_cast<std::uint64_t>(fs.size());
    const std::uint32_t dim = static_cast<std::uint32_t>(fs.dim());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(fs.features.data()),
              static_cast<std::streamsize>(sizeof(float) * n * dim));
    for (int l : fs.labels) {
      const std::int32_t v = l;
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    check_run(static_cast<bool>(out), "features: write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  check_run(!ec, "features: rename failed: " + ec.message());
}

FeatureSet load_feature_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_run(static_cast<bool>(in), "features: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  check_arg(static_cast<bool>(in) && std::memcmp(magic, kFeatMagic, 8) == 0,
            "features: bad magic");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  check_arg(version == 1, "features: unsupported version");
  std::uint64_t n = 0;
  std::uint32_t dim = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&dim), 4);
  FeatureSet fs;
  fs.features.resize(static_cast<Eigen::Index>(n), dim);
  in.read(reinterpret_cast<char*>(fs.features.data()),
          static_cast<std::streamsize>(sizeof(float) * n * dim));
  fs.labels.resize(n);
  for (auto& l : fs.labels) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    l = v;
  }
  check_run(static_cast<bool>(in), "features: truncated file");
  return fs;
}

namespace {

struct ProbeData {
  MatD x;  // N x (d+1), standardized, bias column appended
  std::vector<int> y;
  int classes = 0;
};

ProbeData standardize(const FeatureSet& train, const FeatureSet& apply_to, const MatD& mean,
                      const MatD& scale) {
  ProbeData d;
  const int n = apply_to.size();
  const int dim = apply_to.dim();
  d.x.resize(n, dim + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j)
      d.x(i, j) = (static_cast<double>(apply_to.features(i, j)) - mean(0, j)) * scale(0, j);
    d.x(i, dim) = 1.0;
  }
  d.y = apply_to.labels;
  d.classes = train.num_classes();
  return d;
}

// Mean cross-entropy and gradient of multinomial logistic regression with
// ridge on the non-bias rows. W is (d+1) x C.
double probe_objective(const ProbeData& data, const MatD& w, double l2, MatD& grad) {
  const int n = static_cast<int>(data.x.rows());
  const int c = static_cast<int>(w.cols());
  MatD logits = data.x * w;  // N x C
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, data.y[static_cast<std::size_t>(i)]);
    logits.row(i) = (logits.row(i).array() - lse).exp();  // now probabilities
    logits(i, data.y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  loss /= n;
  grad = data.x.transpose() * logits / n;
  // ridge, bias row excluded
  const Eigen::Index dim = w.rows() - 1;
  loss += 0.5 * l2 * w.topRows(dim).squaredNorm();
  grad.topRows(dim) += l2 * w.topRows(dim);
  (void)c;
  return loss;
}

MatD fit_probe(const ProbeData& data, const ProbeConfig& cfg) {
  const Eigen::Index dim1 = data.x.cols();
  MatD w = MatD::Zero(dim1, data.classes);
  MatD grad;
  double f = probe_objective(data, w, cfg.l2, grad);

  // L-BFGS with history 10 and Armijo backtracking.
  const int hist = 10;
  std::deque<MatD> s_list, y_list;
  std::deque<double> rho;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (grad.template lpNorm<Eigen::Infinity>() <= cfg.tol) break;

    MatD q = grad;
    std::vector<double> alpha(s_list.size());
    for (int i = static_cast<int>(s_list.size()) - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] =
          rho[static_cast<std::size_t>(i)] *
          (s_list[static_cast<std::size_t>(i)].array() * q.array()).sum();
      q -= alpha[static_cast<std::size_t>(i)] * y_list[static_cast<std::size_t>(i)];
    }
    if (!s_list.empty()) {
      const MatD& s = s_list.back();
      const MatD& yv = y_list.back();
      const double gamma =
          (s.array() * yv.array()).sum() / (yv.array() * yv.array()).sum();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_list.size(); ++i) {
      const double beta = rho[i] * (y_list[i].array() * q.array()).sum();
      q += (alpha[i] - beta) * s_list[i];
    }
    MatD dir = -q;

    const double slope = (grad.array() * dir.array()).sum();
    double step = 1.0;
    MatD w_new, g_new;
    double f_new = f;
    for (int ls = 0; ls < 30; ++ls) {
      w_new = w + step * dir;
      f_new = probe_objective(data, w_new, cfg.l2, g_new);
      if (f_new <= f + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    MatD s = w_new - w;
    MatD yv = g_new - grad;
    const double sy = (s.array() * yv.array()).sum();
    if (sy > 1e-12) {
      s_list.push_back(std::move(s));
      y_list.push_back(std::move(yv));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(s_list.size()) > hist) {
        s_list.pop_front();
        y_list.pop_front();
        rho.pop_front();
      }
    }
    w = std::move(w_new);
    grad = std::move(g_new);
    f = f_new;
  }
  return w;
}

double top1_accuracy(const ProbeData& data, const MatD& w) {
  const MatD logits = data.x * w;
  int hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    if (static_cast<int>(best) == data.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

void standardization_stats(const FeatureSet& train, MatD& mean, MatD& scale) {
  const int dim = train.dim();
  mean.resize(1, dim);
  scale.resize(1, dim);
  for (int j = 0; j < dim; ++j) {
    double mu = 0.0;
    for (int i = 0; i < train.size(); ++i) mu += train.features(i, j);
    mu /= train.size();
    double var = 0.0;
    for (int i = 0; i < train.size(); ++i) {
      const double d = train.features(i, j) - mu;
      var += d * d;
    }
    var /= train.size();
    mean(0, j) = mu;
    scale(0, j) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

void validate_probe_sets(const FeatureSet& train, const FeatureSet& test) {
  check_arg(train.size() >= 2 && test.size() >= 1, "probe: not enough samples");
  check_arg(train.dim() == test.dim(), "probe: feature dimensions differ");
  std::set<int> train_classes(train.labels.begin(), train.labels.end());
  check_arg(train_classes.size() >= 2, "probe: training set has a single class");
  for (int l : test.labels)
    check_arg(train_classes.count(l) == 1, "probe: test class missing from training set");
}

}  // namespace

double linear_probe(const FeatureSet& train, const FeatureSet& test, const ProbeConfig& cfg) {
  validate_probe_sets(train, test);
  MatD mean, scale;
  standardization_stats(train, mean, scale);
  ProbeData tr = standardize(train, train, mean, scale);
  ProbeData te = standardize(train, test, mean, scale);
  const MatD w = fit_probe(tr, cfg);
  return top1_accuracy(te, w);
}

KShotResult k_shot_probe(const FeatureSet& train, const FeatureSet& test, int k, int repeats,
                         Rng rng, const ProbeConfig& cfg) {
  check_arg(k >= 1, "k_shot_probe: k must be >= 1");
  check_arg(repeats >= 1, "k_shot_probe: repeats must be >= 1");
  validate_probe_sets(train, test);

  const int classes = train.num_classes();
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
  for (int i = 0; i < train.size(); ++i)
    by_class[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)])].push_back(i);
  for (int c = 0; c < classes; ++c)
    check_arg(static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) >= k,
              "k_shot_probe: class " + std::to_string(c) + " has fewer than k examples");

  KShotResult out;
  out.repeats = repeats;
  for (int r = 0; r < repeats; ++r) {
    Rng run_rng = rng.derive(static_cast<std::uint64_t>(r) + 1);
    FeatureSet sub;
    sub.features.resize(static_cast<Eigen::Index>(classes) * k, train.dim());
    sub.labels.reserve(static_cast<std::size_t>(classes) * k);
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
      std::vector<int> pool = by_class[static_cast<std::size_t>(c)];
      run_rng.shuffle(pool);
      for (int i = 0; i < k; ++i) {
        sub.features.row(row++) = train.features.row(pool[static_cast<std::size_t>(i)]);
        sub.labels.push_back(c);
      }
    }
    out.accuracies.push_back(linear_probe(sub, test, cfg));
  }
  for (double a : out.accuracies) out.mean += a;
  out.mean /= repeats;
  double var = 0.0;
  for (double a : out.accuracies) var += (a - out.mean) * (a - out.mean);
  out.stddev = std::sqrt(var / repeats);
  return out;
}

}  // namespace can
