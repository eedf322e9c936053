#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "can/objectives.hpp"
#include "oracles.hpp"

using namespace can;

namespace {

// Same formula as the naive oracle but parameterized by explicit similarity
// matrices, for properties that live at the similarity level.
double info_nce_from_sims(const MatD& s11, const MatD& s12, const MatD& s22, double tau) {
  const int n = static_cast<int>(s11.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pos = s12(i, i);
    for (int v = 0; v < 2; ++v) {
      double denom = std::exp(pos / tau);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double a = v == 0 ? s11(i, j) : s12(j, i);
        const double b = v == 0 ? s12(i, j) : s22(i, j);
        denom += std::exp(a / tau) + std::exp(b / tau);
      }
      total += -(pos / tau - std::log(denom));
    }
  }
  return total / (2.0 * n);
}

}  // namespace

TEST_CASE("info_nce with n=1 has no negatives and zero loss") {
  Rng rng(1);
  MatD u1 = oracles::random_unit_rows(1, 8, rng);
  MatD u2 = oracles::random_unit_rows(1, 8, rng);
  CHECK(info_nce<double>(u1, u2, 0.1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("info_nce with n=2 identical embeddings equals log 3") {
  MatD u(2, 4);
  u << 1, 0, 0, 0, 1, 0, 0, 0;
  CHECK(info_nce<double>(u, u, 0.1) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("info_nce matches the brute-force oracle on random instances") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(rng.next_below(4));
    MatD u1 = oracles::random_unit_rows(n, 16, rng);
    MatD u2 = oracles::random_unit_rows(n, 16, rng);
    const double tau = 0.05 + rng.uniform() * 0.5;
    CHECK(info_nce<double>(u1, u2, tau) ==
          doctest::Approx(oracles::naive_info_nce(u1, u2, tau)).epsilon(1e-9));
  }
}

TEST_CASE("info_nce is invariant to a shared row permutation") {
  Rng rng(9);
  MatD u1 = oracles::random_unit_rows(5, 8, rng);
  MatD u2 = oracles::random_unit_rows(5, 8, rng);
  std::vector<int> perm{3, 0, 4, 1, 2};
  MatD p1(5, 8), p2(5, 8);
  for (int i = 0; i < 5; ++i) {
    p1.row(i) = u1.row(perm[static_cast<std::size_t>(i)]);
    p2.row(i) = u2.row(perm[static_cast<std::size_t>(i)]);
  }
  CHECK(info_nce<double>(p1, p2, 0.1) ==
        doctest::Approx(info_nce<double>(u1, u2, 0.1)).epsilon(1e-12));
}

TEST_CASE("info_nce is symmetric in the two views") {
  Rng rng(10);
  MatD u1 = oracles::random_unit_rows(4, 8, rng);
  MatD u2 = oracles::random_unit_rows(4, 8, rng);
  CHECK(info_nce<double>(u1, u2, 0.2) ==
        doctest::Approx(info_nce<double>(u2, u1, 0.2)).epsilon(1e-12));
}

TEST_CASE("scaling negative similarities down strictly decreases the loss") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3;
    MatD u1 = oracles::random_unit_rows(n, 16, rng);
    MatD u2 = oracles::random_unit_rows(n, 16, rng);
    MatD s11 = u1 * u1.transpose(), s12 = u1 * u2.transpose(), s22 = u2 * u2.transpose();
    const double base = info_nce_from_sims(s11, s12, s22, 0.1);
    // production path agrees with the similarity-level oracle
    CHECK(base == doctest::Approx(info_nce<double>(u1, u2, 0.1)).epsilon(1e-9));
    // shrink every negative similarity, keep positives
    MatD t11 = s11 * 0.8, t12 = s12 * 0.8, t22 = s22 * 0.8;
    for (int i = 0; i < n; ++i) t12(i, i) = s12(i, i);
    CHECK(info_nce_from_sims(t11, t12, t22, 0.1) < base);
  }
}

TEST_CASE("info_nce rejects bad inputs") {
  Rng rng(3);
  MatD u1 = oracles::random_unit_rows(2, 8, rng);
  MatD u2 = oracles::random_unit_rows(2, 8, rng);
  CHECK_THROWS_AS(info_nce<double>(u1, u2, 0.0), std::invalid_argument);
  MatD bad = u1 * 1.5;
  CHECK_THROWS_AS(info_nce<double>(bad, u2, 0.1), std::invalid_argument);
  MatD empty(0, 8);
  CHECK_THROWS_AS(info_nce<double>(empty, empty, 0.1), std::invalid_argument);
}

TEST_CASE("info_nce gradient matches central finite differences") {
  Rng rng(13);
  const int n = 3, r = 8;
  MatD u1 = oracles::random_unit_rows(n, r, rng);
  MatD u2 = oracles::random_unit_rows(n, r, rng);
  MatD du1 = MatD::Zero(n, r), du2 = MatD::Zero(n, r);
  info_nce<double>(u1, u2, 0.1, &du1, &du2);
  const double h = 1e-7;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) {
      MatD up = u1, down = u1;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd =
          (oracles::naive_info_nce(up, u2, 0.1) - oracles::naive_info_nce(down, u2, 0.1)) /
          (2 * h);
      CHECK(du1(i, j) == doctest::Approx(fd).epsilon(1e-4));

      MatD up2 = u2, down2 = u2;
      up2(i, j) += h;
      down2(i, j) -= h;
      const double fd2 =
          (oracles::naive_info_nce(u1, up2, 0.1) - oracles::naive_info_nce(u1, down2, 0.1)) /
          (2 * h);
      CHECK(du2(i, j) == doctest::Approx(fd2).epsilon(1e-4));
    }
}

TEST_CASE("recon_loss basics") {
  MatD clean = MatD::Random(4, 12), xhat = clean;
  MaskVector mask;
  mask.bits = {1, 0, 1, 0};
  mask.unmasked_count = 2;
  CHECK(recon_loss<double>(clean, xhat, mask) == 0.0);

  MaskVector none;
  none.bits = {0, 0, 0, 0};
  none.unmasked_count = 4;
  MatD junk = MatD::Constant(4, 12, 7.0);
  CHECK(recon_loss<double>(clean, junk, none) == 0.0);
}

TEST_CASE("recon_loss hand-computed value") {
  // T=2, p=1: one masked patch with an all-ones residual over 3 channels.
  MatD clean = MatD::Zero(2, 3);
  MatD xhat = MatD::Zero(2, 3);
  xhat.row(0) << 1, 1, 1;
  MaskVector mask;
  mask.bits = {1, 0};
  mask.unmasked_count = 1;
  CHECK(recon_loss<double>(clean, xhat, mask) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("denoise_loss hand-computed value") {
  MatD noise = MatD::Zero(2, 3);
  noise.row(1) << 0.1, 0.1, 0.1;
  MatD xhat = MatD::Zero(2, 3);
  MaskVector mask;
  mask.bits = {1, 0};
  mask.unmasked_count = 1;
  CHECK(denoise_loss<double>(noise, xhat, mask) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("denoise_loss is zero with zero sigma and zero prediction") {
  MatD noise = MatD::Zero(4, 12), xhat = MatD::Zero(4, 12);
  MaskVector mask;
  mask.bits = {1, 0, 0, 1};
  mask.unmasked_count = 2;
  CHECK(denoise_loss<double>(noise, xhat, mask) == 0.0);
}

TEST_CASE("denoise_loss totalizes to zero on an all-masked sample") {
  MatD noise = MatD::Random(3, 12), xhat = MatD::Random(3, 12);
  MaskVector mask;
  mask.bits = {1, 1, 1};
  mask.unmasked_count = 0;
  CHECK(denoise_loss<double>(noise, xhat, mask) == 0.0);
}

TEST_CASE("pixel losses match naive loop oracles on random instances") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const int T = 2 + static_cast<int>(rng.next_below(7));
    MatD clean(T, 12), xhat(T, 12), noise(T, 12);
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < 12; ++j) {
        clean(t, j) = rng.normal();
        xhat(t, j) = rng.normal();
        noise(t, j) = 0.05 * rng.normal();
      }
    MaskVector mask = sample_mask(T, 0.5, rng);
    CHECK(recon_loss<double>(clean, xhat, mask) ==
          doctest::Approx(oracles::naive_recon_loss(clean, xhat, mask)).epsilon(1e-12));
    CHECK(denoise_loss<double>(noise, xhat, mask) ==
          doctest::Approx(oracles::naive_denoise_loss(noise, xhat, mask)).epsilon(1e-12));
  }
}

TEST_CASE("recon and denoise losses have disjoint support") {
  Rng rng(19);
  const int T = 8;
  MatD clean(T, 12), xhat(T, 12);
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    clean.data()[i] = rng.normal();
    xhat.data()[i] = rng.normal();
  }
  MaskVector mask = sample_mask(T, 0.5, rng);
  const double rec = recon_loss<double>(clean, xhat, mask);
  const double den = denoise_loss<double>(clean * 0.0, xhat, mask);
  MatD perturbed = xhat;
  for (int t = 0; t < T; ++t)
    if (!mask.masked(t)) perturbed.row(t).array() += 3.0;  // unmasked rows only
  CHECK(recon_loss<double>(clean, perturbed, mask) == doctest::Approx(rec).epsilon(1e-12));
  CHECK(denoise_loss<double>(clean * 0.0, perturbed, mask) != doctest::Approx(den));
}

TEST_CASE("pixel loss gradients match finite differences") {
  Rng rng(23);
  const int T = 4;
  MatD clean = MatD::Zero(T, 6), xhat = MatD::Zero(T, 6);
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    clean.data()[i] = rng.normal();
    xhat.data()[i] = rng.normal();
  }
  MaskVector mask;
  mask.bits = {1, 0, 1, 0};
  mask.unmasked_count = 2;
  MatD grad = MatD::Zero(T, 6);
  recon_loss<double>(clean, xhat, mask, &grad, 1.0);
  MatD gden = MatD::Zero(T, 6);
  denoise_loss<double>(clean, xhat, mask, &gden, 1.0);
  const double h = 1e-6;
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < 6; ++j) {
      MatD up = xhat, down = xhat;
      up(t, j) += h;
      down(t, j) -= h;
      const double fd_rec =
          (recon_loss<double>(clean, up, mask) - recon_loss<double>(clean, down, mask)) / (2 * h);
      CHECK(grad(t, j) == doctest::Approx(fd_rec).epsilon(1e-6));
      const double fd_den =
          (denoise_loss<double>(clean, up, mask) - denoise_loss<double>(clean, down, mask)) /
          (2 * h);
      CHECK(gden(t, j) == doctest::Approx(fd_den).epsilon(1e-6));
    }
}

TEST_CASE("combined weights follow the two-parameter form") {
  LossWeights w;
  w.lambda_infonce = 0.03;
  w.lambda = 0.5;
  CHECK(w.lambda_rec() == doctest::Approx(0.485).epsilon(1e-15));
  CHECK(w.lambda_denoise() == doctest::Approx(0.485).epsilon(1e-15));
  CHECK(w.lambda_infonce + w.lambda_rec() + w.lambda_denoise() ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("derived weights are nonnegative and sum to one for random pairs") {
  Rng rng(29);
  for (int rep = 0; rep < 100; ++rep) {
    LossWeights w;
    w.lambda_infonce = rng.uniform();
    w.lambda = rng.uniform();
    w.validate();
    CHECK(w.lambda_rec() >= 0.0);
    CHECK(w.lambda_denoise() >= 0.0);
    const double sum = w.lambda_infonce + w.lambda_rec() + w.lambda_denoise();
    CHECK(std::abs(sum - 1.0) <= 1e-15);
  }
}

TEST_CASE("loss report applies weights once at the top") {
  LossReport r;
  r.l_infonce = 0.7;
  r.l_rec = 0.3;
  r.l_denoise = 0.2;

  LossWeights simclr_like;
  simclr_like.lambda_infonce = 1.0;
  simclr_like.lambda = 0.4;
  r.finalize(simclr_like);
  CHECK(r.l_total == doctest::Approx(0.7).epsilon(1e-15));

  LossWeights mae_like;
  mae_like.lambda_infonce = 0.0;
  mae_like.lambda = 1.0;
  r.finalize(mae_like);
  CHECK(r.l_total == doctest::Approx(0.3).epsilon(1e-15));

  LossWeights mixed;
  mixed.lambda_infonce = 0.03;
  mixed.lambda = 0.5;
  r.finalize(mixed);
  CHECK(r.l_total == doctest::Approx(0.03 * 0.7 + 0.485 * 0.3 + 0.485 * 0.2).epsilon(1e-12));
}

TEST_CASE("loss report rejects non-finite terms") {
  LossReport r;
  r.l_infonce = std::numeric_limits<double>::quiet_NaN();
  LossWeights w;
  CHECK_THROWS_AS(r.finalize(w), std::runtime_error);
}
