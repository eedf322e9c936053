#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "can/rng.hpp"

using can::Rng;

TEST_CASE("same key reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are independent of parent consumption") {
  Rng parent(7);
  Rng child_before = parent.derive(3);
  parent.next_u64();
  parent.next_u64();
  Rng child_after = parent.derive(3);
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("different tags give different streams") {
  Rng parent(7);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t t = 0; t < 100; ++t) firsts.insert(parent.derive(t).next_u64());
  CHECK(firsts.size() == 100);
}

TEST_CASE("state round-trip") {
  Rng a(9);
  a.next_u64();
  a.next_u64();
  Rng b = Rng::from_state(a.key(), a.counter());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sumsq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("next_below is in range and roughly uniform") {
  Rng rng(11);
  int counts[10] = {0};
  for (int i = 0; i < 100000; ++i) counts[rng.next_below(10)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle permutes") {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto orig = v;
  rng.shuffle(v);
  std::multiset<int> a(v.begin(), v.end()), b(orig.begin(), orig.end());
  CHECK(a == b);
}
