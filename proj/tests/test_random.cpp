#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bushold/error.hpp"
#include "bushold/random.hpp"

using namespace bushold;

TEST_CASE("streams are reproducible and independent") {
  RngStream a(42, StreamId::Demand), b(42, StreamId::Demand), c(42, StreamId::Traffic), d(43, StreamId::Demand);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_stream |= x != c.next_u64();
    differs_seed |= x != d.next_u64();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("uniform and below stay in range") {
  RngStream rng(1, 9u);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double o = rng.uniform_open();
    REQUIRE(o > 0.0);
    REQUIRE(o < 1.0);
    REQUIRE(rng.below(7) < 7u);
  }
  CHECK_THROWS_AS(rng.below(0), ArgumentError);
}

TEST_CASE("arrivals: zero rate gives nothing") {
  RngStream rng(3, StreamId::Demand);
  CHECK(sample_arrivals(0.0, 0.0, 3600.0, rng).empty());
}

TEST_CASE("arrivals: argument checks") {
  RngStream rng(3, StreamId::Demand);
  CHECK_THROWS_AS(sample_arrivals(-1.0, 0.0, 3600.0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_arrivals(5.0, 100.0, 100.0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_arrivals(5.0, 200.0, 100.0, rng), ArgumentError);
}

TEST_CASE("arrivals: sorted, inside the window, right rate") {
  RngStream rng(11, StreamId::Demand);
  const auto xs = sample_arrivals(36.0, 0.0, 100.0 * 3600.0, rng);
  CHECK(std::is_sorted(xs.begin(), xs.end()));
  CHECK(xs.front() >= 0.0);
  CHECK(xs.back() < 100.0 * 3600.0);
  const double per_hour = static_cast<double>(xs.size()) / 100.0;
  CHECK(per_hour >= 34.0);
  CHECK(per_hour <= 38.0);
}

TEST_CASE("arrivals: empty-window probability matches exp(-1)") {
  RngStream rng(12, StreamId::Demand);
  const int trials = 100000;
  int empty = 0;
  for (int i = 0; i < trials; ++i) empty += sample_arrivals(3600.0, 0.0, 1.0, rng).empty() ? 1 : 0;
  CHECK(static_cast<double>(empty) / trials == doctest::Approx(std::exp(-1.0)).epsilon(0.02 / std::exp(-1.0)));
}

TEST_CASE("segment speed: clamp and degenerate cases") {
  RngStream rng(1, StreamId::Traffic);
  CHECK(sample_segment_speed(12.0, 0.0, rng) == 12.0);
  // a draw of 1 + 1.5 z = -0.2 sits below the floor
  CHECK(segment_speed_from_normal(1.0, 1.5, -0.8) == 0.5);
  CHECK(segment_speed_from_normal(10.0, 1.5, 1.0) == 11.5);
  CHECK_THROWS_AS(sample_segment_speed(0.0, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_segment_speed(-3.0, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_segment_speed(5.0, -1.0, rng), ArgumentError);
}

TEST_CASE("segment speed: moments and floor") {
  RngStream rng(21, StreamId::Traffic);
  const int n = 100000;
  std::vector<double> v(n);
  for (auto& x : v) x = sample_segment_speed(12.0, 1.5, rng);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1));
  CHECK(mean >= 11.97);
  CHECK(mean <= 12.03);
  CHECK(sd >= 1.45);
  CHECK(sd <= 1.55);

  RngStream slow(22, StreamId::Traffic);
  for (int i = 0; i < 20000; ++i) REQUIRE(sample_segment_speed(0.6, 3.0, slow) >= 0.5);
}

TEST_CASE("normal variates have unit variance") {
  RngStream rng(8, 30u);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
}
