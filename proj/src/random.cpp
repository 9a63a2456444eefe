#include "bushold/random.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bushold/error.hpp"

namespace bushold {

RngStream::RngStream(std::uint64_t seed, std::uint32_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(seed >> 32), stream_id};
  engine_.seed(seq);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double RngStream::exponential(double rate) {
  return -std::log(uniform_open()) / rate;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("RngStream::below: n must be positive");
  // Largest multiple of n representable; values at or above it are rejected.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::vector<double> sample_arrivals(double mu_per_hour, double t0, double t1, RngStream& rng) {
  if (!(mu_per_hour >= 0.0)) {
    throw ArgumentError("sample_arrivals: negative rate " + std::to_string(mu_per_hour));
  }
  if (!(t1 > t0)) throw ArgumentError("sample_arrivals: empty window");
  std::vector<double> out;
  if (mu_per_hour == 0.0) return out;
  const double rate = mu_per_hour / 3600.0;
  double t = t0;
  for (;;) {
    t += rng.exponential(rate);
    if (t >= t1) break;
    out.push_back(t);
  }
  return out;
}

double segment_speed_from_normal(double mean, double sigma, double z) {
  if (!(mean > 0.0)) throw ArgumentError("segment speed mean must be positive");
  if (!(sigma >= 0.0)) throw ArgumentError("segment speed sigma must be non-negative");
  const double v = mean + sigma * z;
  return v < kMinSegmentSpeed ? kMinSegmentSpeed : v;
}

double sample_segment_speed(double mean, double sigma, RngStream& rng) {
  if (!(mean > 0.0)) throw ArgumentError("segment speed mean must be positive");
  if (sigma == 0.0) return mean;
  return segment_speed_from_normal(mean, sigma, rng.normal());
}

}  // namespace bushold
