#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bushold {

/// Independent concerns that draw random numbers. Each gets its own stream so
/// that changing how one concern consumes draws never shifts another.
enum class StreamId : std::uint32_t {
  Demand = 1,
  Traffic = 2,
  Policy = 3,
  Init = 4,
  Replay = 5,
  Scenario = 6,
};

/// Seeded random stream.
///
/// Engine: std::mt19937_64 (bit-exact across standard libraries), seeded through
/// std::seed_seq{seed_lo, seed_hi, stream_id}. All derived variates are computed
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined:
///   - uniform(): top 53 bits of one engine output, scaled to [0, 1)
///   - normal(): Box-Muller on two uniform_open() draws; the second variate is cached
///   - exponential(rate): -log(uniform_open()) / rate
///   - below(n): rejection sampling on the engine output
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t stream_id);
  RngStream(std::uint64_t seed, StreamId stream) : RngStream(seed, static_cast<std::uint32_t>(stream)) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double normal();
  double exponential(double rate);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline constexpr double kMinSegmentSpeed = 0.5;

/// Homogeneous Poisson arrival times with rate mu/3600 per second on [t0, t1),
/// sorted ascending. Throws ArgumentError on negative mu or empty window.
std::vector<double> sample_arrivals(double mu_per_hour, double t0, double t1, RngStream& rng);

/// Normal(mean, sigma^2) speed clamped below at 0.5 m/s.
double sample_segment_speed(double mean, double sigma, RngStream& rng);

/// Same clamp applied to an already drawn standard normal variate.
double segment_speed_from_normal(double mean, double sigma, double z);

}  // namespace bushold
