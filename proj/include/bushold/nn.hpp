#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bushold/control.hpp"
#include "bushold/random.hpp"

namespace bushold::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A trainable array with its accumulated gradient.
///
/// Row-sparse parameters (embedding tables) remember which rows received
/// gradient since the last zero_grad(); the optimizer touches only those rows.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool row_sparse = false;
  std::vector<std::uint8_t> touched;

  Param() = default;
  Param(std::string n, Matrix v, bool sparse = false);

  void zero_grad();
  void mark_row(Eigen::Index row) { touched[static_cast<std::size_t>(row)] = 1; }
};

using ParamList = std::vector<Param*>;
using ConstParamList = std::vector<const Param*>;

void zero_grad(const ParamList& params);

/// min(50, floor(N/2)), at least 1.
int embedding_dim(int vocab_size);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Weights drawn from Normal(0, 0.1) when `init` is given, else zero.
  EmbeddingTable(std::string name, int vocab_size, RngStream* init);

  int vocab_size() const { return static_cast<int>(weights.value.rows()); }
  int dim() const { return static_cast<int>(weights.value.cols()); }
  /// Throws std::out_of_range for an index outside the vocabulary.
  void check_index(int index) const;

  Param weights;
};

/// Vocabulary sizes of the four categorical state features.
struct Vocab {
  int bus = 40;
  int stop = kNumStops;
  int time = kNumHours;
  int direction = 2;
};

inline constexpr int kNumericFeatures = 3;

/// Four embedding tables (bus, stop, time period, direction) followed by the
/// three numerical features.
class StateEncoder {
 public:
  StateEncoder() = default;
  StateEncoder(const std::string& prefix, const Vocab& vocab, RngStream* init);

  int embedded_width() const;
  int width() const { return embedded_width() + kNumericFeatures; }

  /// Column-per-sample matrix with `width() + extra_rows` rows; the extra rows are zero.
  Matrix encode(std::span<const StateVector> batch, int extra_rows = 0) const;
  /// Scatters the first width() rows of `grad_input` into the tables.
  void backward(std::span<const StateVector> batch, const Matrix& grad_input);

  ParamList params();
  ConstParamList params() const;

  std::array<EmbeddingTable, 4> tables;
};

/// Concatenated embeddings followed by h_f_norm, h_b_norm, seg_speed_norm.
Vector embed_state(const StateVector& state, const StateEncoder& encoder);

/// Dense network with ReLU on hidden layers and a linear output layer.
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> inputs;       // input to each layer
    std::vector<Matrix> pre_activations;
  };

  Mlp() = default;
  /// sizes = {input, hidden..., output}. Weights and biases uniform(+-1/sqrt(fan_in)).
  Mlp(const std::string& prefix, std::vector<int> sizes, RngStream& init);

  Matrix forward(const Matrix& x, Tape* tape) const;
  /// Returns d loss / d input; adds parameter gradients when `accumulate_params`.
  Matrix backward(const Tape& tape, const Matrix& grad_output, bool accumulate_params);
  /// d loss / d input only.
  Matrix input_gradient(const Tape& tape, const Matrix& grad_output) const;

  const std::vector<int>& sizes() const { return sizes_; }
  ParamList params();
  ConstParamList params() const;

  std::vector<Param> weights;
  std::vector<Param> biases;

 private:
  Matrix backprop(const Tape& tape, const Matrix& grad_output, Mlp* accumulate_into) const;

  std::vector<int> sizes_;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhGuard = 1e-12;

/// Reparameterized squashed-Gaussian draw and its partial derivatives.
/// u = mean + exp(log_std) * noise, a = (tanh(u) + 1) * T / 2.
struct SquashedSample {
  double u = 0.0;
  double squashed = 0.0;  // tanh(u), the action feature in [-1, 1]
  double action = 0.0;    // seconds in (0, T)
  double log_prob = 0.0;  // density of the action in seconds
  double dlogp_dmean = 0.0;
  double dlogp_dlogstd = 0.0;
  double dsquashed_du = 0.0;
};

SquashedSample squashed_sample(double mean, double log_std, double noise, double max_hold);

/// Log density of `action` in (0, T) under the squashed Gaussian.
double squashed_log_prob(double action, double mean, double log_std, double max_hold);

/// Critic input feature for an action in seconds: 2a/T - 1.
inline double action_feature(double action, double max_hold) { return 2.0 * action / max_hold - 1.0; }

class PolicyNet {
 public:
  struct Head {
    RowVector mean;
    RowVector log_std;  // clamped
    std::vector<std::uint8_t> log_std_clamped;
  };
  struct Tape {
    Matrix input;
    Mlp::Tape mlp;
  };

  PolicyNet() = default;
  PolicyNet(const Vocab& vocab, double max_hold, RngStream& init, const std::vector<int>& hidden = {32, 32, 32});

  Head forward(std::span<const StateVector> batch, Tape* tape) const;
  /// Accumulates parameter gradients from d loss / d mean and d loss / d log_std.
  void backward(std::span<const StateVector> batch, const Tape& tape, const Head& head, const RowVector& d_mean,
                const RowVector& d_log_std);

  /// Action for the policy mean: (tanh(mean) + 1) * T / 2.
  double deterministic_action(const StateVector& state) const;

  ParamList params();
  ConstParamList params() const;

  double max_hold = 60.0;
  StateEncoder encoder;
  Mlp mlp;
};

class CriticNet {
 public:
  struct Tape {
    Matrix input;
    Mlp::Tape mlp;
  };

  CriticNet() = default;
  CriticNet(const std::string& prefix, const Vocab& vocab, double max_hold, RngStream& init,
            const std::vector<int>& hidden = {32, 32, 32});

  /// Q(s, a) with actions in seconds.
  RowVector forward(std::span<const StateVector> batch, const RowVector& actions, Tape* tape) const;
  /// Returns d loss / d action (seconds); accumulates parameter gradients when asked.
  RowVector backward(std::span<const StateVector> batch, const Tape& tape, const RowVector& d_q,
                     bool accumulate_params);
  /// d loss / d action (seconds) without touching parameter gradients.
  RowVector action_gradient(const Tape& tape, const RowVector& d_q) const;

  ParamList params();
  ConstParamList params() const;

  double max_hold = 60.0;
  StateEncoder encoder;
  Mlp mlp;
};

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators, one pair per parameter, created on first step.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// Bias-corrected Adam update of every parameter from its .grad. Throws
/// ArgumentError when the parameter shapes do not match the state.
void adam_step(const ParamList& params, AdamState& state, const AdamConfig& config);

/// target = (1 - tau) * target + tau * online, elementwise.
void polyak_update(const ConstParamList& online, const ParamList& target, double tau);

}  // namespace bushold::nn
