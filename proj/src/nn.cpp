#include "bushold/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bushold/error.hpp"

namespace bushold::nn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

}  // namespace

Param::Param(std::string n, Matrix v, bool sparse)
    : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())), row_sparse(sparse) {
  if (row_sparse) touched.assign(static_cast<std::size_t>(value.rows()), 0);
}

void Param::zero_grad() {
  if (!row_sparse) {
    grad.setZero();
    return;
  }
  for (std::size_t r = 0; r < touched.size(); ++r) {
    if (touched[r]) {
      grad.row(static_cast<Eigen::Index>(r)).setZero();
      touched[r] = 0;
    }
  }
}

void zero_grad(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

int embedding_dim(int vocab_size) {
  if (vocab_size < 1) throw ArgumentError("embedding_dim: vocabulary must be non-empty");
  return std::max(1, std::min(50, vocab_size / 2));
}

// ---- EmbeddingTable ------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::string name, int vocab_size, RngStream* init) {
  const int dim = embedding_dim(vocab_size);
  Matrix w = Matrix::Zero(vocab_size, dim);
  if (init != nullptr) {
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = 0.1 * init->normal();
  }
  weights = Param(std::move(name), std::move(w), /*sparse=*/true);
}

void EmbeddingTable::check_index(int index) const {
  if (index < 0 || index >= vocab_size()) {
    throw std::out_of_range("embedding lookup: index " + std::to_string(index) + " outside vocabulary of " +
                            std::to_string(vocab_size()) + " in " + weights.name);
  }
}

// ---- StateEncoder ---------------------------------------------------------------

StateEncoder::StateEncoder(const std::string& prefix, const Vocab& vocab, RngStream* init)
    : tables{EmbeddingTable(prefix + ".embed.bus", vocab.bus, init),
             EmbeddingTable(prefix + ".embed.stop", vocab.stop, init),
             EmbeddingTable(prefix + ".embed.time", vocab.time, init),
             EmbeddingTable(prefix + ".embed.direction", vocab.direction, init)} {}

int StateEncoder::embedded_width() const {
  int w = 0;
  for (const auto& t : tables) w += t.dim();
  return w;
}

namespace {

std::array<int, 4> categorical_ids(const StateVector& s) {
  return {s.bus_id, s.stop_id, s.time_period, s.direction};
}

}  // namespace

Matrix StateEncoder::encode(std::span<const StateVector> batch, int extra_rows) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix x(width() + extra_rows, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const StateVector& s = batch[static_cast<std::size_t>(b)];
    const auto ids = categorical_ids(s);
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const auto& t = tables[k];
      t.check_index(ids[k]);
      x.block(offset, b, t.dim(), 1) = t.weights.value.row(ids[k]).transpose();
      offset += t.dim();
    }
    x(offset, b) = s.h_f_norm;
    x(offset + 1, b) = s.h_b_norm;
    x(offset + 2, b) = s.seg_speed_norm;
    for (int e = 0; e < extra_rows; ++e) x(offset + 3 + e, b) = 0.0;
  }
  return x;
}

void StateEncoder::backward(std::span<const StateVector> batch, const Matrix& grad_input) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto ids = categorical_ids(batch[static_cast<std::size_t>(b)]);
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k < tables.size(); ++k) {
      Param& p = tables[k].weights;
      const int dim = tables[k].dim();
      p.grad.row(ids[k]) += grad_input.block(offset, b, dim, 1).transpose();
      p.mark_row(ids[k]);
      offset += dim;
    }
  }
}

ParamList StateEncoder::params() {
  ParamList out;
  for (auto& t : tables) out.push_back(&t.weights);
  return out;
}

ConstParamList StateEncoder::params() const {
  ConstParamList out;
  for (const auto& t : tables) out.push_back(&t.weights);
  return out;
}

Vector embed_state(const StateVector& state, const StateEncoder& encoder) {
  return encoder.encode(std::span<const StateVector>(&state, 1)).col(0);
}

// ---- Mlp ----------------------------------------------------------------------------

Mlp::Mlp(const std::string& prefix, std::vector<int> sizes, RngStream& init) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ArgumentError("Mlp: need at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = bound * (2.0 * init.uniform() - 1.0);
    Matrix b(fan_out, 1);
    for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) = bound * (2.0 * init.uniform() - 1.0);
    weights.emplace_back(prefix + ".w" + std::to_string(l), std::move(w));
    biases.emplace_back(prefix + ".b" + std::to_string(l), std::move(b));
  }
}

Matrix Mlp::forward(const Matrix& x, Tape* tape) const {
  if (x.rows() != sizes_.front()) throw ArgumentError("Mlp::forward: input width mismatch");
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->pre_activations.clear();
  }
  Matrix h = x;
  const std::size_t layers = weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = weights[l].value * h;
    z.colwise() += biases[l].value.col(0);
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(h));
      tape->pre_activations.push_back(z);
    }
    h = l + 1 < layers ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return h;
}

Matrix Mlp::backprop(const Tape& tape, const Matrix& grad_output, Mlp* accumulate_into) const {
  Matrix dz = grad_output;
  for (std::size_t l = weights.size(); l-- > 0;) {
    if (l + 1 < weights.size()) {
      dz = dz.cwiseProduct((tape.pre_activations[l].array() > 0.0).cast<double>().matrix());
    }
    if (accumulate_into != nullptr) {
      accumulate_into->weights[l].grad.noalias() += dz * tape.inputs[l].transpose();
      accumulate_into->biases[l].grad += dz.rowwise().sum();
    }
    Matrix dx = weights[l].value.transpose() * dz;
    dz = std::move(dx);
  }
  return dz;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, bool accumulate_params) {
  return backprop(tape, grad_output, accumulate_params ? this : nullptr);
}

Matrix Mlp::input_gradient(const Tape& tape, const Matrix& grad_output) const {
  return backprop(tape, grad_output, nullptr);
}

ParamList Mlp::params() {
  ParamList out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

ConstParamList Mlp::params() const {
  ConstParamList out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

// ---- Squashed Gaussian --------------------------------------------------------------

SquashedSample squashed_sample(double mean, double log_std, double noise, double max_hold) {
  SquashedSample s;
  const double std_dev = std::exp(log_std);
  s.u = mean + std_dev * noise;
  const double t = std::tanh(s.u);
  const double one_minus = 1.0 - t * t;
  const double half_range = 0.5 * max_hold;
  s.squashed = t;
  s.action = (t + 1.0) * half_range;
  s.log_prob = -0.5 * noise * noise - log_std - kHalfLog2Pi - std::log(one_minus + kTanhGuard) - std::log(half_range);
  const double dlogp_du = 2.0 * t * one_minus / (one_minus + kTanhGuard);
  s.dlogp_dmean = dlogp_du;
  s.dlogp_dlogstd = -1.0 + dlogp_du * std_dev * noise;
  s.dsquashed_du = one_minus;
  return s;
}

double squashed_log_prob(double action, double mean, double log_std, double max_hold) {
  log_std = std::clamp(log_std, kLogStdMin, kLogStdMax);
  const double half_range = 0.5 * max_hold;
  const double t = action / half_range - 1.0;
  const double u = std::atanh(t);
  const double z = (u - mean) / std::exp(log_std);
  return -0.5 * z * z - log_std - kHalfLog2Pi - std::log(1.0 - t * t + kTanhGuard) - std::log(half_range);
}

// ---- PolicyNet ----------------------------------------------------------------------

namespace {

std::vector<int> layer_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

}  // namespace

PolicyNet::PolicyNet(const Vocab& vocab, double max_hold_secs, RngStream& init, const std::vector<int>& hidden)
    : max_hold(max_hold_secs), encoder("policy", vocab, &init) {
  mlp = Mlp("policy.mlp", layer_sizes(encoder.width(), hidden, 2), init);
}

PolicyNet::Head PolicyNet::forward(std::span<const StateVector> batch, Tape* tape) const {
  Matrix x = encoder.encode(batch);
  Matrix out = mlp.forward(x, tape != nullptr ? &tape->mlp : nullptr);
  if (tape != nullptr) tape->input = std::move(x);
  Head head;
  head.mean = out.row(0);
  head.log_std = out.row(1);
  head.log_std_clamped.assign(static_cast<std::size_t>(out.cols()), 0);
  for (Eigen::Index b = 0; b < out.cols(); ++b) {
    const double raw = head.log_std(b);
    if (raw < kLogStdMin || raw > kLogStdMax) {
      head.log_std(b) = std::clamp(raw, kLogStdMin, kLogStdMax);
      head.log_std_clamped[static_cast<std::size_t>(b)] = 1;
    }
  }
  return head;
}

void PolicyNet::backward(std::span<const StateVector> batch, const Tape& tape, const Head& head,
                         const RowVector& d_mean, const RowVector& d_log_std) {
  Matrix d_out(2, d_mean.size());
  d_out.row(0) = d_mean;
  d_out.row(1) = d_log_std;
  for (Eigen::Index b = 0; b < d_out.cols(); ++b) {
    if (head.log_std_clamped[static_cast<std::size_t>(b)]) d_out(1, b) = 0.0;
  }
  const Matrix dx = mlp.backward(tape.mlp, d_out, true);
  encoder.backward(batch, dx);
}

double PolicyNet::deterministic_action(const StateVector& state) const {
  const Head h = forward(std::span<const StateVector>(&state, 1), nullptr);
  return (std::tanh(h.mean(0)) + 1.0) * 0.5 * max_hold;
}

ParamList PolicyNet::params() {
  ParamList out = encoder.params();
  for (Param* p : mlp.params()) out.push_back(p);
  return out;
}

ConstParamList PolicyNet::params() const {
  ConstParamList out = encoder.params();
  for (const Param* p : mlp.params()) out.push_back(p);
  return out;
}

// ---- CriticNet ----------------------------------------------------------------------

CriticNet::CriticNet(const std::string& prefix, const Vocab& vocab, double max_hold_secs, RngStream& init,
                     const std::vector<int>& hidden)
    : max_hold(max_hold_secs), encoder(prefix, vocab, &init) {
  mlp = Mlp(prefix + ".mlp", layer_sizes(encoder.width() + 1, hidden, 1), init);
}

RowVector CriticNet::forward(std::span<const StateVector> batch, const RowVector& actions, Tape* tape) const {
  if (actions.size() != static_cast<Eigen::Index>(batch.size())) {
    throw ArgumentError("CriticNet::forward: actions/batch size mismatch");
  }
  Matrix x = encoder.encode(batch, 1);
  const Eigen::Index last = x.rows() - 1;
  for (Eigen::Index b = 0; b < x.cols(); ++b) x(last, b) = action_feature(actions(b), max_hold);
  RowVector q = mlp.forward(x, tape != nullptr ? &tape->mlp : nullptr).row(0);
  if (tape != nullptr) tape->input = std::move(x);
  return q;
}

RowVector CriticNet::backward(std::span<const StateVector> batch, const Tape& tape, const RowVector& d_q,
                              bool accumulate_params) {
  const Matrix dx = mlp.backward(tape.mlp, Matrix(d_q), accumulate_params);
  if (accumulate_params) encoder.backward(batch, dx);
  return dx.row(dx.rows() - 1) * (2.0 / max_hold);
}

RowVector CriticNet::action_gradient(const Tape& tape, const RowVector& d_q) const {
  const Matrix dx = mlp.input_gradient(tape.mlp, Matrix(d_q));
  return dx.row(dx.rows() - 1) * (2.0 / max_hold);
}

ParamList CriticNet::params() {
  ParamList out = encoder.params();
  for (Param* p : mlp.params()) out.push_back(p);
  return out;
}

ConstParamList CriticNet::params() const {
  ConstParamList out = encoder.params();
  for (const Param* p : mlp.params()) out.push_back(p);
  return out;
}

// ---- Optimizer ----------------------------------------------------------------------

void adam_step(const ParamList& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty() && state.step == 0) {
    for (const Param* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ArgumentError("adam_step: parameter count differs from optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || state.m[i].rows() != p.value.rows() ||
        state.m[i].cols() != p.value.cols()) {
      throw ArgumentError("adam_step: shape mismatch for " + p.name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    auto update_rows = [&](Eigen::Index r0, Eigen::Index nrows) {
      auto g = p.grad.middleRows(r0, nrows).array();
      auto mr = m.middleRows(r0, nrows).array();
      auto vr = v.middleRows(r0, nrows).array();
      mr = config.beta1 * mr + (1.0 - config.beta1) * g;
      vr = config.beta2 * vr + (1.0 - config.beta2) * g.square();
      p.value.middleRows(r0, nrows).array() -= config.lr * (mr / bias1) / ((vr / bias2).sqrt() + config.eps);
    };
    if (p.row_sparse) {
      for (std::size_t r = 0; r < p.touched.size(); ++r)
        if (p.touched[r]) update_rows(static_cast<Eigen::Index>(r), 1);
    } else {
      update_rows(0, p.value.rows());
    }
  }
}

void polyak_update(const ConstParamList& online, const ParamList& target, double tau) {
  if (online.size() != target.size()) throw ArgumentError("polyak_update: parameter count mismatch");
  for (std::size_t i = 0; i < online.size(); ++i) {
    const Param& src = *online[i];
    Param& dst = *target[i];
    if (src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw ArgumentError("polyak_update: shape mismatch for " + dst.name);
    }
    dst.value = (1.0 - tau) * dst.value + tau * src.value;
  }
}

}  // namespace bushold::nn
