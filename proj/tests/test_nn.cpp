#include <doctest.h>

#include <cmath>
#include <functional>

#include "bushold/error.hpp"
#include "bushold/nn.hpp"

using namespace bushold;
using namespace bushold::nn;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-4;

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7}); }

std::vector<StateVector> random_states(RngStream& rng, int n) {
  std::vector<StateVector> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.bus_id = static_cast<int>(rng.below(40));
    s.stop_id = 1 + static_cast<int>(rng.below(20));
    s.time_period = static_cast<int>(rng.below(13));
    s.direction = static_cast<int>(rng.below(2));
    s.h_f_norm = 2.0 * rng.uniform();
    s.h_b_norm = 2.0 * rng.uniform();
    s.seg_speed_norm = rng.uniform();
  }
  return out;
}

/// Central-difference check of every gradient entry that is non-zero or
/// belongs to a dense parameter; embedding rows never looked up are skipped.
/// Returns the worst relative error.
double check_gradients(const ParamList& params, const std::function<double()>& loss, RngStream& rng,
                       int max_entries_per_param = 40) {
  double worst = 0.0;
  for (Param* p : params) {
    const Matrix analytic = p->grad;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      if (p->row_sparse && !p->touched[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) entries.emplace_back(i, j);
    }
    // Random subset keeps large layers cheap.
    while (static_cast<int>(entries.size()) > max_entries_per_param) {
      entries.erase(entries.begin() + static_cast<long>(rng.below(entries.size())));
    }
    for (auto [i, j] : entries) {
      const double saved = p->value(i, j);
      p->value(i, j) = saved + kStep;
      const double up = loss();
      p->value(i, j) = saved - kStep;
      const double down = loss();
      p->value(i, j) = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      const double err = rel_err(numeric, analytic(i, j));
      if (err > worst) worst = err;
      if (err > kTolerance) {
        MESSAGE(p->name << "(" << i << "," << j << "): numeric " << numeric << " analytic " << analytic(i, j));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("embedding dimensions follow min(50, N/2)") {
  CHECK(embedding_dim(40) == 20);
  CHECK(embedding_dim(22) == 11);
  CHECK(embedding_dim(13) == 6);
  CHECK(embedding_dim(2) == 1);
  CHECK(embedding_dim(1) == 1);
  CHECK(embedding_dim(500) == 50);
  CHECK_THROWS_AS(embedding_dim(0), ArgumentError);
}

TEST_CASE("state encoder layout") {
  StateEncoder enc("e", Vocab{}, nullptr);
  CHECK(enc.embedded_width() == 38);
  CHECK(enc.width() == 41);
  StateVector s;
  s.bus_id = 39;
  s.stop_id = 21;
  s.time_period = 12;
  s.direction = 0;
  s.h_f_norm = 0.75;
  s.h_b_norm = 1.25;
  s.seg_speed_norm = 0.5;
  const Vector x = embed_state(s, enc);
  REQUIRE(x.size() == 41);
  for (int i = 0; i < 38; ++i) CHECK(x(i) == 0.0);
  CHECK(x(38) == 0.75);
  CHECK(x(39) == 1.25);
  CHECK(x(40) == 0.5);

  RngStream rng(3, StreamId::Init);
  StateEncoder filled("f", Vocab{}, &rng);
  const Vector y = embed_state(s, filled);
  CHECK(y.head(20) == filled.tables[0].weights.value.row(39).transpose());
  CHECK(y.segment(20, 11) == filled.tables[1].weights.value.row(21).transpose());
}

TEST_CASE("state encoder rejects ids outside the vocabulary") {
  StateEncoder enc("e", Vocab{}, nullptr);
  StateVector s;
  s.bus_id = 40;
  CHECK_THROWS_AS(embed_state(s, enc), std::out_of_range);
  s.bus_id = 0;
  s.stop_id = 22;
  CHECK_THROWS_AS(embed_state(s, enc), std::out_of_range);
  s.stop_id = 1;
  s.direction = -1;
  CHECK_THROWS_AS(embed_state(s, enc), std::out_of_range);
}

TEST_CASE("single linear layer: squared-error gradient") {
  RngStream rng(5, StreamId::Init);
  Mlp net("lin", {3, 1}, rng);
  Matrix x(3, 1);
  x << 0.5, -1.0, 2.0;
  const double y = 0.3;
  Mlp::Tape tape;
  const Matrix out = net.forward(x, &tape);
  const double pred = (net.weights[0].value * x)(0, 0) + net.biases[0].value(0, 0);
  CHECK(out(0, 0) == doctest::Approx(pred));
  zero_grad(net.params());
  net.backward(tape, Matrix::Constant(1, 1, 2.0 * (pred - y)), true);
  for (int k = 0; k < 3; ++k) CHECK(net.weights[0].grad(0, k) == doctest::Approx(2.0 * (pred - y) * x(k, 0)));
  CHECK(net.biases[0].grad(0, 0) == doctest::Approx(2.0 * (pred - y)));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  RngStream rng(6, StreamId::Init);
  PolicyNet pol(Vocab{}, 60.0, rng);
  auto states = random_states(rng, 8);
  PolicyNet::Tape tape;
  const auto head = pol.forward(states, &tape);
  zero_grad(pol.params());
  pol.backward(states, tape, head, RowVector::Zero(8), RowVector::Zero(8));
  for (const Param* p : std::as_const(pol).params()) CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("policy gradients agree with finite differences") {
  RngStream rng(7, StreamId::Init);
  for (int point = 0; point < 10; ++point) {
    PolicyNet pol(Vocab{}, 60.0, rng);
    const auto states = random_states(rng, 6);
    RowVector c_mean(6), c_ls(6);
    for (int b = 0; b < 6; ++b) {
      c_mean(b) = rng.normal();
      c_ls(b) = rng.normal();
    }
    auto loss = [&] {
      const auto h = pol.forward(states, nullptr);
      return (c_mean.array() * h.mean.array()).sum() + (c_ls.array() * h.log_std.array()).sum();
    };
    PolicyNet::Tape tape;
    const auto head = pol.forward(states, &tape);
    zero_grad(pol.params());
    pol.backward(states, tape, head, c_mean, c_ls);
    CHECK(check_gradients(pol.params(), loss, rng) < kTolerance);
  }
}

TEST_CASE("critic gradients agree with finite differences") {
  RngStream rng(8, StreamId::Init);
  for (int point = 0; point < 10; ++point) {
    CriticNet q("q1", Vocab{}, 60.0, rng);
    const auto states = random_states(rng, 6);
    RowVector actions(6), c(6);
    for (int b = 0; b < 6; ++b) {
      actions(b) = 60.0 * rng.uniform();
      c(b) = rng.normal();
    }
    auto loss = [&] { return (c.array() * q.forward(states, actions, nullptr).array()).sum(); };
    CriticNet::Tape tape;
    q.forward(states, actions, &tape);
    zero_grad(q.params());
    const RowVector da = q.backward(states, tape, c, true);
    CHECK(check_gradients(q.params(), loss, rng) < kTolerance);

    CHECK((q.action_gradient(tape, c) - da).cwiseAbs().maxCoeff() == 0.0);
    for (int b = 0; b < 6; ++b) {
      const double saved = actions(b);
      actions(b) = saved + kStep;
      const double up = loss();
      actions(b) = saved - kStep;
      const double down = loss();
      actions(b) = saved;
      CHECK(rel_err((up - down) / (2 * kStep), da(b)) < kTolerance);
    }
  }
}

TEST_CASE("forward passes are pure") {
  RngStream rng(9, StreamId::Init);
  PolicyNet pol(Vocab{}, 60.0, rng);
  CriticNet q("q1", Vocab{}, 60.0, rng);
  const auto states = random_states(rng, 16);
  const RowVector a = RowVector::Constant(16, 12.5);
  const auto h1 = pol.forward(states, nullptr);
  const auto h2 = pol.forward(states, nullptr);
  CHECK(h1.mean == h2.mean);
  CHECK(h1.log_std == h2.log_std);
  CHECK(q.forward(states, a, nullptr) == q.forward(states, a, nullptr));
  CHECK(pol.deterministic_action(states[0]) == pol.deterministic_action(states[0]));
}

TEST_CASE("squashed gaussian: limits") {
  const double T = 60.0;
  CHECK(squashed_sample(0.0, kLogStdMin, 0.7, T).action == doctest::Approx(30.0).epsilon(1e-6));
  CHECK(squashed_sample(50.0, 0.0, 0.0, T).action == doctest::Approx(T));
  CHECK(squashed_sample(-50.0, 0.0, 0.0, T).action == doctest::Approx(0.0));
  CHECK(std::isfinite(squashed_sample(50.0, kLogStdMax, 3.0, T).log_prob));
  CHECK(std::isfinite(squashed_sample(0.0, kLogStdMin, 0.0, T).log_prob));

  RngStream rng(10, StreamId::Policy);
  for (int i = 0; i < 10000; ++i) {
    const auto s = squashed_sample(rng.normal(), rng.uniform() * 2.0 - 1.0, rng.normal(), T);
    REQUIRE(s.action > 0.0);
    REQUIRE(s.action < T);
    REQUIRE(std::isfinite(s.log_prob));
  }
}

TEST_CASE("squashed gaussian: density integrates to one") {
  const double T = 60.0;
  const std::pair<double, double> params[] = {{0.0, 0.0}, {0.5, -0.5}, {-1.0, 0.3}, {0.2, -2.0}, {1.5, -1.0}};
  for (auto [mean, log_std] : params) {
    const int n = 200000;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = (i + 0.5) * T / n;
      total += std::exp(squashed_log_prob(a, mean, log_std, T));
    }
    total *= T / n;
    INFO("mean=" << mean << " log_std=" << log_std);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("squashed gaussian: sample log density matches the closed form") {
  RngStream rng(11, StreamId::Policy);
  for (int i = 0; i < 200; ++i) {
    const double mean = rng.normal(), ls = rng.uniform() - 1.0, noise = rng.normal();
    const auto s = squashed_sample(mean, ls, noise, 60.0);
    CHECK(s.log_prob == doctest::Approx(squashed_log_prob(s.action, mean, ls, 60.0)).epsilon(1e-6));
  }
}

TEST_CASE("squashed gaussian: derivatives by finite differences") {
  RngStream rng(12, StreamId::Policy);
  for (int i = 0; i < 50; ++i) {
    const double mean = rng.normal(), ls = rng.uniform() - 1.0, noise = rng.normal();
    const auto s = squashed_sample(mean, ls, noise, 60.0);
    const double dm = (squashed_sample(mean + kStep, ls, noise, 60.0).log_prob -
                       squashed_sample(mean - kStep, ls, noise, 60.0).log_prob) /
                      (2 * kStep);
    const double ds = (squashed_sample(mean, ls + kStep, noise, 60.0).log_prob -
                       squashed_sample(mean, ls - kStep, noise, 60.0).log_prob) /
                      (2 * kStep);
    CHECK(rel_err(dm, s.dlogp_dmean) < kTolerance);
    CHECK(rel_err(ds, s.dlogp_dlogstd) < kTolerance);
  }
}

TEST_CASE("adam: hand-computed first step") {
  Param p("p", Matrix::Zero(1, 1));
  AdamState st;
  p.grad(0, 0) = 1.0;
  adam_step({&p}, st, AdamConfig{1e-3});
  CHECK(p.value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(st.step == 1);

  Param q("q", Matrix::Constant(2, 2, 0.7));
  AdamState sq;
  adam_step({&q}, sq, AdamConfig{1e-3});
  CHECK(q.value == Matrix::Constant(2, 2, 0.7));
}

TEST_CASE("adam: deterministic and shape-checked") {
  RngStream r1(13, StreamId::Init), r2(13, StreamId::Init);
  Mlp a("m", {4, 8, 1}, r1), b("m", {4, 8, 1}, r2);
  AdamState sa, sb;
  for (int step = 0; step < 5; ++step) {
    for (Mlp* net : {&a, &b}) {
      zero_grad(net->params());
      for (Param* p : net->params()) p->grad.setConstant(0.1 * (step + 1));
    }
    adam_step(a.params(), sa, AdamConfig{1e-3});
    adam_step(b.params(), sb, AdamConfig{1e-3});
  }
  for (std::size_t i = 0; i < a.weights.size(); ++i) CHECK(a.weights[i].value == b.weights[i].value);

  Param wrong("w", Matrix::Zero(3, 3));
  AdamState bad = sa;
  CHECK_THROWS_AS(adam_step({&wrong}, bad, AdamConfig{}), ArgumentError);
  Mlp c("m", {4, 9, 1}, r1);
  AdamState mismatched = sa;
  CHECK_THROWS_AS(adam_step(c.params(), mismatched, AdamConfig{}), ArgumentError);
}

TEST_CASE("adam: untouched embedding rows stay put") {
  RngStream rng(14, StreamId::Init);
  StateEncoder enc("e", Vocab{}, &rng);
  const Matrix before = enc.tables[0].weights.value;
  zero_grad(enc.params());
  StateVector s;
  s.bus_id = 3;
  std::vector<StateVector> batch{s};
  enc.backward(batch, Matrix::Ones(enc.width(), 1));
  AdamState st;
  adam_step(enc.params(), st, AdamConfig{1e-2});
  const Matrix& after = enc.tables[0].weights.value;
  for (int r = 0; r < after.rows(); ++r) {
    if (r == 3) {
      CHECK(after.row(r) != before.row(r));
    } else {
      CHECK(after.row(r) == before.row(r));
    }
  }
}

TEST_CASE("polyak averaging") {
  Param online("o", Matrix::Zero(2, 2)), target("t", Matrix::Ones(2, 2));
  polyak_update({&online}, {&target}, 0.005);
  CHECK(target.value(0, 0) == doctest::Approx(0.995));
  polyak_update({&online}, {&target}, 0.0);
  CHECK(target.value(1, 1) == doctest::Approx(0.995));
  online.value.setConstant(3.0);
  polyak_update({&online}, {&target}, 1.0);
  CHECK(target.value == online.value);
  Param other("x", Matrix::Zero(1, 2));
  CHECK_THROWS_AS(polyak_update({&online}, {&other}, 0.5), ArgumentError);
}
