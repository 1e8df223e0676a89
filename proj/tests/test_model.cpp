// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_fixtures.hpp"
#include "newsattn/model.hpp"
#include "newsattn/reference.hpp"

using namespace newsattn;
using namespace newsattn::model;
using newsattn::testing::RandomDays;
using newsattn::testing::tiny_config;

namespace {

double sum(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

ModelParams random_params(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p = ModelParams::init(c, rng);
  p.b_att = 0.3;
  for (double& x : p.w_sim) x = rng.uniform(0.5, 1.5);
  for (double& x : p.w_out) x = rng.normal();
  p.b_cls = Vector{0.1, -0.2};
  return p;
}

}  // namespace

TEST_CASE("ModelConfig defaults and validation") {
  ModelConfig c;
  CHECK(c.d == 300);
  CHECK(c.d_day == 5);
  CHECK(c.dropout_p == 0.5);
  CHECK(c.window == 7);
  CHECK(c.gate_cols() == 64 + 300 + 5);
  c.dropout_p = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = ModelConfig{};
  c.window = 5;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = ModelConfig{};
  c.d_h = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("ModelParams::init starts with uniform day attention") {
  const auto c = tiny_config();
  Rng rng(2);
  const auto p = ModelParams::init(c, rng);
  CHECK(p.w_out == Vector(c.d_h));
  CHECK(p.w_sim == Vector(c.d_h, 1.0));
  CHECK(p.b_att == 0.0);
  Rng again(2);
  CHECK(ModelParams::init(c, again) == p);
}

TEST_CASE("ModelParams layout") {
  const auto c = tiny_config();
  const auto p = random_params(c, 3);
  CHECK(p.parameter_count() == 8 + 1 + 7 * 3 + 3 * 6 * 17 + 6 + 6 + 12 + 2);
  ModelParams q = ModelParams::zeros(c);
  q.unflatten(p.flatten());
  CHECK(q == p);
  const auto names = p.tensors();
  CHECK(names.front().name == "w_att");
  CHECK(names.back().name == "b_cls");

  auto other = tiny_config();
  other.d_h = 5;
  try {
    p.check_shapes(other);
    FAIL("expected throw");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("w_update") != std::string::npos);
  }
}

TEST_CASE("input_attention") {
  ModelConfig c = tiny_config();
  c.d = 3;
  ModelParams p = ModelParams::zeros(c);
  p.w_att = Vector{0.5, -1.0, 0.25};
  p.b_att = 0.7;

  const Matrix one{{1, 2, 3}};
  for (bool literal : {false, true}) {
    c.literal_input_mean = literal;
    const auto r = input_attention(one, p, c);
    CHECK(r.weights == Vector{1.0});
    CHECK(r.x_news == Vector{1, 2, 3});
  }

  const Matrix twin{{1, 2, 3}, {1, 2, 3}};
  c.literal_input_mean = false;
  auto r = input_attention(twin, p, c);
  CHECK(r.weights == Vector{0.5, 0.5});
  CHECK(r.x_news == Vector{1, 2, 3});
  c.literal_input_mean = true;
  r = input_attention(twin, p, c);
  CHECK(r.x_news == Vector{0.5, 1, 1.5});

  const auto empty = input_attention(Matrix(0, 3), p, c);
  CHECK(empty.weights.empty());
  CHECK(empty.x_news == Vector(3));

  CHECK_THROWS_AS(input_attention(Matrix{{1, 2}}, p, c), InputError);
}

TEST_CASE("input_attention matches direct evaluation on a random day") {
  const ModelConfig c = tiny_config();
  Rng rng(41);
  const auto p = random_params(c, 41);
  Matrix day(4, c.d);
  for (double& x : day.span()) x = rng.normal();
  const auto r = input_attention(day, p, c);

  double s[4], den = 0;
  for (int i = 0; i < 4; ++i) {
    s[i] = p.b_att;
    for (std::size_t j = 0; j < c.d; ++j) s[i] += day(i, j) * p.w_att[j];
    den += std::exp(s[i]);
  }
  for (int i = 0; i < 4; ++i) {
    const double w = std::exp(s[i]) / den;
    CHECK(std::abs(r.weights[i] - w) < 1e-14);
    CHECK(std::abs(r.scores[i] - s[i]) < 1e-14);
  }
  for (std::size_t j = 0; j < c.d; ++j) {
    double x = 0;
    for (int i = 0; i < 4; ++i) x += std::exp(s[i]) / den * day(i, j);
    CHECK(std::abs(r.x_news[j] - x) < 1e-14);
  }
}

TEST_CASE("duplicate headlines receive equal weight") {
  const ModelConfig c = tiny_config();
  Rng rng(42);
  const auto p = random_params(c, 42);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix day(0, c.d);
    const auto n = 1 + rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::vector<double> row(c.d);
      for (double& x : row) x = rng.normal();
      day.append_row(row);
    }
    const auto dup = rng.below(n);
    std::vector<double> copy(day.row(dup).begin(), day.row(dup).end());
    day.append_row(copy);
    const auto r = input_attention(day, p, c);
    CHECK(r.weights[dup] == r.weights[n]);
  }
}

TEST_CASE("compose_input") {
  Matrix D(7, 5);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t k = 0; k < 5; ++k) D(t, k) = 10.0 * t + k;
  const Vector x(300);
  const Vector a = compose_input(x.span(), 1, D);
  CHECK(a.size() == 305);
  for (std::size_t j = 0; j < 300; ++j) CHECK(a[j] == 0.0);
  for (std::size_t k = 0; k < 5; ++k) CHECK(a[300 + k] == D(0, k));
  const Vector b = compose_input(x.span(), 4, D);
  for (std::size_t j = 0; j < 300; ++j) CHECK(a[j] == b[j]);
  for (std::size_t k = 0; k < 5; ++k) CHECK(a[300 + k] != b[300 + k]);
  CHECK_THROWS_AS(compose_input(x.span(), 0, D), InputError);
  CHECK_THROWS_AS(compose_input(x.span(), 8, D), InputError);
}

TEST_CASE("gru_cell") {
  const ModelConfig c = tiny_config();
  ModelParams p = ModelParams::zeros(c);
  const Vector h0(c.d_h);
  const Vector x(c.d + c.d_day, 0.3);
  auto s = gru_cell(h0.span(), x.span(), p);
  for (std::size_t j = 0; j < c.d_h; ++j) {
    CHECK(s.update[j] == 0.5);
    CHECK(s.reset[j] == 0.5);
    CHECK(s.candidate[j] == 0.0);
    CHECK(s.hidden[j] == 0.0);
  }

  Rng rng(8);
  p = ModelParams::init(c, rng);
  const Vector ones(c.d + c.d_day, 1.0);
  Vector h_prev(c.d_h);
  for (double& v : h_prev) v = rng.uniform(-0.9, 0.9);
  for (std::size_t i = 0; i < c.d_h; ++i)
    for (std::size_t k = c.d_h; k < c.gate_cols(); ++k) p.w_update(i, k) = 50.0;
  s = gru_cell(h_prev.span(), ones.span(), p);
  for (std::size_t j = 0; j < c.d_h; ++j) CHECK(std::abs(s.hidden[j] - s.candidate[j]) < 1e-12);
  for (std::size_t i = 0; i < c.d_h; ++i)
    for (std::size_t k = c.d_h; k < c.gate_cols(); ++k) p.w_update(i, k) = -50.0;
  s = gru_cell(h_prev.span(), ones.span(), p);
  for (std::size_t j = 0; j < c.d_h; ++j) CHECK(std::abs(s.hidden[j] - h_prev[j]) < 1e-12);

  CHECK_THROWS_AS(gru_cell(Vector(3).span(), x.span(), p), InputError);
  CHECK_THROWS_AS(gru_cell(h0.span(), Vector(4).span(), p), InputError);
}

TEST_CASE("output_attention") {
  const ModelConfig c = tiny_config();
  ModelParams p = ModelParams::zeros(c);
  p.w_sim = Vector(c.d_h, 1.0);
  p.w_out = Vector{0.1, 0.2, -0.3, 0.4, 0.5, -0.6};
  const Vector h{1, 2, 3, 4, 5, 6};
  const std::vector<Vector> same(7, h);
  const double common = numerics::dot(h.span(), p.w_out.span());

  auto r = output_attention(same, p, false);
  for (std::size_t t = 0; t < 7; ++t) {
    CHECK(r.day_scores[t] == doctest::Approx(common));
    CHECK(r.day_weights[t] == doctest::Approx(1.0 / 7.0));
  }
  for (std::size_t j = 0; j < 6; ++j) CHECK(r.attended[j] == doctest::Approx(h[j]).epsilon(1e-14));
  r = output_attention(same, p, true);
  for (std::size_t j = 0; j < 6; ++j) CHECK(r.attended[j] == doctest::Approx(common * h[j]).epsilon(1e-14));

  Rng rng(5);
  std::vector<Vector> hs;
  for (int t = 0; t < 7; ++t) {
    Vector v(6);
    for (double& x : v) x = rng.uniform(-1, 1);
    hs.push_back(v);
  }
  p.w_out = Vector(6);
  r = output_attention(hs, p, false);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0;
    for (const auto& v : hs) mean += v[j] / 7.0;
    CHECK(r.attended[j] == doctest::Approx(mean).epsilon(1e-14));
  }

  CHECK_THROWS_AS(output_attention(std::vector<Vector>(6, h), p, false), InputError);
}

TEST_CASE("output_attention matches direct evaluation") {
  const ModelConfig c = tiny_config();
  const auto p = random_params(c, 77);
  Rng rng(77);
  std::vector<Vector> hs;
  for (int t = 0; t < 7; ++t) {
    Vector v(c.d_h);
    for (double& x : v) x = rng.uniform(-1, 1);
    hs.push_back(v);
  }
  for (bool literal : {false, true}) {
    const auto r = output_attention(hs, p, literal);
    double S[7], den = 0;
    for (int t = 0; t < 7; ++t) {
      S[t] = 0;
      for (std::size_t j = 0; j < c.d_h; ++j) S[t] += hs[t][j] * p.w_sim[j] * p.w_out[j];
      den += std::exp(S[t]);
    }
    for (std::size_t j = 0; j < c.d_h; ++j) {
      double A = 0;
      for (int t = 0; t < 7; ++t) A += (literal ? S[t] / 7.0 : std::exp(S[t]) / den) * hs[t][j];
      CHECK(std::abs(r.attended[j] - A) < 1e-14);
    }
    for (int t = 0; t < 7; ++t) CHECK(std::abs(r.day_scores[t] - S[t]) < 1e-14);
  }
}

TEST_CASE("classify") {
  const ModelConfig c = tiny_config();
  ModelParams p = ModelParams::zeros(c);
  const Vector A{1, -2, 3, 0.5, 0, 1};
  CHECK(classify(A.span(), p, nullptr) == Vector{0.5, 0.5});

  p = random_params(c, 9);
  const Vector y1 = classify(A.span(), p, nullptr), y2 = classify(A.span(), p, nullptr);
  CHECK(y1 == y2);
  CHECK(std::abs(sum(y1) - 1.0) <= 1e-12);
}

TEST_CASE("dropout mask expectation matches unmasked logits") {
  // Sign-coherent classifier rows.
  ModelConfig c;
  ModelParams p = ModelParams::zeros(c);
  Rng rng(2024);
  Vector A(c.d_h);
  for (std::size_t j = 0; j < c.d_h; ++j) {
    A[j] = rng.uniform(0.1, 1.0);
    p.w_cls(0, j) = rng.uniform(0.1, 1.0);
    p.w_cls(1, j) = -rng.uniform(0.1, 1.0);
  }
  const Vector ref = numerics::matvec(p.w_cls, A.span());
  double acc[2] = {0, 0};
  constexpr int kMasks = 100000;
  for (int i = 0; i < kMasks; ++i) {
    const Vector mask = dropout_mask(c.d_h, 0.5, rng);
    const Vector l = numerics::matvec(p.w_cls, numerics::hadamard(A.span(), mask.span()).span());
    acc[0] += l[0];
    acc[1] += l[1];
  }
  for (int k = 0; k < 2; ++k) CHECK(std::abs(acc[k] / kMasks - ref[k]) <= 0.01 * std::abs(ref[k]));
  const Vector m = dropout_mask(c.d_h, 0.5, rng);
  for (double v : m) CHECK_UNARY(v == 0.0 || v == 2.0);
}

TEST_CASE("forward on an all-empty window uses only day embeddings") {
  const ModelConfig c = tiny_config();
  const auto p = random_params(c, 12);
  const std::vector<Matrix> empty(7, Matrix(0, c.d));
  const DayMatrices refs = {std::cref(empty[0]), std::cref(empty[1]), std::cref(empty[2]),
                            std::cref(empty[3]), std::cref(empty[4]), std::cref(empty[5]),
                            std::cref(empty[6])};
  const auto a = forward(refs, p, c, Mode::Eval);
  const auto b = forward(refs, p, c, Mode::Eval);
  CHECK(a.probs == b.probs);
  for (std::size_t t = 0; t < 7; ++t) {
    CHECK(a.days[t].attention.weights.empty());
    for (std::size_t j = 0; j < c.d; ++j) CHECK(a.days[t].input[j] == 0.0);
    for (std::size_t k = 0; k < c.d_day; ++k) CHECK(a.days[t].input[c.d + k] == p.day_embedding(t, k));
  }
}

TEST_CASE("forward trace invariants") {
  Rng rng(100);
  for (int trial = 0; trial < 40; ++trial) {
    ModelConfig c = tiny_config();
    c.literal_input_mean = trial % 2 == 1;
    c.literal_output_attention = trial % 4 >= 2;
    const auto p = random_params(c, 1000 + trial);
    const RandomDays days(c.d, 4, rng);
    const auto tr = forward(days.refs(), p, c, Mode::Eval);

    for (const auto& dt : tr.days) {
      if (!dt.attention.weights.empty()) CHECK(std::abs(sum(dt.attention.weights) - 1.0) <= 1e-12);
    }
    if (!c.literal_output_attention) CHECK(std::abs(sum(tr.output.day_weights) - 1.0) <= 1e-12);
    CHECK(std::abs(sum(tr.probs) - 1.0) <= 1e-12);

    Vector prev(c.d_h);
    for (std::size_t t = 0; t < 7; ++t) {
      const auto& g = tr.days[t].gru;
      for (std::size_t j = 0; j < c.d_h; ++j) {
        const double lo = std::min(prev[j], g.candidate[j]), hi = std::max(prev[j], g.candidate[j]);
        CHECK(g.hidden[j] >= lo - 1e-15);
        CHECK(g.hidden[j] <= hi + 1e-15);
      }
      prev = g.hidden;
    }
    if (!c.literal_output_attention) {
      for (std::size_t j = 0; j < c.d_h; ++j) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t t = 0; t < 7; ++t) {
          lo = std::min(lo, tr.hidden(t)[j]);
          hi = std::max(hi, tr.hidden(t)[j]);
        }
        CHECK(tr.output.attended[j] >= lo - 1e-15);
        CHECK(tr.output.attended[j] <= hi + 1e-15);
      }
    }

    // Independent long-double evaluation of the same network.
    const auto ref = reference::evaluate(days.refs(), p, c, nullptr, 1);
    CHECK(std::abs(tr.probs[1] - static_cast<double>(ref.probs[1])) < 1e-12);
  }
}

TEST_CASE("training forward with p=0 equals evaluation forward") {
  ModelConfig c = tiny_config();
  c.dropout_p = 0.0;
  Rng rng(55);
  const auto p = random_params(c, 55);
  const RandomDays days(c.d, 4, rng);
  const auto ev = forward(days.refs(), p, c, Mode::Eval);
  const auto tr = forward(days.refs(), p, c, Mode::Train);
  CHECK(ev.probs == tr.probs);
  CHECK(ev.logits == tr.logits);

  c.dropout_p = 0.5;
  CHECK_THROWS_AS(forward(days.refs(), p, c, Mode::Train), InputError);
  Rng drop(1);
  const auto masked = forward(days.refs(), p, c, Mode::Train, &drop);
  CHECK(masked.mask.size() == c.d_h);
}
