// SPDX-License-Identifier: Apache-2.0
// Reverse pass through classifier, output attention, GRU and input attention.
#include <cmath>

#include "newsattn/train.hpp"

namespace newsattn::train {

using numerics::Matrix;
using numerics::Vector;

double cross_entropy(const Vector& probs, int label) {
  if (label != 0 && label != 1) throw InputError("cross_entropy: label must be 0 or 1");
  if (probs.size() != 2) throw InputError("cross_entropy: expected 2 probabilities");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor));
}

Gradients backward(const model::DayMatrices& days, const model::ForwardTrace& trace, int label,
                   const ModelParams& params, const ModelConfig& config) {
  params.check_shapes(config);
  if (label != 0 && label != 1) throw InputError("backward: label must be 0 or 1");
  const std::size_t d = config.d;
  const std::size_t d_h = config.d_h;
  constexpr std::size_t W = model::kWindowDays;
  Gradients g = ModelParams::zeros(config);

  // Softmax + cross-entropy.
  Vector d_logits = trace.probs;
  d_logits[static_cast<std::size_t>(label)] -= 1.0;

  const Vector& attended = trace.output.attended;
  const bool masked = !trace.mask.empty();
  if (masked && trace.mask.size() != d_h) throw InputError("backward: mask length mismatch");
  Vector features = masked ? numerics::hadamard(attended.span(), trace.mask.span()) : attended;
  numerics::add_outer(g.w_cls, d_logits.span(), features.span());
  for (std::size_t k = 0; k < 2; ++k) g.b_cls[k] = d_logits[k];
  Vector d_attended = numerics::matvec_transposed(params.w_cls, d_logits.span());
  if (masked) d_attended = numerics::hadamard(d_attended.span(), trace.mask.span());

  // Output attention.
  std::array<Vector, W> d_hidden;
  for (auto& v : d_hidden) v = Vector(d_h);
  Vector d_scores(W);
  const auto& weights = trace.output.day_weights;
  if (config.literal_output_attention) {
    const double inv = 1.0 / static_cast<double>(W);
    for (std::size_t t = 0; t < W; ++t) {
      const Vector& h = trace.hidden(t);
      for (std::size_t j = 0; j < d_h; ++j) d_hidden[t][j] += inv * weights[t] * d_attended[j];
      d_scores[t] = inv * numerics::dot(h.span(), d_attended.span());
    }
  } else {
    Vector d_weights(W);
    double mean = 0.0;
    for (std::size_t t = 0; t < W; ++t) {
      const Vector& h = trace.hidden(t);
      for (std::size_t j = 0; j < d_h; ++j) d_hidden[t][j] += weights[t] * d_attended[j];
      d_weights[t] = numerics::dot(h.span(), d_attended.span());
      mean += weights[t] * d_weights[t];
    }
    for (std::size_t t = 0; t < W; ++t) d_scores[t] = weights[t] * (d_weights[t] - mean);
  }
  const Vector pattern = numerics::hadamard(params.w_sim.span(), params.w_out.span());
  Vector d_pattern(d_h);
  for (std::size_t t = 0; t < W; ++t) {
    const Vector& h = trace.hidden(t);
    for (std::size_t j = 0; j < d_h; ++j) {
      d_hidden[t][j] += d_scores[t] * pattern[j];
      d_pattern[j] += d_scores[t] * h[j];
    }
  }
  for (std::size_t j = 0; j < d_h; ++j) {
    g.w_sim[j] = d_pattern[j] * params.w_out[j];
    g.w_out[j] = d_pattern[j] * params.w_sim[j];
  }

  // GRU, newest day first.
  const Vector zero_state(d_h);
  Vector carry(d_h);
  for (std::size_t step = W; step-- > 0;) {
    const model::DayTrace& dt = trace.days[step];
    const Vector& h_prev = step == 0 ? zero_state : trace.hidden(step - 1);
    const Vector& u = dt.gru.update;
    const Vector& r = dt.gru.reset;
    const Vector& cand = dt.gru.candidate;
    const Vector& x = dt.input;

    Vector dh(d_h);
    for (std::size_t j = 0; j < d_h; ++j) dh[j] = d_hidden[step][j] + carry[j];

    Vector d_prev(d_h);
    Vector d_pre_u(d_h), d_pre_c(d_h);
    for (std::size_t j = 0; j < d_h; ++j) {
      const double du = dh[j] * (cand[j] - h_prev[j]);
      const double dc = dh[j] * u[j];
      d_prev[j] = dh[j] * (1.0 - u[j]);
      d_pre_u[j] = du * u[j] * (1.0 - u[j]);
      d_pre_c[j] = dc * (1.0 - cand[j] * cand[j]);
    }

    const Vector z = numerics::concat(h_prev.span(), x.span());
    const Vector gated = numerics::hadamard(r.span(), h_prev.span());
    const Vector z_tilde = numerics::concat(gated.span(), x.span());

    numerics::add_outer(g.w_candidate, d_pre_c.span(), z_tilde.span());
    const Vector d_z_tilde = numerics::matvec_transposed(params.w_candidate, d_pre_c.span());

    Vector d_pre_r(d_h);
    for (std::size_t j = 0; j < d_h; ++j) {
      const double d_gated = d_z_tilde[j];
      d_prev[j] += d_gated * r[j];
      d_pre_r[j] = d_gated * h_prev[j] * r[j] * (1.0 - r[j]);
    }

    numerics::add_outer(g.w_update, d_pre_u.span(), z.span());
    numerics::add_outer(g.w_reset, d_pre_r.span(), z.span());
    const Vector d_z_u = numerics::matvec_transposed(params.w_update, d_pre_u.span());
    const Vector d_z_r = numerics::matvec_transposed(params.w_reset, d_pre_r.span());

    for (std::size_t j = 0; j < d_h; ++j) d_prev[j] += d_z_u[j] + d_z_r[j];

    // x_t = [x'_t, D_t]
    Vector d_x(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      d_x[k] = d_z_tilde[d_h + k] + d_z_u[d_h + k] + d_z_r[d_h + k];
    }
    auto d_day = g.day_embedding.row(step);
    for (std::size_t k = 0; k < config.d_day; ++k) d_day[k] += d_x[d + k];

    // Input attention.
    const Matrix& rows = days[step].get();
    const std::size_t n = rows.rows();
    if (n > 0) {
      const Vector& a = dt.attention.weights;
      const double scale = config.literal_input_mean ? 1.0 / static_cast<double>(n) : 1.0;
      Vector d_a(n);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d_a[i] = scale * numerics::dot(rows.row(i), std::span<const double>(d_x.span().first(d)));
        mean += a[i] * d_a[i];
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double ds = a[i] * (d_a[i] - mean);
        auto row = rows.row(i);
        for (std::size_t j = 0; j < d; ++j) g.w_att[j] += ds * row[j];
        g.b_att += ds;
      }
    }
    carry = std::move(d_prev);
  }
  return g;
}

Gradients backward(const corpus::Window& window, const model::ForwardTrace& trace,
                   const ModelParams& params, const ModelConfig& config) {
  return backward(model::day_matrices(window), trace, window.label, params, config);
}

}  // namespace newsattn::train
