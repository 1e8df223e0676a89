// SPDX-License-Identifier: Apache-2.0
#include "newsattn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace newsattn::reference {

namespace {

using LD = long double;
using Vec = std::vector<LD>;

Vec softmax(const Vec& s) {
  const LD mx = *std::max_element(s.begin(), s.end());
  Vec e(s.size());
  LD total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) total += (e[i] = std::exp(s[i] - mx));
  for (auto& x : e) x /= total;
  return e;
}

LD sig(LD x) { return 1.0L / (1.0L + std::exp(-x)); }

/// Row i of a row-major (rows x cols) matrix times v.
LD row_dot(const numerics::Matrix& m, std::size_t i, const Vec& v) {
  LD s = 0;
  for (std::size_t j = 0; j < m.cols(); ++j) s += static_cast<LD>(m(i, j)) * v[j];
  return s;
}

}  // namespace

ReferenceOutput evaluate(const model::DayMatrices& days, const model::ModelParams& p,
                         const model::ModelConfig& c, const numerics::Vector* mask, int label) {
  const std::size_t H = c.d_h;
  Vec h(H, 0.0L);
  std::vector<Vec> states;
  for (std::size_t t = 0; t < model::kWindowDays; ++t) {
    const numerics::Matrix& T = days[t].get();
    Vec x(c.d + c.d_day, 0.0L);
    const std::size_t n = T.rows();
    if (n > 0) {
      Vec s(n);
      for (std::size_t i = 0; i < n; ++i) {
        LD acc = p.b_att;
        for (std::size_t j = 0; j < c.d; ++j) acc += static_cast<LD>(T(i, j)) * p.w_att[j];
        s[i] = acc;
      }
      const Vec a = softmax(s);
      const LD scale = c.literal_input_mean ? 1.0L / static_cast<LD>(n) : 1.0L;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c.d; ++j) x[j] += scale * a[i] * T(i, j);
      }
    }
    for (std::size_t k = 0; k < c.d_day; ++k) x[c.d + k] = p.day_embedding(t, k);

    Vec z(H + x.size());
    std::copy(h.begin(), h.end(), z.begin());
    std::copy(x.begin(), x.end(), z.begin() + static_cast<std::ptrdiff_t>(H));
    Vec u(H), r(H);
    for (std::size_t i = 0; i < H; ++i) {
      u[i] = sig(row_dot(p.w_update, i, z));
      r[i] = sig(row_dot(p.w_reset, i, z));
    }
    Vec zr = z;
    for (std::size_t i = 0; i < H; ++i) zr[i] = r[i] * h[i];
    Vec next(H);
    for (std::size_t i = 0; i < H; ++i) {
      const LD cand = std::tanh(row_dot(p.w_candidate, i, zr));
      next[i] = (1.0L - u[i]) * h[i] + u[i] * cand;
    }
    h = next;
    states.push_back(h);
  }

  Vec scores(model::kWindowDays);
  for (std::size_t t = 0; t < model::kWindowDays; ++t) {
    LD s = 0;
    for (std::size_t j = 0; j < H; ++j) {
      s += states[t][j] * static_cast<LD>(p.w_sim[j]) * static_cast<LD>(p.w_out[j]);
    }
    scores[t] = s;
  }
  Vec weights;
  LD scale = 1.0L;
  if (c.literal_output_attention) {
    weights = scores;
    scale = 1.0L / static_cast<LD>(model::kWindowDays);
  } else {
    weights = softmax(scores);
  }
  Vec attended(H, 0.0L);
  for (std::size_t t = 0; t < model::kWindowDays; ++t) {
    for (std::size_t j = 0; j < H; ++j) attended[j] += scale * weights[t] * states[t][j];
  }
  if (mask != nullptr) {
    for (std::size_t j = 0; j < H; ++j) attended[j] *= (*mask)[j];
  }
  Vec logits(2);
  for (std::size_t k = 0; k < 2; ++k) logits[k] = row_dot(p.w_cls, k, attended) + p.b_cls[k];
  const Vec y = softmax(logits);

  ReferenceOutput out;
  out.probs[0] = y[0];
  out.probs[1] = y[1];
  // log-sum-exp form.
  const LD mx = std::max(logits[0], logits[1]);
  const LD lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
  out.loss = lse - logits[static_cast<std::size_t>(label)];
  return out;
}

}  // namespace newsattn::reference
