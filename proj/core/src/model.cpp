// SPDX-License-Identifier: Apache-2.0
#include "newsattn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace newsattn::model {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

Vector column_init(std::size_t len, Rng& rng) {
  const Matrix m = numerics::glorot_init(len, 1, rng);
  return Vector(std::vector<double>(m.span().begin(), m.span().end()));
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1 || d_day < 1 || d_h < 1) throw InputError("ModelConfig: dimensions must be >= 1");
  if (window != kWindowDays) {
    throw InputError("ModelConfig: window must be " + std::to_string(kWindowDays));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw InputError("ModelConfig: dropout_p must lie in [0, 1)");
  }
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
  c.validate();
  ModelParams p;
  p.w_att = Vector(c.d);
  p.b_att = 0.0;
  p.day_embedding = Matrix(kWindowDays, c.d_day);
  p.w_update = Matrix(c.d_h, c.gate_cols());
  p.w_reset = Matrix(c.d_h, c.gate_cols());
  p.w_candidate = Matrix(c.d_h, c.gate_cols());
  p.w_sim = Vector(c.d_h);
  p.w_out = Vector(c.d_h);
  p.w_cls = Matrix(2, c.d_h);
  p.b_cls = Vector(2);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& c, Rng& rng) {
  ModelParams p = zeros(c);
  p.w_att = column_init(c.d, rng);
  p.day_embedding = numerics::glorot_init(kWindowDays, c.d_day, rng);
  p.w_update = numerics::glorot_init(c.d_h, c.gate_cols(), rng);
  p.w_reset = numerics::glorot_init(c.d_h, c.gate_cols(), rng);
  p.w_candidate = numerics::glorot_init(c.d_h, c.gate_cols(), rng);
  p.w_sim = Vector(c.d_h, 1.0);
  p.w_cls = numerics::glorot_init(2, c.d_h, rng);
  return p;
}

std::vector<TensorView> ModelParams::tensors() {
  return {
      {"w_att", w_att.size(), 1, w_att.span()},
      {"b_att", 1, 1, std::span<double>(&b_att, 1)},
      {"day_embedding", day_embedding.rows(), day_embedding.cols(), day_embedding.span()},
      {"w_update", w_update.rows(), w_update.cols(), w_update.span()},
      {"w_reset", w_reset.rows(), w_reset.cols(), w_reset.span()},
      {"w_candidate", w_candidate.rows(), w_candidate.cols(), w_candidate.span()},
      {"w_sim", w_sim.size(), 1, w_sim.span()},
      {"w_out", w_out.size(), 1, w_out.span()},
      {"w_cls", w_cls.rows(), w_cls.cols(), w_cls.span()},
      {"b_cls", b_cls.size(), 1, b_cls.span()},
  };
}

std::vector<ConstTensorView> ModelParams::tensors() const {
  auto views = const_cast<ModelParams*>(this)->tensors();
  std::vector<ConstTensorView> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back({v.name, v.rows, v.cols, v.data});
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.data.size();
  return n;
}

Vector ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors()) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return Vector(std::move(flat));
}

void ModelParams::unflatten(const Vector& flat) {
  if (flat.size() != parameter_count()) {
    throw InputError("ModelParams::unflatten: " + std::to_string(flat.size()) +
                     " values for " + std::to_string(parameter_count()) + " parameters");
  }
  std::size_t off = 0;
  for (auto& t : tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.data.size(), t.data.begin());
    off += t.data.size();
  }
}

void ModelParams::check_shapes(const ModelConfig& c) const {
  const ModelParams ref = zeros(c);
  const auto want = ref.tensors();
  const auto have = tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].rows != have[i].rows || want[i].cols != have[i].cols ||
        want[i].data.size() != have[i].data.size()) {
      throw InputError("tensor " + std::string(want[i].name) + " has shape " +
                       shape_str(have[i].rows, have[i].cols) + ", config expects " +
                       shape_str(want[i].rows, want[i].cols));
    }
  }
}

DayMatrices day_matrices(const corpus::Window& window) {
  return {std::cref(window.day(0).embeddings), std::cref(window.day(1).embeddings),
          std::cref(window.day(2).embeddings), std::cref(window.day(3).embeddings),
          std::cref(window.day(4).embeddings), std::cref(window.day(5).embeddings),
          std::cref(window.day(6).embeddings)};
}

InputAttention input_attention(const Matrix& day, const ModelParams& params,
                               const ModelConfig& config) {
  InputAttention out;
  out.x_news = Vector(config.d);
  const std::size_t n = day.rows();
  if (n == 0) return out;
  if (day.cols() != config.d) {
    throw InputError("input_attention: headline matrix " + day.shape_string() +
                     " does not have d=" + std::to_string(config.d) + " columns");
  }
  out.scores = Vector(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] = numerics::dot(day.row(i), params.w_att.span()) + params.b_att;
  }
  out.weights = numerics::softmax(out.scores.span());
  const double scale = config.literal_input_mean ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = scale * out.weights[i];
    auto row = day.row(i);
    for (std::size_t j = 0; j < config.d; ++j) out.x_news[j] += w * row[j];
  }
  return out;
}

Vector compose_input(std::span<const double> x_news, std::size_t day, const Matrix& day_embedding) {
  if (day < 1 || day > day_embedding.rows()) {
    throw InputError("compose_input: day index " + std::to_string(day) + " outside 1.." +
                     std::to_string(day_embedding.rows()));
  }
  return numerics::concat(x_news, day_embedding.row(day - 1));
}

GruStep gru_cell(std::span<const double> h_prev, std::span<const double> x,
                 const ModelParams& params) {
  const std::size_t d_h = params.w_update.rows();
  if (h_prev.size() != d_h || d_h + x.size() != params.w_update.cols()) {
    throw InputError("gru_cell: h_prev [" + std::to_string(h_prev.size()) + "] and x [" +
                     std::to_string(x.size()) + "] do not fit gate weights " +
                     params.w_update.shape_string());
  }
  const Vector z = numerics::concat(h_prev, x);
  GruStep s;
  s.update = numerics::sigmoid(numerics::matvec(params.w_update, z.span()).span());
  s.reset = numerics::sigmoid(numerics::matvec(params.w_reset, z.span()).span());
  const Vector gated = numerics::hadamard(s.reset.span(), h_prev);
  const Vector z_tilde = numerics::concat(gated.span(), x);
  s.candidate = numerics::tanh(numerics::matvec(params.w_candidate, z_tilde.span()).span());
  s.hidden = Vector(d_h);
  for (std::size_t j = 0; j < d_h; ++j) {
    s.hidden[j] = (1.0 - s.update[j]) * h_prev[j] + s.update[j] * s.candidate[j];
  }
  return s;
}

OutputAttention output_attention(std::span<const Vector> hidden, const ModelParams& params,
                                 bool literal) {
  if (hidden.size() != kWindowDays) {
    throw InputError("output_attention: expected " + std::to_string(kWindowDays) +
                     " hidden states, got " + std::to_string(hidden.size()));
  }
  const std::size_t d_h = params.w_sim.size();
  const Vector pattern = numerics::hadamard(params.w_sim.span(), params.w_out.span());
  OutputAttention out;
  out.day_scores = Vector(kWindowDays);
  for (std::size_t t = 0; t < kWindowDays; ++t) {
    if (hidden[t].size() != d_h) {
      throw InputError("output_attention: hidden state " + std::to_string(t + 1) +
                       " has length " + std::to_string(hidden[t].size()));
    }
    out.day_scores[t] = numerics::dot(hidden[t].span(), pattern.span());
  }
  if (literal) {
    out.day_weights = out.day_scores;
  } else {
    out.day_weights = numerics::softmax(out.day_scores.span());
  }
  const double scale = literal ? 1.0 / static_cast<double>(kWindowDays) : 1.0;
  out.attended = Vector(d_h);
  for (std::size_t t = 0; t < kWindowDays; ++t) {
    const double w = scale * out.day_weights[t];
    for (std::size_t j = 0; j < d_h; ++j) out.attended[j] += w * hidden[t][j];
  }
  return out;
}

Vector classifier_logits(std::span<const double> attended, const ModelParams& params,
                         const Vector* mask) {
  Vector logits = mask == nullptr
                      ? numerics::matvec(params.w_cls, attended)
                      : numerics::matvec(params.w_cls,
                                         numerics::hadamard(attended, mask->span()).span());
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += params.b_cls[k];
  return logits;
}

Vector classify(std::span<const double> attended, const ModelParams& params,
                const Vector* mask) {
  return numerics::softmax(classifier_logits(attended, params, mask).span());
}

Vector dropout_mask(std::size_t len, double p, Rng& rng) {
  Vector mask(len, 1.0);
  if (p <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  return mask;
}

ForwardTrace forward_with_mask(const DayMatrices& days, const ModelParams& params,
                               const ModelConfig& config, const Vector* mask) {
  if (mask != nullptr && mask->size() != config.d_h) {
    throw InputError("forward: dropout mask length " + std::to_string(mask->size()) +
                     " != d_h " + std::to_string(config.d_h));
  }
  ForwardTrace trace;
  Vector h(config.d_h);
  std::vector<Vector> hidden;
  hidden.reserve(kWindowDays);
  for (std::size_t t = 0; t < kWindowDays; ++t) {
    DayTrace& dt = trace.days[t];
    dt.attention = input_attention(days[t].get(), params, config);
    dt.input = compose_input(dt.attention.x_news.span(), t + 1, params.day_embedding);
    dt.gru = gru_cell(h.span(), dt.input.span(), params);
    h = dt.gru.hidden;
    hidden.push_back(h);
  }
  trace.output = output_attention(hidden, params, config.literal_output_attention);
  if (mask != nullptr) trace.mask = *mask;
  trace.logits = classifier_logits(trace.output.attended.span(), params, mask);
  trace.probs = numerics::softmax(trace.logits.span());
  return trace;
}

ForwardTrace forward(const DayMatrices& days, const ModelParams& params,
                     const ModelConfig& config, Mode mode, Rng* rng) {
  if (mode == Mode::Eval) return forward_with_mask(days, params, config, nullptr);
  Vector mask(config.d_h, 1.0);
  if (config.dropout_p > 0.0) {
    if (rng == nullptr) throw InputError("forward: training mode needs an rng for dropout");
    mask = dropout_mask(config.d_h, config.dropout_p, *rng);
  }
  return forward_with_mask(days, params, config, &mask);
}

ForwardTrace forward(const corpus::Window& window, const ModelParams& params,
                     const ModelConfig& config, Mode mode, Rng* rng) {
  return forward(day_matrices(window), params, config, mode, rng);
}

}  // namespace newsattn::model
