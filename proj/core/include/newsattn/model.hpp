// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  Dual-stage attention GRU: per-day headline attention, day
 *         embeddings, a bias-free GRU over seven trading days, attention over
 *         the hidden states and a two-way softmax classifier with inverted
 *         dropout.
 *
 *   T_1 ... T_7 (n_t x d)               headline embeddings per day
 *     | softmax(T_t w_att + b_att)      headline weights
 *   x'_t (d) ++ D_t (d_day) = x_t
 *     | U,R = sig(W [h, x]); h' = tanh(W_h [R*h, x]); h = (1-U)h + U h'
 *   h_1 ... h_7 (d_h)
 *     | S_t = h_t . (w_sim * w_out); alpha = softmax(S)
 *   A = sum alpha_t h_t
 *     | y = softmax(W_cls (A * mask) + b_cls)
 */
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "newsattn/corpus.hpp"
#include "newsattn/numerics.hpp"

namespace newsattn::model {

using numerics::Matrix;
using numerics::Rng;
using numerics::Vector;

inline constexpr std::size_t kWindowDays = corpus::kWindowDays;

struct ModelConfig {
  std::size_t d = 300;
  std::size_t d_day = 5;
  std::size_t d_h = 64;
  std::size_t window = kWindowDays;
  double dropout_p = 0.5;
  /// x' = (1/n) sum w_i T_i instead of the convex combination.
  bool literal_input_mean = false;
  /// A = (1/7) sum S_t h_t with raw scores instead of softmax weights.
  bool literal_output_attention = false;

  std::size_t gate_cols() const noexcept { return d_h + d + d_day; }
  /// Throws InputError on dims < 1, dropout outside [0, 1) or window != 7.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TensorView {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<double> data;
};

struct ConstTensorView {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<const double> data;
};

/// Every trainable tensor. Gradients and Adam moments reuse this layout.
struct ModelParams {
  Vector w_att;        ///< d
  double b_att = 0.0;  ///< scalar headline-score bias
  Matrix day_embedding;  ///< 7 x d_day
  Matrix w_update;     ///< d_h x (d_h + d + d_day), columns [h_prev, x]
  Matrix w_reset;      ///< d_h x (d_h + d + d_day)
  Matrix w_candidate;  ///< d_h x (d_h + d + d_day), columns [R*h_prev, x]
  Vector w_sim;        ///< d_h, diagonal of the similarity matrix
  Vector w_out;        ///< d_h, output embedding pattern
  Matrix w_cls;        ///< 2 x d_h
  Vector b_cls;        ///< 2

  static ModelParams zeros(const ModelConfig& config);
  /// Glorot-uniform matrices and w_att; w_sim = 1, w_out = 0 (uniform day
  /// attention at start); biases start at zero.
  static ModelParams init(const ModelConfig& config, Rng& rng);

  /// Fixed order: w_att, b_att, D, W_u, W_r, W_h, W_sim, w_out, W_cls, b_cls.
  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;

  std::size_t parameter_count() const;
  Vector flatten() const;
  void unflatten(const Vector& flat);

  /// Throws InputError naming the first tensor whose shape disagrees.
  void check_shapes(const ModelConfig& config) const;

  bool operator==(const ModelParams&) const = default;
};

using DayMatrices = std::array<std::reference_wrapper<const Matrix>, kWindowDays>;

DayMatrices day_matrices(const corpus::Window& window);

enum class Mode { Train, Eval };

struct InputAttention {
  Vector x_news;   ///< x'_t
  Vector scores;   ///< T_t w_att + b_att
  Vector weights;  ///< softmax over the day's headlines
};

/// Empty day (n = 0) gives a zero x' and empty weights.
InputAttention input_attention(const Matrix& day, const ModelParams& params,
                               const ModelConfig& config);

/// [x', D_t] for a 1-based day index t.
Vector compose_input(std::span<const double> x_news, std::size_t day, const Matrix& day_embedding);

struct GruStep {
  Vector hidden;
  Vector update;
  Vector reset;
  Vector candidate;
};

GruStep gru_cell(std::span<const double> h_prev, std::span<const double> x,
                 const ModelParams& params);

struct OutputAttention {
  Vector attended;     ///< A
  Vector day_scores;   ///< raw S_t
  Vector day_weights;  ///< softmax(S) by default, S itself in literal mode
};

OutputAttention output_attention(std::span<const Vector> hidden, const ModelParams& params,
                                 bool literal);

/// Classifier logits W_cls (A * mask) + b_cls.
Vector classifier_logits(std::span<const double> attended, const ModelParams& params,
                         const Vector* mask);
Vector classify(std::span<const double> attended, const ModelParams& params,
                const Vector* mask);

/// Inverted dropout: each unit kept with probability 1-p and scaled by 1/(1-p).
Vector dropout_mask(std::size_t len, double p, Rng& rng);

struct DayTrace {
  InputAttention attention;
  Vector input;  ///< x_t
  GruStep gru;
};

struct ForwardTrace {
  std::array<DayTrace, kWindowDays> days;
  OutputAttention output;
  Vector mask;  ///< empty in evaluation mode
  Vector logits;
  Vector probs;

  const Vector& hidden(std::size_t t) const { return days[t].gru.hidden; }
  int predicted() const { return probs[1] > probs[0] ? 1 : 0; }
};

/// rng is required in training mode when dropout_p > 0.
ForwardTrace forward(const DayMatrices& days, const ModelParams& params,
                     const ModelConfig& config, Mode mode, Rng* rng = nullptr);
ForwardTrace forward(const corpus::Window& window, const ModelParams& params,
                     const ModelConfig& config, Mode mode, Rng* rng = nullptr);

/// Evaluation forward with an explicit mask (nullptr for none).
ForwardTrace forward_with_mask(const DayMatrices& days, const ModelParams& params,
                               const ModelConfig& config, const Vector* mask);

}  // namespace newsattn::model
