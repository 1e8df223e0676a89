// SPDX-License-Identifier: Apache-2.0
// Accuracy / Matthews correlation and attention-based explanation reports.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "newsattn/corpus.hpp"
#include "newsattn/model.hpp"

namespace newsattn::evalx {

/// Class 1 (rise) is positive.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  void add(int predicted, int label);
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

double accuracy(const ConfusionMatrix& cm);
/// 0 when any marginal is empty.
double mcc(const ConfusionMatrix& cm);

struct HeadlineEntry {
  corpus::Date date;
  std::size_t day = 0;    ///< 0..6 inside the window
  std::size_t index = 0;  ///< row inside the day
  std::string text;
  std::vector<std::string> entities;
  double weight = 0;    ///< headline attention inside its day
  double combined = 0;  ///< day_weight * weight
};

struct DayEntry {
  corpus::Date date;
  double day_weight = 0;
  double day_score = 0;
  std::vector<HeadlineEntry> headlines;
};

struct ExplanationReport {
  corpus::Date prediction_date;
  int predicted = 0;
  double prob = 0;  ///< probability of the predicted class
  std::vector<DayEntry> days;
  std::vector<HeadlineEntry> top_k;  ///< by combined desc, then day, then index
};

/// top_k == 0 keeps every headline in the ranking.
ExplanationReport explain(const corpus::Window& window, const model::ForwardTrace& trace,
                          std::size_t top_k);

enum class ReportFormat { Json, Table };
ReportFormat parse_report_format(std::string_view text);

std::string render_report(const ExplanationReport& report, ReportFormat format);

}  // namespace newsattn::evalx
