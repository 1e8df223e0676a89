// SPDX-License-Identifier: Apache-2.0
#include "newsattn/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace newsattn::evalx {

using json = nlohmann::json;

void ConfusionMatrix::add(int predicted, int label) {
  if ((predicted != 0 && predicted != 1) || (label != 0 && label != 1)) {
    throw InputError("confusion: entries must be 0 or 1");
  }
  if (predicted == 1) {
    (label == 1 ? tp : fp) += 1;
  } else {
    (label == 0 ? tn : fn) += 1;
  }
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(predictions[i], labels[i]);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InputError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double mcc(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InputError("mcc: empty confusion matrix");
  const auto tp = static_cast<double>(cm.tp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  const double value = (tp * tn - fn * fp) / (std::sqrt(a * b) * std::sqrt(c * d));
  return std::clamp(value, -1.0, 1.0);
}

ExplanationReport explain(const corpus::Window& window, const model::ForwardTrace& trace,
                          std::size_t top_k) {
  ExplanationReport r;
  r.prediction_date = window.prediction_date;
  r.predicted = trace.predicted();
  r.prob = trace.probs[static_cast<std::size_t>(r.predicted)];
  std::vector<HeadlineEntry> all;
  for (std::size_t t = 0; t < corpus::kWindowDays; ++t) {
    const auto& bucket = window.day(t);
    const auto& att = trace.days[t].attention;
    DayEntry day;
    day.date = bucket.trading_date;
    day.day_weight = trace.output.day_weights[t];
    day.day_score = trace.output.day_scores[t];
    for (std::size_t i = 0; i < bucket.items.size(); ++i) {
      HeadlineEntry h;
      h.date = bucket.items[i].date;
      h.day = t;
      h.index = i;
      h.text = bucket.items[i].headline;
      h.entities = bucket.items[i].matched_entities;
      h.weight = att.weights[i];
      h.combined = day.day_weight * h.weight;
      day.headlines.push_back(h);
      all.push_back(std::move(h));
    }
    r.days.push_back(std::move(day));
  }
  std::stable_sort(all.begin(), all.end(), [](const HeadlineEntry& a, const HeadlineEntry& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    if (a.day != b.day) return a.day < b.day;
    return a.index < b.index;
  });
  if (top_k > 0 && all.size() > top_k) all.resize(top_k);
  r.top_k = std::move(all);
  return r;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "table") return ReportFormat::Table;
  throw InputError("unknown report format '" + std::string(text) + "' (expected json or table)");
}

namespace {

json headline_json(const HeadlineEntry& h, bool ranked) {
  json j = {{"text", h.text}, {"weight", h.weight}, {"combined", h.combined},
            {"entities", h.entities}};
  if (ranked) {
    j["date"] = corpus::format_date(h.date);
    j["day"] = h.day;
    j["index"] = h.index;
  }
  return j;
}

std::string fixed(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

}  // namespace

std::string render_report(const ExplanationReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) {
    json doc;
    doc["prediction_date"] = corpus::format_date(r.prediction_date);
    doc["predicted"] = r.predicted;
    doc["prob"] = r.prob;
    doc["days"] = json::array();
    for (const auto& d : r.days) {
      json day = {{"date", corpus::format_date(d.date)},
                  {"day_weight", d.day_weight},
                  {"day_score", d.day_score},
                  {"headlines", json::array()}};
      for (const auto& h : d.headlines) day["headlines"].push_back(headline_json(h, false));
      doc["days"].push_back(std::move(day));
    }
    doc["top_k"] = json::array();
    for (const auto& h : r.top_k) doc["top_k"].push_back(headline_json(h, true));
    return doc.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "prediction_date " << corpus::format_date(r.prediction_date) << "  predicted "
      << (r.predicted == 1 ? "rise" : "fall") << "  prob " << fixed(r.prob) << "\n\n";
  out << "day weights\n";
  for (const auto& d : r.days) {
    out << "  " << corpus::format_date(d.date) << "  " << fixed(d.day_weight) << "  ("
        << d.headlines.size() << " headlines)\n";
  }
  out << "\n";
  char line[96];
  std::snprintf(line, sizeof line, "%-4s  %-10s  %8s  %8s  %8s  ", "rank", "date", "day_w",
                "head_w", "combined");
  out << line << "headline\n";
  std::size_t rank = 1;
  for (const auto& h : r.top_k) {
    std::snprintf(line, sizeof line, "%-4zu  %-10s  %8s  %8s  %8s  ", rank++,
                  corpus::format_date(h.date).c_str(), fixed(r.days[h.day].day_weight).c_str(),
                  fixed(h.weight).c_str(), fixed(h.combined).c_str());
    out << line << h.text;
    if (!h.entities.empty()) {
      out << "  [";
      for (std::size_t i = 0; i < h.entities.size(); ++i) out << (i ? ", " : "") << h.entities[i];
      out << "]";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace newsattn::evalx
