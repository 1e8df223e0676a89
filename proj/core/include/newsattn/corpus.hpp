// SPDX-License-Identifier: Apache-2.0
/**
 * @file   corpus.hpp
 * @brief  News and price ingestion, entity-graph relevance filtering,
 *         trading-day bucketing, 7-day labelled windows, chronological
 *         splits and a planted-signal synthetic corpus generator.
 */
#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "newsattn/numerics.hpp"
#include "newsattn/textenc.hpp"

namespace newsattn::corpus {

using Date = std::chrono::year_month_day;

/// Strict YYYY-MM-DD; throws InputError otherwise.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

inline constexpr std::size_t kWindowDays = 7;

struct NewsItem {
  Date date;
  std::string headline;
  std::string source;
  std::vector<std::string> matched_entities;
  std::size_t line = 0;  ///< 1-based line in the source file, 0 when synthetic
};

struct PriceBar {
  Date date;
  double open = 0, high = 0, low = 0, close = 0;
  std::uint64_t volume = 0;
};

struct RelatedEntity {
  std::string name;
  std::string relation;
  std::vector<std::string> aliases;  ///< lowercased
};

struct EntityGraph {
  std::string company;
  std::vector<std::string> aliases;  ///< lowercased
  std::vector<RelatedEntity> related;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::vector<std::string> warnings;
};

/// JSONL with keys date, headline and optional source. Malformed lines are
/// skipped and reported; more than 10% malformed is a hard error.
std::vector<NewsItem> load_news(const std::filesystem::path& path,
                                LoadReport* report = nullptr);
std::vector<NewsItem> parse_news(std::string_view jsonl, const std::string& origin,
                                 LoadReport* report = nullptr);

/// CSV with header date,open,high,low,close,volume; dates strictly increasing.
std::vector<PriceBar> load_prices(const std::filesystem::path& path);
std::vector<PriceBar> parse_prices(std::string_view csv, const std::string& origin);

EntityGraph load_entity_graph(const std::filesystem::path& path);
EntityGraph parse_entity_graph(std::string_view json);

/// Keeps items whose headline contains an alias of the company or of a related
/// entity as a whole-word, case-insensitive match. Order is preserved and
/// matched_entities lists the matching entity names.
std::vector<NewsItem> filter_relevant(const std::vector<NewsItem>& news,
                                      const EntityGraph& graph);

struct DayBucket {
  Date trading_date;
  std::vector<NewsItem> items;
  numerics::Matrix embeddings;  ///< items.size() × d
};

using DayBucketPtr = std::shared_ptr<const DayBucket>;

struct BucketResult {
  std::vector<DayBucketPtr> buckets;  ///< one per price bar, same order
  std::size_t dropped_after_last = 0;
  std::size_t tokens = 0;
  std::size_t oov_tokens = 0;
};

/// One bucket per trading date in prices. News on a non-trading date moves to
/// the next trading date; news after the last trading date is dropped.
BucketResult bucket_by_day(const std::vector<NewsItem>& news,
                           const std::vector<PriceBar>& prices,
                           const textenc::SentenceEncoder& encoder);

enum class LabelMode { CloseToClose, OpenToOpen };

LabelMode parse_label_mode(std::string_view text);
std::string_view to_string(LabelMode mode);

struct Window {
  std::array<DayBucketPtr, kWindowDays> days;
  int label = 0;  ///< 1 = rise, 0 = fall or unchanged
  Date prediction_date;
  std::size_t day_index = 0;  ///< index of prediction_date in the trading calendar

  const DayBucket& day(std::size_t t) const { return *days[t]; }
  std::size_t headline_count() const;
};

/// One window per trading day with seven predecessors.
std::vector<Window> make_windows(const std::vector<DayBucketPtr>& buckets,
                                 const std::vector<PriceBar>& prices,
                                 LabelMode mode = LabelMode::CloseToClose);

inline constexpr double kDefaultTrainFraction = 1480.0 / 1840.0;
inline constexpr double kDefaultValFraction = 180.0 / 1840.0;

struct Splits {
  std::vector<Window> train;
  std::vector<Window> val;
  std::vector<Window> test;
};

enum class SplitKind { Train, Val, Test };
SplitKind parse_split(std::string_view text);
std::string_view to_string(SplitKind kind);
const std::vector<Window>& select(const Splits& splits, SplitKind kind);

/// Contiguous partitions in chronological order: train, then val, then test.
Splits split_chronological(const std::vector<Window>& windows,
                           double train_frac = kDefaultTrainFraction,
                           double val_frac = kDefaultValFraction);

struct SynthOptions {
  std::size_t n_days = 400;
  double signal_strength = 1.0;
  std::size_t embedding_dim = 32;
  Date start{std::chrono::year{2010}, std::chrono::January, std::chrono::day{4}};
  double unrelated_rate = 0.15;  ///< share of headlines about unrelated firms
};

/// In-memory files of a synthetic corpus.
struct SyntheticCorpus {
  std::string news_jsonl;
  std::string prices_csv;
  std::string entity_graph_json;
  std::string embeddings_txt;
  /// {"prediction_date", "causal_headline_index": [day, idx] | null, "label"}
  /// per window; day is 0..6 inside the window, idx counts bucket rows.
  std::string ground_truth_jsonl;

  void write(const std::filesystem::path& dir) const;
};

inline constexpr std::string_view kSurgeToken = "surge";
inline constexpr std::string_view kPlungeToken = "plunge";

/// Each trading day carries 1-5 headlines. With probability signal_strength
/// the day before a move gets one headline containing "surge" or "plunge"
/// matching the move's direction; otherwise the move is a fair coin flip.
SyntheticCorpus synth_generate(numerics::Rng& rng, const SynthOptions& options);

struct GroundTruth {
  Date prediction_date;
  std::optional<std::array<std::size_t, 2>> causal;  ///< {day, idx}
  int label = 0;
};

std::vector<GroundTruth> parse_ground_truth(std::string_view jsonl);
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace newsattn::corpus
