// SPDX-License-Identifier: Apache-2.0
// Loads a corpus directory end to end: filter, bucket, embed, window, split.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "newsattn/corpus.hpp"
#include "newsattn/textenc.hpp"

namespace newsattn::corpus {

struct DatasetPaths {
  std::filesystem::path news;
  std::filesystem::path prices;
  std::filesystem::path entities;
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> stopwords;

  /// news.jsonl, prices.csv, entities.json, embeddings.txt inside dir.
  static DatasetPaths in(const std::filesystem::path& dir);
};

struct Dataset {
  EntityGraph graph;
  std::vector<PriceBar> prices;
  std::vector<NewsItem> relevant;
  BucketResult buckets;
  std::vector<Window> windows;
  LoadReport news_report;
  std::vector<std::string> embedding_warnings;
  std::size_t embedding_dim = 0;
};

Dataset load_dataset(const DatasetPaths& paths, LabelMode mode = LabelMode::CloseToClose,
                     std::size_t max_tokens = textenc::kDefaultMaxTokens);

}  // namespace newsattn::corpus
