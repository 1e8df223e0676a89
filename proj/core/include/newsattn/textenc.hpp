// SPDX-License-Identifier: Apache-2.0
// Headline tokenization and sentence vectors from averaged word embeddings.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "newsattn/numerics.hpp"

namespace newsattn::textenc {

using numerics::Vector;
using StopwordSet = std::unordered_set<std::string>;

inline constexpr std::size_t kDefaultMaxTokens = 100;
inline constexpr std::size_t kDefaultEmbeddingDim = 300;

struct TokenList {
  std::vector<std::string> tokens;
};

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Stores under the lowercased token. Returns false when it replaced an
  /// existing entry. Throws InputError on a length mismatch.
  bool insert(std::string_view token, Vector vec);

  /// Case-insensitive; nullptr when absent.
  const Vector* find(std::string_view token) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, Vector> entries_;
};

struct SentenceEmbedding {
  Vector vec;
  std::size_t oov_count = 0;
  std::size_t token_count = 0;
};

/// Bundled English stopword list.
const StopwordSet& default_stopwords();

/// One word per line; blank lines and lines starting with '#' are skipped.
StopwordSet load_stopwords(const std::filesystem::path& path);

/// Lowercases, splits on any non-alphanumeric run, drops stopwords and keeps
/// at most max_len tokens.
TokenList tokenize(std::string_view text, const StopwordSet& stopwords,
                   std::size_t max_len = kDefaultMaxTokens);

/// Mean of in-vocabulary token vectors; zero vector when none are known.
SentenceEmbedding embed_sentence(const TokenList& tokens, const EmbeddingTable& table);

/// Text word-vector file: `token v1 ... vdim` per line, dimension taken from
/// the first line. A leading `count dim` header line (word2vec text) is
/// skipped. Duplicate tokens keep the last vector and add a warning.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::vector<std::string>* warnings = nullptr);

/// Tokenizer settings bound to a table.
class SentenceEncoder {
 public:
  SentenceEncoder(const EmbeddingTable& table, StopwordSet stopwords,
                  std::size_t max_len = kDefaultMaxTokens)
      : table_(&table), stopwords_(std::move(stopwords)), max_len_(max_len) {}

  std::size_t dim() const noexcept { return table_->dim(); }
  SentenceEmbedding encode(std::string_view text) const {
    return embed_sentence(tokenize(text, stopwords_, max_len_), *table_);
  }

 private:
  const EmbeddingTable* table_;
  StopwordSet stopwords_;
  std::size_t max_len_;
};

}  // namespace newsattn::textenc
