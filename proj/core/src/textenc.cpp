// SPDX-License-Identifier: Apache-2.0
#include "newsattn/textenc.hpp"

#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace newsattn::textenc {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

bool EmbeddingTable::insert(std::string_view token, Vector vec) {
  if (vec.size() != dim_) {
    throw InputError("EmbeddingTable: vector for '" + std::string(token) + "' has length " +
                     std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  }
  auto [it, inserted] = entries_.insert_or_assign(lowercase(token), std::move(vec));
  return inserted;
}

const Vector* EmbeddingTable::find(std::string_view token) const {
  auto it = entries_.find(lowercase(token));
  return it == entries_.end() ? nullptr : &it->second;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet words = {
      "a",       "about",   "above",   "after",   "again",  "against", "all",
      "am",      "an",      "and",     "any",     "are",    "as",      "at",
      "be",      "because", "been",    "before",  "being",  "below",   "between",
      "both",    "but",     "by",      "can",     "could",  "did",     "do",
      "does",    "doing",   "down",    "during",  "each",   "few",     "for",
      "from",    "further", "had",     "has",     "have",   "having",  "he",
      "her",     "here",    "hers",    "herself", "him",    "himself", "his",
      "how",     "i",       "if",      "in",      "into",   "is",      "it",
      "its",     "itself",  "just",    "me",      "more",   "most",    "my",
      "myself",  "no",      "nor",     "not",     "now",    "of",      "off",
      "on",      "once",    "only",    "or",      "other",  "our",     "ours",
      "ourselves", "out",   "over",    "own",     "same",   "she",     "should",
      "so",      "some",    "such",    "than",    "that",   "the",     "their",
      "theirs",  "them",    "themselves", "then", "there",  "these",   "they",
      "this",    "those",   "through", "to",      "too",    "under",   "until",
      "up",      "very",    "was",     "we",      "were",   "what",    "when",
      "where",   "which",   "while",   "who",     "whom",   "why",     "will",
      "with",    "would",   "you",     "your",    "yours",  "yourself", "yourselves",
      "s",       "t",       "don",     "isn",     "aren",   "wasn",    "weren",
      "won",     "also",    "may",     "might",   "must",   "shall",   "upon",
      "via",     "per",     "yet",     "says",    "said",   "amid",    "among",
  };
  return words;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stopword file " + path.string());
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    auto fields = split_whitespace(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    words.insert(lowercase(fields.front()));
  }
  return words;
}

TokenList tokenize(std::string_view text, const StopwordSet& stopwords, std::size_t max_len) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size() && out.tokens.size() < max_len) {
    while (i < text.size() && !is_word_char(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    if (i == start) break;
    std::string tok = lowercase(text.substr(start, i - start));
    if (!stopwords.contains(tok)) out.tokens.push_back(std::move(tok));
  }
  return out;
}

SentenceEmbedding embed_sentence(const TokenList& tokens, const EmbeddingTable& table) {
  SentenceEmbedding out;
  out.vec = Vector(table.dim());
  out.token_count = tokens.tokens.size();
  std::size_t hits = 0;
  for (const auto& tok : tokens.tokens) {
    const Vector* v = table.find(tok);
    if (v == nullptr) {
      ++out.oov_count;
      continue;
    }
    for (std::size_t j = 0; j < v->size(); ++j) out.vec[j] += (*v)[j];
    ++hits;
  }
  if (hits > 0) {
    const double inv = 1.0 / static_cast<double>(hits);
    for (double& x : out.vec) x *= inv;
  }
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  EmbeddingTable table(1);
  bool have_table = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (!have_table) {
      // word2vec text header: "<count> <dim>"
      double a = 0, b = 0;
      if (fields.size() == 2 && parse_double(fields[0], a) && parse_double(fields[1], b) &&
          fields[0].find('.') == std::string_view::npos) {
        continue;
      }
      if (fields.size() < 2) {
        throw InputError(path.string() + ":" + std::to_string(line_no) +
                         ": expected a token followed by vector components");
      }
      dim = fields.size() - 1;
      table = EmbeddingTable(dim);
      have_table = true;
    }
    if (fields.size() - 1 != dim) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " components, found " +
                       std::to_string(fields.size() - 1));
    }
    Vector vec(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!parse_double(fields[j + 1], vec[j]) || !std::isfinite(vec[j])) {
        throw InputError(path.string() + ":" + std::to_string(line_no) +
                         ": bad number '" + std::string(fields[j + 1]) + "'");
      }
    }
    if (!table.insert(fields[0], std::move(vec)) && warnings != nullptr) {
      warnings->push_back(path.string() + ":" + std::to_string(line_no) +
                          ": duplicate token '" + std::string(fields[0]) +
                          "', keeping the later vector");
    }
  }
  if (!have_table) throw InputError("embedding file " + path.string() + " is empty");
  return table;
}

}  // namespace newsattn::textenc
