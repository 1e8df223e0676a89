// SPDX-License-Identifier: Apache-2.0
#include "newsattn/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace newsattn::corpus {

using json = nlohmann::json;
namespace chr = std::chrono;

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

/// Alphanumeric runs, lowercased.
std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(lowercase(text.substr(start, i - start)));
  }
  return out;
}

bool contains_phrase(const std::vector<std::string>& words,
                     const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > words.size()) return false;
  return std::search(words.begin(), words.end(), phrase.begin(), phrase.end()) != words.end();
}

std::vector<std::string> normalized_aliases(const json& node, const std::string& name) {
  std::vector<std::string> aliases;
  if (node.contains("aliases")) {
    for (const auto& a : node.at("aliases")) {
      std::string alias = lowercase(trim(a.get<std::string>()));
      if (!alias.empty()) aliases.push_back(std::move(alias));
    }
  }
  if (aliases.empty()) aliases.push_back(lowercase(trim(name)));
  return aliases;
}

double parse_number(std::string_view s, const std::string& where, const char* field) {
  s = trim(s);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError(where + ": bad " + field + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0, d = 0;
  auto digits = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc() && ptr == text.data() + pos + len;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !digits(0, 4, y) ||
      !digits(5, 2, m) || !digits(8, 2, d)) {
    throw InputError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  Date date{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!date.ok()) throw InputError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<NewsItem> parse_news(std::string_view jsonl, const std::string& origin,
                                 LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<NewsItem> items;
  std::size_t line_no = 0;
  for (std::string_view raw : split_lines(jsonl)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    ++rep.lines;
    try {
      json obj = json::parse(line);
      if (!obj.is_object()) throw InputError("not a JSON object");
      if (!obj.contains("date") || !obj["date"].is_string()) throw InputError("missing date");
      if (!obj.contains("headline") || !obj["headline"].is_string()) {
        throw InputError("missing headline");
      }
      NewsItem item;
      item.date = parse_date(obj["date"].get<std::string>());
      item.headline = std::string(trim(obj["headline"].get<std::string>()));
      if (item.headline.empty()) throw InputError("empty headline");
      if (obj.contains("source") && obj["source"].is_string()) {
        item.source = obj["source"].get<std::string>();
      }
      item.line = line_no;
      items.push_back(std::move(item));
    } catch (const std::exception& e) {
      ++rep.malformed;
      rep.warnings.push_back(origin + ":" + std::to_string(line_no) + ": skipped (" +
                             e.what() + ")");
    }
  }
  if (rep.lines > 0 && rep.malformed * 10 > rep.lines) {
    throw InputError(origin + ": " + std::to_string(rep.malformed) + " of " +
                     std::to_string(rep.lines) + " lines malformed (limit 10%)");
  }
  return items;
}

std::vector<NewsItem> load_news(const std::filesystem::path& path, LoadReport* report) {
  return parse_news(read_file(path), path.string(), report);
}

std::vector<PriceBar> parse_prices(std::string_view csv, const std::string& origin) {
  auto lines = split_lines(csv);
  if (lines.empty()) throw InputError(origin + ": empty price file");
  {
    std::string header;
    for (char c : lines.front()) {
      if (!std::isspace(static_cast<unsigned char>(c))) header.push_back(c);
    }
    if (lowercase(header) != "date,open,high,low,close,volume") {
      throw InputError(origin + ": expected header date,open,high,low,close,volume");
    }
  }
  std::vector<PriceBar> bars;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const std::string where = origin + " row " + std::to_string(i + 1);
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 6) throw InputError(where + ": expected 6 fields");
    PriceBar bar;
    try {
      bar.date = parse_date(f[0]);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    bar.open = parse_number(f[1], where, "open");
    bar.high = parse_number(f[2], where, "high");
    bar.low = parse_number(f[3], where, "low");
    bar.close = parse_number(f[4], where, "close");
    const double vol = parse_number(f[5], where, "volume");
    if (vol < 0 || vol != std::floor(vol)) throw InputError(where + ": volume must be a count");
    bar.volume = static_cast<std::uint64_t>(vol);
    if (bar.open <= 0 || bar.high <= 0 || bar.low <= 0 || bar.close <= 0) {
      throw InputError(where + ": prices must be positive");
    }
    if (bar.low > bar.open || bar.low > bar.close || bar.open > bar.high ||
        bar.close > bar.high) {
      throw InputError(where + ": requires low <= open, close <= high");
    }
    if (!bars.empty() && !(bars.back().date < bar.date)) {
      throw InputError(origin + ": dates not strictly increasing between row " +
                       std::to_string(i) + " (" + format_date(bars.back().date) +
                       ") and row " + std::to_string(i + 1) + " (" +
                       format_date(bar.date) + ")");
    }
    bars.push_back(bar);
  }
  return bars;
}

std::vector<PriceBar> load_prices(const std::filesystem::path& path) {
  return parse_prices(read_file(path), path.string());
}

EntityGraph parse_entity_graph(std::string_view text) {
  try {
    json doc = json::parse(text);
    EntityGraph g;
    g.company = doc.at("company").get<std::string>();
    if (trim(g.company).empty()) throw InputError("entity graph: empty company name");
    g.aliases = normalized_aliases(doc, g.company);
    if (doc.contains("related")) {
      for (const auto& r : doc.at("related")) {
        RelatedEntity e;
        e.name = r.at("name").get<std::string>();
        e.relation = r.value("relation", std::string{});
        e.aliases = normalized_aliases(r, e.name);
        g.related.push_back(std::move(e));
      }
    }
    return g;
  } catch (const json::exception& e) {
    throw InputError(std::string("entity graph: ") + e.what());
  }
}

EntityGraph load_entity_graph(const std::filesystem::path& path) {
  try {
    return parse_entity_graph(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<NewsItem> filter_relevant(const std::vector<NewsItem>& news,
                                      const EntityGraph& graph) {
  struct Matcher {
    const std::string* name;
    std::vector<std::vector<std::string>> phrases;
  };
  std::vector<Matcher> matchers;
  auto add = [&](const std::string& name, const std::vector<std::string>& aliases) {
    Matcher m{&name, {}};
    for (const auto& a : aliases) m.phrases.push_back(word_tokens(a));
    matchers.push_back(std::move(m));
  };
  add(graph.company, graph.aliases);
  for (const auto& r : graph.related) add(r.name, r.aliases);

  std::vector<NewsItem> kept;
  for (const auto& item : news) {
    const auto words = word_tokens(item.headline);
    std::vector<std::string> matched;
    for (const auto& m : matchers) {
      const bool hit = std::any_of(m.phrases.begin(), m.phrases.end(),
                                   [&](const auto& p) { return contains_phrase(words, p); });
      if (hit && std::find(matched.begin(), matched.end(), *m.name) == matched.end()) {
        matched.push_back(*m.name);
      }
    }
    if (!matched.empty()) {
      NewsItem copy = item;
      copy.matched_entities = std::move(matched);
      kept.push_back(std::move(copy));
    }
  }
  return kept;
}

BucketResult bucket_by_day(const std::vector<NewsItem>& news,
                           const std::vector<PriceBar>& prices,
                           const textenc::SentenceEncoder& encoder) {
  if (prices.empty()) throw InputError("bucket_by_day: no trading days");
  std::vector<DayBucket> days(prices.size());
  for (std::size_t i = 0; i < prices.size(); ++i) {
    days[i].trading_date = prices[i].date;
    days[i].embeddings = numerics::Matrix(0, encoder.dim());
  }
  BucketResult out;
  for (const auto& item : news) {
    auto it = std::lower_bound(prices.begin(), prices.end(), item.date,
                               [](const PriceBar& b, const Date& d) { return b.date < d; });
    if (it == prices.end()) {
      ++out.dropped_after_last;
      continue;
    }
    DayBucket& day = days[static_cast<std::size_t>(it - prices.begin())];
    auto emb = encoder.encode(item.headline);
    out.tokens += emb.token_count;
    out.oov_tokens += emb.oov_count;
    day.embeddings.append_row(emb.vec.span());
    day.items.push_back(item);
  }
  out.buckets.reserve(days.size());
  for (auto& d : days) out.buckets.push_back(std::make_shared<const DayBucket>(std::move(d)));
  return out;
}

LabelMode parse_label_mode(std::string_view text) {
  if (text == "close_to_close") return LabelMode::CloseToClose;
  if (text == "open_to_open") return LabelMode::OpenToOpen;
  throw InputError("unknown label mode '" + std::string(text) +
                   "' (expected close_to_close or open_to_open)");
}

std::string_view to_string(LabelMode mode) {
  return mode == LabelMode::CloseToClose ? "close_to_close" : "open_to_open";
}

std::size_t Window::headline_count() const {
  std::size_t n = 0;
  for (const auto& d : days) n += d->items.size();
  return n;
}

std::vector<Window> make_windows(const std::vector<DayBucketPtr>& buckets,
                                 const std::vector<PriceBar>& prices, LabelMode mode) {
  if (buckets.size() != prices.size()) {
    throw InputError("make_windows: " + std::to_string(buckets.size()) + " buckets for " +
                     std::to_string(prices.size()) + " trading days");
  }
  if (prices.size() < kWindowDays + 1) {
    throw InputError("make_windows: need at least " + std::to_string(kWindowDays + 1) +
                     " trading days, have " + std::to_string(prices.size()));
  }
  std::vector<Window> windows;
  windows.reserve(prices.size() - kWindowDays);
  for (std::size_t d = kWindowDays; d < prices.size(); ++d) {
    Window w;
    for (std::size_t t = 0; t < kWindowDays; ++t) w.days[t] = buckets[d - kWindowDays + t];
    const double now = mode == LabelMode::CloseToClose ? prices[d].close : prices[d].open;
    const double prev = mode == LabelMode::CloseToClose ? prices[d - 1].close : prices[d - 1].open;
    w.label = now > prev ? 1 : 0;
    w.prediction_date = prices[d].date;
    w.day_index = d;
    windows.push_back(std::move(w));
  }
  return windows;
}

SplitKind parse_split(std::string_view text) {
  if (text == "train") return SplitKind::Train;
  if (text == "val") return SplitKind::Val;
  if (text == "test") return SplitKind::Test;
  throw InputError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

std::string_view to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::Train: return "train";
    case SplitKind::Val: return "val";
    case SplitKind::Test: return "test";
  }
  return "?";
}

const std::vector<Window>& select(const Splits& splits, SplitKind kind) {
  switch (kind) {
    case SplitKind::Train: return splits.train;
    case SplitKind::Val: return splits.val;
    case SplitKind::Test: return splits.test;
  }
  return splits.test;
}

Splits split_chronological(const std::vector<Window>& windows, double train_frac,
                           double val_frac) {
  if (!(train_frac > 0) || !(val_frac > 0) || !(train_frac + val_frac < 1)) {
    throw InputError("split fractions must be positive and sum to less than 1");
  }
  const auto n = static_cast<double>(windows.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * train_frac));
  const auto n_val = static_cast<std::size_t>(std::llround(n * val_frac));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= windows.size()) {
    throw InputError("split of " + std::to_string(windows.size()) +
                     " windows leaves an empty partition");
  }
  Splits s;
  s.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train),
               windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), windows.end());
  return s;
}

std::vector<GroundTruth> parse_ground_truth(std::string_view jsonl) {
  std::vector<GroundTruth> out;
  for (std::string_view line : split_lines(jsonl)) {
    line = trim(line);
    if (line.empty()) continue;
    json obj = json::parse(line);
    GroundTruth g;
    g.prediction_date = parse_date(obj.at("prediction_date").get<std::string>());
    const auto& c = obj.at("causal_headline_index");
    if (!c.is_null()) g.causal = {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>()};
    g.label = obj.at("label").get<int>();
    out.push_back(g);
  }
  return out;
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path));
}

}  // namespace newsattn::corpus
