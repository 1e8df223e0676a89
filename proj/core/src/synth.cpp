// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "newsattn/corpus.hpp"

namespace newsattn::corpus {

using json = nlohmann::json;
namespace chr = std::chrono;

namespace {

struct Entity {
  const char* name;
  const char* relation;
  const char* alias;
};

constexpr Entity kCompany{"Acme Corp", "", "acme"};
constexpr Entity kRelated[] = {
    {"Globex", "supplier", "globex"},
    {"Initech", "competitor", "initech"},
    {"Umbrella", "partner", "umbrella"},
};
constexpr const char* kUnrelated[] = {"Hooli", "Vandelay", "Soylent"};

constexpr const char* kVerbs[] = {"announces", "reviews", "expands", "discusses",
                                  "names",     "delays",  "extends", "reports",
                                  "hosts",     "plans",   "updates", "confirms"};
constexpr const char* kNouns[] = {"quarterly", "earnings", "meeting",  "deal",     "talks",
                                  "product",   "launch",   "outlook",  "board",    "executive",
                                  "analysts",  "office",   "filing",   "statement", "contract",
                                  "factory",   "strategy", "dividend", "merger",   "software"};

template <typename T, std::size_t N>
const T& pick(numerics::Rng& rng, const T (&arr)[N]) {
  return arr[rng.below(N)];
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string noise_headline(numerics::Rng& rng, const std::string& subject) {
  std::string h = subject + " " + pick(rng, kVerbs) + " " + pick(rng, kNouns) + " " +
                  pick(rng, kNouns);
  if (rng.bernoulli(0.5)) h += std::string(" with ") + pick(rng, kNouns);
  return h + ".";
}

std::string planted_headline(numerics::Rng& rng, const std::string& subject, bool up) {
  const std::string_view token = up ? kSurgeToken : kPlungeToken;
  return subject + " shares " + std::string(token) + " after " + pick(rng, kNouns) + " " +
         pick(rng, kNouns) + ".";
}

std::string relevant_subject(numerics::Rng& rng) {
  const std::size_t k = rng.below(1 + std::size(kRelated));
  return capitalize(k == 0 ? kCompany.alias : kRelated[k - 1].alias);
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::vector<Date> weekday_calendar(Date start, std::size_t n) {
  std::vector<Date> out;
  chr::sys_days d{start};
  while (out.size() < n) {
    const chr::weekday wd{d};
    if (wd != chr::Saturday && wd != chr::Sunday) out.emplace_back(d);
    d += chr::days{1};
  }
  return out;
}

}  // namespace

SyntheticCorpus synth_generate(numerics::Rng& rng, const SynthOptions& opt) {
  if (opt.n_days < 30) throw InputError("synth_generate: n_days must be at least 30");
  if (opt.signal_strength < 0 || opt.signal_strength > 1) {
    throw InputError("synth_generate: signal_strength must lie in [0, 1]");
  }
  if (opt.embedding_dim == 0) throw InputError("synth_generate: embedding_dim must be >= 1");

  const auto calendar = weekday_calendar(opt.start, opt.n_days);
  const std::size_t n = calendar.size();

  // move[i] is the direction of close[i] vs close[i-1]; planted[i-1] carries
  // the matching token when the move is signal-driven.
  std::vector<int> move(n, 0);
  std::vector<int> planted(n, -1);
  for (std::size_t i = 1; i < n; ++i) {
    if (rng.bernoulli(opt.signal_strength)) {
      move[i] = rng.bernoulli(0.5) ? 1 : 0;
      planted[i - 1] = move[i];
    } else {
      move[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
  }

  std::ostringstream news;
  std::vector<std::size_t> causal_row(n, 0);
  std::set<std::string> vocab;
  auto record = [&](const std::string& headline, const Date& date) {
    json line = {{"date", format_date(date)}, {"headline", headline}, {"source", "synthetic"}};
    news << line.dump() << '\n';
    for (const auto& tok : textenc::tokenize(headline, {}, 1000).tokens) vocab.insert(tok);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = 1 + rng.below(5);
    const std::size_t planted_pos = planted[i] >= 0 ? rng.below(k) : k;
    std::size_t row = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == planted_pos) {
        causal_row[i] = row++;
        record(planted_headline(rng, relevant_subject(rng), planted[i] == 1), calendar[i]);
        continue;
      }
      if (rng.bernoulli(opt.unrelated_rate)) {
        record(noise_headline(rng, pick(rng, kUnrelated)), calendar[i]);
      } else {
        ++row;
        record(noise_headline(rng, relevant_subject(rng)), calendar[i]);
      }
    }
  }

  std::ostringstream prices;
  prices << "date,open,high,low,close,volume\n";
  std::vector<double> closes(n);
  double close = 100.0;
  for (std::size_t i = 0; i < n; ++i) {
    double open = round4(close * (1.0 + rng.uniform(-0.002, 0.002)));
    if (i > 0) {
      const double r = rng.uniform(0.005, 0.03);
      close = round4(move[i] == 1 ? close * (1.0 + r) : close * (1.0 - r));
    } else {
      close = round4(close);
    }
    closes[i] = close;
    const double high = round4(std::max(open, close) + 0.01 + rng.uniform(0.0, 0.5));
    const double low = round4(std::min(open, close) - 0.01 - rng.uniform(0.0, 0.5));
    const auto volume = 100000 + rng.below(900000);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%llu\n",
                  format_date(calendar[i]).c_str(), open, high, low, close,
                  static_cast<unsigned long long>(volume));
    prices << buf;
  }

  json graph = {{"company", kCompany.name}, {"aliases", {kCompany.alias}}, {"related", json::array()}};
  for (const auto& r : kRelated) {
    graph["related"].push_back({{"name", r.name}, {"relation", r.relation}, {"aliases", {r.alias}}});
  }

  std::ostringstream emb;
  const double scale = 1.0 / std::sqrt(static_cast<double>(opt.embedding_dim));
  for (const auto& tok : vocab) {
    emb << tok;
    for (std::size_t j = 0; j < opt.embedding_dim; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.6f", rng.normal() * scale);
      emb << buf;
    }
    emb << '\n';
  }

  std::ostringstream truth;
  for (std::size_t p = kWindowDays; p < n; ++p) {
    json line = {{"prediction_date", format_date(calendar[p])},
                 {"label", closes[p] > closes[p - 1] ? 1 : 0}};
    if (planted[p - 1] >= 0) {
      line["causal_headline_index"] = {kWindowDays - 1, causal_row[p - 1]};
    } else {
      line["causal_headline_index"] = nullptr;
    }
    truth << line.dump() << '\n';
  }

  return SyntheticCorpus{news.str(), prices.str(), graph.dump(2) + "\n", emb.str(), truth.str()};
}

void SyntheticCorpus::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    out << body;
  };
  put("news.jsonl", news_jsonl);
  put("prices.csv", prices_csv);
  put("entities.json", entity_graph_json);
  put("embeddings.txt", embeddings_txt);
  put("ground_truth.jsonl", ground_truth_jsonl);
}

}  // namespace newsattn::corpus
