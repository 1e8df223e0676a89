// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//   acceptance            run every criterion
//   acceptance 2 5        run only criteria 2 and 5
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "model_fixtures.hpp"
#include "newsattn/dataset.hpp"
#include "newsattn/evalx.hpp"
#include "newsattn/reference.hpp"
#include "newsattn/train.hpp"
#include "synth_fixture.hpp"
#include "test_util.hpp"

using namespace newsattn;
using model::ModelConfig;
using model::ModelParams;
using numerics::Rng;
using numerics::Vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string printf_string(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  std::size_t cases = 0;
  std::set<std::size_t> sizes_seen;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int mode = 0; mode < 4; ++mode) {
      for (int label = 0; label < 2; ++label) {
        for (bool empty_day : {true, false}) {
          train::GradCheckCase gc;
          gc.config.d = 8;
          gc.config.d_day = 3;
          gc.config.d_h = 6;
          gc.config.dropout_p = 0.0;
          gc.config.literal_input_mean = (mode & 1) != 0;
          gc.config.literal_output_attention = (mode & 2) != 0;
          gc.seed = seed * 100 + static_cast<std::uint64_t>(mode * 4 + label * 2 + empty_day);
          gc.label = label;
          gc.max_headlines = 4;
          gc.force_empty_day = empty_day;
          gc.eps = 1e-5;
          const auto r = train::gradient_check(gc);
          ++cases;
          if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            where = r.worst_tensor + "[" + std::to_string(r.worst_index) + "]";
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0,
          printf_string("%zu cases, 5 seeds, 4 modes, max rel err %.3g at %s (limit 1e-4), %.1f s",
                        cases, worst, where.c_str(), secs)};
}

// ---------------------------------------------------------------- 2 and 3

constexpr std::size_t kSynthDays = 1500;
constexpr std::size_t kSynthDim = 32;
constexpr std::size_t kSynthHidden = 32;
constexpr std::size_t kSynthEpochs = 200;
constexpr double kSynthLr = 1e-2;
constexpr double kSynthDropout = 0.0;
const std::uint64_t kSynthSeeds[] = {1, 2, 3};

struct SynthRun {
  corpus::Dataset data;
  corpus::Splits splits;
  ModelConfig config;
  train::TrainResult result;
  evalx::ConfusionMatrix test;
  double seconds = 0;
};

SynthRun synth_run(std::uint64_t seed, double strength) {
  const auto t0 = Clock::now();
  SynthRun r;
  r.data = testing::synth_dataset(seed, kSynthDays, kSynthDim, strength);
  r.splits = corpus::split_chronological(r.data.windows);
  r.config.d = kSynthDim;
  r.config.d_h = kSynthHidden;
  r.config.dropout_p = kSynthDropout;
  train::TrainConfig tc;
  tc.epochs = kSynthEpochs;
  tc.lr = kSynthLr;
  tc.seed = seed;
  Rng init_rng = numerics::derive(Rng(seed), numerics::Stream::Init);
  const auto init = ModelParams::init(r.config, init_rng);
  r.result = train::train_loop(r.splits, init, tc, r.config);
  r.test = train::evaluate(r.splits.test, r.result.best.params, r.config).confusion;
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<SynthRun>& strong_runs() {
  static std::vector<SynthRun> runs = [] {
    std::vector<SynthRun> v;
    for (auto s : kSynthSeeds) v.push_back(synth_run(s, 1.0));
    return v;
  }();
  return runs;
}

Outcome signal_recovery() {
  Outcome o;
  for (const auto& r : strong_runs()) {
    const double acc = evalx::accuracy(r.test), mcc = evalx::mcc(r.test);
    const bool ok = acc >= 0.90 && mcc >= 0.75 && r.seconds < 600 && r.splits.test.size() > 0;
    o.pass = o.pass && ok;
    o.detail += printf_string("s=1 seed %llu: acc %.3f mcc %.3f n=%zu %.0fs; ",
                              static_cast<unsigned long long>(r.result.best.meta.seed), acc, mcc,
                              r.splits.test.size(), r.seconds);
  }
  for (auto s : kSynthSeeds) {
    const auto r = synth_run(s, 0.0);
    const double acc = evalx::accuracy(r.test);
    const bool ok = std::abs(acc - 0.5) <= 0.1 && r.seconds < 600;
    o.pass = o.pass && ok;
    o.detail += printf_string("s=0 seed %llu: acc %.3f %.0fs; ", static_cast<unsigned long long>(s),
                              acc, r.seconds);
  }
  o.detail += printf_string("d_h=%zu, %zu epochs, lr %g, p=%g", kSynthHidden, kSynthEpochs, kSynthLr, kSynthDropout);
  return o;
}

Outcome explanation_faithfulness() {
  Outcome o;
  for (const auto& r : strong_runs()) {
    // Ground truth is regenerated from the same seed as the training corpus.
    Rng rng(r.result.best.meta.seed);
    corpus::SynthOptions opt;
    opt.n_days = kSynthDays;
    opt.embedding_dim = kSynthDim;
    const auto truth = corpus::parse_ground_truth(corpus::synth_generate(rng, opt).ground_truth_jsonl);
    std::size_t correct = 0, faithful = 0;
    for (const auto& w : r.splits.test) {
      const auto trace = model::forward(w, r.result.best.params, r.config, model::Mode::Eval);
      if (trace.predicted() != w.label) continue;
      ++correct;
      const auto& g = truth.at(w.day_index - corpus::kWindowDays);
      if (g.prediction_date != w.prediction_date || !g.causal) {
        o.pass = false;
        o.detail += "ground truth misaligned; ";
        continue;
      }
      const auto top = evalx::explain(w, trace, 1).top_k.front();
      faithful += (top.day == (*g.causal)[0] && top.index == (*g.causal)[1]) ? 1 : 0;
    }
    const double rate = correct ? static_cast<double>(faithful) / static_cast<double>(correct) : 0.0;
    o.pass = o.pass && correct > 0 && rate >= 0.80;
    o.detail += printf_string("seed %llu: %zu/%zu = %.3f; ",
                              static_cast<unsigned long long>(r.result.best.meta.seed), faithful,
                              correct, rate);
  }
  o.detail += "need >= 0.80";
  return o;
}

// ---------------------------------------------------------------- 4

long double mcc_direct(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  const __int128 a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0L;
  const __int128 num = static_cast<__int128>(tp) * tn - static_cast<__int128>(fn) * fp;
  return static_cast<long double>(num) / std::sqrt(static_cast<long double>(a * b * c * d));
}

Outcome mcc_oracle() {
  Rng rng(4);
  double worst = 0;
  std::size_t zero_den = 0, zero_bad = 0, range_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    evalx::ConfusionMatrix cm{rng.below(1000001), rng.below(1000001), rng.below(1000001),
                              rng.below(1000001)};
    // A quarter of the draws zero out one or two cells to hit empty marginals.
    if (i % 4 == 0) {
      const auto k = rng.below(4);
      std::uint64_t* cells[] = {&cm.tp, &cm.tn, &cm.fp, &cm.fn};
      *cells[k] = 0;
      *cells[(k + (i % 8 == 0 ? 2 : 1)) % 4] = 0;
    }
    if (cm.total() == 0) cm.tp = 1;
    const double m = evalx::mcc(cm);
    const bool den_zero = cm.tp + cm.fp == 0 || cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0 ||
                          cm.tn + cm.fn == 0;
    if (den_zero) {
      ++zero_den;
      zero_bad += m != 0.0 ? 1 : 0;
    }
    range_bad += (m < -1.0 || m > 1.0) ? 1 : 0;
    worst = std::max(worst, std::abs(m - static_cast<double>(mcc_direct(cm.tp, cm.tn, cm.fp, cm.fn))));
  }
  return {worst <= 1e-12 && zero_bad == 0 && range_bad == 0 && zero_den > 0,
          printf_string("1000 matrices, max |diff| %.3g (limit 1e-12), %zu zero-denominator "
                        "cases all 0: %s, out of range: %zu",
                        worst, zero_den, zero_bad == 0 ? "yes" : "no", range_bad)};
}

// ---------------------------------------------------------------- 5

Outcome overfit() {
  const auto t0 = Clock::now();
  // Price file cut to 27 trading days gives exactly 20 windows; 300-dim
  // vectors match the default d.
  testing::TempDir dir;
  Rng synth_rng(5);
  corpus::SynthOptions opt;
  opt.n_days = 40;
  opt.embedding_dim = 300;
  opt.signal_strength = 0.5;
  corpus::synth_generate(synth_rng, opt).write(dir.path());
  const std::string prices = corpus::read_file(dir / "prices.csv");
  std::size_t cut = 0;
  for (std::size_t rows = 0; rows <= 20 + corpus::kWindowDays; ++rows) cut = prices.find('\n', cut) + 1;
  dir.write("prices.csv", prices.substr(0, cut));
  const auto ds = corpus::load_dataset(corpus::DatasetPaths::in(dir.path()));
  if (ds.windows.size() != 20) return {false, "fixture produced " + std::to_string(ds.windows.size()) + " windows"};
  corpus::Splits splits{ds.windows, {}, {}};
  ModelConfig mc;
  mc.d = ds.embedding_dim;
  mc.dropout_p = 0.0;
  train::TrainConfig tc;
  tc.epochs = 500;
  tc.seed = 5;
  Rng init_rng = numerics::derive(Rng(5), numerics::Stream::Init);
  std::size_t first_epoch = 0;
  ModelParams params = ModelParams::init(mc, init_rng);
  auto result = train::train_loop(splits, params, tc, mc, [&](const train::EpochMetrics& m, const ModelParams&) {
    if (first_epoch == 0 && m.train_acc >= 0.95) first_epoch = m.epoch;
  });
  const double acc = evalx::accuracy(train::evaluate(ds.windows, result.best.params, mc).confusion);
  return {acc >= 0.95,
          printf_string("20 windows, d=%zu d_day=%zu d_h=%zu batch %zu lr %g p=0: final train acc "
                        "%.3f after 500 epochs (first >= 0.95 at epoch %zu), %.1f s",
                        mc.d, mc.d_day, mc.d_h, tc.batch_size, tc.lr, acc, first_epoch,
                        seconds_since(t0))};
}

// ---------------------------------------------------------------- 6

Outcome invariants() {
  std::vector<std::string> broken;
  double softmax_dev = 0, convex_dev = 0;
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto cfg = testing::tiny_config();
    cfg.literal_input_mean = trial % 2;
    cfg.literal_output_attention = (trial / 2) % 2;
    Rng prng(600 + trial);
    const auto params = ModelParams::init(cfg, prng);
    const testing::RandomDays days(cfg.d, 4, rng);
    const auto tr = model::forward(days.refs(), params, cfg, model::Mode::Eval);
    auto dev = [](const Vector& v) {
      double s = 0;
      for (double x : v) s += x;
      return std::abs(s - 1.0);
    };
    for (const auto& d : tr.days)
      if (!d.attention.weights.empty()) softmax_dev = std::max(softmax_dev, dev(d.attention.weights));
    if (!cfg.literal_output_attention) softmax_dev = std::max(softmax_dev, dev(tr.output.day_weights));
    softmax_dev = std::max(softmax_dev, dev(tr.probs));
    Vector prev(cfg.d_h);
    for (const auto& d : tr.days) {
      for (std::size_t j = 0; j < cfg.d_h; ++j) {
        const double lo = std::min(prev[j], d.gru.candidate[j]);
        const double hi = std::max(prev[j], d.gru.candidate[j]);
        convex_dev = std::max({convex_dev, lo - d.gru.hidden[j], d.gru.hidden[j] - hi});
      }
      prev = d.gru.hidden;
    }
    auto cfg0 = cfg;
    cfg0.dropout_p = 0.0;
    if (model::forward(days.refs(), params, cfg0, model::Mode::Train).probs != tr.probs) {
      broken.push_back("p=0 train != eval");
    }
  }
  if (softmax_dev > 1e-12) broken.push_back("softmax sum");
  if (convex_dev > 1e-15) broken.push_back("h_t convex bound");

  const auto ds = testing::synth_dataset(6, 60, 8);
  const auto splits = corpus::split_chronological(ds.windows);
  ModelConfig mc;
  mc.d = 8;
  mc.d_h = 8;
  train::TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 6;
  Rng init_rng(6);
  const auto init = ModelParams::init(mc, init_rng);
  const auto a = train::train_loop(splits, init, tc, mc);
  const auto b = train::train_loop(splits, init, tc, mc);
  if (!(a.best.params == b.best.params) || train::metrics_csv(a.log) != train::metrics_csv(b.log)) {
    broken.push_back("fixed-seed training");
  }
  testing::TempDir dir;
  train::save_checkpoint(dir / "c.json", a.best);
  const auto back = train::load_checkpoint(dir / "c.json", mc);
  if (!(back.params == a.best.params) || !(back.model == a.best.model)) {
    broken.push_back("checkpoint round trip");
  }
  std::string list;
  for (const auto& s : broken) list += " " + s;
  return {broken.empty(),
          printf_string("200 random windows: max |sum-1| %.3g, max convex violation %.3g; "
                        "p=0 train==eval, bit-exact checkpoint, reproducible training%s%s",
                        softmax_dev, convex_dev, broken.empty() ? "" : "; broken:", list.c_str())};
}

// ---------------------------------------------------------------- 7

Outcome entity_filter() {
  const auto ds = corpus::load_dataset(corpus::DatasetPaths::in(testing::data_dir() / "fixtures" / "google"));
  auto kept = [&](const std::string& text) {
    return std::any_of(ds.relevant.begin(), ds.relevant.end(),
                       [&](const corpus::NewsItem& n) { return n.headline == text; });
  };
  const bool youtube = kept("Premier League soccer sues YouTube over copyright.");
  const bool yahoo = kept("Yahoo shares rise on reports of Microsoft interest.");
  const bool control = kept("Oil prices ease as inventories grow.");
  return {youtube && yahoo && !control,
          printf_string("YouTube headline kept: %s, Yahoo/Microsoft headline kept: %s, "
                        "control headline dropped: %s",
                        youtube ? "yes" : "no", yahoo ? "yes" : "no", control ? "no" : "yes")};
}

// ---------------------------------------------------------------- 8

Outcome dropout_expectation() {
  ModelConfig c;
  ModelParams p = ModelParams::zeros(c);
  Rng rng(8);
  Vector A(c.d_h);
  for (std::size_t j = 0; j < c.d_h; ++j) {
    A[j] = rng.uniform(0.1, 1.0);
    p.w_cls(0, j) = rng.uniform(0.1, 1.0);
    p.w_cls(1, j) = -rng.uniform(0.1, 1.0);
  }
  const Vector ref = numerics::matvec(p.w_cls, A.span());
  double acc[2] = {0, 0};
  constexpr int kMasks = 100000;
  for (int i = 0; i < kMasks; ++i) {
    const Vector mask = model::dropout_mask(c.d_h, c.dropout_p, rng);
    const Vector l = numerics::matvec(p.w_cls, numerics::hadamard(A.span(), mask.span()).span());
    acc[0] += l[0];
    acc[1] += l[1];
  }
  double worst = 0;
  for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(acc[k] / kMasks - ref[k]) / std::abs(ref[k]));
  return {worst <= 0.01, printf_string("10^5 masks at p=%.1f, d_h=%zu: max relative deviation "
                                       "%.3g (limit 0.01)",
                                       c.dropout_p, c.d_h, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "gradient correctness", gradient_correctness},
      {2, "synthetic signal recovery", signal_recovery},
      {3, "explanation faithfulness", explanation_faithfulness},
      {4, "MCC oracle equivalence", mcc_oracle},
      {5, "overfit sanity", overfit},
      {6, "invariant suite", invariants},
      {7, "entity-filter fixture", entity_filter},
      {8, "dropout expectation", dropout_expectation},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
