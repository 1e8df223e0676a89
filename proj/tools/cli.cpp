// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "newsattn/dataset.hpp"
#include "newsattn/error.hpp"
#include "newsattn/evalx.hpp"
#include "newsattn/train.hpp"
#include "run_config.hpp"

namespace newsattn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string checkpoint;
  std::string split = "test";
  std::string date;
  std::size_t top_k = 0;
  bool literal_input_mean = false;
  bool literal_output_attention = false;
  std::string format = "table";
  std::string data_dir;
  std::string out_dir;

  std::map<std::string, CLI::Option*> opts;
  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_flags(CLI::App& sub, Flags& f) {
  f.opts["config"] = sub.add_option("--config", f.config, "flat JSON run configuration");
  f.opts["seed"] = sub.add_option("--seed", f.seed, "master seed for all randomness");
  f.opts["threads"] =
      sub.add_option("--threads", f.threads, "worker threads for gradients (1 = reference)")
          ->check(CLI::PositiveNumber);
  f.opts["checkpoint"] = sub.add_option("--checkpoint", f.checkpoint, "checkpoint JSON path");
  f.opts["split"] = sub.add_option("--split", f.split, "split to evaluate")
                        ->check(CLI::IsMember({"train", "val", "test"}));
  f.opts["date"] = sub.add_option("--date", f.date, "prediction date YYYY-MM-DD");
  f.opts["top-k"] = sub.add_option("--top-k", f.top_k, "headlines in the ranking (0 = all)");
  f.opts["literal-input-mean"] =
      sub.add_flag("--literal-input-mean", f.literal_input_mean, "x' = (1/n) sum w_i T_i");
  f.opts["literal-output-attention"] = sub.add_flag(
      "--literal-output-attention", f.literal_output_attention, "A = (1/7) sum S_t h_t");
  f.opts["format"] = sub.add_option("--format", f.format, "output format")
                         ->check(CLI::IsMember({"json", "table"}));
  f.opts["data-dir"] =
      sub.add_option("--data-dir", f.data_dir, "directory holding news.jsonl, prices.csv, ...");
  f.opts["out"] = sub.add_option("--out", f.out_dir, "output directory");
}

/// Defaults, then the config file, then explicit flags.
RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.given("seed")) c.train.seed = f.seed;
  if (f.given("threads")) c.train.threads = f.threads;
  if (f.given("top-k")) c.top_k = f.top_k;
  if (f.given("literal-input-mean")) c.model.literal_input_mean = true;
  if (f.given("literal-output-attention")) c.model.literal_output_attention = true;
  if (f.given("data-dir")) c.data_dir = f.data_dir;
  if (f.given("out")) c.out_dir = f.out_dir;
  return c;
}

void require_files(const corpus::DatasetPaths& p) {
  for (const fs::path& file : {p.news, p.prices, p.embeddings, p.entities}) {
    if (!fs::is_regular_file(file)) throw InputError("missing input file " + file.string());
  }
  if (p.stopwords && !fs::is_regular_file(*p.stopwords)) {
    throw InputError("missing stopword file " + p.stopwords->string());
  }
}

fs::path ensure_out_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec || !fs::is_directory(c.out_dir)) {
    throw InputError("cannot create output directory " + c.out_dir.string());
  }
  return c.out_dir;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << body;
  if (!out) throw InputError("write failed for " + path.string());
}

corpus::Dataset load(const RunConfig& c, std::ostream& err) {
  const auto paths = c.dataset_paths();
  require_files(paths);
  auto ds = corpus::load_dataset(paths, c.label_mode, c.max_tokens);
  for (const auto& w : ds.news_report.warnings) err << "warning: " << w << "\n";
  for (const auto& w : ds.embedding_warnings) err << "warning: " << w << "\n";
  if (ds.relevant.empty()) err << "warning: no relevant headlines kept; windows hold empty days\n";
  if (ds.buckets.dropped_after_last > 0) {
    err << "warning: " << ds.buckets.dropped_after_last
        << " headlines fall after the last trading day and were dropped\n";
  }
  return ds;
}

model::ModelConfig model_for(const RunConfig& c, const corpus::Dataset& ds) {
  model::ModelConfig m = c.model;
  m.d = ds.embedding_dim;
  m.validate();
  return m;
}

std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------- prepare

int cmd_prepare(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(f);
  const auto ds = load(c, err);
  const auto splits = corpus::split_chronological(ds.windows, c.train_frac, c.val_frac);
  const fs::path dir = ensure_out_dir(c);

  std::ostringstream manifest;
  auto emit = [&](const std::vector<corpus::Window>& ws, corpus::SplitKind kind) {
    for (const auto& w : ws) {
      json j;
      j["prediction_date"] = corpus::format_date(w.prediction_date);
      j["label"] = w.label;
      j["split"] = std::string(corpus::to_string(kind));
      j["days"] = json::array();
      for (std::size_t t = 0; t < corpus::kWindowDays; ++t) {
        std::vector<std::size_t> lines;
        for (const auto& item : w.day(t).items) lines.push_back(item.line);
        j["days"].push_back({{"date", corpus::format_date(w.day(t).trading_date)}, {"lines", lines}});
      }
      manifest << j.dump() << "\n";
    }
  };
  emit(splits.train, corpus::SplitKind::Train);
  emit(splits.val, corpus::SplitKind::Val);
  emit(splits.test, corpus::SplitKind::Test);
  write_text(dir / "windows.jsonl", manifest.str());

  std::size_t empty_days = 0, max_day = 0;
  for (const auto& b : ds.buckets.buckets) {
    empty_days += b->items.empty() ? 1 : 0;
    max_day = std::max(max_day, b->items.size());
  }
  const std::size_t n_days = ds.buckets.buckets.size();
  const double mean_day =
      n_days ? static_cast<double>(ds.relevant.size() - ds.buckets.dropped_after_last) / n_days : 0.0;
  const double oov = ds.buckets.tokens ? static_cast<double>(ds.buckets.oov_tokens) /
                                              static_cast<double>(ds.buckets.tokens)
                                        : 0.0;

  if (f.format == "json") {
    json s = {{"headlines_read", ds.news_report.lines - ds.news_report.malformed},
              {"malformed", ds.news_report.malformed},
              {"headlines_kept", ds.relevant.size()},
              {"dropped_after_last", ds.buckets.dropped_after_last},
              {"trading_days", n_days},
              {"empty_days", empty_days},
              {"mean_headlines_per_day", mean_day},
              {"max_headlines_per_day", max_day},
              {"oov_rate", oov},
              {"windows", ds.windows.size()},
              {"train", splits.train.size()},
              {"val", splits.val.size()},
              {"test", splits.test.size()},
              {"manifest", (dir / "windows.jsonl").string()}};
    out << s.dump(2) << "\n";
  } else {
    out << "headlines kept " << ds.relevant.size() << " of "
        << ds.news_report.lines - ds.news_report.malformed << " (malformed "
        << ds.news_report.malformed << ", after last day " << ds.buckets.dropped_after_last
        << ")\n";
    out << "trading days " << n_days << "  empty " << empty_days << "  mean/day "
        << fmt(mean_day, 2) << "  max/day " << max_day << "  oov " << fmt(oov, 4) << "\n";
    out << "windows " << ds.windows.size() << "  train " << splits.train.size() << "  val "
        << splits.val.size() << "  test " << splits.test.size() << "\n";
    out << "manifest " << (dir / "windows.jsonl").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(f);
  const auto ds = load(c, err);
  const auto splits = corpus::split_chronological(ds.windows, c.train_frac, c.val_frac);
  const auto mc = model_for(c, ds);
  const fs::path dir = ensure_out_dir(c);
  const fs::path ckpt_path = f.given("checkpoint") ? fs::path(f.checkpoint) : dir / "checkpoint.json";

  numerics::Rng init_rng = numerics::derive(numerics::Rng(c.train.seed), numerics::Stream::Init);
  const auto init = model::ModelParams::init(mc, init_rng);
  const auto result = train::train_loop(splits, init, c.train, mc, [&](const train::EpochMetrics& m, const model::ModelParams&) {
    err << "epoch " << m.epoch << "  loss " << fmt(m.train_loss) << "  train_acc "
        << fmt(m.train_acc) << "  val_acc " << fmt(m.val_acc) << "  val_mcc " << fmt(m.val_mcc)
        << "\n";
  });
  train::save_checkpoint(ckpt_path, result.best);
  write_text(dir / "metrics.csv", train::metrics_csv(result.log));

  const auto& best = result.best.meta;
  if (f.format == "json") {
    out << json{{"checkpoint", ckpt_path.string()},
                {"metrics", (dir / "metrics.csv").string()},
                {"best_epoch", best.epoch},
                {"val_acc", best.metrics.val_acc},
                {"val_mcc", best.metrics.val_mcc}}
               .dump(2)
        << "\n";
  } else {
    out << "best epoch " << best.epoch << "  val_acc " << fmt(best.metrics.val_acc)
        << "  val_mcc " << fmt(best.metrics.val_mcc) << "\n";
    out << "checkpoint " << ckpt_path.string() << "\nmetrics " << (dir / "metrics.csv").string()
        << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval / explain

struct Loaded {
  model::ModelConfig config;
  model::ModelParams params;
};

/// Checkpoint when given, otherwise a seeded random initialisation.
Loaded model_or_init(const Flags& f, const RunConfig& c, const corpus::Dataset& ds) {
  Loaded l;
  if (f.given("checkpoint")) {
    auto ckpt = train::load_checkpoint(f.checkpoint);
    if (ckpt.model.d != ds.embedding_dim) {
      throw InputError("checkpoint expects " + std::to_string(ckpt.model.d) +
                       "-dim embeddings, corpus has " + std::to_string(ds.embedding_dim));
    }
    l.config = ckpt.model;
    l.params = std::move(ckpt.params);
    if (f.given("literal-input-mean")) l.config.literal_input_mean = true;
    if (f.given("literal-output-attention")) l.config.literal_output_attention = true;
  } else {
    l.config = model_for(c, ds);
    numerics::Rng rng = numerics::derive(numerics::Rng(c.train.seed), numerics::Stream::Init);
    l.params = model::ModelParams::init(l.config, rng);
  }
  return l;
}

int cmd_eval(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve(f);
  const auto ds = load(c, err);
  const auto splits = corpus::split_chronological(ds.windows, c.train_frac, c.val_frac);
  const auto kind = corpus::parse_split(f.split);
  const auto& windows = corpus::select(splits, kind);
  if (windows.empty()) throw InputError("split " + f.split + " is empty");
  const auto m = model_or_init(f, c, ds);
  const auto ev = train::evaluate(windows, m.params, m.config);
  if (!std::isfinite(ev.loss)) throw NumericalError("eval: non-finite loss");
  const double acc = evalx::accuracy(ev.confusion), mcc = evalx::mcc(ev.confusion);
  if (f.format == "json") {
    out << json{{"split", f.split},
                {"windows", windows.size()},
                {"accuracy", acc},
                {"mcc", mcc},
                {"loss", ev.loss},
                {"tp", ev.confusion.tp},
                {"tn", ev.confusion.tn},
                {"fp", ev.confusion.fp},
                {"fn", ev.confusion.fn}}
               .dump(2)
        << "\n";
  } else {
    out << "split " << f.split << "  windows " << windows.size() << "\n";
    out << "accuracy " << fmt(acc) << "  mcc " << fmt(mcc) << "  loss " << fmt(ev.loss) << "\n";
    out << "tp " << ev.confusion.tp << "  tn " << ev.confusion.tn << "  fp " << ev.confusion.fp
        << "  fn " << ev.confusion.fn << "\n";
  }
  return kExitOk;
}

int cmd_explain(const Flags& f, std::ostream& out, std::ostream& err) {
  if (!f.given("date")) throw InputError("explain requires --date YYYY-MM-DD");
  const corpus::Date date = corpus::parse_date(f.date);
  const RunConfig c = resolve(f);
  const auto ds = load(c, err);
  const auto it = std::find_if(ds.windows.begin(), ds.windows.end(),
                               [&](const corpus::Window& w) { return w.prediction_date == date; });
  if (it == ds.windows.end()) {
    throw InputError("no window with a complete " + std::to_string(corpus::kWindowDays) +
                     "-day history predicts " + f.date);
  }
  const auto m = model_or_init(f, c, ds);
  const auto trace = model::forward(*it, m.params, m.config, model::Mode::Eval);
  if (!numerics::all_finite(trace.probs.span())) throw NumericalError("explain: non-finite output");
  const auto report = evalx::explain(*it, trace, c.top_k);
  out << evalx::render_report(report, evalx::parse_report_format(f.format));
  return kExitOk;
}

// ---------------------------------------------------------------- synth / gradcheck

int cmd_synth(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = resolve(f);
  const fs::path dir = ensure_out_dir(c);
  numerics::Rng rng = numerics::derive(numerics::Rng(c.train.seed), numerics::Stream::Synth);
  const auto corpus = corpus::synth_generate(rng, c.synth);
  corpus.write(dir);
  out << "wrote synthetic corpus (" << c.synth.n_days << " days, signal "
      << fmt(c.synth.signal_strength, 2) << ", dim " << c.synth.embedding_dim << ") to "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = resolve(f);
  constexpr double kTolerance = 1e-4;
  double worst = 0;
  std::string worst_where;
  std::size_t cases = 0;
  for (std::size_t s = 0; s < c.gradcheck_seeds; ++s) {
    for (int mode = 0; mode < 4; ++mode) {
      for (int label = 0; label < 2; ++label) {
        for (double p : {0.0, 0.5}) {
          train::GradCheckCase gc;
          gc.config.d = 8;
          gc.config.d_day = 3;
          gc.config.d_h = 6;
          gc.config.dropout_p = p;
          gc.config.literal_input_mean = (mode & 1) != 0;
          gc.config.literal_output_attention = (mode & 2) != 0;
          gc.seed = c.train.seed * 1000 + s * 8 + static_cast<std::uint64_t>(mode * 2 + label);
          gc.label = label;
          gc.force_empty_day = (s % 2) == 0;
          const auto r = train::gradient_check(gc);
          ++cases;
          if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_where = r.worst_tensor + "[" + std::to_string(r.worst_index) + "]";
          }
        }
      }
    }
  }
  const bool ok = worst <= kTolerance;
  if (f.format == "json") {
    out << json{{"cases", cases},
                {"max_rel_error", worst},
                {"worst", worst_where},
                {"tolerance", kTolerance},
                {"pass", ok}}
               .dump(2)
        << "\n";
  } else {
    out << "gradcheck cases " << cases << "  max relative error " << fmt17(worst) << " at "
        << worst_where << "  " << (ok ? "PASS" : "FAIL") << "\n";
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"News-driven stock movement prediction with a dual-attention GRU", "newsattn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Flags&, std::ostream&, std::ostream&);
  };
  const Command commands[] = {
      {"prepare", "load, filter, bucket and window a corpus; write windows.jsonl", cmd_prepare},
      {"train", "train and write checkpoint.json and metrics.csv", cmd_train},
      {"eval", "accuracy and MCC on one split", cmd_eval},
      {"explain", "attention report for the window predicting --date", cmd_explain},
      {"synth", "write a planted-signal synthetic corpus", cmd_synth},
      {"gradcheck", "finite-difference check of every gradient", cmd_gradcheck},
  };
  std::vector<CLI::App*> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_flags(*sub, flags);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    // Rebind "given" checks to the selected subcommand's options.
    for (auto& [name, opt] : flags.opts) opt = subs[i]->get_option("--" + name);
    try {
      return commands[i].fn(flags, out, err);
    } catch (const NumericalError& e) {
      err << "numerical error: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const InputError& e) {
      err << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitInput;
    }
  }
  return kExitInput;
}

}  // namespace newsattn::cli
