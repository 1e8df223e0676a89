// SPDX-License-Identifier: Apache-2.0
#include "newsattn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "newsattn/reference.hpp"

namespace newsattn::train {

using json = nlohmann::json;
using numerics::Rng;
using numerics::Vector;

namespace {

void add_scaled(Gradients& acc, const Gradients& g, double scale) {
  auto dst = acc.tensors();
  const auto src = g.tensors();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    for (std::size_t i = 0; i < dst[k].data.size(); ++i) dst[k].data[i] += scale * src[k].data[i];
  }
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct WindowResult {
  Gradients grad;
  double loss = 0;
  bool correct = false;
};

WindowResult window_gradient(const corpus::Window& w, const ModelParams& params,
                             const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto days = model::day_matrices(w);
  auto trace = model::forward(days, params, config, model::Mode::Train, &rng);
  WindowResult r;
  r.loss = cross_entropy(trace.probs, w.label);
  r.correct = trace.predicted() == w.label;
  r.grad = backward(days, trace, w.label, params, config);
  return r;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InputError("TrainConfig: batch_size must be >= 1");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) {
    throw InputError("TrainConfig: betas must lie in (0, 1)");
  }
  if (!(lr >= 0) || !(eps_adam > 0)) throw InputError("TrainConfig: lr >= 0 and eps_adam > 0");
  if (threads < 1) throw InputError("TrainConfig: threads must be >= 1");
}

AdamState AdamState::zeros(const ModelConfig& config) {
  return AdamState{ModelParams::zeros(config), ModelParams::zeros(config), 0};
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (g.size() != p.size() || m.size() != p.size()) throw InputError("adam_step: layout mismatch");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k].data.size() != p[k].data.size() || m[k].data.size() != p[k].data.size() ||
        v[k].data.size() != p[k].data.size()) {
      throw InputError("adam_step: shape mismatch in " + std::string(p[k].name));
    }
    if (!numerics::all_finite(g[k].data)) {
      throw NumericalError("adam_step: non-finite gradient in " + std::string(p[k].name));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].data.size(); ++i) {
      const double gi = g[k].data[i];
      double& mi = m[k].data[i];
      double& vi = v[k].data[i];
      mi = config.beta1 * mi + (1.0 - config.beta1) * gi;
      vi = config.beta2 * vi + (1.0 - config.beta2) * gi * gi;
      const double m_hat = mi / c1;
      const double v_hat = vi / c2;
      p[k].data[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps_adam);
    }
  }
}

Gradients batch_gradient(const std::vector<corpus::Window>& windows,
                         std::span<const std::size_t> indices, const ModelParams& params,
                         const ModelConfig& config, std::uint64_t dropout_seed,
                         std::size_t threads, double* mean_loss, std::size_t* correct) {
  if (indices.empty()) throw InputError("batch_gradient: empty batch");
  std::vector<WindowResult> results(indices.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      results[k] = window_gradient(windows.at(indices[k]), params, config,
                                   mix(dropout_seed, indices[k]));
    }
  };
  const std::size_t n_threads = std::min(std::max<std::size_t>(threads, 1), indices.size());
  if (n_threads == 1) {
    work(0, indices.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (indices.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(indices.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  Gradients total = ModelParams::zeros(config);
  const double inv = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) {
    add_scaled(total, r.grad, inv);
    loss += r.loss;
    hits += r.correct ? 1 : 0;
  }
  if (mean_loss != nullptr) *mean_loss = loss * inv;
  if (correct != nullptr) *correct = hits;
  return total;
}

SplitEval evaluate(const std::vector<corpus::Window>& windows, const ModelParams& params,
                   const ModelConfig& config) {
  SplitEval out;
  for (const auto& w : windows) {
    const auto trace = model::forward(w, params, config, model::Mode::Eval);
    out.confusion.add(trace.predicted(), w.label);
    out.loss += cross_entropy(trace.probs, w.label);
  }
  if (!windows.empty()) out.loss /= static_cast<double>(windows.size());
  return out;
}

TrainResult train_loop(const corpus::Splits& splits, const ModelParams& init,
                       const TrainConfig& tc, const ModelConfig& mc,
                       const EpochCallback& on_epoch) {
  tc.validate();
  mc.validate();
  init.check_shapes(mc);
  if (splits.train.empty()) throw InputError("train_loop: empty train split");

  TrainResult result;
  ModelParams params = init;
  AdamState state = AdamState::zeros(mc);
  const Rng master(tc.seed);
  Rng shuffle_rng = numerics::derive(master, numerics::Stream::Shuffle);
  const std::uint64_t dropout_base = numerics::derive(master, numerics::Stream::Dropout).next_u64();

  const auto train_slot = static_cast<int>(corpus::SplitKind::Train);
  const auto val_slot = static_cast<int>(corpus::SplitKind::Val);

  std::vector<std::size_t> order(splits.train.size());
  double best_val = -1.0;
  double best_loss = 0.0;
  result.best = Checkpoint{1, mc, params, CheckpointMeta{0, tc.seed, {}}};

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (tc.shuffle) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct_sum = 0;
    std::size_t batch_no = 0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size, ++batch_no) {
      const std::size_t e = std::min(order.size(), b + tc.batch_size);
      std::span<const std::size_t> batch(order.data() + b, e - b);
      double batch_loss = 0.0;
      std::size_t batch_correct = 0;
      const Gradients grads =
          batch_gradient(splits.train, batch, params, mc, mix(mix(dropout_base, epoch), batch_no),
                         tc.threads, &batch_loss, &batch_correct);
      result.audit.update_reads[train_slot] += batch.size();
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train_loop: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss * static_cast<double>(batch.size());
      correct_sum += batch_correct;
      adam_step(params, grads, state, tc);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_acc = static_cast<double>(correct_sum) / static_cast<double>(order.size());
    if (!splits.val.empty()) {
      const auto val = evaluate(splits.val, params, mc);
      result.audit.eval_reads[val_slot] += splits.val.size();
      m.val_acc = evalx::accuracy(val.confusion);
      m.val_mcc = evalx::mcc(val.confusion);
      m.val_loss = val.loss;
    }
    result.log.push_back(m);
    const bool better = splits.val.empty() || m.val_acc > best_val ||
                        (m.val_acc == best_val && m.val_loss < best_loss);
    if (better) {
      best_val = m.val_acc;
      best_loss = m.val_loss;
      result.best = Checkpoint{1, mc, params, CheckpointMeta{epoch, tc.seed, m}};
    }
    if (on_epoch) on_epoch(m, params);
  }
  return result;
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_acc,val_mcc\n";
  char buf[160];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.train_loss,
                  m.train_acc, m.val_acc, m.val_mcc);
    out << buf;
  }
  return out.str();
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json doc;
  doc["schema_version"] = ckpt.schema_version;
  const auto& c = ckpt.model;
  doc["config"] = {{"d", c.d},
                   {"d_day", c.d_day},
                   {"d_h", c.d_h},
                   {"window", c.window},
                   {"dropout_p", c.dropout_p},
                   {"literal_input_mean", c.literal_input_mean},
                   {"literal_output_attention", c.literal_output_attention}};
  json tensors = json::object();
  for (const auto& t : ckpt.params.tensors()) {
    tensors[std::string(t.name)] = {{"shape", {t.rows, t.cols}},
                                    {"data", std::vector<double>(t.data.begin(), t.data.end())}};
  }
  doc["tensors"] = std::move(tensors);
  const auto& m = ckpt.meta.metrics;
  doc["metadata"] = {{"epoch", ckpt.meta.epoch},
                     {"seed", ckpt.meta.seed},
                     {"metrics",
                      {{"epoch", m.epoch},
                       {"train_loss", m.train_loss},
                       {"train_acc", m.train_acc},
                       {"val_acc", m.val_acc},
                       {"val_mcc", m.val_mcc}}}};
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("checkpoint: parse error: ") + e.what());
  }
  try {
    Checkpoint ck;
    ck.schema_version = doc.at("schema_version").get<int>();
    if (ck.schema_version != 1) {
      throw InputError("checkpoint: unsupported schema_version " +
                       std::to_string(ck.schema_version));
    }
    const auto& c = doc.at("config");
    ck.model.d = c.at("d").get<std::size_t>();
    ck.model.d_day = c.at("d_day").get<std::size_t>();
    ck.model.d_h = c.at("d_h").get<std::size_t>();
    ck.model.window = c.at("window").get<std::size_t>();
    ck.model.dropout_p = c.at("dropout_p").get<double>();
    ck.model.literal_input_mean = c.at("literal_input_mean").get<bool>();
    ck.model.literal_output_attention = c.at("literal_output_attention").get<bool>();
    ck.model.validate();
    ck.params = ModelParams::zeros(ck.model);
    const auto& tensors = doc.at("tensors");
    for (auto& t : ck.params.tensors()) {
      const std::string name(t.name);
      if (!tensors.contains(name)) throw InputError("checkpoint: missing tensor " + name);
      const auto& node = tensors.at(name);
      const auto shape = node.at("shape").get<std::vector<std::size_t>>();
      const auto data = node.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols ||
          data.size() != t.data.size()) {
        throw InputError("checkpoint: tensor " + name + " has shape [" +
                         (shape.size() == 2 ? std::to_string(shape[0]) + "x" +
                                                  std::to_string(shape[1])
                                            : std::string("?")) +
                         "], config expects [" + std::to_string(t.rows) + "x" +
                         std::to_string(t.cols) + "]");
      }
      std::copy(data.begin(), data.end(), t.data.begin());
    }
    if (doc.contains("metadata")) {
      const auto& md = doc.at("metadata");
      ck.meta.epoch = md.value("epoch", std::size_t{0});
      ck.meta.seed = md.value("seed", std::uint64_t{0});
      if (md.contains("metrics")) {
        const auto& m = md.at("metrics");
        ck.meta.metrics.epoch = m.value("epoch", std::size_t{0});
        ck.meta.metrics.train_loss = m.value("train_loss", 0.0);
        ck.meta.metrics.train_acc = m.value("train_acc", 0.0);
        ck.meta.metrics.val_acc = m.value("val_acc", 0.0);
        ck.meta.metrics.val_mcc = m.value("val_mcc", 0.0);
      }
    }
    return ck;
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint: schema error: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt);
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(corpus::read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  try {
    ck.params.check_shapes(expected);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return ck;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const GradCheckCase& c) {
  c.config.validate();
  Rng rng(c.seed);
  std::vector<numerics::Matrix> days(model::kWindowDays);
  const std::size_t empty_day =
      c.force_empty_day ? static_cast<std::size_t>(rng.below(model::kWindowDays)) : model::kWindowDays;
  for (std::size_t t = 0; t < model::kWindowDays; ++t) {
    std::size_t n = static_cast<std::size_t>(rng.below(c.max_headlines + 1));
    if (t == empty_day) n = 0;
    if (t == (empty_day + 3) % model::kWindowDays && n == 0) n = std::max<std::size_t>(1, c.max_headlines);
    days[t] = numerics::Matrix(0, c.config.d);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(c.config.d);
      for (double& x : row) x = rng.normal();
      days[t].append_row(row);
    }
  }
  model::DayMatrices refs = {std::cref(days[0]), std::cref(days[1]), std::cref(days[2]),
                             std::cref(days[3]), std::cref(days[4]), std::cref(days[5]),
                             std::cref(days[6])};

  ModelParams params = ModelParams::init(c.config, rng);
  params.b_att = rng.uniform(-0.5, 0.5);
  for (double& x : params.w_sim) x = rng.uniform(0.5, 1.5);
  for (double& x : params.b_cls) x = rng.uniform(-0.5, 0.5);
  for (double& x : params.w_att) x *= 2.0;

  Vector mask;
  const Vector* mask_ptr = nullptr;
  if (c.config.dropout_p > 0) {
    mask = model::dropout_mask(c.config.d_h, c.config.dropout_p, rng);
    mask_ptr = &mask;
  }

  const auto trace = model::forward_with_mask(refs, params, c.config, mask_ptr);
  const Gradients analytic = backward(refs, trace, c.label, params, c.config);
  const Vector flat_analytic = analytic.flatten();

  // Differences against a long-double baseline so the central difference is
  // not swamped by rounding of an O(1) loss.
  const long double baseline =
      reference::evaluate(refs, params, c.config, mask_ptr, c.label).loss;
  ModelParams probe = params;
  const numerics::ScalarFn loss = [&](const Vector& flat) {
    probe.unflatten(flat);
    const long double l = reference::evaluate(refs, probe, c.config, mask_ptr, c.label).loss;
    return static_cast<double>(l - baseline);
  };
  const Vector numeric = numerics::finite_diff_grad(loss, params.flatten(), c.eps);

  GradCheckResult res;
  res.coordinates = numeric.size();
  std::size_t offset = 0;
  for (const auto& t : params.tensors()) {
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double err = relative_error(flat_analytic[offset + i], numeric[offset + i]);
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_tensor = std::string(t.name);
        res.worst_index = i;
      }
    }
    offset += t.data.size();
  }
  return res;
}

}  // namespace newsattn::train
