// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <json.hpp>

#include "newsattn/error.hpp"

namespace newsattn::cli {

using json = nlohmann::json;

corpus::DatasetPaths RunConfig::dataset_paths() const {
  corpus::DatasetPaths p = corpus::DatasetPaths::in(data_dir);
  if (news) p.news = *news;
  if (prices) p.prices = *prices;
  if (embeddings) p.embeddings = *embeddings;
  if (entities) p.entities = *entities;
  p.stopwords = stopwords;
  return p;
}

namespace {

template <class T>
T get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InputError("config: key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw InputError("config: key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("config: top level must be an object");

  RunConfig c;
  auto path = [&](const json& v, const std::string& key) {
    std::filesystem::path p = get<std::string>(v, key);
    return p.is_relative() ? base / p : p;
  };
  for (const auto& [key, v] : doc.items()) {
    if (key == "data_dir") c.data_dir = path(v, key);
    else if (key == "news") c.news = path(v, key);
    else if (key == "prices") c.prices = path(v, key);
    else if (key == "embeddings") c.embeddings = path(v, key);
    else if (key == "entities") c.entities = path(v, key);
    else if (key == "stopwords") c.stopwords = path(v, key);
    else if (key == "out_dir") c.out_dir = path(v, key);
    else if (key == "d_day") c.model.d_day = get_count(v, key);
    else if (key == "d_h") c.model.d_h = get_count(v, key);
    else if (key == "dropout") c.model.dropout_p = get<double>(v, key);
    else if (key == "literal_input_mean") c.model.literal_input_mean = get<bool>(v, key);
    else if (key == "literal_output_attention") c.model.literal_output_attention = get<bool>(v, key);
    else if (key == "batch_size") c.train.batch_size = get_count(v, key);
    else if (key == "lr") c.train.lr = get<double>(v, key);
    else if (key == "beta1") c.train.beta1 = get<double>(v, key);
    else if (key == "beta2") c.train.beta2 = get<double>(v, key);
    else if (key == "eps_adam") c.train.eps_adam = get<double>(v, key);
    else if (key == "epochs") c.train.epochs = get_count(v, key);
    else if (key == "shuffle") c.train.shuffle = get<bool>(v, key);
    else if (key == "seed") c.train.seed = get_count(v, key);
    else if (key == "threads") c.train.threads = get_count(v, key);
    else if (key == "label_mode") c.label_mode = corpus::parse_label_mode(get<std::string>(v, key));
    else if (key == "train_frac") c.train_frac = get<double>(v, key);
    else if (key == "val_frac") c.val_frac = get<double>(v, key);
    else if (key == "top_k") c.top_k = get_count(v, key);
    else if (key == "max_tokens") c.max_tokens = get_count(v, key);
    else if (key == "n_days") c.synth.n_days = get_count(v, key);
    else if (key == "signal_strength") c.synth.signal_strength = get<double>(v, key);
    else if (key == "embedding_dim") c.synth.embedding_dim = get_count(v, key);
    else if (key == "unrelated_rate") c.synth.unrelated_rate = get<double>(v, key);
    else if (key == "gradcheck_seeds") c.gradcheck_seeds = get_count(v, key);
    else throw InputError("config: unknown key '" + key + "'");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(corpus::read_file(path), path.parent_path());
}

}  // namespace newsattn::cli
