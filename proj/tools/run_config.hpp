// SPDX-License-Identifier: Apache-2.0
// Flat JSON run configuration shared by every subcommand.
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "newsattn/corpus.hpp"
#include "newsattn/dataset.hpp"
#include "newsattn/model.hpp"
#include "newsattn/train.hpp"

namespace newsattn::cli {

struct RunConfig {
  std::filesystem::path data_dir;  ///< default parent for the four corpus files
  std::optional<std::filesystem::path> news, prices, embeddings, entities, stopwords;
  std::filesystem::path out_dir = ".";

  model::ModelConfig model;
  train::TrainConfig train;
  corpus::LabelMode label_mode = corpus::LabelMode::CloseToClose;
  double train_frac = corpus::kDefaultTrainFraction;
  double val_frac = corpus::kDefaultValFraction;
  std::size_t top_k = 5;
  std::size_t max_tokens = textenc::kDefaultMaxTokens;

  corpus::SynthOptions synth;
  std::size_t gradcheck_seeds = 5;

  corpus::DatasetPaths dataset_paths() const;
};

/// Keys mirror the field names; model/train fields are flat (d_h, lr, ...).
/// Unknown keys and wrong types are InputError. Relative paths resolve
/// against the config file's directory.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace newsattn::cli
