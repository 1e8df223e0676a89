// SPDX-License-Identifier: Apache-2.0
#include "newsattn/dataset.hpp"

namespace newsattn::corpus {

DatasetPaths DatasetPaths::in(const std::filesystem::path& dir) {
  return {dir / "news.jsonl", dir / "prices.csv", dir / "entities.json", dir / "embeddings.txt",
          std::nullopt};
}

Dataset load_dataset(const DatasetPaths& paths, LabelMode mode, std::size_t max_tokens) {
  Dataset ds;
  ds.graph = load_entity_graph(paths.entities);
  ds.prices = load_prices(paths.prices);
  ds.relevant = filter_relevant(load_news(paths.news, &ds.news_report), ds.graph);
  const auto table = textenc::load_embeddings(paths.embeddings, &ds.embedding_warnings);
  ds.embedding_dim = table.dim();
  textenc::StopwordSet stop =
      paths.stopwords ? textenc::load_stopwords(*paths.stopwords) : textenc::default_stopwords();
  const textenc::SentenceEncoder encoder(table, std::move(stop), max_tokens);
  ds.buckets = bucket_by_day(ds.relevant, ds.prices, encoder);
  ds.windows = make_windows(ds.buckets.buckets, ds.prices, mode);
  return ds;
}

}  // namespace newsattn::corpus
