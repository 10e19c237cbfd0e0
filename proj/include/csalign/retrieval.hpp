#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "csalign/error.hpp"
#include "csalign/pmf.hpp"

namespace csalign {

/// ranking[q] lists gallery indices, most similar first.
using Ranking = std::vector<std::vector<std::size_t>>;

struct RetrievalMetrics {
  std::string direction;
  std::map<std::size_t, double> p_at;
  double map_score = 0.0;
};

/// Sorts the gallery by descending cosine similarity to each query; ties go to
/// the lower gallery index.
inline Ranking rank_gallery(const Matrix& query, const Matrix& gallery) {
  detail::require(query.cols() == gallery.cols(), ErrorCode::ShapeMismatch,
                  "query and gallery must share embedding dimension");
  const Matrix sim = detail::unit_rows(query).unit * detail::unit_rows(gallery).unit.transpose();
  Ranking out(static_cast<std::size_t>(query.rows()));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    auto& order = out[static_cast<std::size_t>(q)];
    order.resize(static_cast<std::size_t>(gallery.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sim(q, static_cast<Eigen::Index>(a)) > sim(q, static_cast<Eigen::Index>(b));
    });
  }
  return out;
}

inline Ranking rank_gallery(const EmbeddingBatch& query, const EmbeddingBatch& gallery) {
  return rank_gallery(query.data(), gallery.data());
}

inline double precision_at_k(const Ranking& ranked, const Labels& query_labels, const Labels& gallery_labels,
                             std::size_t k) {
  detail::require(ranked.size() == query_labels.size() && !ranked.empty(), ErrorCode::LengthMismatch,
                  "one ranking per query is required");
  detail::require(k >= 1 && k <= gallery_labels.size(), ErrorCode::BadK,
                  "k must lie in [1, gallery size]");
  double total = 0.0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    detail::require(ranked[q].size() >= k, ErrorCode::BadK, "ranking shorter than k");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) hits += gallery_labels[ranked[q][r]] == query_labels[q] ? 1 : 0;
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(ranked.size());
}

/// Mean over queries of full-ranking average precision.
inline double mean_average_precision(const Ranking& ranked, const Labels& query_labels, const Labels& gallery_labels) {
  detail::require(ranked.size() == query_labels.size() && !ranked.empty(), ErrorCode::LengthMismatch,
                  "one ranking per query is required");
  double total = 0.0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < ranked[q].size(); ++r) {
      if (gallery_labels[ranked[q][r]] == query_labels[q]) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    detail::require(hits > 0, ErrorCode::NoRelevantItems,
                    "query " + std::to_string(q) + " has no relevant gallery item");
    total += precision_sum / static_cast<double>(hits);
  }
  return total / static_cast<double>(ranked.size());
}

inline RetrievalMetrics evaluate_retrieval(const EmbeddingBatch& query, const EmbeddingBatch& gallery,
                                           const std::vector<std::size_t>& ks = {1, 10},
                                           std::string direction = {}) {
  const Ranking ranked = rank_gallery(query, gallery);
  RetrievalMetrics m;
  m.direction = direction.empty() ? query.name() + "2" + gallery.name() : std::move(direction);
  for (auto k : ks) m.p_at[k] = precision_at_k(ranked, query.labels(), gallery.labels(), k);
  m.map_score = mean_average_precision(ranked, query.labels(), gallery.labels());
  return m;
}

}  // namespace csalign
