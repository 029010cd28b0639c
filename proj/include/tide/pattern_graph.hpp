#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tide/corpus.hpp"
#include "tide/diffcore.hpp"
#include "tide/tensor.hpp"

namespace tide {

enum class MiningMetric { kCount, kNpmi, kJaccard, kLift };

inline const char* mining_metric_name(MiningMetric m) {
  switch (m) {
    case MiningMetric::kCount:
      return "count";
    case MiningMetric::kNpmi:
      return "npmi";
    case MiningMetric::kJaccard:
      return "jaccard";
    case MiningMetric::kLift:
      return "lift";
  }
  return "count";
}

inline MiningMetric mining_metric_from_name(const std::string& s) {
  if (s == "count") return MiningMetric::kCount;
  if (s == "npmi") return MiningMetric::kNpmi;
  if (s == "jaccard") return MiningMetric::kJaccard;
  if (s == "lift") return MiningMetric::kLift;
  throw input_error("unknown mining metric '" + s +
                    "' (expected count, npmi, jaccard, or lift)");
}

/// A mined frequent item pair. Pattern nodes always have degree 2.
struct Pattern {
  int item_i = 0;  // item_i < item_j
  int item_j = 0;
  std::int64_t count = 0;  // baskets containing both items
  double score = 0.0;
};

/// Bipartite item<->pattern graph mined from the training baskets. The
/// structure is frozen for the run; only item embeddings carry gradients
/// through the two propagation hops.
struct PatternGraph {
  std::vector<Pattern> patterns;  // sorted by (item_i, item_j)
  std::vector<std::vector<int>> item_adj;  // item id -> pattern indices
  std::vector<int> item_degree;            // |N_i|
  MiningMetric metric = MiningMetric::kCount;
  int min_support = 5;
  int n_items = 0;

  // out = coeff * in, with coefficient 1/sqrt(|N_p| * |N_i|) on every edge
  SparseCoeffs item_to_pattern;  // (M x |I|): items -> pattern embeddings
  SparseCoeffs pattern_to_item;  // (|I| x M): patterns -> item enhancement

  int n_patterns() const { return static_cast<int>(patterns.size()); }
};

namespace detail {

inline double pair_score(MiningMetric metric, std::int64_t c, std::int64_t ni,
                         std::int64_t nj, std::int64_t total_baskets) {
  const double cd = static_cast<double>(c);
  const double nid = static_cast<double>(ni);
  const double njd = static_cast<double>(nj);
  const double bd = static_cast<double>(total_baskets);
  switch (metric) {
    case MiningMetric::kCount:
      return cd;
    case MiningMetric::kJaccard:
      return cd / (nid + njd - cd);
    case MiningMetric::kLift:
      return cd * bd / (nid * njd);
    case MiningMetric::kNpmi: {
      if (c == total_baskets) return 1.0;  // -log(c/B) would be 0
      const double pmi = std::log(cd * bd / (nid * njd));
      return pmi / (-std::log(cd / bd));
    }
  }
  return cd;
}

}  // namespace detail

/// Mines frequent item pairs from the training baskets. A pair is counted
/// once per basket containing both items; candidates need count >=
/// min_support, are ranked by the chosen metric (ties by (i,j)), and the top
/// max_patterns become pattern nodes.
inline PatternGraph mine_patterns(const BasketCorpus& train,
                                  int min_support = 5,
                                  MiningMetric metric = MiningMetric::kCount,
                                  int max_patterns = 50000) {
  if (train.n_users() == 0) throw input_error("mine_patterns: empty corpus");

  std::vector<std::int64_t> basket_count(static_cast<size_t>(train.n_items()), 0);
  std::unordered_map<std::uint64_t, std::int64_t> pair_count;
  std::int64_t total_baskets = 0;
  for (const auto& seq : train.sequences) {
    for (const auto& b : seq) {
      ++total_baskets;
      for (int i : b.items) ++basket_count[static_cast<size_t>(i)];
      for (size_t a = 0; a < b.items.size(); ++a) {
        for (size_t c = a + 1; c < b.items.size(); ++c) {
          const auto key = (static_cast<std::uint64_t>(b.items[a]) << 32) |
                           static_cast<std::uint32_t>(b.items[c]);
          ++pair_count[key];
        }
      }
    }
  }

  std::vector<Pattern> candidates;
  for (const auto& [key, c] : pair_count) {
    if (c < min_support) continue;
    Pattern p;
    p.item_i = static_cast<int>(key >> 32);
    p.item_j = static_cast<int>(key & 0xffffffffu);
    p.count = c;
    p.score = detail::pair_score(
        metric, c, basket_count[static_cast<size_t>(p.item_i)],
        basket_count[static_cast<size_t>(p.item_j)], total_baskets);
    candidates.push_back(p);
  }
  if (candidates.empty()) {
    throw input_error("mine_patterns: no item pair reaches min_support=" +
                      std::to_string(min_support) + "; lower the threshold");
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Pattern& a, const Pattern& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.item_i != b.item_i) return a.item_i < b.item_i;
              return a.item_j < b.item_j;
            });
  if (static_cast<int>(candidates.size()) > max_patterns) {
    candidates.resize(static_cast<size_t>(max_patterns));
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Pattern& a, const Pattern& b) {
              if (a.item_i != b.item_i) return a.item_i < b.item_i;
              return a.item_j < b.item_j;
            });

  PatternGraph graph;
  graph.patterns = std::move(candidates);
  graph.metric = metric;
  graph.min_support = min_support;
  graph.n_items = train.n_items();
  graph.item_adj.assign(static_cast<size_t>(graph.n_items), {});
  graph.item_degree.assign(static_cast<size_t>(graph.n_items), 0);
  for (int p = 0; p < graph.n_patterns(); ++p) {
    graph.item_adj[static_cast<size_t>(graph.patterns[static_cast<size_t>(p)].item_i)]
        .push_back(p);
    graph.item_adj[static_cast<size_t>(graph.patterns[static_cast<size_t>(p)].item_j)]
        .push_back(p);
  }
  for (int i = 0; i < graph.n_items; ++i) {
    graph.item_degree[static_cast<size_t>(i)] =
        static_cast<int>(graph.item_adj[static_cast<size_t>(i)].size());
  }

  graph.item_to_pattern.rows = graph.n_patterns();
  graph.item_to_pattern.cols = graph.n_items;
  graph.pattern_to_item.rows = graph.n_items;
  graph.pattern_to_item.cols = graph.n_patterns();
  for (int p = 0; p < graph.n_patterns(); ++p) {
    const Pattern& pat = graph.patterns[static_cast<size_t>(p)];
    for (int i : {pat.item_i, pat.item_j}) {
      const double w =
          1.0 / std::sqrt(2.0 * graph.item_degree[static_cast<size_t>(i)]);
      graph.item_to_pattern.entries.push_back({p, i, w});
      graph.pattern_to_item.entries.push_back({i, p, w});
    }
  }
  return graph;
}

/// Pattern-node embeddings: e_p = Σ_{i∈N_p} v_i / sqrt(|N_p|·|N_i|).
inline Tensor pattern_embed(const PatternGraph& graph, const Tensor& items) {
  if (items.rows != graph.n_items) {
    throw std::invalid_argument("pattern_embed: embedding rows " +
                                std::to_string(items.rows) + " vs graph items " +
                                std::to_string(graph.n_items));
  }
  Tensor out(graph.n_patterns(), items.cols);
  for (const auto& e : graph.item_to_pattern.entries) {
    for (int j = 0; j < items.cols; ++j) out(e.r, j) += e.w * items(e.c, j);
  }
  return out;
}

/// Graph-enhanced item embeddings: g_i = v_i + Σ_{p∈N_i} e_p / sqrt(|N_i|·|N_p|).
/// Items that belong to no pattern keep g_i = v_i exactly.
inline Tensor graph_enhance(const PatternGraph& graph, const Tensor& items,
                            const Tensor& pattern_embeds) {
  if (pattern_embeds.rows != graph.n_patterns()) {
    throw std::invalid_argument("graph_enhance: pattern embedding rows " +
                                std::to_string(pattern_embeds.rows) +
                                " vs graph patterns " +
                                std::to_string(graph.n_patterns()));
  }
  Tensor out = items;
  for (const auto& e : graph.pattern_to_item.entries) {
    for (int j = 0; j < items.cols; ++j) {
      out(e.r, j) += e.w * pattern_embeds(e.c, j);
    }
  }
  return out;
}

/// CSV export `item_i,item_j,count,score` using raw item tokens.
inline void export_graph_csv(const PatternGraph& graph,
                             const BasketCorpus& vocab, std::ostream& out) {
  out << "item_i,item_j,count,score\n";
  for (const auto& p : graph.patterns) {
    out << vocab.item_tokens[static_cast<size_t>(p.item_i)] << ','
        << vocab.item_tokens[static_cast<size_t>(p.item_j)] << ',' << p.count
        << ',' << p.score << '\n';
  }
}

}  // namespace tide
