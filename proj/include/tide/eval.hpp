#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <thread>
#include <vector>

#include "tide/corpus.hpp"
#include "tide/model.hpp"

namespace tide {

/// Item ids in descending score order; ties broken by ascending id.
inline std::vector<int> rank_items(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    }
    return a < b;
  });
  return order;
}

inline double recall_at_k(const std::vector<int>& ranked,
                          const std::vector<int>& target, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k >= 1");
  if (target.empty()) throw std::invalid_argument("recall_at_k: empty target");
  std::set<int> target_set(target.begin(), target.end());
  int hits = 0;
  const int top = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int r = 0; r < top; ++r) {
    hits += target_set.count(ranked[static_cast<size_t>(r)]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(target_set.size());
}

inline double ndcg_at_k(const std::vector<int>& ranked,
                        const std::vector<int>& target, int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k >= 1");
  if (target.empty()) throw std::invalid_argument("ndcg_at_k: empty target");
  std::set<int> target_set(target.begin(), target.end());
  double dcg = 0.0;
  const int top = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int r = 1; r <= top; ++r) {
    if (target_set.count(ranked[static_cast<size_t>(r - 1)])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  double idcg = 0.0;
  const int ideal = std::min<int>(k, static_cast<int>(target_set.size()));
  for (int r = 1; r <= ideal; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return dcg / idcg;
}

/// Popularity scores: per-item training interaction counts, identical for
/// every user.
inline std::vector<double> pop_baseline(const BasketCorpus& train) {
  if (train.n_users() == 0) throw input_error("pop_baseline: empty corpus");
  std::vector<double> scores(static_cast<size_t>(train.n_items()), 0.0);
  for (const auto& seq : train.sequences) {
    for (const auto& b : seq) {
      for (int i : b.items) scores[static_cast<size_t>(i)] += 1.0;
    }
  }
  return scores;
}

struct AlignmentStats {
  std::vector<double> bin_edges;  // bins+1 edges over [-1, 1]
  std::vector<double> density;    // normalized to unit area
  double mean = 0.0;
  double stddev = 0.0;
  int skipped = 0;  // zero-norm pairs
  int used = 0;
};

/// Histogram of cosine(z_habit, z_expl) over users, normalized to unit area.
inline AlignmentStats alignment_histogram(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>&
        intent_pairs,
    int bins = 40) {
  if (intent_pairs.empty()) {
    throw std::invalid_argument("alignment_histogram: no intent pairs");
  }
  if (bins < 1) throw std::invalid_argument("alignment_histogram: bins >= 1");

  std::vector<double> cosines;
  int skipped = 0;
  for (const auto& [zh, ze] : intent_pairs) {
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (size_t i = 0; i < zh.size(); ++i) {
      aa += zh[i] * zh[i];
      bb += ze[i] * ze[i];
      ab += zh[i] * ze[i];
    }
    if (aa == 0.0 || bb == 0.0) {
      ++skipped;
      continue;
    }
    cosines.push_back(ab / std::sqrt(aa * bb));
  }
  if (cosines.empty()) {
    throw std::invalid_argument("alignment_histogram: all pairs zero-norm");
  }

  AlignmentStats st;
  st.skipped = skipped;
  st.used = static_cast<int>(cosines.size());
  const double width = 2.0 / bins;
  st.bin_edges.resize(static_cast<size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    st.bin_edges[static_cast<size_t>(b)] = -1.0 + width * b;
  }
  std::vector<std::int64_t> counts(static_cast<size_t>(bins), 0);
  for (double c : cosines) {
    int b = static_cast<int>((c + 1.0) / width);
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<size_t>(b)];
  }
  st.density.resize(static_cast<size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    st.density[static_cast<size_t>(b)] =
        static_cast<double>(counts[static_cast<size_t>(b)]) /
        (static_cast<double>(cosines.size()) * width);
  }
  double mean = 0.0;
  for (double c : cosines) mean += c;
  mean /= static_cast<double>(cosines.size());
  double var = 0.0;
  for (double c : cosines) var += (c - mean) * (c - mean);
  st.mean = mean;
  st.stddev = cosines.size() > 1
                  ? std::sqrt(var / static_cast<double>(cosines.size() - 1))
                  : 0.0;
  return st;
}

/// One evaluation pass: per-metric values at each cutoff plus the per-user
/// intent vectors (for alignment analysis and export).
struct EvalRun {
  std::uint64_t seed = 0;
  std::map<int, double> recall;
  std::map<int, double> ndcg;
  int user_count = 0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> intents;
};

/// Cross-seed aggregate with mean and sample standard deviation.
struct MetricsReport {
  std::vector<int> ks;
  std::vector<EvalRun> runs;
  std::map<int, double> recall_mean, recall_std;
  std::map<int, double> ndcg_mean, ndcg_std;
  int user_count = 0;
};

namespace detail {

inline std::vector<std::vector<int>> eval_history(const SplitCorpus& split,
                                                  int user) {
  std::vector<std::vector<int>> history;
  for (const auto& b : split.train.sequences[static_cast<size_t>(user)]) {
    history.push_back(b.items);
  }
  history.push_back(split.valid_target[static_cast<size_t>(user)].items);
  return history;
}

}  // namespace detail

/// Full-catalog evaluation of a trained model on the test targets. The
/// input history is the training baskets plus the validation basket, so the
/// model sees baskets 1..k-1 when predicting basket k. Per-user work may be
/// spread over `threads`; the reduction order is fixed.
inline EvalRun evaluate_model(TideModel& model, const SplitCorpus& split,
                              const std::vector<int>& ks, int threads = 1) {
  const int n_users = split.train.n_users();
  EvalRun run;
  run.seed = model.config().seed;
  run.user_count = n_users;
  run.intents.resize(static_cast<size_t>(n_users));

  std::vector<std::map<int, double>> recalls(static_cast<size_t>(n_users));
  std::vector<std::map<int, double>> ndcgs(static_cast<size_t>(n_users));

  const auto score_range = [&](int lo, int hi) {
    for (int u = lo; u < hi; ++u) {
      auto scores = model.score_user(detail::eval_history(split, u));
      const auto ranked = rank_items(scores.y_final);
      const auto& target = split.test_target[static_cast<size_t>(u)].items;
      for (int k : ks) {
        recalls[static_cast<size_t>(u)][k] = recall_at_k(ranked, target, k);
        ndcgs[static_cast<size_t>(u)][k] = ndcg_at_k(ranked, target, k);
      }
      run.intents[static_cast<size_t>(u)] = {std::move(scores.z_habit),
                                             std::move(scores.z_expl)};
    }
  };

  threads = std::max(1, threads);
  if (threads == 1 || n_users < 2 * threads) {
    score_range(0, n_users);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_users + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(n_users, lo + chunk);
      if (lo < hi) pool.emplace_back(score_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (int k : ks) {
    double r = 0.0, n = 0.0;
    for (int u = 0; u < n_users; ++u) {
      r += recalls[static_cast<size_t>(u)][k];
      n += ndcgs[static_cast<size_t>(u)][k];
    }
    run.recall[k] = r / n_users;
    run.ndcg[k] = n / n_users;
  }
  return run;
}

/// Evaluation of a static score vector (POP baseline, oracle stubs).
inline EvalRun evaluate_scores(const std::vector<double>& scores,
                               const SplitCorpus& split,
                               const std::vector<int>& ks) {
  const int n_users = split.train.n_users();
  EvalRun run;
  run.user_count = n_users;
  const auto ranked = rank_items(scores);
  for (int k : ks) {
    double r = 0.0, n = 0.0;
    for (int u = 0; u < n_users; ++u) {
      const auto& target = split.test_target[static_cast<size_t>(u)].items;
      r += recall_at_k(ranked, target, k);
      n += ndcg_at_k(ranked, target, k);
    }
    run.recall[k] = r / n_users;
    run.ndcg[k] = n / n_users;
  }
  return run;
}

inline MetricsReport aggregate_runs(std::vector<EvalRun> runs,
                                    const std::vector<int>& ks) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
  MetricsReport rpt;
  rpt.ks = ks;
  rpt.user_count = runs.front().user_count;
  const double n = static_cast<double>(runs.size());
  for (int k : ks) {
    double rm = 0.0, nm = 0.0;
    for (const auto& r : runs) {
      rm += r.recall.at(k);
      nm += r.ndcg.at(k);
    }
    rm /= n;
    nm /= n;
    double rv = 0.0, nv = 0.0;
    for (const auto& r : runs) {
      rv += (r.recall.at(k) - rm) * (r.recall.at(k) - rm);
      nv += (r.ndcg.at(k) - nm) * (r.ndcg.at(k) - nm);
    }
    rpt.recall_mean[k] = rm;
    rpt.ndcg_mean[k] = nm;
    rpt.recall_std[k] = runs.size() > 1 ? std::sqrt(rv / (n - 1.0)) : 0.0;
    rpt.ndcg_std[k] = runs.size() > 1 ? std::sqrt(nv / (n - 1.0)) : 0.0;
  }
  rpt.runs = std::move(runs);
  return rpt;
}

}  // namespace tide
