#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "tide/corpus.hpp"

namespace tide {

/// A binned curve for CSV export: per-bin x, mean value, and the number of
/// observations that landed in the bin (0 marks an empty bin).
struct BinnedCurve {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::int64_t> count;
};

/// Mean repeat ratio per normalized-position bin. For basket m >= 2 of a
/// user with k baskets, the ratio is |B_m ∩ (B_1 ∪ .. ∪ B_{m-1})| / |B_m|
/// and the bin is floor((m-1)/k * bins), clamped to [0, bins).
inline BinnedCurve repeat_ratio_bins(const BasketCorpus& corpus,
                                     int bins = 10) {
  if (bins < 1) throw std::invalid_argument("repeat_ratio_bins: bins >= 1");
  BinnedCurve curve;
  curve.x.resize(static_cast<size_t>(bins));
  curve.y.assign(static_cast<size_t>(bins), 0.0);
  curve.count.assign(static_cast<size_t>(bins), 0);
  for (int b = 0; b < bins; ++b) curve.x[static_cast<size_t>(b)] = b;

  for (const auto& seq : corpus.sequences) {
    const int k = static_cast<int>(seq.size());
    std::set<int> seen;
    for (int m = 1; m <= k; ++m) {
      const Basket& basket = seq[static_cast<size_t>(m - 1)];
      if (m >= 2) {
        int repeats = 0;
        for (int i : basket.items) repeats += seen.count(i) ? 1 : 0;
        const double ratio =
            static_cast<double>(repeats) / static_cast<double>(basket.items.size());
        int bin = static_cast<int>(static_cast<double>(m - 1) / k * bins);
        bin = std::clamp(bin, 0, bins - 1);
        curve.y[static_cast<size_t>(bin)] += ratio;
        curve.count[static_cast<size_t>(bin)] += 1;
      }
      seen.insert(basket.items.begin(), basket.items.end());
    }
  }
  for (int b = 0; b < bins; ++b) {
    if (curve.count[static_cast<size_t>(b)] > 0) {
      curve.y[static_cast<size_t>(b)] /=
          static_cast<double>(curve.count[static_cast<size_t>(b)]);
    }
  }
  return curve;
}

/// All repurchase intervals Δt = m_current - m_last over consecutive
/// purchases of the same item by the same user, in basket steps.
/// `item` restricts collection to a single item id (-1 for all items).
inline std::vector<double> collect_repurchase_intervals(
    const BasketCorpus& corpus, int item = -1) {
  std::vector<double> intervals;
  for (const auto& seq : corpus.sequences) {
    std::unordered_map<int, int> last_pos;
    for (const auto& b : seq) {
      for (int i : b.items) {
        if (item >= 0 && i != item) continue;
        auto it = last_pos.find(i);
        if (it != last_pos.end()) {
          intervals.push_back(static_cast<double>(b.index_m - it->second));
          it->second = b.index_m;
        } else {
          last_pos.emplace(i, b.index_m);
        }
      }
    }
  }
  return intervals;
}

namespace detail {

// Linearly interpolated quantile (same convention as numpy's default).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

/// Silverman's rule with the robust IQR term:
/// h = 0.9 * min(σ, IQR/1.34) * n^{-1/5}, falling back to 0.1 when the
/// samples are degenerate (σ or IQR zero).
inline double silverman_bandwidth(const std::vector<double>& samples) {
  const size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("silverman_bandwidth: no samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  const double sigma = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = detail::quantile_sorted(sorted, 0.75) -
                     detail::quantile_sorted(sorted, 0.25);

  const double h = 0.9 * std::min(sigma, iqr / 1.34) *
                   std::pow(static_cast<double>(n), -0.2);
  return h > 0.0 ? h : 0.1;
}

/// Gaussian kernel density estimate over fixed samples.
struct Kde {
  std::vector<double> samples;
  double bandwidth = 0.1;

  double operator()(double x) const {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    double acc = 0.0;
    for (double s : samples) {
      const double z = (x - s) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    return acc * inv_sqrt_2pi /
           (bandwidth * static_cast<double>(samples.size()));
  }
};

/// Gaussian KDE of the repurchase-interval distribution, evaluated at
/// `eval_points`. Errors when the corpus has no repurchase event.
inline std::vector<double> repurchase_interval_density(
    const BasketCorpus& corpus, const std::vector<double>& eval_points) {
  const std::vector<double> intervals = collect_repurchase_intervals(corpus);
  if (intervals.empty()) {
    throw input_error("repurchase_interval_density: no repurchase events");
  }
  Kde kde{intervals, silverman_bandwidth(intervals)};
  std::vector<double> out;
  out.reserve(eval_points.size());
  for (double x : eval_points) out.push_back(kde(x));
  return out;
}

/// Mean per-user repeat ratio bucketed by sequence length. Buckets are the
/// half-open ranges [edges[i], edges[i+1]); users outside all buckets are
/// ignored.
inline BinnedCurve history_length_vs_repeat(
    const BasketCorpus& corpus, const std::vector<int>& edges) {
  if (edges.size() < 2) {
    throw std::invalid_argument("history_length_vs_repeat: need >= 2 edges");
  }
  for (size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw std::invalid_argument(
          "history_length_vs_repeat: edges must be strictly increasing");
    }
  }
  const size_t buckets = edges.size() - 1;
  BinnedCurve curve;
  curve.x.resize(buckets);
  curve.y.assign(buckets, 0.0);
  curve.count.assign(buckets, 0);
  for (size_t b = 0; b < buckets; ++b) curve.x[b] = edges[b];

  for (const auto& seq : corpus.sequences) {
    const int k = static_cast<int>(seq.size());
    std::int64_t repeats = 0, total = 0;
    std::set<int> seen;
    for (int m = 1; m <= k; ++m) {
      const Basket& basket = seq[static_cast<size_t>(m - 1)];
      if (m >= 2) {
        total += static_cast<std::int64_t>(basket.items.size());
        for (int i : basket.items) repeats += seen.count(i) ? 1 : 0;
      }
      seen.insert(basket.items.begin(), basket.items.end());
    }
    if (total == 0) continue;  // single-basket user contributes nothing
    const double ratio =
        static_cast<double>(repeats) / static_cast<double>(total);
    for (size_t b = 0; b < buckets; ++b) {
      if (k >= edges[b] && k < edges[b + 1]) {
        curve.y[b] += ratio;
        curve.count[b] += 1;
        break;
      }
    }
  }
  for (size_t b = 0; b < buckets; ++b) {
    if (curve.count[b] > 0) curve.y[b] /= static_cast<double>(curve.count[b]);
  }
  return curve;
}

/// Empirical CDF of item repetition probabilities. For each item,
/// p_i = (#buyers with >= 2 distinct baskets containing it) / (#buyers).
/// Returns (p, cumulative fraction of items with p_i <= p) at each distinct p.
inline BinnedCurve item_repetition_cdf(const BasketCorpus& corpus) {
  if (corpus.n_users() == 0) throw input_error("item_repetition_cdf: empty corpus");
  std::vector<std::int64_t> buyers(static_cast<size_t>(corpus.n_items()), 0);
  std::vector<std::int64_t> repeat_buyers(static_cast<size_t>(corpus.n_items()), 0);
  for (const auto& seq : corpus.sequences) {
    std::unordered_map<int, int> baskets_with_item;
    for (const auto& b : seq) {
      for (int i : b.items) ++baskets_with_item[i];
    }
    for (const auto& [i, n] : baskets_with_item) {
      ++buyers[static_cast<size_t>(i)];
      if (n >= 2) ++repeat_buyers[static_cast<size_t>(i)];
    }
  }
  std::vector<double> probs;
  for (int i = 0; i < corpus.n_items(); ++i) {
    if (buyers[static_cast<size_t>(i)] > 0) {
      probs.push_back(static_cast<double>(repeat_buyers[static_cast<size_t>(i)]) /
                      static_cast<double>(buyers[static_cast<size_t>(i)]));
    }
  }
  std::sort(probs.begin(), probs.end());

  BinnedCurve cdf;
  const double n = static_cast<double>(probs.size());
  size_t i = 0;
  while (i < probs.size()) {
    size_t j = i;
    while (j < probs.size() && probs[j] == probs[i]) ++j;
    cdf.x.push_back(probs[i]);
    cdf.y.push_back(static_cast<double>(j) / n);
    cdf.count.push_back(static_cast<std::int64_t>(j));
    i = j;
  }
  return cdf;
}

struct CorpusStats {
  std::int64_t interactions = 0;
  std::int64_t users = 0;
  std::int64_t baskets = 0;
  std::int64_t items = 0;
  double avg_baskets_per_user = 0.0;
  double avg_items_per_basket = 0.0;
  double avg_items_per_user = 0.0;
};

inline CorpusStats corpus_stats(const BasketCorpus& corpus) {
  CorpusStats s;
  s.interactions = corpus.n_interactions();
  s.users = corpus.n_users();
  s.baskets = corpus.n_baskets();
  s.items = corpus.n_items();
  if (s.users > 0) {
    s.avg_baskets_per_user =
        static_cast<double>(s.baskets) / static_cast<double>(s.users);
    s.avg_items_per_user =
        static_cast<double>(s.interactions) / static_cast<double>(s.users);
  }
  if (s.baskets > 0) {
    s.avg_items_per_basket =
        static_cast<double>(s.interactions) / static_cast<double>(s.baskets);
  }
  return s;
}

}  // namespace tide
