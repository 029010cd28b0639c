#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tide/corpus.hpp"

namespace tide {

struct PeriodicItem {
  int item = 0;
  int period = 2;  // basket steps, >= 2
  int phase = 0;
};

struct PatternPool {
  std::vector<int> items;
  double co_draw = 1.0;  // probability the whole group joins a basket
};

struct SynthConfig {
  int n_users = 10;
  int n_items = 50;
  int baskets_per_user = 10;
  std::vector<PeriodicItem> periodic_items;
  double habit_prob = 0.0;  // chance of re-adding one previously bought item
  std::vector<PatternPool> pools;
  int noise_items_per_basket = 1;
  std::uint64_t seed = 1;
};

struct SynthResult {
  BasketCorpus corpus;
  std::string csv;  // same delimited format ingest consumes
  nlohmann::ordered_json manifest;
};

/// Generates basket sequences with planted structure. A periodic item joins
/// basket m (1-based) when (m-1) mod P == phase; with probability habit_prob
/// one previously bought item is re-added; each pool fires with its co-draw
/// probability and injects the whole group; noise items are drawn uniformly
/// over the items the user has never bought, so noise never creates
/// repurchases. Timestamps are m * 86400. A basket that stays empty is a
/// no-purchase step and is skipped. Users draw from seeds derived as
/// seed ⊕ index, so generation is order-independent and reproducible.
inline SynthResult generate(const SynthConfig& cfg) {
  if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.baskets_per_user < 1) {
    throw std::invalid_argument("generate: counts must be positive");
  }
  for (const auto& p : cfg.periodic_items) {
    if (p.period < 2) throw std::invalid_argument("generate: period >= 2");
    if (p.item < 0 || p.item >= cfg.n_items) {
      throw std::invalid_argument("generate: periodic item out of range");
    }
  }
  if (cfg.habit_prob < 0.0 || cfg.habit_prob > 1.0) {
    throw std::invalid_argument("generate: habit_prob in [0,1]");
  }
  for (const auto& pool : cfg.pools) {
    if (pool.co_draw < 0.0 || pool.co_draw > 1.0) {
      throw std::invalid_argument("generate: co_draw in [0,1]");
    }
    if (pool.items.empty()) {
      throw std::invalid_argument("generate: empty pattern pool");
    }
    for (int i : pool.items) {
      if (i < 0 || i >= cfg.n_items) {
        throw std::invalid_argument("generate: pool item out of range");
      }
    }
  }

  std::vector<std::int64_t> pool_fires(cfg.pools.size(), 0);
  std::ostringstream csv;
  csv << "user_id,item_id,timestamp\n";

  for (int u = 0; u < cfg.n_users; ++u) {
    Rng rng(cfg.seed ^ static_cast<std::uint64_t>(u));
    std::set<int> bought;
    for (int m = 1; m <= cfg.baskets_per_user; ++m) {
      std::set<int> basket;
      for (const auto& p : cfg.periodic_items) {
        if ((m - 1) % p.period == p.phase % p.period) basket.insert(p.item);
      }

      std::set<int> draw = basket;
      if (!bought.empty() && cfg.habit_prob > 0.0 &&
          rng.uniform() < cfg.habit_prob) {
        auto it = bought.begin();
        std::advance(it, rng.uniform_int(static_cast<int>(bought.size())));
        draw.insert(*it);
      }
      for (size_t pi = 0; pi < cfg.pools.size(); ++pi) {
        if (rng.uniform() < cfg.pools[pi].co_draw) {
          draw.insert(cfg.pools[pi].items.begin(), cfg.pools[pi].items.end());
          ++pool_fires[pi];
        }
      }
      for (int j = 0; j < cfg.noise_items_per_basket; ++j) {
        // rejection-sample an unseen item; give up quietly when the
        // catalogue is nearly exhausted
        for (int attempt = 0; attempt < 50; ++attempt) {
          const int candidate = rng.uniform_int(cfg.n_items);
          if (!bought.count(candidate) && !draw.count(candidate)) {
            draw.insert(candidate);
            break;
          }
        }
      }
      if (draw.empty()) continue;  // no purchase at this step
      basket = std::move(draw);

      const std::int64_t ts = static_cast<std::int64_t>(m) * 86400;
      for (int item : basket) {
        csv << 'u' << u << ",i" << item << ',' << ts << '\n';
      }
      bought.insert(basket.begin(), basket.end());
    }
  }

  SynthResult result;
  result.csv = csv.str();
  std::istringstream in(result.csv);
  result.corpus = ingest(in);

  nlohmann::ordered_json manifest;
  manifest["n_users"] = cfg.n_users;
  manifest["n_items"] = cfg.n_items;
  manifest["baskets_per_user"] = cfg.baskets_per_user;
  manifest["habit_prob"] = cfg.habit_prob;
  manifest["noise_items_per_basket"] = cfg.noise_items_per_basket;
  manifest["seed"] = cfg.seed;
  nlohmann::ordered_json periodic = nlohmann::ordered_json::array();
  for (const auto& p : cfg.periodic_items) {
    periodic.push_back(
        {{"item", "i" + std::to_string(p.item)},
         {"period", p.period},
         {"phase", p.phase}});
  }
  manifest["periodic_items"] = periodic;
  nlohmann::ordered_json pools = nlohmann::ordered_json::array();
  for (size_t pi = 0; pi < cfg.pools.size(); ++pi) {
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (int i : cfg.pools[pi].items) items.push_back("i" + std::to_string(i));
    pools.push_back({{"items", items},
                     {"co_draw", cfg.pools[pi].co_draw},
                     {"fires", pool_fires[pi]}});
  }
  manifest["pools"] = pools;
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace tide
