#include "tide/synth.hpp"

#include <gtest/gtest.h>

#include "tide/corpus_stats.hpp"
#include "tide/pattern_graph.hpp"

using namespace tide;

TEST(Generate, PeriodicItemLandsOnPlantedSteps) {
  SynthConfig cfg;
  cfg.n_users = 1;
  cfg.n_items = 5;
  cfg.baskets_per_user = 9;
  cfg.periodic_items = {{0, 3, 0}};
  cfg.habit_prob = 0.0;
  cfg.noise_items_per_basket = 0;
  cfg.seed = 5;
  const auto result = generate(cfg);
  // only steps 1, 4, 7 produce a purchase; they carry timestamps m*86400
  ASSERT_EQ(result.corpus.n_users(), 1);
  const auto& seq = result.corpus.sequences[0];
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0].timestamp, 1 * 86400);
  EXPECT_EQ(seq[1].timestamp, 4 * 86400);
  EXPECT_EQ(seq[2].timestamp, 7 * 86400);
  const int item = result.corpus.item_ids.at("i0");
  for (const auto& b : seq) {
    EXPECT_EQ(b.items, std::vector<int>{item});
  }
}

TEST(Generate, PhaseShiftsSchedule) {
  SynthConfig cfg;
  cfg.n_users = 1;
  cfg.n_items = 5;
  cfg.baskets_per_user = 8;
  cfg.periodic_items = {{2, 4, 1}};
  cfg.noise_items_per_basket = 0;
  const auto result = generate(cfg);
  const auto& seq = result.corpus.sequences[0];
  ASSERT_EQ(seq.size(), 2u);  // steps 2 and 6
  EXPECT_EQ(seq[0].timestamp, 2 * 86400);
  EXPECT_EQ(seq[1].timestamp, 6 * 86400);
}

TEST(Generate, NoHabitMeansNoRepurchases) {
  SynthConfig cfg;
  cfg.n_users = 6;
  cfg.n_items = 200;
  cfg.baskets_per_user = 10;
  cfg.habit_prob = 0.0;
  cfg.noise_items_per_basket = 3;
  cfg.seed = 11;
  const auto result = generate(cfg);
  const auto curve = repeat_ratio_bins(result.corpus, 10);
  for (double y : curve.y) EXPECT_DOUBLE_EQ(y, 0.0);
  EXPECT_TRUE(collect_repurchase_intervals(result.corpus).empty());
}

TEST(Generate, PoolFiresMatchPairCounts) {
  SynthConfig cfg;
  cfg.n_users = 4;
  cfg.n_items = 30;
  cfg.baskets_per_user = 6;
  cfg.pools = {{{7, 8}, 1.0}};
  cfg.noise_items_per_basket = 1;
  cfg.seed = 13;
  const auto result = generate(cfg);
  const std::int64_t fires = result.manifest["pools"][0]["fires"].get<std::int64_t>();
  EXPECT_EQ(fires, 4 * 6);

  const int x = result.corpus.item_ids.at("i7");
  const int y = result.corpus.item_ids.at("i8");
  std::int64_t c_xy = 0;
  for (const auto& seq : result.corpus.sequences) {
    for (const auto& b : seq) {
      const bool has_x = std::count(b.items.begin(), b.items.end(), x) > 0;
      const bool has_y = std::count(b.items.begin(), b.items.end(), y) > 0;
      if (has_x && has_y) ++c_xy;
    }
  }
  EXPECT_EQ(c_xy, fires);
}

TEST(Generate, SameSeedBitIdentical) {
  SynthConfig cfg;
  cfg.n_users = 5;
  cfg.n_items = 40;
  cfg.baskets_per_user = 8;
  cfg.periodic_items = {{1, 3, 0}, {2, 5, 2}};
  cfg.habit_prob = 0.4;
  cfg.pools = {{{10, 11, 12}, 0.5}};
  cfg.noise_items_per_basket = 2;
  cfg.seed = 99;
  const auto r1 = generate(cfg);
  const auto r2 = generate(cfg);
  EXPECT_EQ(r1.csv, r2.csv);
  EXPECT_EQ(r1.manifest.dump(), r2.manifest.dump());
}

TEST(Generate, CorpusInvariantsHold) {
  SynthConfig cfg;
  cfg.n_users = 8;
  cfg.n_items = 60;
  cfg.baskets_per_user = 12;
  cfg.periodic_items = {{0, 4, 0}};
  cfg.habit_prob = 0.3;
  cfg.pools = {{{5, 6}, 0.4}};
  cfg.noise_items_per_basket = 2;
  cfg.seed = 21;
  const auto result = generate(cfg);
  for (const auto& seq : result.corpus.sequences) {
    std::int64_t prev_ts = -1;
    for (size_t m = 0; m < seq.size(); ++m) {
      EXPECT_EQ(seq[m].index_m, static_cast<int>(m) + 1);
      EXPECT_FALSE(seq[m].items.empty());
      EXPECT_GT(seq[m].timestamp, prev_ts);
      prev_ts = seq[m].timestamp;
      EXPECT_TRUE(std::is_sorted(seq[m].items.begin(), seq[m].items.end()));
      for (int i : seq[m].items) {
        EXPECT_GE(i, 0);
        EXPECT_LT(i, result.corpus.n_items());
      }
    }
  }
}

// Planted periodicity is recoverable from the interval KDE.
TEST(Generate, PlantedPeriodRecoverable) {
  SynthConfig cfg;
  cfg.n_users = 20;
  cfg.n_items = 100;
  cfg.baskets_per_user = 20;
  cfg.periodic_items = {{0, 4, 0}};
  cfg.habit_prob = 0.2;
  cfg.noise_items_per_basket = 2;
  cfg.seed = 31;
  const auto result = generate(cfg);
  const int item = result.corpus.item_ids.at("i0");
  const auto intervals = collect_repurchase_intervals(result.corpus, item);
  ASSERT_FALSE(intervals.empty());
  Kde kde{intervals, silverman_bandwidth(intervals)};
  double best_x = 0.0, best = -1.0;
  for (double x = 1.0; x <= 10.0; x += 0.01) {
    if (kde(x) > best) {
      best = kde(x);
      best_x = x;
    }
  }
  EXPECT_NEAR(best_x, 4.0, 0.5);
}

TEST(Generate, InvalidConfigsRejected) {
  SynthConfig cfg;
  cfg.n_users = 0;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.periodic_items = {{0, 1, 0}};
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.habit_prob = 1.5;
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.pools = {{{999}, 0.5}};
  EXPECT_THROW(generate(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.pools = {{{}, 0.5}};
  EXPECT_THROW(generate(cfg), std::invalid_argument);
}

TEST(Generate, ManifestEchoesPlantedStructure) {
  SynthConfig cfg;
  cfg.n_users = 2;
  cfg.n_items = 10;
  cfg.baskets_per_user = 6;
  cfg.periodic_items = {{3, 3, 1}};
  cfg.noise_items_per_basket = 1;
  cfg.seed = 77;
  const auto result = generate(cfg);
  EXPECT_EQ(result.manifest["periodic_items"][0]["item"], "i3");
  EXPECT_EQ(result.manifest["periodic_items"][0]["period"], 3);
  EXPECT_EQ(result.manifest["periodic_items"][0]["phase"], 1);
  EXPECT_EQ(result.manifest["seed"], 77);
}
