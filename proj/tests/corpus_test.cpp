#include "tide/corpus.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>
#include <tuple>

using namespace tide;

namespace {

BasketCorpus corpus_from(const std::string& text) {
  std::istringstream in(text);
  return ingest(in);
}

// Raw (user, item, timestamp) triples of a corpus, for comparisons that
// should not depend on dense-id assignment.
std::set<std::tuple<std::string, std::string, std::int64_t>> triples_of(
    const BasketCorpus& c) {
  std::set<std::tuple<std::string, std::string, std::int64_t>> out;
  for (int u = 0; u < c.n_users(); ++u) {
    for (const auto& b : c.sequences[static_cast<size_t>(u)]) {
      for (int i : b.items) {
        out.insert({c.user_tokens[static_cast<size_t>(u)],
                    c.item_tokens[static_cast<size_t>(i)], b.timestamp});
      }
    }
  }
  return out;
}

// Independent k-core oracle: iterative deletion over raw triples.
std::set<std::tuple<std::string, std::string, std::int64_t>> kcore_oracle(
    std::set<std::tuple<std::string, std::string, std::int64_t>> rows, int k) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, int> user_count, item_count;
    for (const auto& [u, i, t] : rows) {
      ++user_count[u];
      ++item_count[i];
    }
    std::set<std::tuple<std::string, std::string, std::int64_t>> kept;
    for (const auto& row : rows) {
      if (item_count[std::get<1>(row)] >= k) kept.insert(row);
    }
    if (kept.size() != rows.size()) changed = true;
    rows = std::move(kept);
    std::map<std::string, int> uc2;
    for (const auto& [u, i, t] : rows) ++uc2[u];
    kept.clear();
    for (const auto& row : rows) {
      if (uc2[std::get<0>(row)] >= k) kept.insert(row);
    }
    if (kept.size() != rows.size()) changed = true;
    rows = std::move(kept);
  }
  return rows;
}

}  // namespace

TEST(IngestTest, GroupsByIdenticalTimestamp) {
  const auto c = corpus_from("u1,a,10\nu1,b,10\nu1,c,20\n");
  ASSERT_EQ(c.n_users(), 1);
  ASSERT_EQ(c.sequences[0].size(), 2u);
  EXPECT_EQ(c.sequences[0][0].items.size(), 2u);
  EXPECT_EQ(c.sequences[0][1].items.size(), 1u);
  EXPECT_EQ(c.sequences[0][0].index_m, 1);
  EXPECT_EQ(c.sequences[0][1].index_m, 2);
  EXPECT_EQ(c.sequences[0][0].timestamp, 10);
}

TEST(IngestTest, DuplicateLinesCollapse) {
  const auto once = corpus_from("u1,a,10\nu1,b,20\n");
  const auto twice = corpus_from("u1,a,10\nu1,a,10\nu1,b,20\nu1,a,10\n");
  EXPECT_EQ(triples_of(once), triples_of(twice));
  EXPECT_EQ(once.n_baskets(), twice.n_baskets());
}

TEST(IngestTest, TwoUserFixtureMatchesHandEnumeration) {
  // u1: {a,b}@5, {a}@9; u2: {b}@1, {c,a}@7
  const auto c = corpus_from(
      "u1,a,5\n"
      "u1,b,5\n"
      "u2,b,1\n"
      "u1,a,9\n"
      "u2,c,7\n"
      "u2,a,7\n");
  ASSERT_EQ(c.n_users(), 2);
  ASSERT_EQ(c.n_items(), 3);
  // first-appearance dense ids: u1=0, u2=1; a=0, b=1, c=2
  EXPECT_EQ(c.user_tokens[0], "u1");
  EXPECT_EQ(c.item_tokens[0], "a");
  EXPECT_EQ(c.item_tokens[2], "c");
  ASSERT_EQ(c.sequences[0].size(), 2u);
  EXPECT_EQ(c.sequences[0][0].items, (std::vector<int>{0, 1}));
  EXPECT_EQ(c.sequences[0][1].items, (std::vector<int>{0}));
  ASSERT_EQ(c.sequences[1].size(), 2u);
  EXPECT_EQ(c.sequences[1][0].items, (std::vector<int>{1}));
  EXPECT_EQ(c.sequences[1][0].timestamp, 1);
  EXPECT_EQ(c.sequences[1][1].items, (std::vector<int>{0, 2}));
}

TEST(IngestTest, HeaderAutoDetected) {
  const auto with_header =
      corpus_from("user_id,item_id,timestamp\nu1,a,10\nu1,b,20\n");
  const auto without = corpus_from("u1,a,10\nu1,b,20\n");
  EXPECT_EQ(triples_of(with_header), triples_of(without));
}

TEST(IngestTest, MalformedLineNamesLineNumber) {
  try {
    corpus_from("u1,a,10\nu1,broken\n");
    FAIL() << "expected parse error";
  } catch (const input_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(IngestTest, BadTimestampRejected) {
  EXPECT_THROW(corpus_from("u1,a,xyz\n"), input_error);
  EXPECT_THROW(corpus_from("u1,a,-5\n"), input_error);
}

TEST(IngestTest, EmptyInputRejected) {
  EXPECT_THROW(corpus_from(""), input_error);
  EXPECT_THROW(corpus_from("user_id,item_id,timestamp\n"), input_error);
}

TEST(KCoreTest, AlreadyDenseCorpusUnchanged) {
  // 2 users x 5 baskets over 2 items: every user and item has >= 5
  std::string text;
  for (int u = 0; u < 2; ++u) {
    for (int m = 0; m < 5; ++m) {
      text += "u" + std::to_string(u) + ",a," + std::to_string(10 * m) + "\n";
      text += "u" + std::to_string(u) + ",b," + std::to_string(10 * m) + "\n";
    }
  }
  const auto c = corpus_from(text);
  const auto filtered = k_core_filter(c, 5);
  EXPECT_EQ(triples_of(c), triples_of(filtered));
}

TEST(KCoreTest, KOneIsVacuous) {
  const auto c = corpus_from("u1,a,1\nu1,b,2\nu2,c,3\n");
  const auto filtered = k_core_filter(c, 1);
  EXPECT_EQ(triples_of(c), triples_of(filtered));
}

TEST(KCoreTest, MatchesIterativeDeletionOracle) {
  // 4 users; one rare item x; cascading removals expected.
  const std::string text =
      "u1,a,1\nu1,b,1\nu1,a,2\nu1,b,2\nu1,x,3\n"
      "u2,a,1\nu2,b,1\nu2,a,2\nu2,c,2\nu2,c,3\n"
      "u3,a,1\nu3,b,2\nu3,c,3\n"
      "u4,c,1\nu4,x,1\nu4,a,2\n";
  const auto c = corpus_from(text);
  const auto expected = kcore_oracle(triples_of(c), 3);
  const auto filtered = k_core_filter(c, 3);
  EXPECT_EQ(triples_of(filtered), expected);
}

TEST(KCoreTest, RescanConfirmsDegrees) {
  // Property: after filtering, every user and item has >= k interactions.
  const std::string text =
      "u1,a,1\nu1,b,2\nu1,a,3\nu1,c,4\nu1,a,5\n"
      "u2,a,1\nu2,b,2\nu2,b,3\nu2,a,4\n"
      "u3,c,1\nu3,a,2\nu3,b,3\nu3,b,4\n"
      "u4,d,1\nu4,d,2\nu4,a,3\n";
  const auto filtered = k_core_filter(corpus_from(text), 3);
  std::map<int, int> user_count, item_count;
  for (int u = 0; u < filtered.n_users(); ++u) {
    for (const auto& b : filtered.sequences[static_cast<size_t>(u)]) {
      for (int i : b.items) {
        ++user_count[u];
        ++item_count[i];
      }
    }
  }
  for (const auto& [u, n] : user_count) EXPECT_GE(n, 3) << "user " << u;
  for (const auto& [i, n] : item_count) EXPECT_GE(n, 3) << "item " << i;
  // basket indices re-numbered contiguously
  for (const auto& seq : filtered.sequences) {
    for (size_t m = 0; m < seq.size(); ++m) {
      EXPECT_EQ(seq[m].index_m, static_cast<int>(m) + 1);
    }
  }
}

TEST(KCoreTest, EmptyFixedPointRejected) {
  const auto c = corpus_from("u1,a,1\nu2,b,2\n");
  EXPECT_THROW(k_core_filter(c, 5), input_error);
}

TEST(SplitTest, MinimalThreeBasketUser) {
  const auto c = corpus_from("u1,a,1\nu1,b,2\nu1,c,3\n");
  const auto split = split_leave_one_out(c);
  ASSERT_EQ(split.train.n_users(), 1);
  ASSERT_EQ(split.train.sequences[0].size(), 1u);
  EXPECT_EQ(split.train.sequences[0][0].items, (std::vector<int>{0}));
  EXPECT_EQ(split.valid_target[0].items, (std::vector<int>{1}));
  EXPECT_EQ(split.test_target[0].items, (std::vector<int>{2}));
}

TEST(SplitTest, TwoBasketUserExcluded) {
  const auto c = corpus_from("u1,a,1\nu1,b,2\nu1,c,3\nu2,a,1\nu2,b,2\n");
  const auto split = split_leave_one_out(c);
  EXPECT_EQ(split.train.n_users(), 1);
  EXPECT_EQ(split.train.user_tokens[0], "u1");
}

TEST(SplitTest, NoSurvivorRejected) {
  const auto c = corpus_from("u1,a,1\nu1,b,2\n");
  EXPECT_THROW(split_leave_one_out(c), input_error);
}

TEST(SplitTest, TenUserFixtureMatchesHandAssignment) {
  std::string text;
  for (int u = 0; u < 10; ++u) {
    const int baskets = 2 + u;  // users 0 has 2 baskets (dropped), others 3..11
    for (int m = 1; m <= baskets; ++m) {
      text += "u" + std::to_string(u) + ",i" + std::to_string(m) + "," +
              std::to_string(m) + "\n";
    }
  }
  const auto c = corpus_from(text);
  const auto split = split_leave_one_out(c);
  ASSERT_EQ(split.train.n_users(), 9);
  for (int s = 0; s < 9; ++s) {
    const int original_baskets = 3 + s;
    EXPECT_EQ(split.train.sequences[static_cast<size_t>(s)].size(),
              static_cast<size_t>(original_baskets - 2));
    // targets carry their original positions
    EXPECT_EQ(split.valid_target[static_cast<size_t>(s)].index_m,
              original_baskets - 1);
    EXPECT_EQ(split.test_target[static_cast<size_t>(s)].index_m,
              original_baskets);
  }
}

// Split partition property: train + valid + test reassemble the original
// sequence, disjoint and order-preserving.
TEST(SplitTest, PartitionReassemblesOriginal) {
  const std::string text =
      "u1,a,1\nu1,b,2\nu1,c,3\nu1,d,4\nu1,e,5\n"
      "u2,a,3\nu2,b,6\nu2,c,9\nu2,d,12\n";
  const auto c = corpus_from(text);
  const auto split = split_leave_one_out(c);
  for (int u = 0; u < split.train.n_users(); ++u) {
    const std::string& tok = split.train.user_tokens[static_cast<size_t>(u)];
    const auto& original = c.sequences[static_cast<size_t>(c.user_ids.at(tok))];
    std::vector<std::int64_t> reassembled;
    for (const auto& b : split.train.sequences[static_cast<size_t>(u)]) {
      reassembled.push_back(b.timestamp);
    }
    reassembled.push_back(split.valid_target[static_cast<size_t>(u)].timestamp);
    reassembled.push_back(split.test_target[static_cast<size_t>(u)].timestamp);
    ASSERT_EQ(reassembled.size(), original.size());
    for (size_t m = 0; m < original.size(); ++m) {
      EXPECT_EQ(reassembled[m], original[m].timestamp);
    }
  }
}

TEST(CsvRoundTrip, ReingestionIsIdentical) {
  const auto c = corpus_from("u1,a,5\nu1,b,5\nu2,b,1\nu1,a,9\nu2,c,7\n");
  const auto again = corpus_from(to_csv(c));
  EXPECT_EQ(triples_of(c), triples_of(again));
  EXPECT_EQ(to_csv(c), to_csv(again));
}
