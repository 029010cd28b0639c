#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tide/common.hpp"

namespace tide {

/// One transaction: the set of items bought at a shared timestamp.
struct Basket {
  int index_m = 0;  // 1-based position within the user's sequence
  std::int64_t timestamp = 0;
  std::vector<int> items;  // dense item ids, sorted ascending, non-empty
};

/// Users' chronologically ordered basket sequences plus the raw-token <->
/// dense-id maps. Immutable after construction; statistics are read-only.
struct BasketCorpus {
  std::vector<std::vector<Basket>> sequences;  // indexed by dense user id
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  std::unordered_map<std::string, int> user_ids;
  std::unordered_map<std::string, int> item_ids;

  int n_users() const { return static_cast<int>(sequences.size()); }
  int n_items() const { return static_cast<int>(item_tokens.size()); }

  std::int64_t n_baskets() const {
    std::int64_t n = 0;
    for (const auto& seq : sequences) n += static_cast<std::int64_t>(seq.size());
    return n;
  }

  std::int64_t n_interactions() const {
    std::int64_t n = 0;
    for (const auto& seq : sequences) {
      for (const auto& b : seq) n += static_cast<std::int64_t>(b.items.size());
    }
    return n;
  }
};

/// Leave-one-out split: per surviving user (>= 3 baskets) the last basket is
/// the test target, the penultimate the validation target, the rest train.
/// The item vocabulary is shared with the full filtered corpus, so targets
/// are always in-vocabulary.
struct SplitCorpus {
  BasketCorpus train;               // baskets 1..k-2 per surviving user
  std::vector<Basket> valid_target;  // aligned with train user ids
  std::vector<Basket> test_target;
};

namespace detail {

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

/// Parses `user_id,item_id,timestamp` lines into basket sequences.
/// Interactions sharing (user, timestamp) form one basket. Exact duplicate
/// triples collapse to one. Dense ids follow first appearance in the stream.
inline BasketCorpus ingest(std::istream& in) {
  BasketCorpus corpus;
  // per user: timestamp -> item set
  std::vector<std::map<std::int64_t, std::set<int>>> grouped;
  std::unordered_set<std::string> seen_triples;

  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (first_data_line && line == "user_id,item_id,timestamp") {
      first_data_line = false;
      continue;
    }
    first_data_line = false;

    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos) {
      throw input_error("line " + std::to_string(line_no) +
                        ": expected user_id,item_id,timestamp");
    }
    const std::string user = line.substr(0, c1);
    const std::string item = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string ts_str = line.substr(c2 + 1);
    if (user.empty() || item.empty()) {
      throw input_error("line " + std::to_string(line_no) +
                        ": empty user or item token");
    }
    std::int64_t ts = 0;
    const auto res =
        std::from_chars(ts_str.data(), ts_str.data() + ts_str.size(), ts);
    if (res.ec != std::errc{} || res.ptr != ts_str.data() + ts_str.size()) {
      throw input_error("line " + std::to_string(line_no) +
                        ": unparseable timestamp '" + ts_str + "'");
    }
    if (ts < 0) {
      throw input_error("line " + std::to_string(line_no) +
                        ": negative timestamp");
    }

    if (!seen_triples.insert(user + '\x1f' + item + '\x1f' + ts_str).second) {
      continue;  // exact duplicate
    }
    any = true;

    auto [uit, u_new] =
        corpus.user_ids.try_emplace(user, corpus.n_users());
    if (u_new) {
      corpus.user_tokens.push_back(user);
      corpus.sequences.emplace_back();
      grouped.emplace_back();
    }
    auto [iit, i_new] =
        corpus.item_ids.try_emplace(item, corpus.n_items());
    if (i_new) corpus.item_tokens.push_back(item);

    grouped[static_cast<size_t>(uit->second)][ts].insert(iit->second);
  }
  if (!any) throw input_error("empty corpus: no interactions ingested");

  for (int u = 0; u < corpus.n_users(); ++u) {
    auto& seq = corpus.sequences[static_cast<size_t>(u)];
    int m = 0;
    for (const auto& [ts, items] : grouped[static_cast<size_t>(u)]) {
      Basket b;
      b.index_m = ++m;
      b.timestamp = ts;
      b.items.assign(items.begin(), items.end());
      seq.push_back(std::move(b));
    }
  }
  return corpus;
}

namespace detail {

// Rebuilds a corpus from surviving (user, baskets-of-old-item-ids) pairs,
// compacting both vocabularies while preserving original id order.
inline BasketCorpus rebuild(const BasketCorpus& src,
                            const std::vector<int>& users,
                            const std::vector<std::vector<Basket>>& baskets) {
  BasketCorpus out;
  std::vector<int> item_map(static_cast<size_t>(src.n_items()), -1);
  std::vector<bool> item_used(static_cast<size_t>(src.n_items()), false);
  for (const auto& seq : baskets) {
    for (const auto& b : seq) {
      for (int i : b.items) item_used[static_cast<size_t>(i)] = true;
    }
  }
  for (int i = 0; i < src.n_items(); ++i) {
    if (item_used[static_cast<size_t>(i)]) {
      item_map[static_cast<size_t>(i)] = out.n_items();
      out.item_tokens.push_back(src.item_tokens[static_cast<size_t>(i)]);
      out.item_ids[src.item_tokens[static_cast<size_t>(i)]] =
          out.n_items() - 1;
    }
  }
  for (size_t k = 0; k < users.size(); ++k) {
    const std::string& tok =
        src.user_tokens[static_cast<size_t>(users[k])];
    out.user_ids[tok] = static_cast<int>(k);
    out.user_tokens.push_back(tok);
    std::vector<Basket> seq = baskets[k];
    int m = 0;
    for (auto& b : seq) {
      b.index_m = ++m;
      for (int& i : b.items) i = item_map[static_cast<size_t>(i)];
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace detail

/// Iteratively removes items and users with fewer than k interactions until
/// a fixed point, then rebuilds vocabularies and basket indices.
inline BasketCorpus k_core_filter(const BasketCorpus& corpus, int k = 5) {
  if (corpus.n_users() == 0) throw input_error("k_core_filter: empty corpus");

  std::vector<std::vector<Basket>> seqs = corpus.sequences;
  std::vector<bool> user_alive(static_cast<size_t>(corpus.n_users()), true);

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::int64_t> item_count(static_cast<size_t>(corpus.n_items()), 0);
    for (size_t u = 0; u < seqs.size(); ++u) {
      if (!user_alive[u]) continue;
      for (const auto& b : seqs[u]) {
        for (int i : b.items) ++item_count[static_cast<size_t>(i)];
      }
    }
    std::vector<bool> item_alive(static_cast<size_t>(corpus.n_items()));
    for (int i = 0; i < corpus.n_items(); ++i) {
      item_alive[static_cast<size_t>(i)] = item_count[static_cast<size_t>(i)] >= k;
      if (item_count[static_cast<size_t>(i)] > 0 &&
          !item_alive[static_cast<size_t>(i)]) {
        changed = true;
      }
    }
    for (size_t u = 0; u < seqs.size(); ++u) {
      if (!user_alive[u]) continue;
      std::int64_t user_count = 0;
      std::vector<Basket> kept;
      for (auto& b : seqs[u]) {
        std::vector<int> items;
        for (int i : b.items) {
          if (item_alive[static_cast<size_t>(i)]) items.push_back(i);
        }
        if (!items.empty()) {
          user_count += static_cast<std::int64_t>(items.size());
          Basket nb = b;
          nb.items = std::move(items);
          kept.push_back(std::move(nb));
        }
      }
      seqs[u] = std::move(kept);
      if (user_count < k) {
        if (user_count > 0) changed = true;
        user_alive[u] = false;
        seqs[u].clear();
      }
    }
  }

  std::vector<int> users;
  std::vector<std::vector<Basket>> baskets;
  for (int u = 0; u < corpus.n_users(); ++u) {
    if (user_alive[static_cast<size_t>(u)] &&
        !seqs[static_cast<size_t>(u)].empty()) {
      users.push_back(u);
      baskets.push_back(std::move(seqs[static_cast<size_t>(u)]));
    }
  }
  if (users.empty()) {
    throw input_error("k_core_filter: corpus empty after " +
                      std::to_string(k) + "-core filtering");
  }
  return detail::rebuild(corpus, users, baskets);
}

/// Reserves the last basket per user for test and the penultimate for
/// validation; users with fewer than 3 baskets are dropped.
inline SplitCorpus split_leave_one_out(const BasketCorpus& corpus) {
  SplitCorpus split;
  split.train.item_tokens = corpus.item_tokens;
  split.train.item_ids = corpus.item_ids;

  for (int u = 0; u < corpus.n_users(); ++u) {
    const auto& seq = corpus.sequences[static_cast<size_t>(u)];
    if (seq.size() < 3) continue;
    const std::string& tok = corpus.user_tokens[static_cast<size_t>(u)];
    split.train.user_ids[tok] = split.train.n_users();
    split.train.user_tokens.push_back(tok);
    split.train.sequences.emplace_back(seq.begin(), seq.end() - 2);
    split.valid_target.push_back(seq[seq.size() - 2]);
    split.test_target.push_back(seq.back());
  }
  if (split.train.n_users() == 0) {
    throw input_error("split_leave_one_out: no user has >= 3 baskets");
  }
  return split;
}

/// Canonical text re-emission in the ingest format. Lines are ordered by
/// dense user id, then basket order, then item id, so re-ingesting yields an
/// identical corpus.
inline std::string to_csv(const BasketCorpus& corpus, bool header = true) {
  std::string out;
  if (header) out += "user_id,item_id,timestamp\n";
  for (int u = 0; u < corpus.n_users(); ++u) {
    for (const auto& b : corpus.sequences[static_cast<size_t>(u)]) {
      for (int i : b.items) {
        out += corpus.user_tokens[static_cast<size_t>(u)];
        out += ',';
        out += corpus.item_tokens[static_cast<size_t>(i)];
        out += ',';
        out += std::to_string(b.timestamp);
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace tide
