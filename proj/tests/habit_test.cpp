#include "tide/habit.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tide;

namespace {

VarId const_column(Tape& t, std::vector<double> v) {
  return t.constant(Tensor::column(std::move(v)));
}

}  // namespace

TEST(FourierEncode, ZeroIntervalZeroPhase) {
  Tape t;
  const VarId freq = const_column(t, {0.3, 0.7, 1.1});
  const VarId phase = const_column(t, {0.0, 0.0, 0.0});
  const VarId p = fourier_time_encode(t, freq, phase, 0);
  const Tensor& pv = t.value(p);
  ASSERT_EQ(pv.rows, 6);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(pv[i], 0.0);
    EXPECT_DOUBLE_EQ(pv[3 + i], 1.0);
  }
}

TEST(FourierEncode, PiFrequencyUnitInterval) {
  Tape t;
  const VarId p = fourier_time_encode(t, const_column(t, {M_PI}),
                                      const_column(t, {0.0}), 1);
  EXPECT_NEAR(t.value(p)[0], 0.0, 1e-12);
  EXPECT_NEAR(t.value(p)[1], -1.0, 1e-12);
}

TEST(FourierEncode, MatchesScalarOracle) {
  // w=0.5, phi=0.2, dt=5 -> angle 2.7
  Tape t;
  const VarId p = fourier_time_encode(t, const_column(t, {0.5}),
                                      const_column(t, {0.2}), 5);
  EXPECT_NEAR(t.value(p)[0], std::sin(2.7), 1e-12);
  EXPECT_NEAR(t.value(p)[1], std::cos(2.7), 1e-12);
  EXPECT_NEAR(t.value(p)[0], 0.42738, 1e-5);
  EXPECT_NEAR(t.value(p)[1], -0.90407, 1e-5);
}

TEST(FourierEncode, ComponentsBounded) {
  Tape t;
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> w(4), phi(4);
    for (auto& x : w) x = 3.0 * rng.normal();
    for (auto& x : phi) x = 3.0 * rng.normal();
    const VarId p = fourier_time_encode(t, const_column(t, w),
                                        const_column(t, phi),
                                        rng.uniform_int(100));
    for (int i = 0; i < 8; ++i) {
      EXPECT_GE(t.value(p)[i], -1.0);
      EXPECT_LE(t.value(p)[i], 1.0);
    }
  }
}

// Exact periodicity when 2*pi/w is an integer period.
TEST(FourierEncode, PeriodicityForIntegerPeriod) {
  const double period = 8.0;
  const double w = 2.0 * M_PI / period;
  Tape t;
  for (int dt = 0; dt < 12; ++dt) {
    const VarId p1 = fourier_time_encode(t, const_column(t, {w}),
                                         const_column(t, {0.4}), dt);
    const VarId p2 = fourier_time_encode(t, const_column(t, {w}),
                                         const_column(t, {0.4}),
                                         dt + static_cast<int>(period));
    EXPECT_NEAR(t.value(p1)[0], t.value(p2)[0], 1e-12);
    EXPECT_NEAR(t.value(p1)[1], t.value(p2)[1], 1e-12);
  }
}

TEST(PositionEncode, ClampsBeyondTable) {
  Tape t;
  Tensor table(4, 2);
  Rng rng(5);
  for (double& x : table.data) x = rng.normal();
  const VarId tab = t.constant(table);
  const VarId far = position_encode_variant(t, tab, 99);
  EXPECT_DOUBLE_EQ(t.value(far)[0], table(3, 0));
  EXPECT_DOUBLE_EQ(t.value(far)[1], table(3, 1));
  const VarId row3 = position_encode_variant(t, tab, 3);
  EXPECT_DOUBLE_EQ(t.value(row3)[0], table(3, 0));
  const VarId row1 = position_encode_variant(t, tab, 1);
  EXPECT_DOUBLE_EQ(t.value(row1)[1], table(1, 1));
}

TEST(PositionEncode, ZeroTableGivesZero) {
  Tape t;
  const VarId tab = t.constant(Tensor(4, 3));
  const VarId p = position_encode_variant(t, tab, 2);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(t.value(p)[i], 0.0);
}

TEST(EnrichItem, ZeroScalesIsIdentity) {
  Tape t;
  const VarId v = const_column(t, {1.0, -2.0, 3.0, 0.5});
  const VarId p = const_column(t, {9.0, 9.0, 9.0, 9.0});
  const VarId f = const_column(t, {7.0, 7.0, 7.0, 7.0});
  const VarId zero = t.constant_scalar(0.0);
  const VarId out = enrich_item(t, v, p, f, zero, zero);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(t.value(out)[i], t.value(v)[i]);
  }
}

TEST(EnrichItem, PurePeriodicPassThrough) {
  Tape t;
  const VarId v = const_column(t, {0.0, 0.0});
  const VarId p = const_column(t, {0.25, -0.75});
  const VarId f = const_column(t, {5.0, 5.0});
  const VarId out = enrich_item(t, v, p, f, t.constant_scalar(1.0),
                                t.constant_scalar(0.0));
  EXPECT_DOUBLE_EQ(t.value(out)[0], 0.25);
  EXPECT_DOUBLE_EQ(t.value(out)[1], -0.75);
}

TEST(EnrichItem, MatchesDirectArithmetic) {
  Rng rng(31);
  std::vector<double> v(4), p(4), f(4);
  for (auto& x : v) x = rng.normal();
  for (auto& x : p) x = rng.normal();
  for (auto& x : f) x = rng.normal();
  const double wt = 0.37, wf = -0.81;
  Tape t;
  const VarId out =
      enrich_item(t, const_column(t, v), const_column(t, p),
                  const_column(t, f), t.constant_scalar(wt),
                  t.constant_scalar(wf));
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(t.value(out)[i],
                v[static_cast<size_t>(i)] + wt * p[static_cast<size_t>(i)] +
                    wf * f[static_cast<size_t>(i)],
                1e-12);
  }
}

TEST(HawkesDecay, ZeroIntervalIsOnePlusEpsilon) {
  Tape t;
  const VarId d = hawkes_decay(t, t.constant_scalar(1.234), 0, 0.1);
  EXPECT_DOUBLE_EQ(t.scalar(d), 1.1);
}

TEST(HawkesDecay, MatchesScalarOracle) {
  // logit 0 -> lambda 0.5; dt=2 -> exp(-1) + 0.1
  Tape t;
  const VarId d = hawkes_decay(t, t.constant_scalar(0.0), 2, 0.1);
  EXPECT_NEAR(t.scalar(d), std::exp(-1.0) + 0.1, 1e-12);
  EXPECT_NEAR(t.scalar(d), 0.46788, 1e-5);
}

TEST(HawkesDecay, LimitReachesEpsilon) {
  Tape t;
  // sigmoid(logit(0.1)) = 0.1 exactly enough; any rate >= 0.1 decays out
  const VarId d =
      hawkes_decay(t, t.constant_scalar(std::log(0.1 / 0.9)), 1000000, 0.1);
  EXPECT_LE(t.scalar(d) - 0.1, 1e-12);
}

TEST(HawkesDecay, StrictlyDecreasingInInterval) {
  Tape t;
  double prev = 0.0;
  for (int dt = 0; dt <= 40; ++dt) {
    const VarId d = hawkes_decay(t, t.constant_scalar(-0.7), dt, 0.1);
    const double val = t.scalar(d);
    EXPECT_GT(val, 0.1);
    EXPECT_LE(val, 1.1);
    if (dt > 0) EXPECT_LT(val, prev);
    prev = val;
  }
}

TEST(TimeAwareState, ScalarModulation) {
  Tape t;
  const VarId h = time_aware_state(t, const_column(t, {2.0, -4.0}),
                                   t.constant_scalar(0.5));
  EXPECT_DOUBLE_EQ(t.value(h)[0], 1.0);
  EXPECT_DOUBLE_EQ(t.value(h)[1], -2.0);
  const VarId id = time_aware_state(t, const_column(t, {3.0, 7.0}),
                                    t.constant_scalar(1.0));
  EXPECT_DOUBLE_EQ(t.value(id)[0], 3.0);
  EXPECT_DOUBLE_EQ(t.value(id)[1], 7.0);
}

TEST(BasketAttention, SingleItemGetsFullWeight) {
  Tape t;
  Tensor w(3, 3);
  w(0, 0) = w(1, 1) = w(2, 2) = 0.5;
  const VarId attn_w = t.constant(w);
  const VarId attn_v = const_column(t, {0.2, -0.4, 0.9});
  const VarId beta =
      basket_attention(t, {const_column(t, {1.0, 2.0, 3.0})}, attn_w, attn_v);
  ASSERT_EQ(t.value(beta).rows, 1);
  EXPECT_DOUBLE_EQ(t.value(beta)[0], 1.0);
}

TEST(BasketAttention, IdenticalStatesShareWeight) {
  Tape t;
  Tensor w(2, 2);
  w(0, 0) = 0.3;
  w(1, 1) = -0.6;
  const VarId attn_w = t.constant(w);
  const VarId attn_v = const_column(t, {1.0, 0.5});
  const VarId h1 = const_column(t, {0.4, -0.2});
  const VarId h2 = const_column(t, {0.4, -0.2});
  const VarId beta = basket_attention(t, {h1, h2}, attn_w, attn_v);
  EXPECT_NEAR(t.value(beta)[0], 0.5, 1e-15);
  EXPECT_NEAR(t.value(beta)[1], 0.5, 1e-15);
}

TEST(BasketAttention, EmptyBasketRejected) {
  Tape t;
  const VarId attn_w = t.constant(Tensor(2, 2));
  const VarId attn_v = const_column(t, {1.0, 1.0});
  EXPECT_THROW(basket_attention(t, {}, attn_w, attn_v),
               std::invalid_argument);
}

// Weights match a softmax over manually computed scores, and shifting all
// scores by a constant leaves them unchanged.
TEST(BasketAttention, MatchesManualScoresAndShiftInvariance) {
  Rng rng(41);
  Tensor w(3, 3), v_att(3, 1);
  for (double& x : w.data) x = rng.normal();
  for (double& x : v_att.data) x = rng.normal();
  std::vector<std::vector<double>> states{{0.3, -0.1, 0.8},
                                          {-0.5, 0.2, 0.1},
                                          {1.2, 0.7, -0.9}};
  Tape t;
  const VarId attn_w = t.constant(w);
  const VarId attn_v = t.constant(v_att);
  std::vector<VarId> hs;
  for (const auto& s : states) hs.push_back(const_column(t, s));
  const VarId beta = basket_attention(t, hs, attn_w, attn_v);

  std::vector<double> scores;
  for (const auto& s : states) {
    double score = 0.0;
    for (int i = 0; i < 3; ++i) {
      double wh = 0.0;
      for (int j = 0; j < 3; ++j) wh += w(i, j) * s[static_cast<size_t>(j)];
      score += v_att[i] * std::tanh(wh);
    }
    scores.push_back(score);
  }
  const auto softmax_oracle = [](std::vector<double> s) {
    double mx = s[0];
    for (double x : s) mx = std::max(mx, x);
    double sum = 0.0;
    for (double& x : s) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : s) x /= sum;
    return s;
  };
  const auto expected = softmax_oracle(scores);
  auto shifted = scores;
  for (double& x : shifted) x += 17.3;
  const auto expected_shifted = softmax_oracle(shifted);
  double total = 0.0;
  for (size_t i = 0; i < states.size(); ++i) {
    EXPECT_NEAR(t.value(beta)[static_cast<int>(i)], expected[i], 1e-12);
    EXPECT_NEAR(expected[i], expected_shifted[i], 1e-12);
    EXPECT_GT(t.value(beta)[static_cast<int>(i)], 0.0);
    total += t.value(beta)[static_cast<int>(i)];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(AggregateHabit, SingleItemSingleBasket) {
  Tape t;
  Tensor w(2, 2);
  w(0, 0) = w(1, 1) = 1.0;
  const VarId attn_w = t.constant(w);
  const VarId attn_v = const_column(t, {0.5, 0.5});
  const VarId h = const_column(t, {0.3, -1.2});
  const VarId z = aggregate_habit(t, {{h}}, attn_w, attn_v);
  EXPECT_NEAR(t.value(z)[0], std::tanh(0.3), 1e-15);
  EXPECT_NEAR(t.value(z)[1], std::tanh(-1.2), 1e-15);
}

TEST(AggregateHabit, ItemOrderInsideBasketIrrelevant) {
  Rng rng(43);
  Tensor w(3, 3), v_att(3, 1);
  for (double& x : w.data) x = rng.normal();
  for (double& x : v_att.data) x = rng.normal();
  std::vector<std::vector<double>> items{{0.2, 0.4, -0.6},
                                         {-1.0, 0.3, 0.9},
                                         {0.5, -0.5, 0.1}};
  const auto run = [&](const std::vector<int>& order) {
    Tape t;
    const VarId attn_w = t.constant(w);
    const VarId attn_v = t.constant(v_att);
    std::vector<VarId> hs;
    for (int i : order) hs.push_back(const_column(t, items[static_cast<size_t>(i)]));
    const VarId z = aggregate_habit(t, {hs}, attn_w, attn_v);
    return t.value(z).data;
  };
  const auto z1 = run({0, 1, 2});
  const auto z2 = run({2, 0, 1});
  for (size_t i = 0; i < z1.size(); ++i) EXPECT_NEAR(z1[i], z2[i], 1e-12);
}

// Two-basket fixture checked against a step-by-step scalar computation of
// attention, basket sums, and the final tanh.
TEST(AggregateHabit, TwoBasketFixtureMatchesArithmeticOracle) {
  Rng rng(47);
  const int d = 4;
  Tensor w(d, d), v_att(d, 1);
  for (double& x : w.data) x = rng.normal();
  for (double& x : v_att.data) x = rng.normal();
  std::vector<std::vector<std::vector<double>>> baskets{
      {{0.1, -0.2, 0.3, 0.4}, {0.9, 0.8, -0.7, 0.6}},
      {{-0.3, 0.5, 0.2, -0.1}}};

  Tape t;
  const VarId attn_w = t.constant(w);
  const VarId attn_v = t.constant(v_att);
  std::vector<std::vector<VarId>> hs;
  for (const auto& basket : baskets) {
    std::vector<VarId> states;
    for (const auto& item : basket) states.push_back(const_column(t, item));
    hs.push_back(states);
  }
  const VarId z = aggregate_habit(t, hs, attn_w, attn_v);

  std::vector<double> total(static_cast<size_t>(d), 0.0);
  for (const auto& basket : baskets) {
    std::vector<double> scores;
    for (const auto& h : basket) {
      double score = 0.0;
      for (int i = 0; i < d; ++i) {
        double wh = 0.0;
        for (int j = 0; j < d; ++j) wh += w(i, j) * h[static_cast<size_t>(j)];
        score += v_att[i] * std::tanh(wh);
      }
      scores.push_back(score);
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    std::vector<double> beta;
    for (double s : scores) {
      beta.push_back(std::exp(s - mx));
      sum += beta.back();
    }
    for (double& b : beta) b /= sum;
    for (size_t i = 0; i < basket.size(); ++i) {
      for (int j = 0; j < d; ++j) {
        total[static_cast<size_t>(j)] += beta[i] * basket[i][static_cast<size_t>(j)];
      }
    }
  }
  for (int j = 0; j < d; ++j) {
    EXPECT_NEAR(t.value(z)[j], std::tanh(total[static_cast<size_t>(j)]), 1e-10);
    EXPECT_GT(t.value(z)[j], -1.0);
    EXPECT_LT(t.value(z)[j], 1.0);
  }
}

// Gradients through the full habit composition against central differences.
TEST(HabitGradients, CompositionPassesGradCheck) {
  ParamStore store(53);
  const int d = 4;
  store.add_normal("freq", d / 2, 1, 0.3);
  store.add_normal("phase", d / 2, 1, 0.3);
  store.add_normal("attn_w", d, d, 0.3);
  store.add_normal("attn_v", d, 1, 0.3);
  store.add_normal("item", d, 1, 0.3);
  store.add_normal("freq_row", d, 1, 0.3);
  store.add_constant("wt", 1, 1, 0.1);
  store.add_constant("wf", 1, 1, 0.1);
  store.add_constant("decay_logit", 1, 1, -2.0);

  const auto run = [&](bool with_grad) {
    Tape t;
    const VarId p = fourier_time_encode(t, t.leaf(store.at("freq")),
                                        t.leaf(store.at("phase")), 3);
    const VarId vp = enrich_item(t, t.leaf(store.at("item")), p,
                                 t.leaf(store.at("freq_row")),
                                 t.leaf(store.at("wt")), t.leaf(store.at("wf")));
    const VarId delta =
        hawkes_decay(t, t.leaf(store.at("decay_logit")), 3, 0.1);
    const VarId h = time_aware_state(t, vp, delta);
    const VarId z = aggregate_habit(t, {{h, t.leaf(store.at("item"))}},
                                    t.leaf(store.at("attn_w")),
                                    t.leaf(store.at("attn_v")));
    const VarId loss = t.sum(t.mul(z, z));
    if (with_grad) {
      const double lv = t.scalar(loss);
      store.zero_grads();
      t.backward(loss);
      return lv;
    }
    return t.scalar(loss);
  };
  const auto report = grad_check(store, run, 1e-5, 1e-5);
  for (const auto& e : report.tensors) {
    EXPECT_TRUE(e.pass) << e.name << " rel err " << e.max_rel_err;
  }
}
