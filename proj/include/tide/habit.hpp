#pragma once

#include <vector>

#include "tide/diffcore.hpp"

namespace tide {

/// Periodic interval encoding p = [sin(w·Δt + φ); cos(w·Δt + φ)].
/// `freq` and `phase` are d/2 vectors; the result has length d.
inline VarId fourier_time_encode(Tape& t, VarId freq, VarId phase,
                                 int delta_t) {
  const VarId angle = t.add(t.scale(freq, static_cast<double>(delta_t)), phase);
  return t.concat(t.sin(angle), t.cos(angle));
}

/// Table-lookup variant of the interval encoding: row min(Δt, rows-1) of a
/// static position table.
inline VarId position_encode_variant(Tape& t, VarId pos_table, int delta_t) {
  const int rows = t.value(pos_table).rows;
  const int r = delta_t >= rows ? rows - 1 : (delta_t < 0 ? 0 : delta_t);
  return t.row(pos_table, r);
}

/// v' = v + w_t·p + w_f·freq_row, with learnable scalars w_t and w_f.
inline VarId enrich_item(Tape& t, VarId item_vec, VarId periodic,
                         VarId freq_row, VarId time_scale, VarId freq_scale) {
  return t.add(item_vec, t.add(t.smul(time_scale, periodic),
                               t.smul(freq_scale, freq_row)));
}

/// Self-exciting decay δ = exp(-sigmoid(λ_logit)·Δt) + ε.
/// δ(0) = 1+ε and δ decreases toward ε as the interval grows.
inline VarId hawkes_decay(Tape& t, VarId lambda_logit, int delta_t,
                          double epsilon = 0.1) {
  const VarId lambda = t.sigmoid(lambda_logit);
  return t.offset(t.exp(t.scale(lambda, -static_cast<double>(delta_t))),
                  epsilon);
}

/// h = δ · v'
inline VarId time_aware_state(Tape& t, VarId v_prime, VarId delta) {
  return t.smul(delta, v_prime);
}

/// Additive attention over one basket's time-aware states:
/// β = softmax_i(v_attᵀ·tanh(W_att·h_i)).
inline VarId basket_attention(Tape& t, const std::vector<VarId>& states,
                              VarId attn_w, VarId attn_v) {
  if (states.empty()) {
    throw std::invalid_argument("basket_attention: empty basket");
  }
  VarId scores = -1;
  for (VarId h : states) {
    const VarId s = t.dot(attn_v, t.tanh(t.matvec(attn_w, h)));
    scores = scores < 0 ? s : t.concat(scores, s);
  }
  return t.softmax(scores);
}

/// Habit intent over the whole history: per basket b_m = Σ_i β_i·h_i, then
/// z_habit = tanh(Σ_m b_m).
inline VarId aggregate_habit(Tape& t,
                             const std::vector<std::vector<VarId>>& baskets,
                             VarId attn_w, VarId attn_v) {
  if (baskets.empty()) {
    throw std::invalid_argument("aggregate_habit: empty history");
  }
  VarId total = -1;
  for (const auto& states : baskets) {
    const VarId beta = basket_attention(t, states, attn_w, attn_v);
    VarId b_m = -1;
    for (size_t i = 0; i < states.size(); ++i) {
      const VarId weighted =
          t.smul(t.elem(beta, static_cast<int>(i)), states[i]);
      b_m = b_m < 0 ? weighted : t.add(b_m, weighted);
    }
    total = total < 0 ? b_m : t.add(total, b_m);
  }
  return t.tanh(total);
}

}  // namespace tide
