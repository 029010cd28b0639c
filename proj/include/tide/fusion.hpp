#pragma once

#include "tide/diffcore.hpp"

namespace tide {

/// Exploration intent conditioned on the habit state:
/// z_expl = tanh(W_expl·z_habit + b_expl).
inline VarId explore_project(Tape& t, VarId z_habit, VarId w_expl,
                             VarId b_expl) {
  return t.tanh(t.add(t.matvec(w_expl, z_habit), b_expl));
}

/// Gating context s = tanh(W_f·[z_habit ⊕ z_expl] + b_f).
inline VarId gate_context(Tape& t, VarId z_habit, VarId z_expl, VarId w_fuse,
                          VarId b_fuse) {
  return t.tanh(
      t.add(t.matvec(w_fuse, t.concat(z_habit, z_expl)), b_fuse));
}

/// Per-item gate α_i = sigmoid(s_gateᵀ·v_i) against the static embeddings.
inline VarId item_gate(Tape& t, VarId s_gate, VarId item_embed) {
  return t.sigmoid(t.matvec(item_embed, s_gate));
}

struct PredictionVars {
  VarId y_habit = -1;
  VarId y_expl = -1;
  VarId alpha = -1;
  VarId y_final = -1;
};

/// Expert distributions and their item-wise blend:
///   y_habit = softmax(W_out·z_habit)
///   y_expl  = softmax(G·z_expl)
///   y_final = α ⊙ y_habit + (1-α) ⊙ y_expl
/// y_final components stay in (0,1) but the vector is not renormalized.
inline PredictionVars predict(Tape& t, VarId z_habit, VarId z_expl,
                              VarId alpha, VarId graph_embed, VarId w_out) {
  PredictionVars p;
  p.alpha = alpha;
  p.y_habit = t.softmax(t.matvec(w_out, z_habit));
  p.y_expl = t.softmax(t.matvec(graph_embed, z_expl));
  const VarId one_minus_alpha = t.offset(t.scale(alpha, -1.0), 1.0);
  p.y_final = t.add(t.mul(alpha, p.y_habit),
                    t.mul(one_minus_alpha, p.y_expl));
  return p;
}

}  // namespace tide
