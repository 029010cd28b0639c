#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tide/diffcore.hpp"
#include "tide/fusion.hpp"
#include "tide/habit.hpp"
#include "tide/pattern_graph.hpp"

namespace tide {

struct AblationFlags {
  bool no_time = false;   // v' = v and δ = 1
  bool no_graph = false;  // G := V
  bool no_cl = false;     // μ := 0
  bool pos_variant = false;  // periodic encoding replaced by table lookup

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (no_time) out.push_back("no_time");
    if (no_graph) out.push_back("no_graph");
    if (no_cl) out.push_back("no_cl");
    if (pos_variant) out.push_back("pos_variant");
    return out;
  }
};

struct ModelConfig {
  int d = 32;  // embedding size, even
  int n_items = 0;
  int freq_buckets = 20;     // purchase-count embedding rows
  int pos_table_rows = 64;   // position-table rows for the lookup variant
  double epsilon = 0.1;      // base intensity, fixed (non-trainable)
  std::uint64_t seed = 1;
  AblationFlags ablation;
};

/// The full dual-expert model: owns every trainable tensor and builds the
/// forward computation on a tape. The pattern graph is frozen and must
/// outlive the model.
class TideModel {
 public:
  TideModel(ModelConfig cfg, const PatternGraph* graph)
      : cfg_(cfg), graph_(graph), store_(cfg.seed) {
    if (cfg_.d <= 0 || cfg_.d % 2 != 0) {
      throw std::invalid_argument("embedding size d must be positive and even");
    }
    if (cfg_.n_items <= 0) {
      throw std::invalid_argument("model needs a positive item count");
    }
    if (!cfg_.ablation.no_graph && graph_ == nullptr) {
      throw std::invalid_argument("pattern graph required unless ablated");
    }
    if (graph_ != nullptr && graph_->n_items != cfg_.n_items) {
      throw std::invalid_argument("pattern graph item count mismatch");
    }

    const int d = cfg_.d;
    store_.add_normal("item_embed", cfg_.n_items, d, 0.1);

    // Frequencies log-spaced from the two-step Nyquist period down to a
    // period of ~640 steps, so both short replenishment cycles and long
    // gaps are resolvable at initialization. Phases zero.
    const int half = d / 2;
    Tensor freq(half, 1);
    const double pi = 3.14159265358979323846;
    const double top = pi;                 // period 2
    const double bottom = 2.0 * pi / 640.0;  // period 640
    for (int j = 0; j < half; ++j) {
      const double frac = half > 1 ? static_cast<double>(j) / (half - 1) : 0.0;
      freq[j] = top * std::pow(bottom / top, frac);
    }
    store_.add_values("fourier_freq", std::move(freq));
    store_.add_constant("fourier_phase", half, 1, 0.0);
    store_.add_constant("time_scale", 1, 1, 0.1);
    store_.add_constant("freq_scale", 1, 1, 0.1);
    store_.add_normal("freq_embed", cfg_.freq_buckets, d, 0.1);
    // sigmoid(logit(0.1)) = 0.1: decay rates start at the base intensity
    store_.add_constant("decay_logit", cfg_.n_items, 1,
                        std::log(0.1 / 0.9));
    store_.add_normal("attn_w", d, d, 0.1);
    store_.add_normal("attn_v", d, 1, 0.1);
    store_.add_normal("expl_w", d, d, 0.1);
    store_.add_constant("expl_b", d, 1, 0.0);
    store_.add_normal("fuse_w", d, 2 * d, 0.1);
    store_.add_constant("fuse_b", d, 1, 0.0);
    store_.add_normal("out_w", cfg_.n_items, d, 0.1);
    if (cfg_.ablation.pos_variant) {
      store_.add_normal("pos_embed", cfg_.pos_table_rows, d, 0.1);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const PatternGraph* graph() const { return graph_; }

  /// Parameter leaves shared by every user in one tape.
  struct PassVars {
    VarId item_embed, graph_embed, out_w;
    VarId attn_w, attn_v, expl_w, expl_b, fuse_w, fuse_b;
    VarId fourier_freq, fourier_phase, time_scale, freq_scale;
    VarId freq_embed, decay_logit;
    VarId pos_embed = -1;
  };

  PassVars begin_pass(Tape& t) {
    PassVars v{};
    v.item_embed = t.leaf(store_.at("item_embed"));
    v.out_w = t.leaf(store_.at("out_w"));
    v.attn_w = t.leaf(store_.at("attn_w"));
    v.attn_v = t.leaf(store_.at("attn_v"));
    v.expl_w = t.leaf(store_.at("expl_w"));
    v.expl_b = t.leaf(store_.at("expl_b"));
    v.fuse_w = t.leaf(store_.at("fuse_w"));
    v.fuse_b = t.leaf(store_.at("fuse_b"));
    v.fourier_freq = t.leaf(store_.at("fourier_freq"));
    v.fourier_phase = t.leaf(store_.at("fourier_phase"));
    v.time_scale = t.leaf(store_.at("time_scale"));
    v.freq_scale = t.leaf(store_.at("freq_scale"));
    v.freq_embed = t.leaf(store_.at("freq_embed"));
    v.decay_logit = t.leaf(store_.at("decay_logit"));
    if (cfg_.ablation.pos_variant) v.pos_embed = t.leaf(store_.at("pos_embed"));

    if (cfg_.ablation.no_graph) {
      v.graph_embed = v.item_embed;
    } else {
      const VarId pattern_embeds =
          t.propagate(graph_->item_to_pattern, v.item_embed);
      v.graph_embed = t.add(
          v.item_embed, t.propagate(graph_->pattern_to_item, pattern_embeds));
    }
    return v;
  }

  struct ForwardVars {
    VarId z_habit = -1;
    VarId z_expl = -1;
    VarId alpha = -1;
    VarId y_habit = -1;
    VarId y_expl = -1;
    VarId y_final = -1;
  };

  /// Runs the dual-expert forward for one user. `history` holds the input
  /// baskets in chronological order (positions 1..k); the prediction target
  /// sits at position k+1, so an occurrence in basket m has Δt = k+1-m.
  ForwardVars forward_user(Tape& t, const PassVars& pv,
                           const std::vector<std::vector<int>>& history) const {
    if (history.empty()) {
      throw std::invalid_argument("forward_user: empty history");
    }
    const int k = static_cast<int>(history.size());

    std::unordered_map<int, int> freq_count;
    for (const auto& basket : history) {
      for (int item : basket) ++freq_count[item];
    }

    std::vector<std::vector<VarId>> states;
    states.reserve(history.size());
    for (int m = 1; m <= k; ++m) {
      const auto& basket = history[static_cast<size_t>(m - 1)];
      if (basket.empty()) {
        throw std::invalid_argument("forward_user: empty basket in history");
      }
      const int delta_t = k + 1 - m;
      std::vector<VarId> basket_states;
      basket_states.reserve(basket.size());
      for (int item : basket) {
        if (item < 0 || item >= cfg_.n_items) {
          throw std::out_of_range("forward_user: item id " +
                                  std::to_string(item) + " out of vocab");
        }
        const VarId v = t.row(pv.item_embed, item);
        if (cfg_.ablation.no_time) {
          basket_states.push_back(v);
          continue;
        }
        const VarId periodic =
            cfg_.ablation.pos_variant
                ? position_encode_variant(t, pv.pos_embed, delta_t)
                : fourier_time_encode(t, pv.fourier_freq, pv.fourier_phase,
                                      delta_t);
        const int bucket = std::min(freq_count.at(item), cfg_.freq_buckets - 1);
        const VarId enriched =
            enrich_item(t, v, periodic, t.row(pv.freq_embed, bucket),
                        pv.time_scale, pv.freq_scale);
        const VarId delta = hawkes_decay(t, t.elem(pv.decay_logit, item),
                                         delta_t, cfg_.epsilon);
        basket_states.push_back(time_aware_state(t, enriched, delta));
      }
      states.push_back(std::move(basket_states));
    }

    ForwardVars out;
    out.z_habit = aggregate_habit(t, states, pv.attn_w, pv.attn_v);
    out.z_expl = explore_project(t, out.z_habit, pv.expl_w, pv.expl_b);
    const VarId s_gate =
        gate_context(t, out.z_habit, out.z_expl, pv.fuse_w, pv.fuse_b);
    out.alpha = item_gate(t, s_gate, pv.item_embed);
    const PredictionVars pred =
        predict(t, out.z_habit, out.z_expl, out.alpha, pv.graph_embed, pv.out_w);
    out.y_habit = pred.y_habit;
    out.y_expl = pred.y_expl;
    out.y_final = pred.y_final;
    return out;
  }

  /// Forward pass for scoring only; returns the fused item scores plus both
  /// intent vectors.
  struct Scores {
    std::vector<double> y_final;
    std::vector<double> z_habit;
    std::vector<double> z_expl;
  };

  Scores score_user(const std::vector<std::vector<int>>& history) {
    Tape t;
    const PassVars pv = begin_pass(t);
    const ForwardVars fv = forward_user(t, pv, history);
    Scores s;
    s.y_final = t.value(fv.y_final).data;
    s.z_habit = t.value(fv.z_habit).data;
    s.z_expl = t.value(fv.z_expl).data;
    return s;
  }

 private:
  ModelConfig cfg_;
  const PatternGraph* graph_;
  ParamStore store_;
};

}  // namespace tide
