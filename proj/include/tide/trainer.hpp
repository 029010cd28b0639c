#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tide/diffcore.hpp"
#include "tide/eval.hpp"
#include "tide/model.hpp"
#include "tide/pattern_graph.hpp"

namespace tide {

struct TrainConfig {
  int d = 32;
  int batch_size = 100;
  double learning_rate = 1e-2;
  double l2_gamma = 1e-4;
  double mu = 0.1;   // contrastive weight
  double tau = 0.1;  // contrastive temperature
  double epsilon_base = 0.1;
  int epochs = 100;
  std::uint64_t seed = 1;
  int min_support = 5;
  MiningMetric mining_metric = MiningMetric::kCount;
  int max_patterns = 50000;
  int freq_buckets = 20;
  int pos_table_rows = 64;
  AblationFlags ablation;
};

/// Cross-entropy over the target basket: L = -Σ_{i∈target} log(y_final_i).
inline VarId rec_loss(Tape& t, VarId y_final, const std::vector<int>& target) {
  if (target.empty()) throw std::invalid_argument("rec_loss: empty target");
  const int n = t.value(y_final).size();
  for (int i : target) {
    if (i < 0 || i >= n) {
      throw std::out_of_range("rec_loss: target item " + std::to_string(i) +
                              " out of vocab of size " + std::to_string(n));
    }
  }
  return t.scale(t.sum(t.log(t.gather(y_final, target))), -1.0);
}

/// In-batch InfoNCE over matched (habit, exploration) intent pairs:
/// L = -Σ_i log( exp(cos(zh_i, ze_i)/τ) / Σ_j exp(cos(zh_i, ze_j)/τ) ),
/// with the mini-batch rows acting as negatives.
inline VarId infonce_loss(Tape& t, const std::vector<VarId>& z_habit,
                          const std::vector<VarId>& z_expl, double tau) {
  if (z_habit.empty() || z_habit.size() != z_expl.size()) {
    throw std::invalid_argument("infonce_loss: mismatched batch");
  }
  if (tau <= 0.0) throw std::invalid_argument("infonce_loss: tau > 0");
  const int n = static_cast<int>(z_habit.size());
  VarId total = -1;
  for (int i = 0; i < n; ++i) {
    VarId sims = -1;
    for (int j = 0; j < n; ++j) {
      const VarId c = t.cosine(z_habit[static_cast<size_t>(i)],
                               z_expl[static_cast<size_t>(j)]);
      sims = sims < 0 ? c : t.concat(sims, c);
    }
    const VarId probs = t.softmax(t.scale(sims, 1.0 / tau));
    const VarId li = t.scale(t.log(t.elem(probs, i)), -1.0);
    total = total < 0 ? li : t.add(total, li);
  }
  return total;
}

/// L_total = rec + μ·cl + γ·Σ‖θ‖², with the squared-L2 term traced over
/// every registered tensor so regularization gradients flow on the tape.
inline VarId total_loss(Tape& t, VarId rec, VarId cl, double mu, double gamma,
                        ParamStore& store) {
  VarId total = rec;
  if (cl >= 0 && mu != 0.0) total = t.add(total, t.scale(cl, mu));
  if (gamma != 0.0) {
    VarId reg = -1;
    for (Param* p : store.entries()) {
      const VarId leaf = t.leaf(*p);
      const VarId sq = t.sum(t.mul(leaf, leaf));
      reg = reg < 0 ? sq : t.add(reg, sq);
    }
    total = t.add(total, t.scale(reg, gamma));
  }
  return total;
}

/// Adam with bias correction; (β1, β2, eps) = (0.9, 0.999, 1e-8).
class Adam {
 public:
  Adam(const ParamStore& store, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Param* p : store.entries()) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void step(ParamStore& store) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto& params = store.entries();
    if (params.size() != m_.size()) {
      throw std::logic_error("Adam: parameter count changed");
    }
    for (size_t p = 0; p < params.size(); ++p) {
      Tensor& value = params[p]->value;
      const Tensor& grad = params[p]->grad;
      Tensor& m = m_[p];
      Tensor& v = v_[p];
      for (int i = 0; i < value.size(); ++i) {
        const double g = grad.data[static_cast<size_t>(i)];
        m.data[static_cast<size_t>(i)] =
            beta1_ * m.data[static_cast<size_t>(i)] + (1.0 - beta1_) * g;
        v.data[static_cast<size_t>(i)] =
            beta2_ * v.data[static_cast<size_t>(i)] + (1.0 - beta2_) * g * g;
        const double mhat = m.data[static_cast<size_t>(i)] / c1;
        const double vhat = v.data[static_cast<size_t>(i)] / c2;
        value.data[static_cast<size_t>(i)] -=
            lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_recall10 = 0.0;
  double valid_ndcg10 = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_valid_recall10 = 0.0;
  double best_valid_ndcg10 = 0.0;
};

inline TideModel build_model(const SplitCorpus& split,
                             const PatternGraph* graph,
                             const TrainConfig& cfg) {
  ModelConfig mc;
  mc.d = cfg.d;
  mc.n_items = split.train.n_items();
  mc.freq_buckets = cfg.freq_buckets;
  mc.pos_table_rows = cfg.pos_table_rows;
  mc.epsilon = cfg.epsilon_base;
  mc.seed = cfg.seed;
  mc.ablation = cfg.ablation;
  return TideModel(mc, graph);
}

namespace detail {

inline double validation_recall(TideModel& model, const SplitCorpus& split,
                                int k, double* ndcg_out) {
  const int n_users = split.train.n_users();
  double recall = 0.0, ndcg = 0.0;
  for (int u = 0; u < n_users; ++u) {
    std::vector<std::vector<int>> history;
    for (const auto& b : split.train.sequences[static_cast<size_t>(u)]) {
      history.push_back(b.items);
    }
    const auto scores = model.score_user(history);
    const auto ranked = rank_items(scores.y_final);
    const auto& target = split.valid_target[static_cast<size_t>(u)].items;
    recall += recall_at_k(ranked, target, k);
    ndcg += ndcg_at_k(ranked, target, k);
  }
  if (ndcg_out) *ndcg_out = ndcg / n_users;
  return recall / n_users;
}

}  // namespace detail

/// Multi-task training: per epoch, users are shuffled by a seeded
/// permutation and processed in batches. Each user contributes one
/// instance — inputs are all train baskets but the last, which is the
/// target. Every batch adds one InfoNCE term over its intent pairs, plus
/// L2 regularization. The best validation checkpoint (Recall@10) is
/// restored into the model at the end.
inline TrainResult train(TideModel& model, const SplitCorpus& split,
                         const TrainConfig& cfg) {
  const int n_users = split.train.n_users();
  std::vector<int> trainable;
  for (int u = 0; u < n_users; ++u) {
    if (split.train.sequences[static_cast<size_t>(u)].size() >= 2) {
      trainable.push_back(u);
    }
  }
  if (trainable.empty()) {
    throw input_error("train: no user has >= 2 training baskets");
  }

  const double mu = cfg.ablation.no_cl ? 0.0 : cfg.mu;
  Adam adam(model.store(), cfg.learning_rate);
  Rng shuffle_rng(cfg.seed ^ 0x5eedbeefULL);

  TrainResult result;
  std::vector<Tensor> best_snapshot = model.store().snapshot_values();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = trainable;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      const auto pv = model.begin_pass(tape);

      VarId rec_total = -1;
      std::vector<VarId> zh, ze;
      for (size_t b = start; b < end; ++b) {
        const auto& seq =
            split.train.sequences[static_cast<size_t>(order[b])];
        std::vector<std::vector<int>> history;
        for (size_t m = 0; m + 1 < seq.size(); ++m) {
          history.push_back(seq[m].items);
        }
        const auto fv = model.forward_user(tape, pv, history);
        const VarId lu = rec_loss(tape, fv.y_final, seq.back().items);
        rec_total = rec_total < 0 ? lu : tape.add(rec_total, lu);
        zh.push_back(fv.z_habit);
        ze.push_back(fv.z_expl);
      }

      VarId cl = -1;
      if (mu != 0.0) cl = infonce_loss(tape, zh, ze, cfg.tau);
      const VarId loss =
          total_loss(tape, rec_total, cl, mu, cfg.l2_gamma, model.store());

      const double loss_value = tape.scalar(loss);
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(start / cfg.batch_size));
      }
      epoch_loss += loss_value;

      model.store().zero_grads();
      tape.backward(loss);
      adam.step(model.store());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss;
    log.valid_recall10 =
        detail::validation_recall(model, split, 10, &log.valid_ndcg10);
    result.log.push_back(log);

    if (result.best_epoch < 0 ||
        log.valid_recall10 > result.best_valid_recall10) {
      result.best_epoch = epoch;
      result.best_valid_recall10 = log.valid_recall10;
      result.best_valid_ndcg10 = log.valid_ndcg10;
      best_snapshot = model.store().snapshot_values();
    }
  }

  model.store().restore_values(best_snapshot);
  return result;
}

struct GridRow {
  double learning_rate = 0.0;
  double l2_gamma = 0.0;
  double valid_recall10 = 0.0;
  double valid_ndcg10 = 0.0;
  int best_epoch = -1;
};

struct GridResult {
  std::vector<GridRow> table;
  TrainConfig best;
};

inline const std::vector<double>& default_grid() {
  static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
  return grid;
}

/// Trains one model per (learning_rate, l2_gamma) pair and selects by
/// validation Recall@10, breaking ties by NDCG@10 and then by the smaller
/// learning rate.
inline GridResult grid_search(const SplitCorpus& split,
                              const PatternGraph& graph,
                              const TrainConfig& base,
                              const std::vector<double>& lr_grid = default_grid(),
                              const std::vector<double>& l2_grid = default_grid()) {
  if (lr_grid.empty() || l2_grid.empty()) {
    throw std::invalid_argument("grid_search: empty grid");
  }
  GridResult result;
  result.best = base;
  bool have_best = false;
  GridRow best_row;
  for (double lr : lr_grid) {
    for (double gamma : l2_grid) {
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.l2_gamma = gamma;
      TideModel model = build_model(split, &graph, cfg);
      const TrainResult tr = train(model, split, cfg);
      GridRow row;
      row.learning_rate = lr;
      row.l2_gamma = gamma;
      row.valid_recall10 = tr.best_valid_recall10;
      row.valid_ndcg10 = tr.best_valid_ndcg10;
      row.best_epoch = tr.best_epoch;
      result.table.push_back(row);

      const bool better =
          !have_best || row.valid_recall10 > best_row.valid_recall10 ||
          (row.valid_recall10 == best_row.valid_recall10 &&
           (row.valid_ndcg10 > best_row.valid_ndcg10 ||
            (row.valid_ndcg10 == best_row.valid_ndcg10 &&
             row.learning_rate < best_row.learning_rate)));
      if (better) {
        have_best = true;
        best_row = row;
        result.best = cfg;
      }
    }
  }
  return result;
}

}  // namespace tide
