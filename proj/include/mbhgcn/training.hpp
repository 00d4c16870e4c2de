#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mbhgcn/data.hpp"
#include "mbhgcn/model.hpp"

namespace mbhgcn {

enum class StepSchedule {
  Equal,         // every task gets ceil(|target edges| / batch) steps per epoch
  Proportional,  // task k participates in its own ceil(|edges_k| / batch) steps
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta = 1e-3;           // L2 coefficient over all trainable parameters
  int batch_size = 1024;
  int epochs = 100;
  int patience = 10;            // epochs without validation improvement; <= 0 disables
  double node_dropout_rate = 0.1;
  double message_dropout_rate = 0.1;
  std::uint64_t seed = 42;
  int negatives_per_positive = 1;
  int embedding_dim = 64;
  int num_layers = 2;
  StepSchedule schedule = StepSchedule::Equal;
  bool reg_batch_local = false;  // restrict the L2 term to rows touched by the batch

  void validate() const;  // throws ConfigError naming the offending field
};

struct Gradients {
  Mat user_emb;  // M x d
  Mat item_emb;  // N x d
  std::vector<double> item_behavior_weight;  // K
};

// One (user, positive item, negative item) triple.
using Triple = std::array<int, 3>;

struct Batch {
  std::vector<Triple> triples;
};

// Per-behavior per-user sorted item lists for O(log n) membership tests
// during rejection sampling.
struct SampleIndex {
  std::vector<std::vector<std::vector<int>>> items;  // [k][u] sorted
  int num_items = 0;

  explicit SampleIndex(const Dataset& ds);
  bool interacted(int k, int u, int i) const;

  // Positives uniform over edges[k]; negatives rejection-sampled uniformly
  // over the items the user has not interacted with in behavior k. Users who
  // interacted with every item are skipped with a warning (once per user).
  Batch sample(int k, int batch_size, std::mt19937_64& rng,
               int negatives_per_positive = 1) const;

 private:
  std::vector<std::vector<std::pair<int, int>>> edges_;
  mutable std::vector<char> warned_;
};

Batch sample_batch(const Dataset& ds, int k, int batch_size, std::mt19937_64& rng);

// -ln sigmoid(y_pos - y_neg), evaluated as softplus(-(y_pos - y_neg)).
double bpr_loss(double y_pos, double y_neg);

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> task;  // mean batch loss per behavior, empty batch -> 0
  double reg = 0.0;
};

// Sum over behaviors (fixed ascending order) of the mean batch BPR loss plus
// beta * ||Theta||_2^2 over the user table, item table and item weights.
LossBreakdown total_loss(const ForwardTrace& trace, const std::vector<Batch>& batches,
                         const ModelParams& params, double beta,
                         bool reg_batch_local = false);

// Exact reverse-mode gradients of total_loss with respect to every parameter.
// `trace` must come from the forward pass being differentiated (same graphs,
// same dropout masks).
Gradients backward(const ForwardTrace& trace, const std::vector<Batch>& batches,
                   const ModelParams& params, double beta, const GraphSet& graphs,
                   const VariantFlags& flags, bool reg_batch_local = false);

struct AdamState {
  Mat m_user, v_user;
  Mat m_item, v_item;
  std::vector<double> m_w, v_w;
  long long step_count = 0;

  explicit AdamState(const ModelParams& params);
};

// Standard Adam, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr);

struct EpochLog {
  int epoch = 0;
  double total_loss = 0.0;           // mean over the epoch's steps
  std::vector<double> task_losses;   // mean per task
  double val_hr10 = 0.0;
  double val_ndcg10 = 0.0;
  long long elapsed_ms = 0;
};

struct TrainResult {
  ModelParams params;           // best-validation snapshot
  std::vector<EpochLog> log;
  int best_epoch = 0;           // 0 = initial parameters
  double best_val_hr10 = 0.0;
};

// Joint multi-task loop: per epoch re-samples node-dropout graphs, runs the
// scheduled mini-batch steps over all tasks, then scores HR@10/NDCG@10 on the
// validation split. Stops after `patience` epochs without strict improvement
// and returns the best-validation parameters.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, const VariantFlags& flags);

// Comma-separated epoch line: epoch, total_loss, per-task losses, val_HR@10,
// val_NDCG@10, elapsed_ms.
std::string format_epoch_line(const EpochLog& log);
std::string format_train_log(const TrainResult& result);

}  // namespace mbhgcn
