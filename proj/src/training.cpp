#include "mbhgcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "mbhgcn/eval.hpp"
#include "mbhgcn/rng.hpp"

namespace mbhgcn {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large |x|
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void add_into(Mat& dst, const Mat& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void mask_into(Mat& m, const Mat& mask) {
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] *= mask.data[i];
}

// Adjoint of combine_layers: out = layer0 + sum_l alpha_l * layer_l/||layer_l||.
// Layer 0 receives g unchanged; layer l >= 1 rows receive
// alpha_l/||z|| * (g - (g . zhat) zhat), nothing on zero-norm rows.
void combine_backward(const std::vector<Mat>& layers, const Mat& g_out,
                      std::vector<Mat>& g_layers) {
  const int L = static_cast<int>(layers.size()) - 1;
  const int d = g_out.cols;
  add_into(g_layers[0], g_out);
  for (int l = 1; l <= L; ++l) {
    const double alpha = 1.0 / (l + 1);
    for (int r = 0; r < g_out.rows; ++r) {
      const double* z = layers[l].row(r);
      double norm = l2_norm(z, d);
      if (norm == 0.0) continue;
      const double* g = g_out.row(r);
      double proj = dot(g, z, d) / (norm * norm);  // (g . zhat) / ||z||
      double* out = g_layers[l].row(r);
      const double scale = alpha / norm;
      for (int c = 0; c < d; ++c) out[c] += scale * (g[c] - proj * z[c]);
    }
  }
}

// Unrolls one propagation stack: distributes the combined-output gradient onto
// every layer, then walks the hops backwards (propagate_step is self-adjoint)
// down to the layer-0 input gradient, re-applying stored dropout masks.
void stack_backward(const LayerStack& stack, const NormalizedGraph& graph,
                    const Mat& g_user_out, const Mat& g_item_out, Mat& g_user0, Mat& g_item0) {
  const int L = static_cast<int>(stack.user.size()) - 1;
  std::vector<Mat> gu(L + 1), gi(L + 1);
  for (int l = 0; l <= L; ++l) {
    gu[l] = Mat(g_user_out.rows, g_user_out.cols);
    gi[l] = Mat(g_item_out.rows, g_item_out.cols);
  }
  combine_backward(stack.user, g_user_out, gu);
  combine_backward(stack.item, g_item_out, gi);
  const bool masked = !stack.user_mask.empty();
  for (int l = L; l >= 1; --l) {
    if (masked) {
      mask_into(gu[l], stack.user_mask[l - 1]);
      mask_into(gi[l], stack.item_mask[l - 1]);
    }
    Mat au, ai;
    propagate_step(graph, gu[l], gi[l], au, ai);
    add_into(gu[l - 1], au);
    add_into(gi[l - 1], ai);
  }
  add_into(g_user0, gu[0]);
  add_into(g_item0, gi[0]);
}

struct Touched {
  std::vector<int> list;
  std::vector<char> seen;

  explicit Touched(int n) : seen(n, 0) {}
  void add(int idx) {
    if (!seen[idx]) {
      seen[idx] = 1;
      list.push_back(idx);
    }
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(node_dropout_rate >= 0.0 && node_dropout_rate < 1.0))
    throw ConfigError("node_dropout must be in [0, 1)");
  if (!(message_dropout_rate >= 0.0 && message_dropout_rate < 1.0))
    throw ConfigError("message_dropout must be in [0, 1)");
  if (negatives_per_positive < 1) throw ConfigError("negatives must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("layers must be >= 1");
}

SampleIndex::SampleIndex(const Dataset& ds) : num_items(ds.num_items), warned_(ds.num_users, 0) {
  const int K = ds.num_behaviors;
  items.assign(K, std::vector<std::vector<int>>(ds.num_users));
  edges_ = ds.edges;
  for (int k = 0; k < K; ++k) {
    for (const auto& [u, i] : ds.edges[k]) items[k][u].push_back(i);
    for (auto& list : items[k]) std::sort(list.begin(), list.end());
  }
}

bool SampleIndex::interacted(int k, int u, int i) const {
  const auto& list = items[k][u];
  return std::binary_search(list.begin(), list.end(), i);
}

Batch SampleIndex::sample(int k, int batch_size, std::mt19937_64& rng,
                          int negatives_per_positive) const {
  Batch batch;
  const auto& edges = edges_[k];
  if (edges.empty()) return batch;
  const int sz = static_cast<int>(edges.size());
  batch.triples.reserve(static_cast<size_t>(batch_size) * negatives_per_positive);
  for (int b = 0; b < batch_size; ++b) {
    int u = -1, pos = -1;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const auto& e = edges[uniform_index(rng, sz)];
      if (static_cast<int>(items[k][e.first].size()) >= num_items) {
        if (!warned_[e.first]) {
          warned_[e.first] = 1;
          std::cerr << "warning: user " << e.first << " interacted with every item in behavior "
                    << k << ", no negatives available; skipping\n";
        }
        continue;
      }
      u = e.first;
      pos = e.second;
      break;
    }
    if (u < 0) break;  // nothing samplable in this behavior
    for (int n = 0; n < negatives_per_positive; ++n) {
      int neg;
      do {
        neg = uniform_index(rng, num_items);
      } while (interacted(k, u, neg));
      batch.triples.push_back({u, pos, neg});
    }
  }
  return batch;
}

Batch sample_batch(const Dataset& ds, int k, int batch_size, std::mt19937_64& rng) {
  SampleIndex index(ds);
  return index.sample(k, batch_size, rng);
}

double bpr_loss(double y_pos, double y_neg) {
  return softplus(-(y_pos - y_neg));
}

LossBreakdown total_loss(const ForwardTrace& trace, const std::vector<Batch>& batches,
                         const ModelParams& params, double beta, bool reg_batch_local) {
  const int K = params.num_behaviors();
  const int d = params.dim();
  LossBreakdown lb;
  lb.task.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const auto& triples = batches[k].triples;
    if (triples.empty()) continue;
    double sum = 0.0;
    for (const auto& [u, pos, neg] : triples) {
      const double* eu = trace.final_user[k].row(u);
      double y_pos = dot(eu, trace.final_item.row(pos), d);
      double y_neg = dot(eu, trace.final_item.row(neg), d);
      sum += bpr_loss(y_pos, y_neg);
    }
    lb.task[k] = sum / static_cast<double>(triples.size());
  }

  double reg = 0.0;
  const auto& w = params.item_behavior_weight;
  if (!reg_batch_local) {
    for (double v : params.user_emb.data) reg += v * v;
    for (double v : params.item_emb.data) reg += v * v;
  } else {
    Touched users(params.num_users()), items(params.num_items());
    for (const auto& batch : batches)
      for (const auto& [u, pos, neg] : batch.triples) {
        users.add(u);
        items.add(pos);
        items.add(neg);
      }
    for (int u : users.list) reg += dot(params.user_emb.row(u), params.user_emb.row(u), d);
    for (int i : items.list) reg += dot(params.item_emb.row(i), params.item_emb.row(i), d);
  }
  for (double v : w) reg += v * v;
  lb.reg = beta * reg;

  lb.total = lb.reg;
  for (int k = 0; k < K; ++k) lb.total += lb.task[k];
  return lb;
}

Gradients backward(const ForwardTrace& trace, const std::vector<Batch>& batches,
                   const ModelParams& params, double beta, const GraphSet& graphs,
                   const VariantFlags& flags, bool reg_batch_local) {
  const int M = params.num_users();
  const int N = params.num_items();
  const int K = params.num_behaviors();
  const int d = params.dim();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Gradients g;
  g.user_emb = Mat(M, d);
  g.item_emb = Mat(N, d);
  g.item_behavior_weight.assign(K, 0.0);

  // Loss -> final embeddings. Per triple with margin m = y_pos - y_neg the
  // positive score gradient is -sigmoid(-m)/|B|.
  std::vector<Mat> g_final_user(K, Mat(M, d));
  Mat g_final_item(N, d);
  std::vector<Touched> touched_user;
  touched_user.reserve(K);
  for (int k = 0; k < K; ++k) touched_user.emplace_back(M);
  Touched touched_item(N);

  for (int k = 0; k < K; ++k) {
    const auto& triples = batches[k].triples;
    if (triples.empty()) continue;
    const double inv_b = 1.0 / static_cast<double>(triples.size());
    for (const auto& [u, pos, neg] : triples) {
      const double* eu = trace.final_user[k].row(u);
      const double* ei = trace.final_item.row(pos);
      const double* ej = trace.final_item.row(neg);
      double margin = dot(eu, ei, d) - dot(eu, ej, d);
      double c = -sigmoid(-margin) * inv_b;
      double* gu = g_final_user[k].row(u);
      axpy(c, ei, gu, d);
      axpy(-c, ej, gu, d);
      axpy(c, eu, g_final_item.row(pos), d);
      axpy(-c, eu, g_final_item.row(neg), d);
      touched_user[k].add(u);
      touched_item.add(pos);
      touched_item.add(neg);
    }
  }

  // Fusion: final = aggregate (+ global). Aggregate gradients alias the final
  // ones; the global branch accumulates separately.
  Mat g_global_user(M, d), g_global_item(N, d);
  if (flags.fuse_global) {
    for (int k = 0; k < K; ++k)
      for (int u : touched_user[k].list)
        axpy(1.0, g_final_user[k].row(u), g_global_user.row(u), d);
    for (int i : touched_item.list) axpy(1.0, g_final_item.row(i), g_global_item.row(i), d);
  }
  std::vector<Mat>& g_agg_user = g_final_user;
  Mat& g_agg_item = g_final_item;

  // Item aggregation: agg_i = sum_k gamma_ik * e_i^k with
  // gamma_ik = w_k n_ik / S_i, S_i = sum_m w_m n_im.
  std::vector<Mat> g_behavior_user(K, Mat(M, d)), g_behavior_item(K, Mat(N, d));
  {
    const auto& w = params.item_behavior_weight;
    std::vector<double> g_gamma(K);
    for (int i : touched_item.list) {
      const double* gi = g_agg_item.row(i);
      const double* gamma = trace.item_agg_weights.row(i);
      for (int k = 0; k < K; ++k) {
        axpy(gamma[k], gi, g_behavior_item[k].row(i), d);
        g_gamma[k] = dot(gi, trace.behavior_item[k].row(i), d);
      }
      if (flags.item_gamma == ItemGamma::Learnable) {
        double denom = 0.0;
        for (int m = 0; m < K; ++m) denom += w[m] * graphs.item_counts[m][i];
        if (std::abs(denom) >= 1e-12) {
          // d gamma_ik / d w_m = n_ik (1[k==m] S - w_k n_im) / S^2
          const double inv_s2 = 1.0 / (denom * denom);
          for (int k = 0; k < K; ++k) {
            double a = g_gamma[k] * graphs.item_counts[k][i] * inv_s2;
            if (a == 0.0) continue;
            for (int m = 0; m < K; ++m) {
              double term = (k == m ? denom : 0.0) - w[k] * graphs.item_counts[m][i];
              g.item_behavior_weight[m] += a * term;
            }
          }
        }
        // fallback rows use piecewise-constant weights: no w gradient
      }
    }
  }

  // User aggregation.
  if (flags.user_agg == UserAgg::Adaptive) {
    std::vector<double> g_delta(K), g_score(K);
    for (int task = 0; task < K; ++task) {
      const int q = (flags.delta_query == DeltaQuery::Task) ? task : K - 1;
      for (int u : touched_user[task].list) {
        const double* ga = g_agg_user[task].row(u);
        const double* delta = trace.user_agg_weights[task].row(u);
        double dot_dg = 0.0;
        for (int j = 0; j < K; ++j) {
          axpy(delta[j], ga, g_behavior_user[j].row(u), d);
          g_delta[j] = dot(ga, trace.behavior_user[j].row(u), d);
          dot_dg += delta[j] * g_delta[j];
        }
        // softmax jacobian, then scores s_j = (e_q . e_j)/sqrt(d)
        const double* eq = trace.behavior_user[q].row(u);
        for (int j = 0; j < K; ++j) {
          g_score[j] = delta[j] * (g_delta[j] - dot_dg);
          double s = g_score[j] * inv_sqrt_d;
          axpy(s, trace.behavior_user[j].row(u), g_behavior_user[q].row(u), d);
          axpy(s, eq, g_behavior_user[j].row(u), d);
        }
      }
    }
  } else if (flags.user_agg == UserAgg::Sum) {
    for (int task = 0; task < K; ++task)
      for (int u : touched_user[task].list)
        for (int j = 0; j < K; ++j)
          axpy(1.0, g_agg_user[task].row(u), g_behavior_user[j].row(u), d);
  } else {  // Linear
    for (int task = 0; task < K; ++task)
      for (int u : touched_user[task].list) {
        const double* lw = trace.user_linear_weights.row(u);
        for (int j = 0; j < K; ++j)
          axpy(lw[j], g_agg_user[task].row(u), g_behavior_user[j].row(u), d);
      }
  }

  // Behavior stacks back to the global embeddings.
  for (int k = 0; k < K; ++k)
    stack_backward(trace.behavior_layers[k], graphs.behavior[k], g_behavior_user[k],
                   g_behavior_item[k], g_global_user, g_global_item);

  // Global stack back to the embedding tables.
  if (flags.use_unified) {
    stack_backward(trace.global_layers, graphs.unified, g_global_user, g_global_item,
                   g.user_emb, g.item_emb);
  } else {
    add_into(g.user_emb, g_global_user);
    add_into(g.item_emb, g_global_item);
  }

  // L2 regularization: d(beta ||theta||^2) = 2 beta theta.
  if (beta != 0.0) {
    const double two_beta = 2.0 * beta;
    if (!reg_batch_local) {
      for (size_t z = 0; z < g.user_emb.data.size(); ++z)
        g.user_emb.data[z] += two_beta * params.user_emb.data[z];
      for (size_t z = 0; z < g.item_emb.data.size(); ++z)
        g.item_emb.data[z] += two_beta * params.item_emb.data[z];
    } else {
      Touched users(M), items(N);
      for (const auto& batch : batches)
        for (const auto& [u, pos, neg] : batch.triples) {
          users.add(u);
          items.add(pos);
          items.add(neg);
        }
      for (int u : users.list) axpy(two_beta, params.user_emb.row(u), g.user_emb.row(u), d);
      for (int i : items.list) axpy(two_beta, params.item_emb.row(i), g.item_emb.row(i), d);
    }
    for (int k = 0; k < K; ++k)
      g.item_behavior_weight[k] += two_beta * params.item_behavior_weight[k];
  }

  return g;
}

AdamState::AdamState(const ModelParams& params)
    : m_user(params.user_emb.rows, params.user_emb.cols),
      v_user(params.user_emb.rows, params.user_emb.cols),
      m_item(params.item_emb.rows, params.item_emb.cols),
      v_item(params.item_emb.rows, params.item_emb.cols),
      m_w(params.num_behaviors(), 0.0),
      v_w(params.num_behaviors(), 0.0) {}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_update(double* param, const double* grad, double* m, double* v, size_t n,
                 double lr, double bias1, double bias2) {
  for (size_t z = 0; z < n; ++z) {
    m[z] = kAdamBeta1 * m[z] + (1.0 - kAdamBeta1) * grad[z];
    v[z] = kAdamBeta2 * v[z] + (1.0 - kAdamBeta2) * grad[z] * grad[z];
    double mhat = m[z] / bias1;
    double vhat = v[z] / bias2;
    param[z] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

}  // namespace

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr) {
  state.step_count++;
  const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step_count));
  adam_update(params.user_emb.data.data(), grads.user_emb.data.data(),
              state.m_user.data.data(), state.v_user.data.data(), params.user_emb.data.size(),
              lr, bias1, bias2);
  adam_update(params.item_emb.data.data(), grads.item_emb.data.data(),
              state.m_item.data.data(), state.v_item.data.data(), params.item_emb.data.size(),
              lr, bias1, bias2);
  adam_update(params.item_behavior_weight.data(), grads.item_behavior_weight.data(),
              state.m_w.data(), state.v_w.data(), params.item_behavior_weight.size(), lr, bias1,
              bias2);
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const VariantFlags& flags) {
  cfg.validate();
  const int K = ds.num_behaviors;
  const int target = ds.target_behavior();
  if (ds.edges[target].empty())
    throw EmptyTargetBehavior("target behavior has no training edges");

  ModelParams params = init_params(ds.num_users, ds.num_items, K, cfg.embedding_dim,
                                   cfg.num_layers, cfg.seed);
  GraphSet base = build_graphs(ds);
  AdamState adam(params);
  SampleIndex index(ds);
  std::mt19937_64 sample_rng(sub_seed(cfg.seed, 0xba7c4));

  auto steps_for = [&](int k) {
    return static_cast<int>((ds.edges[k].size() + cfg.batch_size - 1) / cfg.batch_size);
  };
  int total_steps = steps_for(target);
  if (cfg.schedule == StepSchedule::Proportional)
    for (int k = 0; k < K; ++k) total_steps = std::max(total_steps, steps_for(k));

  TrainResult res;
  res.params = params;
  res.best_epoch = 0;
  double best_hr = -1.0;

  int since_improve = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();

    const GraphSet* active = &base;
    GraphSet dropped;
    if (cfg.node_dropout_rate > 0.0) {
      dropped = dropout_graphs(base, cfg.node_dropout_rate,
                               sub_seed(cfg.seed, 0xd120, static_cast<std::uint64_t>(epoch)));
      active = &dropped;
    }

    double loss_acc = 0.0;
    std::vector<double> task_acc(K, 0.0);
    for (int step = 0; step < total_steps; ++step) {
      std::vector<Batch> batches(K);
      for (int k = 0; k < K; ++k) {
        if (!flags.mtl && k != target) continue;
        if (ds.edges[k].empty()) continue;
        if (cfg.schedule == StepSchedule::Proportional && step >= steps_for(k)) continue;
        batches[k] = index.sample(k, cfg.batch_size, sample_rng, cfg.negatives_per_positive);
      }
      MessageDropout md{cfg.message_dropout_rate,
                        sub_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * 1000003ULL,
                                 static_cast<std::uint64_t>(step))};
      ForwardTrace trace = forward(params, *active, flags, md);
      LossBreakdown lb = total_loss(trace, batches, params, cfg.beta, cfg.reg_batch_local);
      Gradients grads =
          backward(trace, batches, params, cfg.beta, *active, flags, cfg.reg_batch_local);
      adam_step(params, grads, adam, cfg.learning_rate);
      loss_acc += lb.total;
      for (int k = 0; k < K; ++k) task_acc[k] += lb.task[k];
    }

    EvalOptions vopts;
    vopts.use_validation_item = true;
    EvalReport val = evaluate(params, ds, {10}, flags, vopts);

    EpochLog log;
    log.epoch = epoch;
    log.total_loss = loss_acc / std::max(1, total_steps);
    log.task_losses.resize(K);
    for (int k = 0; k < K; ++k) log.task_losses[k] = task_acc[k] / std::max(1, total_steps);
    log.val_hr10 = val.hr.at(10);
    log.val_ndcg10 = val.ndcg.at(10);
    log.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    res.log.push_back(log);

    if (log.val_hr10 > best_hr) {
      best_hr = log.val_hr10;
      res.best_epoch = epoch;
      res.params = params;
      since_improve = 0;
    } else {
      since_improve++;
    }
    if (cfg.patience > 0 && since_improve >= cfg.patience) break;
  }

  res.best_val_hr10 = std::max(best_hr, 0.0);
  return res;
}

std::string format_epoch_line(const EpochLog& log) {
  std::ostringstream ss;
  char buf[64];
  ss << log.epoch;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    ss << "," << buf;
  };
  put(log.total_loss);
  for (double t : log.task_losses) put(t);
  put(log.val_hr10);
  put(log.val_ndcg10);
  ss << "," << log.elapsed_ms;
  return ss.str();
}

std::string format_train_log(const TrainResult& result) {
  std::ostringstream ss;
  ss << "# epoch,total_loss,task_losses...,val_hr10,val_ndcg10,elapsed_ms\n";
  for (const auto& log : result.log) ss << format_epoch_line(log) << "\n";
  ss << "# best_epoch " << result.best_epoch << "\n";
  return ss.str();
}

}  // namespace mbhgcn
