#include "mbhgcn/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mbhgcn/errors.hpp"
#include "mbhgcn/rng.hpp"

namespace mbhgcn {

namespace {

constexpr double kWeightSumEps = 1e-12;

void fill_normal(Mat& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : m.data) v = dist(rng);
}

Mat bernoulli_mask(int rows, int cols, double rate, std::mt19937_64& rng) {
  Mat mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = (uniform01(rng) >= rate) ? keep_scale : 0.0;
  return mask;
}

void apply_mask(Mat& m, const Mat& mask) {
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] *= mask.data[i];
}

// Softmax over `scores` written into `weights` (stable form).
void softmax(const double* scores, double* weights, int n) {
  double max = scores[0];
  for (int j = 1; j < n; ++j) max = std::max(max, scores[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    weights[j] = std::exp(scores[j] - max);
    sum += weights[j];
  }
  for (int j = 0; j < n; ++j) weights[j] /= sum;
}

// Item mixing weights for one item row; see item_weighted_aggregate.
void item_gamma_row(const std::vector<double>& w, const int* counts, int K, ItemGamma mode,
                    double* gamma) {
  if (mode == ItemGamma::FixedOne) {
    for (int k = 0; k < K; ++k) gamma[k] = 1.0;
    return;
  }
  double denom = 0.0;
  for (int k = 0; k < K; ++k)
    denom += (mode == ItemGamma::Learnable ? w[k] : 1.0) * counts[k];
  if (std::abs(denom) >= kWeightSumEps) {
    for (int k = 0; k < K; ++k)
      gamma[k] = (mode == ItemGamma::Learnable ? w[k] : 1.0) * counts[k] / denom;
    return;
  }
  int active = 0;
  for (int k = 0; k < K; ++k) active += counts[k] > 0;
  if (active > 0) {
    for (int k = 0; k < K; ++k) gamma[k] = counts[k] > 0 ? 1.0 / active : 0.0;
  } else {
    for (int k = 0; k < K; ++k) gamma[k] = 1.0 / K;
  }
}

}  // namespace

ModelParams init_params(int num_users, int num_items, int num_behaviors, int dim,
                        int num_layers, std::uint64_t seed) {
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  ModelParams p;
  p.user_emb = Mat(num_users, dim);
  p.item_emb = Mat(num_items, dim);
  p.item_behavior_weight.assign(num_behaviors, 1.0);
  p.num_layers = num_layers;
  std::mt19937_64 rng(seed);
  fill_normal(p.user_emb, rng, 0.1);
  fill_normal(p.item_emb, rng, 0.1);
  return p;
}

GraphSet build_graphs(const Dataset& ds) {
  GraphSet gs;
  gs.unified = build_unified_graph(ds);
  gs.behavior.reserve(ds.num_behaviors);
  for (int k = 0; k < ds.num_behaviors; ++k) gs.behavior.push_back(build_behavior_graph(ds, k));
  gs.item_counts = ds.item_counts;
  gs.user_counts = ds.user_counts();
  return gs;
}

GraphSet dropout_graphs(const GraphSet& base, double rate, std::uint64_t seed) {
  GraphSet gs;
  gs.unified = node_dropout(base.unified, rate, sub_seed(seed, 0));
  gs.behavior.reserve(base.behavior.size());
  for (size_t k = 0; k < base.behavior.size(); ++k)
    gs.behavior.push_back(node_dropout(base.behavior[k], rate, sub_seed(seed, k + 1)));
  gs.item_counts = base.item_counts;
  gs.user_counts = base.user_counts;
  return gs;
}

LayerStack propagate(const NormalizedGraph& g, const Mat& user0, const Mat& item0,
                     int num_layers, const MessageDropout& dropout) {
  LayerStack stack;
  stack.user.push_back(user0);
  stack.item.push_back(item0);
  const bool mask_on = dropout.rate > 0.0;
  std::mt19937_64 rng(dropout.seed);
  for (int l = 0; l < num_layers; ++l) {
    Mat u_next, i_next;
    propagate_step(g, stack.user.back(), stack.item.back(), u_next, i_next);
    if (mask_on) {
      Mat umask = bernoulli_mask(u_next.rows, u_next.cols, dropout.rate, rng);
      Mat imask = bernoulli_mask(i_next.rows, i_next.cols, dropout.rate, rng);
      apply_mask(u_next, umask);
      apply_mask(i_next, imask);
      stack.user_mask.push_back(std::move(umask));
      stack.item_mask.push_back(std::move(imask));
    }
    stack.user.push_back(std::move(u_next));
    stack.item.push_back(std::move(i_next));
  }
  return stack;
}

Mat combine_layers(const std::vector<Mat>& layers) {
  Mat out = layers[0];
  const int d = out.cols;
  const int L = static_cast<int>(layers.size()) - 1;
  for (int l = 1; l <= L; ++l) {
    const double alpha = 1.0 / (l + 1);
    for (int r = 0; r < out.rows; ++r) {
      const double* src = layers[l].row(r);
      double norm = l2_norm(src, d);
      if (norm > 0.0) axpy(alpha / norm, src, out.row(r), d);
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> user_adaptive_aggregate(
    const std::vector<std::vector<double>>& behavior_vecs, int task, DeltaQuery query,
    int target) {
  const int K = static_cast<int>(behavior_vecs.size());
  const int d = static_cast<int>(behavior_vecs[0].size());
  const int q = (query == DeltaQuery::Task) ? task : (target >= 0 ? target : K - 1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> scores(K), weights(K);
  for (int j = 0; j < K; ++j)
    scores[j] = dot(behavior_vecs[q].data(), behavior_vecs[j].data(), d) * inv_sqrt_d;
  softmax(scores.data(), weights.data(), K);

  std::vector<double> agg(d, 0.0);
  for (int j = 0; j < K; ++j) axpy(weights[j], behavior_vecs[j].data(), agg.data(), d);
  return {weights, agg};
}

std::pair<std::vector<double>, std::vector<double>> item_weighted_aggregate(
    const std::vector<std::vector<double>>& behavior_vecs, const std::vector<int>& counts,
    const std::vector<double>& weights) {
  const int K = static_cast<int>(behavior_vecs.size());
  const int d = static_cast<int>(behavior_vecs[0].size());
  std::vector<double> gamma(K);
  item_gamma_row(weights, counts.data(), K, ItemGamma::Learnable, gamma.data());
  std::vector<double> agg(d, 0.0);
  for (int k = 0; k < K; ++k) axpy(gamma[k], behavior_vecs[k].data(), agg.data(), d);
  return {gamma, agg};
}

ForwardTrace forward(const ModelParams& params, const GraphSet& graphs,
                     const VariantFlags& flags, const MessageDropout& dropout) {
  const int M = params.num_users();
  const int N = params.num_items();
  const int K = params.num_behaviors();
  const int d = params.dim();
  const int L = params.num_layers;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  ForwardTrace t;

  if (flags.use_unified) {
    MessageDropout md = dropout;
    if (md.rate > 0.0) md.seed = sub_seed(dropout.seed, 0);
    t.global_layers = propagate(graphs.unified, params.user_emb, params.item_emb, L, md);
    t.global_user = combine_layers(t.global_layers.user);
    t.global_item = combine_layers(t.global_layers.item);
  } else {
    t.global_user = params.user_emb;
    t.global_item = params.item_emb;
  }

  t.behavior_layers.resize(K);
  t.behavior_user.resize(K);
  t.behavior_item.resize(K);
  for (int k = 0; k < K; ++k) {
    MessageDropout md = dropout;
    if (md.rate > 0.0) md.seed = sub_seed(dropout.seed, k + 1);
    t.behavior_layers[k] = propagate(graphs.behavior[k], t.global_user, t.global_item, L, md);
    t.behavior_user[k] = combine_layers(t.behavior_layers[k].user);
    t.behavior_item[k] = combine_layers(t.behavior_layers[k].item);
  }

  // User aggregation.
  t.agg_user.assign(K, Mat(M, d));
  if (flags.user_agg == UserAgg::Adaptive) {
    t.user_agg_weights.assign(K, Mat(M, K));
    std::vector<double> scores(K);
    for (int task = 0; task < K; ++task) {
      const int q = (flags.delta_query == DeltaQuery::Task) ? task : K - 1;
      for (int u = 0; u < M; ++u) {
        const double* query = t.behavior_user[q].row(u);
        for (int j = 0; j < K; ++j)
          scores[j] = dot(query, t.behavior_user[j].row(u), d) * inv_sqrt_d;
        double* w = t.user_agg_weights[task].row(u);
        softmax(scores.data(), w, K);
        double* agg = t.agg_user[task].row(u);
        for (int j = 0; j < K; ++j) axpy(w[j], t.behavior_user[j].row(u), agg, d);
      }
    }
  } else if (flags.user_agg == UserAgg::Sum) {
    Mat sum(M, d);
    for (int j = 0; j < K; ++j)
      for (size_t z = 0; z < sum.data.size(); ++z) sum.data[z] += t.behavior_user[j].data[z];
    for (int task = 0; task < K; ++task) t.agg_user[task] = sum;
  } else {  // Linear: weights from the user's per-behavior interaction counts
    t.user_linear_weights = Mat(M, K);
    std::vector<int> counts(K);
    for (int u = 0; u < M; ++u) {
      for (int k = 0; k < K; ++k) counts[k] = graphs.user_counts[k][u];
      item_gamma_row({}, counts.data(), K, ItemGamma::CountsOnly,
                     t.user_linear_weights.row(u));
    }
    Mat mixed(M, d);
    for (int u = 0; u < M; ++u) {
      const double* w = t.user_linear_weights.row(u);
      double* agg = mixed.row(u);
      for (int j = 0; j < K; ++j) axpy(w[j], t.behavior_user[j].row(u), agg, d);
    }
    for (int task = 0; task < K; ++task) t.agg_user[task] = mixed;
  }

  // Item aggregation.
  t.item_agg_weights = Mat(N, K);
  t.agg_item = Mat(N, d);
  {
    std::vector<int> counts(K);
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < K; ++k) counts[k] = graphs.item_counts[k][i];
      double* gamma = t.item_agg_weights.row(i);
      item_gamma_row(params.item_behavior_weight, counts.data(), K, flags.item_gamma, gamma);
      double* agg = t.agg_item.row(i);
      for (int k = 0; k < K; ++k) axpy(gamma[k], t.behavior_item[k].row(i), agg, d);
    }
  }

  // Global fusion.
  t.final_user.resize(K);
  for (int task = 0; task < K; ++task) {
    t.final_user[task] = t.agg_user[task];
    if (flags.fuse_global)
      for (size_t z = 0; z < t.final_user[task].data.size(); ++z)
        t.final_user[task].data[z] += t.global_user.data[z];
  }
  t.final_item = t.agg_item;
  if (flags.fuse_global)
    for (size_t z = 0; z < t.final_item.data.size(); ++z)
      t.final_item.data[z] += t.global_item.data[z];

  return t;
}

std::string to_string(UserAgg v) {
  switch (v) {
    case UserAgg::Sum: return "sum";
    case UserAgg::Linear: return "linear";
    default: return "adaptive";
  }
}

std::string to_string(ItemGamma v) {
  switch (v) {
    case ItemGamma::FixedOne: return "fixed1";
    case ItemGamma::CountsOnly: return "counts";
    default: return "learnable";
  }
}

std::string to_string(DeltaQuery v) {
  return v == DeltaQuery::Target ? "target" : "task";
}

UserAgg user_agg_from_string(const std::string& s) {
  if (s == "sum") return UserAgg::Sum;
  if (s == "linear") return UserAgg::Linear;
  if (s == "adaptive") return UserAgg::Adaptive;
  throw ConfigError("unknown user aggregation '" + s + "' (sum|linear|adaptive)");
}

ItemGamma item_gamma_from_string(const std::string& s) {
  if (s == "fixed1") return ItemGamma::FixedOne;
  if (s == "counts") return ItemGamma::CountsOnly;
  if (s == "learnable") return ItemGamma::Learnable;
  throw ConfigError("unknown item weighting '" + s + "' (fixed1|counts|learnable)");
}

DeltaQuery delta_query_from_string(const std::string& s) {
  if (s == "task") return DeltaQuery::Task;
  if (s == "target") return DeltaQuery::Target;
  throw ConfigError("unknown similarity query '" + s + "' (task|target)");
}

namespace {

void write_matrix(std::ofstream& out, const Mat& m) {
  char buf[32];
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << buf << (c + 1 < m.cols ? " " : "");
    }
    out << "\n";
  }
}

}  // namespace

void save_model(const ModelParams& params, const VariantFlags& flags, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model: " + path);
  out << kModelMagic << "\n";
  out << "shape " << params.num_users() << " " << params.num_items() << " "
      << params.num_behaviors() << " " << params.dim() << " " << params.num_layers << "\n";
  out << "flags unified=" << (flags.use_unified ? 1 : 0)
      << " user_agg=" << to_string(flags.user_agg)
      << " item_gamma=" << to_string(flags.item_gamma)
      << " fuse=" << (flags.fuse_global ? 1 : 0) << " mtl=" << (flags.mtl ? 1 : 0)
      << " delta_query=" << to_string(flags.delta_query) << "\n";
  char buf[32];
  out << "w";
  for (double w : params.item_behavior_weight) {
    std::snprintf(buf, sizeof(buf), "%.17g", w);
    out << " " << buf;
  }
  out << "\nP\n";
  write_matrix(out, params.user_emb);
  out << "Q\n";
  write_matrix(out, params.item_emb);
  if (!out) throw IoError("write error on model: " + path);
}

namespace {

Mat read_matrix(std::ifstream& in, int rows, int cols, const std::string& path) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("truncated model: " + path);
    std::istringstream ss(line);
    double* row = m.row(r);
    for (int c = 0; c < cols; ++c)
      if (!(ss >> row[c])) throw IoError("bad matrix row in model: " + path);
  }
  return m;
}

}  // namespace

std::pair<ModelParams, VariantFlags> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic)
    throw IoError("not a " + std::string(kModelMagic) + " file: " + path);

  int M = 0, N = 0, K = 0, d = 0, L = 0;
  {
    if (!std::getline(in, line)) throw IoError("truncated model: " + path);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag >> M >> N >> K >> d >> L;
    if (tag != "shape" || M < 0 || N < 0 || K <= 0 || d <= 0 || L < 1)
      throw IoError("bad model shape header: " + path);
  }
  VariantFlags flags;
  {
    if (!std::getline(in, line)) throw IoError("truncated model: " + path);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "flags") throw IoError("missing model flags: " + path);
    std::string kv;
    while (ss >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw IoError("bad model flag '" + kv + "'");
      std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "unified") flags.use_unified = val == "1";
      else if (key == "user_agg") flags.user_agg = user_agg_from_string(val);
      else if (key == "item_gamma") flags.item_gamma = item_gamma_from_string(val);
      else if (key == "fuse") flags.fuse_global = val == "1";
      else if (key == "mtl") flags.mtl = val == "1";
      else if (key == "delta_query") flags.delta_query = delta_query_from_string(val);
      else throw IoError("unknown model flag '" + key + "'");
    }
  }
  ModelParams params;
  params.num_layers = L;
  {
    if (!std::getline(in, line)) throw IoError("truncated model: " + path);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "w") throw IoError("missing behavior weights: " + path);
    params.item_behavior_weight.resize(K);
    for (int k = 0; k < K; ++k)
      if (!(ss >> params.item_behavior_weight[k]))
        throw IoError("bad behavior weights: " + path);
  }
  if (!std::getline(in, line) || line != "P") throw IoError("missing user table: " + path);
  params.user_emb = read_matrix(in, M, d, path);
  if (!std::getline(in, line) || line != "Q") throw IoError("missing item table: " + path);
  params.item_emb = read_matrix(in, N, d, path);
  return {std::move(params), flags};
}

}  // namespace mbhgcn
