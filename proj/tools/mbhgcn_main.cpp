// Command-line front end: dataset preparation, training (with grid search),
// evaluation, ablation sweeps, cold-start experiments, and embedding export.
//
// Exit codes: 0 success, 1 internal error, 2 input/config error,
// 3 model/bundle shape mismatch.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mbhgcn/data.hpp"
#include "mbhgcn/eval.hpp"
#include "mbhgcn/model.hpp"
#include "mbhgcn/training.hpp"

using namespace mbhgcn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitMismatch = 3;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value '" + s + "' for " + what);
  }
}

long long parse_int(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value '" + s + "' for " + what);
  }
}

// Line-based "key = value" configuration; '#' starts a comment; unknown keys
// are errors so typos fail fast.
void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "learning_rate") cfg.learning_rate = parse_double(value, key);
    else if (key == "beta") cfg.beta = parse_double(value, key);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(value, key));
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(value, key));
    else if (key == "patience") cfg.patience = static_cast<int>(parse_int(value, key));
    else if (key == "node_dropout") cfg.node_dropout_rate = parse_double(value, key);
    else if (key == "message_dropout") cfg.message_dropout_rate = parse_double(value, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
    else if (key == "negatives")
      cfg.negatives_per_positive = static_cast<int>(parse_int(value, key));
    else if (key == "embedding_dim") cfg.embedding_dim = static_cast<int>(parse_int(value, key));
    else if (key == "layers") cfg.num_layers = static_cast<int>(parse_int(value, key));
    else if (key == "schedule") {
      if (value == "equal") cfg.schedule = StepSchedule::Equal;
      else if (value == "proportional") cfg.schedule = StepSchedule::Proportional;
      else throw ConfigError("unknown schedule '" + value + "' (equal|proportional)");
    } else if (key == "reg_batch_local") {
      cfg.reg_batch_local = parse_int(value, key) != 0;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

std::vector<int> parse_ks(const std::string& spec) {
  std::vector<int> ks;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    int k = static_cast<int>(parse_int(tok, "--ks"));
    if (k < 1) throw ConfigError("--ks entries must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--ks must list at least one cutoff");
  return ks;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

char parse_delimiter(const std::string& spec) {
  if (spec == "tab" || spec == "\\t") return '\t';
  if (spec == "space") return ' ';
  if (spec.size() == 1) return spec[0];
  throw ConfigError("delimiter must be a single character, 'tab', or 'space'");
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << contents;
  if (!out) throw IoError("write error on: " + path);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Shared hyperparameter and variant flags for train-like subcommands.
struct TrainCliOptions {
  std::string config_path;
  double lr = 0, beta = 0, node_dropout = 0, message_dropout = 0;
  int batch = 0, epochs = 0, patience = 0, negatives = 0, dim = 0, layers = 0;
  std::uint64_t seed = 0;
  std::string schedule;
  bool reg_batch_local = false;
  bool no_unified = false;
  std::string user_agg, item_gamma, delta_query;
  bool no_fuse_global = false;
  bool no_mtl = false;

  void register_options(CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--lr", lr, "learning rate");
    sub->add_option("--beta", beta, "L2 regularization coefficient");
    sub->add_option("--batch", batch, "mini-batch size");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--patience", patience, "early-stop patience (0 disables)");
    sub->add_option("--node-dropout", node_dropout, "node dropout rate");
    sub->add_option("--message-dropout", message_dropout, "message dropout rate");
    sub->add_option("--seed", seed, "master random seed");
    sub->add_option("--negatives", negatives, "negatives per positive");
    sub->add_option("--dim", dim, "embedding size");
    sub->add_option("--layers", layers, "graph convolution layers");
    sub->add_option("--schedule", schedule, "per-epoch step schedule: equal|proportional");
    sub->add_flag("--reg-batch-local", reg_batch_local,
                  "restrict the L2 term to batch-touched rows");
    sub->add_flag("--no-unified", no_unified, "skip the unified-graph pass");
    sub->add_option("--user-agg", user_agg, "user aggregation: sum|linear|adaptive");
    sub->add_option("--item-gamma", item_gamma, "item weighting: fixed1|counts|learnable");
    sub->add_flag("--no-fuse-global", no_fuse_global, "skip the global fusion");
    sub->add_flag("--no-mtl", no_mtl, "train only the target task");
    sub->add_option("--delta-query", delta_query, "similarity query: task|target");
  }

  TrainConfig build_config(const CLI::App* sub) const {
    TrainConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (sub->count("--lr")) cfg.learning_rate = lr;
    if (sub->count("--beta")) cfg.beta = beta;
    if (sub->count("--batch")) cfg.batch_size = batch;
    if (sub->count("--epochs")) cfg.epochs = epochs;
    if (sub->count("--patience")) cfg.patience = patience;
    if (sub->count("--node-dropout")) cfg.node_dropout_rate = node_dropout;
    if (sub->count("--message-dropout")) cfg.message_dropout_rate = message_dropout;
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--negatives")) cfg.negatives_per_positive = negatives;
    if (sub->count("--dim")) cfg.embedding_dim = dim;
    if (sub->count("--layers")) cfg.num_layers = layers;
    if (sub->count("--schedule")) {
      if (schedule == "equal") cfg.schedule = StepSchedule::Equal;
      else if (schedule == "proportional") cfg.schedule = StepSchedule::Proportional;
      else throw ConfigError("unknown schedule '" + schedule + "'");
    }
    if (sub->count("--reg-batch-local")) cfg.reg_batch_local = true;
    cfg.validate();
    return cfg;
  }

  VariantFlags build_flags() const {
    VariantFlags flags;
    if (no_unified) flags.use_unified = false;
    if (!user_agg.empty()) flags.user_agg = user_agg_from_string(user_agg);
    if (!item_gamma.empty()) flags.item_gamma = item_gamma_from_string(item_gamma);
    if (no_fuse_global) flags.fuse_global = false;
    if (no_mtl) flags.mtl = false;
    if (!delta_query.empty()) flags.delta_query = delta_query_from_string(delta_query);
    return flags;
  }
};

// ---------------------------------------------------------------- prepare --

int cmd_prepare(const std::string& input, const std::string& behaviors,
                const std::string& delimiter, const std::string& output) {
  auto vocab = split_commas(behaviors);
  if (vocab.size() < 1) throw ConfigError("--behaviors must list at least one label");
  auto records = parse_log(input, vocab, parse_delimiter(delimiter));
  auto dedup = deduplicate(records);
  Dataset ds = build_dataset(dedup, vocab);
  save_bundle(ds, output);
  save_id_map(ds, output + ".idmap");

  int n_valid = 0, n_test = 0;
  for (int u = 0; u < ds.num_users; ++u) {
    n_valid += ds.valid_item[u] >= 0;
    n_test += ds.test_item[u] >= 0;
  }
  const int target = ds.target_behavior();

  std::ostringstream stats;
  stats << "users," << ds.num_users << "\n";
  stats << "items," << ds.num_items << "\n";
  for (int k = 0; k < ds.num_behaviors; ++k) {
    size_t total = ds.edges[k].size();
    if (k == target) total += static_cast<size_t>(n_valid) + n_test;
    stats << "interactions_" << ds.behavior_order[k] << "," << total << "\n";
  }
  stats << "target_train_edges," << ds.edges[target].size() << "\n";
  stats << "validation_users," << n_valid << "\n";
  stats << "test_users," << n_test << "\n";
  write_text_file(output + ".stats", stats.str());

  std::cout << "prepared " << output << "\n";
  std::cout << "  users: " << ds.num_users << "  items: " << ds.num_items << "\n";
  for (int k = 0; k < ds.num_behaviors; ++k) {
    size_t total = ds.edges[k].size();
    if (k == target) total += static_cast<size_t>(n_valid) + n_test;
    std::cout << "  " << ds.behavior_order[k] << ": " << total << " interactions\n";
  }
  std::cout << "  target training edges: " << ds.edges[target].size()
            << "  validation users: " << n_valid << "  test users: " << n_test << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ train --

struct GridAxis {
  std::string param;
  std::vector<double> values;
};

std::vector<GridAxis> parse_grid(const std::vector<std::string>& tokens) {
  std::vector<GridAxis> axes;
  for (const auto& tok : tokens) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw ConfigError("grid token '" + tok + "' must look like lr=1e-2,1e-3");
    GridAxis axis;
    axis.param = trim(tok.substr(0, eq));
    if (axis.param != "lr" && axis.param != "beta")
      throw ConfigError("grid search supports lr and beta, got '" + axis.param + "'");
    for (const auto& v : split_commas(tok.substr(eq + 1)))
      axis.values.push_back(parse_double(v, "--grid " + axis.param));
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.param + "' is empty");
    axes.push_back(std::move(axis));
  }
  return axes;
}

int cmd_train(const std::string& bundle_path, const std::string& out_model,
              const std::string& log_path, const std::vector<std::string>& grid_tokens,
              const TrainCliOptions& opts, const CLI::App* sub) {
  Dataset ds = load_bundle(bundle_path);
  TrainConfig base_cfg = opts.build_config(sub);
  VariantFlags flags = opts.build_flags();

  std::vector<TrainConfig> runs;
  std::vector<std::string> labels;
  if (grid_tokens.empty()) {
    runs.push_back(base_cfg);
    labels.push_back("single");
  } else {
    auto axes = parse_grid(grid_tokens);
    std::vector<double> lrs = {base_cfg.learning_rate};
    std::vector<double> betas = {base_cfg.beta};
    for (const auto& axis : axes)
      (axis.param == "lr" ? lrs : betas) = axis.values;
    for (double lr : lrs)
      for (double beta : betas) {
        TrainConfig cfg = base_cfg;
        cfg.learning_rate = lr;
        cfg.beta = beta;
        cfg.validate();
        runs.push_back(cfg);
        labels.push_back("lr=" + format_double(lr) + ",beta=" + format_double(beta));
      }
  }

  std::optional<TrainResult> best;
  size_t best_idx = 0;
  std::ostringstream grid_csv;
  for (size_t r = 0; r < runs.size(); ++r) {
    TrainResult res = train(ds, runs[r], flags);
    if (runs.size() > 1)
      std::cout << labels[r] << "  best val HR@10 " << format_double(res.best_val_hr10)
                << " at epoch " << res.best_epoch << "\n";
    grid_csv << labels[r] << "," << format_double(res.best_val_hr10) << "\n";
    if (!best || res.best_val_hr10 > best->best_val_hr10) {
      best = std::move(res);
      best_idx = r;
    }
  }

  save_model(best->params, flags, out_model);
  write_text_file(log_path, format_train_log(*best));
  if (runs.size() > 1) {
    write_text_file(out_model + ".grid.csv", grid_csv.str());
    std::cout << "selected " << labels[best_idx] << "\n";
  }
  std::cout << "model written to " << out_model << " (best epoch " << best->best_epoch
            << ", val HR@10 " << format_double(best->best_val_hr10) << ")\n";
  return kExitOk;
}

// --------------------------------------------------------------- evaluate --

void check_shapes(const ModelParams& params, const Dataset& ds) {
  if (params.num_users() != ds.num_users || params.num_items() != ds.num_items ||
      params.num_behaviors() != ds.num_behaviors)
    throw DimensionMismatch("model shape (" + std::to_string(params.num_users()) + "x" +
                            std::to_string(params.num_items()) +
                            ", K=" + std::to_string(params.num_behaviors()) +
                            ") does not match the bundle");
}

int cmd_evaluate(const std::string& bundle_path, const std::string& model_path,
                 const std::string& ks_spec, const std::string& out_path, bool exclude_aux,
                 int expect_dim) {
  Dataset ds = load_bundle(bundle_path);
  auto [params, flags] = load_model(model_path);
  check_shapes(params, ds);
  if (expect_dim > 0 && expect_dim != params.dim())
    throw DimensionMismatch("model embedding size " + std::to_string(params.dim()) +
                            " does not match --dim " + std::to_string(expect_dim));

  EvalOptions opts;
  opts.exclude_auxiliary = exclude_aux;
  EvalReport report = evaluate(params, ds, parse_ks(ks_spec), flags, opts);
  std::cout << format_report_table(report);
  if (!out_path.empty()) write_text_file(out_path, format_report_csv(report));
  return kExitOk;
}

// ----------------------------------------------------------------- ablate --

struct AblationRow {
  std::string name;
  VariantFlags flags;
};

std::vector<AblationRow> ablation_rows() {
  VariantFlags full;
  auto with = [&](auto setter) {
    VariantFlags f = full;
    setter(f);
    return f;
  };
  return {
      {"full", full},
      {"w/o. G", with([](VariantFlags& f) { f.use_unified = false; })},
      {"sum agg.", with([](VariantFlags& f) { f.user_agg = UserAgg::Sum; })},
      {"linear agg.", with([](VariantFlags& f) { f.user_agg = UserAgg::Linear; })},
      {"adaptive agg.", full},
      {"fix gamma_ik", with([](VariantFlags& f) { f.item_gamma = ItemGamma::FixedOne; })},
      {"w/o. w_k", with([](VariantFlags& f) { f.item_gamma = ItemGamma::CountsOnly; })},
      {"w. w_k", full},
      {"w/o. c.g.", with([](VariantFlags& f) { f.fuse_global = false; })},
      {"w. c.g.", full},
      {"w/o. MTL", with([](VariantFlags& f) { f.mtl = false; })},
      {"w. MTL", full},
  };
}

std::string flags_key(const VariantFlags& f) {
  return std::to_string(f.use_unified) + to_string(f.user_agg) + to_string(f.item_gamma) +
         std::to_string(f.fuse_global) + std::to_string(f.mtl) + to_string(f.delta_query);
}

int cmd_ablate(const std::string& bundle_path, const std::string& ks_spec,
               const std::string& variant_filter, const std::string& out_path,
               const TrainCliOptions& opts, const CLI::App* sub) {
  Dataset ds = load_bundle(bundle_path);
  TrainConfig cfg = opts.build_config(sub);
  std::vector<int> ks = parse_ks(ks_spec);

  auto rows = ablation_rows();
  if (!variant_filter.empty()) {
    std::vector<AblationRow> kept;
    for (auto& row : rows)
      if (row.name == variant_filter) kept.push_back(row);
    if (kept.empty()) throw ConfigError("unknown ablation variant '" + variant_filter + "'");
    rows = kept;
  }

  // identical flag sets share one training run (shared seed across variants)
  std::map<std::string, EvalReport> cache;
  std::ostringstream csv;
  std::ostringstream table;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-17s", "variant");
  table << buf;
  for (int k : ks) {
    std::snprintf(buf, sizeof(buf), "     HR@%-4d", k);
    table << buf;
    std::snprintf(buf, sizeof(buf), "   NDCG@%-4d", k);
    table << buf;
  }
  table << "\n";

  for (const auto& row : rows) {
    auto key = flags_key(row.flags);
    auto it = cache.find(key);
    if (it == cache.end()) {
      TrainResult res = train(ds, cfg, row.flags);
      EvalReport report = evaluate(res.params, ds, ks, row.flags);
      it = cache.emplace(key, std::move(report)).first;
    }
    const EvalReport& report = it->second;
    std::snprintf(buf, sizeof(buf), "%-17s", row.name.c_str());
    table << buf;
    for (int k : ks) {
      std::snprintf(buf, sizeof(buf), "%12.4f", report.hr.at(k));
      table << buf;
      std::snprintf(buf, sizeof(buf), "%12.4f", report.ndcg.at(k));
      table << buf;
    }
    table << "\n";
    for (int k : ks) {
      csv << row.name << "/HR@" << k << "," << format_double(report.hr.at(k)) << "\n";
      csv << row.name << "/NDCG@" << k << "," << format_double(report.ndcg.at(k)) << "\n";
    }
  }

  std::cout << table.str();
  if (!out_path.empty()) write_text_file(out_path, csv.str());
  return kExitOk;
}

// ------------------------------------------------------------- cold start --

int cmd_cold_start(const std::string& bundle_path, int n_cold, std::uint64_t cold_seed,
                   const std::string& ks_spec, const std::string& out_path,
                   const TrainCliOptions& opts, const CLI::App* sub) {
  Dataset ds = load_bundle(bundle_path);
  TrainConfig cfg = opts.build_config(sub);
  VariantFlags flags = opts.build_flags();

  ColdStartMask masked = mask_cold_start(ds, n_cold, cold_seed);
  std::cout << "masked " << masked.cold_users.size() << " cold-start users\n";
  TrainResult res = train(masked.dataset, cfg, flags);
  EvalReport report = evaluate_cold_start(res.params, masked.cold_users, masked.dataset,
                                          parse_ks(ks_spec), flags);
  std::cout << format_report_table(report);
  if (!out_path.empty()) write_text_file(out_path, format_report_csv(report));
  return kExitOk;
}

// ------------------------------------------------------- export-embeddings --

int cmd_export_embeddings(const std::string& bundle_path, const std::string& model_path,
                          const std::string& users_spec, const std::string& items_spec,
                          const std::string& out_dir, int dims) {
  Dataset ds = load_bundle(bundle_path);
  auto [params, flags] = load_model(model_path);
  check_shapes(params, ds);

  auto resolve = [](const std::vector<std::string>& ids, const std::vector<std::string>& raw,
                    const char* kind) {
    std::vector<std::pair<std::string, int>> found;
    for (const auto& id : ids) {
      auto it = std::find(raw.begin(), raw.end(), id);
      if (it == raw.end()) {
        std::cerr << "warning: unknown " << kind << " id '" << id << "', skipped\n";
        continue;
      }
      found.push_back({id, static_cast<int>(it - raw.begin())});
    }
    return found;
  };
  auto users = resolve(split_commas(users_spec), ds.user_ids, "user");
  auto items = resolve(split_commas(items_spec), ds.item_ids, "item");
  if (users.empty() && items.empty()) {
    std::cout << "nothing to export\n";
    return kExitOk;
  }

  GraphSet graphs = build_graphs(ds);
  ForwardTrace trace = forward(params, graphs, flags);
  const int d = params.dim();
  const int q = (dims > 0 && dims < d) ? dims : d;
  const int target = ds.target_behavior();

  std::filesystem::create_directories(out_dir);
  auto write_kind = [&](const std::string& file,
                        const std::vector<std::pair<std::string, int>>& entities,
                        const Mat& source) {
    std::ofstream out(std::filesystem::path(out_dir) / file);
    if (!out) throw IoError("cannot write export file: " + file);
    char buf[32];
    for (const auto& [raw, idx] : entities) {
      out << raw;
      for (int c = 0; c < q; ++c) {
        std::snprintf(buf, sizeof(buf), "%.10g", source.at(idx, c));
        out << " " << buf;
      }
      out << "\n";
    }
  };

  if (!users.empty()) {
    write_kind("users_global.txt", users, trace.global_user);
    for (int k = 0; k < ds.num_behaviors; ++k)
      write_kind("users_" + ds.behavior_order[k] + ".txt", users, trace.behavior_user[k]);
    write_kind("users_final.txt", users, trace.final_user[target]);
  }
  if (!items.empty()) {
    write_kind("items_global.txt", items, trace.global_item);
    for (int k = 0; k < ds.num_behaviors; ++k)
      write_kind("items_" + ds.behavior_order[k] + ".txt", items, trace.behavior_item[k]);
    write_kind("items_final.txt", items, trace.final_item);
  }
  std::cout << "exported " << users.size() << " users and " << items.size() << " items to "
            << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MB-HGCN multi-behavior recommender: training and evaluation engine"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "parse a raw log into a dataset bundle");
  std::string prep_input, prep_behaviors, prep_delim = "tab", prep_output;
  prepare->add_option("--input", prep_input, "raw interaction log")->required();
  prepare->add_option("--behaviors", prep_behaviors, "comma-separated labels, target last")
      ->required();
  prepare->add_option("--delimiter", prep_delim, "field delimiter (default tab)");
  prepare->add_option("--output", prep_output, "bundle path to write")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a bundle");
  std::string train_bundle, train_out, train_log;
  std::vector<std::string> grid_tokens;
  TrainCliOptions train_opts;
  train_cmd->add_option("--bundle", train_bundle, "dataset bundle")->required();
  train_cmd->add_option("--out", train_out, "model file to write")->required();
  train_cmd->add_option("--log", train_log, "training log path (default <out>.log)");
  train_cmd->add_option("--grid", grid_tokens,
                        "grid axes, e.g. --grid lr=1e-2,1e-3 beta=1e-2,1e-3");
  train_opts.register_options(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a trained model on the test split");
  std::string eval_bundle, eval_model, eval_ks = "10,20,50", eval_out;
  bool eval_exclude_aux = false;
  int eval_dim = 0;
  eval_cmd->add_option("--bundle", eval_bundle, "dataset bundle")->required();
  eval_cmd->add_option("--model", eval_model, "trained model file")->required();
  eval_cmd->add_option("--ks", eval_ks, "comma-separated cutoffs (default 10,20,50)");
  eval_cmd->add_option("--out", eval_out, "write metric,K,value lines here");
  eval_cmd->add_flag("--exclude-aux", eval_exclude_aux,
                     "also exclude auxiliary training items from candidates");
  eval_cmd->add_option("--dim", eval_dim, "assert the model embedding size");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare the ablation variants");
  std::string abl_bundle, abl_ks = "10", abl_variant, abl_out;
  TrainCliOptions abl_opts;
  ablate_cmd->add_option("--bundle", abl_bundle, "dataset bundle")->required();
  ablate_cmd->add_option("--ks", abl_ks, "cutoffs for the comparison table");
  ablate_cmd->add_option("--variant", abl_variant, "run a single named variant");
  ablate_cmd->add_option("--out", abl_out, "write key,value lines here");
  abl_opts.register_options(ablate_cmd);

  // cold-start
  auto* cold_cmd = app.add_subcommand("cold-start", "mask users, retrain, evaluate them");
  std::string cold_bundle, cold_ks = "10,20,50", cold_out;
  int n_cold = 1000;
  std::uint64_t cold_seed = 1;
  TrainCliOptions cold_opts;
  cold_cmd->add_option("--bundle", cold_bundle, "dataset bundle")->required();
  cold_cmd->add_option("--n-cold", n_cold, "number of cold-start users (default 1000)");
  cold_cmd->add_option("--cold-seed", cold_seed, "selection seed");
  cold_cmd->add_option("--ks", cold_ks, "evaluation cutoffs");
  cold_cmd->add_option("--out", cold_out, "write metric,K,value lines here");
  cold_opts.register_options(cold_cmd);

  // export-embeddings
  auto* export_cmd =
      app.add_subcommand("export-embeddings", "dump learned embeddings as text matrices");
  std::string exp_bundle, exp_model, exp_users, exp_items, exp_out = "embeddings";
  int exp_dims = 0;
  export_cmd->add_option("--bundle", exp_bundle, "dataset bundle")->required();
  export_cmd->add_option("--model", exp_model, "trained model file")->required();
  export_cmd->add_option("--users", exp_users, "comma-separated raw user ids");
  export_cmd->add_option("--items", exp_items, "comma-separated raw item ids");
  export_cmd->add_option("--out", exp_out, "output directory");
  export_cmd->add_option("--dims", exp_dims, "export only the first D dimensions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*prepare) return cmd_prepare(prep_input, prep_behaviors, prep_delim, prep_output);
    if (*train_cmd) {
      if (train_log.empty()) train_log = train_out + ".log";
      return cmd_train(train_bundle, train_out, train_log, grid_tokens, train_opts, train_cmd);
    }
    if (*eval_cmd)
      return cmd_evaluate(eval_bundle, eval_model, eval_ks, eval_out, eval_exclude_aux,
                          eval_dim);
    if (*ablate_cmd)
      return cmd_ablate(abl_bundle, abl_ks, abl_variant, abl_out, abl_opts, ablate_cmd);
    if (*cold_cmd)
      return cmd_cold_start(cold_bundle, n_cold, cold_seed, cold_ks, cold_out, cold_opts,
                            cold_cmd);
    if (*export_cmd)
      return cmd_export_embeddings(exp_bundle, exp_model, exp_users, exp_items, exp_out,
                                   exp_dims);
    return kExitInternal;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const MalformedLine& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const UnknownBehavior& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EmptyTargetBehavior& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NotEnoughTestUsers& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvalidRate& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
