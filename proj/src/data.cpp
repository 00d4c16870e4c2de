#include "mbhgcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "mbhgcn/rng.hpp"

namespace mbhgcn {

namespace {

std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

std::vector<std::vector<int>> Dataset::user_counts() const {
  std::vector<std::vector<int>> counts(num_behaviors, std::vector<int>(num_users, 0));
  for (int k = 0; k < num_behaviors; ++k)
    for (const auto& [u, i] : edges[k]) counts[k][u]++;
  return counts;
}

std::vector<InteractionRecord> parse_log(const std::string& path,
                                         const std::vector<std::string>& behavior_vocab,
                                         char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path);
  std::unordered_set<std::string> vocab(behavior_vocab.begin(), behavior_vocab.end());

  std::vector<InteractionRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split(line, delimiter);
    if (fields.size() != 4)
      throw MalformedLine(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty())
      throw MalformedLine(line_no, "empty user or item id");
    long long ts = 0;
    const auto& tsf = fields[3];
    auto [ptr, ec] = std::from_chars(tsf.data(), tsf.data() + tsf.size(), ts);
    if (ec != std::errc{} || ptr != tsf.data() + tsf.size())
      throw MalformedLine(line_no, "bad timestamp '" + tsf + "'");
    if (ts < 0) throw MalformedLine(line_no, "negative timestamp");
    if (!vocab.count(fields[2])) throw UnknownBehavior(fields[2], line_no);
    records.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2]), ts});
  }
  if (in.bad()) throw IoError("read error on: " + path);
  return records;
}

std::vector<InteractionRecord> deduplicate(const std::vector<InteractionRecord>& records) {
  // key -> index of the current best record (min timestamp, earliest input)
  std::map<std::tuple<std::string, std::string, std::string>, size_t> best;
  for (size_t idx = 0; idx < records.size(); ++idx) {
    const auto& r = records[idx];
    auto key = std::make_tuple(r.user_id, r.item_id, r.behavior);
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(std::move(key), idx);
    } else if (records[idx].timestamp < records[it->second].timestamp) {
      it->second = idx;
    }
  }
  std::vector<size_t> keep;
  keep.reserve(best.size());
  for (const auto& [key, idx] : best) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  std::vector<InteractionRecord> out;
  out.reserve(keep.size());
  for (size_t idx : keep) out.push_back(records[idx]);
  return out;
}

Dataset build_dataset(const std::vector<InteractionRecord>& records,
                      const std::vector<std::string>& behavior_order) {
  Dataset ds;
  ds.num_behaviors = static_cast<int>(behavior_order.size());
  ds.behavior_order = behavior_order;

  std::unordered_map<std::string, int> behavior_index;
  for (int k = 0; k < ds.num_behaviors; ++k) behavior_index[behavior_order[k]] = k;

  std::unordered_map<std::string, int> user_index, item_index;
  auto map_id = [](std::unordered_map<std::string, int>& index, std::vector<std::string>& ids,
                   const std::string& raw) {
    auto it = index.find(raw);
    if (it != index.end()) return it->second;
    int idx = static_cast<int>(ids.size());
    index.emplace(raw, idx);
    ids.push_back(raw);
    return idx;
  };

  struct Interaction {
    int user, item;
    long long timestamp;
    size_t order;
  };
  std::vector<std::vector<Interaction>> per_behavior(ds.num_behaviors);
  for (size_t idx = 0; idx < records.size(); ++idx) {
    const auto& r = records[idx];
    auto bit = behavior_index.find(r.behavior);
    if (bit == behavior_index.end()) throw UnknownBehavior(r.behavior, -1);
    int u = map_id(user_index, ds.user_ids, r.user_id);
    int i = map_id(item_index, ds.item_ids, r.item_id);
    per_behavior[bit->second].push_back({u, i, r.timestamp, idx});
  }
  ds.num_users = static_cast<int>(ds.user_ids.size());
  ds.num_items = static_cast<int>(ds.item_ids.size());

  const int target = ds.num_behaviors - 1;
  if (per_behavior[target].empty())
    throw EmptyTargetBehavior("no record carries the target behavior '" +
                              behavior_order[target] + "'");

  ds.valid_item.assign(ds.num_users, -1);
  ds.test_item.assign(ds.num_users, -1);

  // Chronological leave-one-out on the target behavior, input order breaking
  // timestamp ties. One interaction trains; with two the last is the test
  // item; with three or more the second-to-last is held for validation.
  std::vector<std::vector<Interaction>> target_by_user(ds.num_users);
  for (const auto& it : per_behavior[target]) target_by_user[it.user].push_back(it);

  std::vector<std::pair<size_t, std::pair<int, int>>> target_train;  // (order, edge)
  for (int u = 0; u < ds.num_users; ++u) {
    auto& list = target_by_user[u];
    if (list.empty()) continue;
    std::sort(list.begin(), list.end(), [](const Interaction& a, const Interaction& b) {
      return std::tie(a.timestamp, a.order) < std::tie(b.timestamp, b.order);
    });
    size_t n = list.size();
    size_t train_end = n;
    if (n >= 2) {
      ds.test_item[u] = list[n - 1].item;
      train_end = n - 1;
    }
    if (n >= 3) {
      ds.valid_item[u] = list[n - 2].item;
      train_end = n - 2;
    }
    for (size_t j = 0; j < train_end; ++j)
      target_train.push_back({list[j].order, {u, list[j].item}});
  }
  std::sort(target_train.begin(), target_train.end());

  ds.edges.assign(ds.num_behaviors, {});
  for (int k = 0; k < target; ++k) {
    ds.edges[k].reserve(per_behavior[k].size());
    for (const auto& it : per_behavior[k]) ds.edges[k].push_back({it.user, it.item});
  }
  ds.edges[target].reserve(target_train.size());
  for (const auto& [order, edge] : target_train) ds.edges[target].push_back(edge);

  ds.item_counts.assign(ds.num_behaviors, std::vector<int>(ds.num_items, 0));
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (const auto& [u, i] : ds.edges[k]) ds.item_counts[k][i]++;

  return ds;
}

ColdStartMask mask_cold_start(const Dataset& base, int n_cold, std::uint64_t seed) {
  auto candidates = base.test_users();
  if (n_cold > static_cast<int>(candidates.size()))
    throw NotEnoughTestUsers("requested " + std::to_string(n_cold) + " cold users, only " +
                             std::to_string(candidates.size()) + " test users available");

  ColdStartMask out;
  out.dataset = base;
  if (n_cold <= 0) return out;

  // Partial Fisher-Yates over the test-user list.
  std::mt19937_64 rng(seed);
  int n = static_cast<int>(candidates.size());
  for (int j = 0; j < n_cold; ++j) {
    int pick = j + uniform_index(rng, n - j);
    std::swap(candidates[j], candidates[pick]);
  }
  out.cold_users.assign(candidates.begin(), candidates.begin() + n_cold);
  std::sort(out.cold_users.begin(), out.cold_users.end());

  std::vector<char> is_cold(base.num_users, 0);
  for (int u : out.cold_users) is_cold[u] = 1;

  const int target = base.target_behavior();
  // Target training items per cold user, before removal.
  std::vector<std::unordered_set<int>> target_items(base.num_users);
  for (const auto& [u, i] : base.edges[target])
    if (is_cold[u]) target_items[u].insert(i);

  Dataset& ds = out.dataset;
  for (int k = 0; k < ds.num_behaviors; ++k) {
    std::vector<std::pair<int, int>> kept;
    kept.reserve(ds.edges[k].size());
    for (const auto& edge : ds.edges[k]) {
      const auto& [u, i] = edge;
      bool drop = false;
      if (is_cold[u]) {
        if (k == target)
          drop = true;
        else
          drop = target_items[u].count(i) > 0;
      }
      if (!drop) kept.push_back(edge);
    }
    ds.edges[k] = std::move(kept);
  }

  ds.item_counts.assign(ds.num_behaviors, std::vector<int>(ds.num_items, 0));
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (const auto& [u, i] : ds.edges[k]) ds.item_counts[k][i]++;

  return out;
}

void save_bundle(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write bundle: " + path);
  out << kBundleMagic << "\n";
  out << "users " << ds.num_users << "\n";
  out << "items " << ds.num_items << "\n";
  out << "behaviors " << ds.num_behaviors;
  for (const auto& b : ds.behavior_order) out << " " << b;
  out << "\n";
  out << "user_ids\n";
  for (const auto& id : ds.user_ids) out << id << "\n";
  out << "item_ids\n";
  for (const auto& id : ds.item_ids) out << id << "\n";
  for (int k = 0; k < ds.num_behaviors; ++k) {
    out << "edges " << k << " " << ds.edges[k].size() << "\n";
    for (const auto& [u, i] : ds.edges[k]) out << u << " " << i << "\n";
  }
  auto write_split = [&](const char* tag, const std::vector<int>& held) {
    int count = 0;
    for (int v : held) count += (v >= 0);
    out << tag << " " << count << "\n";
    for (int u = 0; u < ds.num_users; ++u)
      if (held[u] >= 0) out << u << " " << held[u] << "\n";
  };
  write_split("valid", ds.valid_item);
  write_split("test", ds.test_item);
  out << "end\n";
  if (!out) throw IoError("write error on bundle: " + path);
}

namespace {

std::string read_line_or_throw(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("truncated bundle: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Dataset load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bundle: " + path);
  if (read_line_or_throw(in, path) != kBundleMagic)
    throw IoError("not a " + std::string(kBundleMagic) + " bundle: " + path);

  Dataset ds;
  auto expect = [&](const std::string& key) {
    std::string line = read_line_or_throw(in, path);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != key) throw IoError("bundle: expected '" + key + "', got '" + tag + "'");
    return ss;
  };

  {
    auto ss = expect("users");
    ss >> ds.num_users;
  }
  {
    auto ss = expect("items");
    ss >> ds.num_items;
  }
  {
    auto ss = expect("behaviors");
    ss >> ds.num_behaviors;
    std::string label;
    while (ss >> label) ds.behavior_order.push_back(label);
    if (static_cast<int>(ds.behavior_order.size()) != ds.num_behaviors)
      throw IoError("bundle: behavior label count mismatch");
  }
  if (ds.num_users < 0 || ds.num_items < 0 || ds.num_behaviors <= 0)
    throw IoError("bundle: bad shape header");

  if (read_line_or_throw(in, path) != "user_ids") throw IoError("bundle: missing user_ids");
  ds.user_ids.reserve(ds.num_users);
  for (int u = 0; u < ds.num_users; ++u) ds.user_ids.push_back(read_line_or_throw(in, path));
  if (read_line_or_throw(in, path) != "item_ids") throw IoError("bundle: missing item_ids");
  ds.item_ids.reserve(ds.num_items);
  for (int i = 0; i < ds.num_items; ++i) ds.item_ids.push_back(read_line_or_throw(in, path));

  ds.edges.assign(ds.num_behaviors, {});
  for (int k = 0; k < ds.num_behaviors; ++k) {
    auto ss = expect("edges");
    int kk = -1;
    size_t count = 0;
    ss >> kk >> count;
    if (kk != k) throw IoError("bundle: edge section out of order");
    ds.edges[k].reserve(count);
    for (size_t e = 0; e < count; ++e) {
      std::istringstream ls(read_line_or_throw(in, path));
      int u = -1, i = -1;
      ls >> u >> i;
      if (u < 0 || u >= ds.num_users || i < 0 || i >= ds.num_items)
        throw IoError("bundle: edge index out of range");
      ds.edges[k].push_back({u, i});
    }
  }

  ds.valid_item.assign(ds.num_users, -1);
  ds.test_item.assign(ds.num_users, -1);
  auto read_split = [&](const char* tag, std::vector<int>& held) {
    auto ss = expect(tag);
    int count = 0;
    ss >> count;
    for (int e = 0; e < count; ++e) {
      std::istringstream ls(read_line_or_throw(in, path));
      int u = -1, i = -1;
      ls >> u >> i;
      if (u < 0 || u >= ds.num_users || i < 0 || i >= ds.num_items)
        throw IoError("bundle: split index out of range");
      held[u] = i;
    }
  };
  read_split("valid", ds.valid_item);
  read_split("test", ds.test_item);
  if (read_line_or_throw(in, path) != "end") throw IoError("bundle: missing end marker");

  ds.item_counts.assign(ds.num_behaviors, std::vector<int>(ds.num_items, 0));
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (const auto& [u, i] : ds.edges[k]) ds.item_counts[k][i]++;

  return ds;
}

void save_id_map(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write id map: " + path);
  for (int u = 0; u < ds.num_users; ++u) out << "user\t" << ds.user_ids[u] << "\t" << u << "\n";
  for (int i = 0; i < ds.num_items; ++i) out << "item\t" << ds.item_ids[i] << "\t" << i << "\n";
  if (!out) throw IoError("write error on id map: " + path);
}

}  // namespace mbhgcn
