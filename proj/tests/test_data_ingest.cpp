#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "mbhgcn/data.hpp"
#include "mbhgcn/rng.hpp"
#include "test_helpers.hpp"

using namespace mbhgcn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents, const std::string& name) : path(name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

const std::vector<std::string> kVocab = {"view", "cart", "buy"};

}  // namespace

TEST_CASE("a single well-formed line parses to one record") {
  TempFile f("u1\ti1\tview\t100\n", "parse_single.tmp");
  auto records = parse_log(f.path, kVocab);
  REQUIRE(records.size() == 1);
  CHECK(records[0].user_id == "u1");
  CHECK(records[0].item_id == "i1");
  CHECK(records[0].behavior == "view");
  CHECK(records[0].timestamp == 100);
}

TEST_CASE("an empty file parses to an empty list") {
  TempFile f("", "parse_empty.tmp");
  CHECK(parse_log(f.path, kVocab).empty());
}

TEST_CASE("unknown behavior labels are rejected with the line number") {
  TempFile f("u1\ti1\tview\t5\nu1\ti1\tteleport\t5\n", "parse_unknown.tmp");
  try {
    parse_log(f.path, kVocab);
    FAIL("expected UnknownBehavior");
  } catch (const UnknownBehavior& e) {
    CHECK(e.label == "teleport");
    CHECK(e.line_no == 2);
  }
}

TEST_CASE("wrong field counts and bad timestamps are malformed") {
  TempFile three("u1\ti1\tview\n", "parse_three.tmp");
  CHECK_THROWS_AS(parse_log(three.path, kVocab), MalformedLine);
  TempFile bad_ts("u1\ti1\tview\tnotanumber\n", "parse_badts.tmp");
  CHECK_THROWS_AS(parse_log(bad_ts.path, kVocab), MalformedLine);
  TempFile neg_ts("u1\ti1\tview\t-4\n", "parse_negts.tmp");
  CHECK_THROWS_AS(parse_log(neg_ts.path, kVocab), MalformedLine);
  TempFile blank("u1\ti1\tview\t4\n\nu1\ti2\tview\t5\n", "parse_blank.tmp");
  CHECK_THROWS_AS(parse_log(blank.path, kVocab), MalformedLine);
}

TEST_CASE("missing files raise IoError") {
  CHECK_THROWS_AS(parse_log("no_such_file.tmp", kVocab), IoError);
}

TEST_CASE("custom delimiters are honored") {
  TempFile f("u1,i1,buy,7\n", "parse_comma.tmp");
  auto records = parse_log(f.path, kVocab, ',');
  REQUIRE(records.size() == 1);
  CHECK(records[0].behavior == "buy");
}

TEST_CASE("deduplication keeps the earliest record per triple") {
  std::vector<InteractionRecord> in = {{"u", "i", "buy", 5}, {"u", "i", "buy", 3}};
  auto out = deduplicate(in);
  REQUIRE(out.size() == 1);
  CHECK(out[0].timestamp == 3);
}

TEST_CASE("different behaviors on the same pair both survive") {
  std::vector<InteractionRecord> in = {{"u", "i", "view", 2}, {"u", "i", "buy", 2}};
  CHECK(deduplicate(in).size() == 2);
}

TEST_CASE("timestamp ties keep the first occurrence and survivor order") {
  std::vector<InteractionRecord> in = {
      {"u", "i", "buy", 4}, {"u", "j", "buy", 1}, {"u", "i", "buy", 4}};
  auto out = deduplicate(in);
  REQUIRE(out.size() == 2);
  CHECK(out[0].item_id == "i");
  CHECK(out[0].timestamp == 4);
  CHECK(out[1].item_id == "j");
}

TEST_CASE("deduplication is idempotent on random inputs") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<InteractionRecord> in;
    int n = 1 + uniform_index(rng, 60);
    for (int z = 0; z < n; ++z)
      in.push_back({"u" + std::to_string(uniform_index(rng, 4)),
                    "i" + std::to_string(uniform_index(rng, 4)),
                    kVocab[uniform_index(rng, 3)], uniform_index(rng, 5)});
    auto once = deduplicate(in);
    auto twice = deduplicate(once);
    REQUIRE(once.size() == twice.size());
    for (size_t z = 0; z < once.size(); ++z) {
      CHECK(once[z].user_id == twice[z].user_id);
      CHECK(once[z].item_id == twice[z].item_id);
      CHECK(once[z].behavior == twice[z].behavior);
      CHECK(once[z].timestamp == twice[z].timestamp);
    }
  }
}

TEST_CASE("a user with exactly two target interactions trains one and tests the last") {
  std::vector<InteractionRecord> in = {
      {"u1", "i1", "buy", 1}, {"u1", "i2", "buy", 2}, {"u1", "i3", "view", 1}};
  Dataset ds = build_dataset(deduplicate(in), {"view", "buy"});
  CHECK(ds.num_users == 1);
  CHECK(ds.num_items == 3);
  REQUIRE(ds.edges[1].size() == 1);
  CHECK(ds.edges[1][0] == std::pair<int, int>(0, 0));  // buy(t=1) trains
  CHECK(ds.valid_item[0] == -1);
  CHECK(ds.test_item[0] == 1);  // buy(t=2) is the test item
  CHECK(ds.edges[0].size() == 1);
}

TEST_CASE("three target interactions split into train, validation, and test") {
  std::vector<InteractionRecord> in = {
      {"u1", "i1", "buy", 1}, {"u1", "i2", "buy", 2}, {"u1", "i3", "buy", 3}};
  Dataset ds = build_dataset(deduplicate(in), {"buy"});
  REQUIRE(ds.edges[0].size() == 1);
  CHECK(ds.edges[0][0].second == 0);
  CHECK(ds.valid_item[0] == 1);
  CHECK(ds.test_item[0] == 2);
}

TEST_CASE("a single target interaction stays in training with no held-out items") {
  std::vector<InteractionRecord> in = {{"u1", "i1", "buy", 9}};
  Dataset ds = build_dataset(in, {"buy"});
  CHECK(ds.edges[0].size() == 1);
  CHECK(ds.valid_item[0] == -1);
  CHECK(ds.test_item[0] == -1);
}

TEST_CASE("timestamp ties in the target behavior resolve by input order") {
  std::vector<InteractionRecord> in = {
      {"u1", "i1", "buy", 7}, {"u1", "i2", "buy", 7}, {"u1", "i3", "buy", 7}};
  Dataset ds = build_dataset(in, {"buy"});
  CHECK(ds.edges[0][0].second == 0);
  CHECK(ds.valid_item[0] == 1);
  CHECK(ds.test_item[0] == 2);
}

TEST_CASE("datasets without the target behavior are rejected") {
  std::vector<InteractionRecord> in = {{"u1", "i1", "view", 1}};
  CHECK_THROWS_AS(build_dataset(in, {"view", "buy"}), EmptyTargetBehavior);
  CHECK_THROWS_AS(build_dataset({}, {"buy"}), EmptyTargetBehavior);
}

TEST_CASE("id mapping is a bijection in first-appearance order") {
  std::mt19937_64 rng(103);
  Dataset ds = testing::random_dataset(6, 7, 2, 0.4, rng);
  std::set<std::string> users(ds.user_ids.begin(), ds.user_ids.end());
  std::set<std::string> items(ds.item_ids.begin(), ds.item_ids.end());
  CHECK(static_cast<int>(users.size()) == ds.num_users);
  CHECK(static_cast<int>(items.size()) == ds.num_items);
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (auto& [u, i] : ds.edges[k]) {
      CHECK(u >= 0);
      CHECK(u < ds.num_users);
      CHECK(i >= 0);
      CHECK(i < ds.num_items);
    }
}

TEST_CASE("the split partitions each user's deduplicated target items") {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<InteractionRecord> raw;
    int n = 5 + uniform_index(rng, 80);
    for (int z = 0; z < n; ++z)
      raw.push_back({"u" + std::to_string(uniform_index(rng, 5)),
                     "i" + std::to_string(uniform_index(rng, 6)),
                     kVocab[uniform_index(rng, 3)], uniform_index(rng, 40)});
    auto dedup = deduplicate(raw);
    bool has_target = false;
    for (auto& r : dedup) has_target = has_target || r.behavior == "buy";
    if (!has_target) continue;
    Dataset ds = build_dataset(dedup, kVocab);

    std::vector<std::set<int>> all_target(ds.num_users), train_target(ds.num_users);
    for (auto& r : dedup) {
      if (r.behavior != "buy") continue;
      int u = -1, i = -1;
      for (int z = 0; z < ds.num_users; ++z)
        if (ds.user_ids[z] == r.user_id) u = z;
      for (int z = 0; z < ds.num_items; ++z)
        if (ds.item_ids[z] == r.item_id) i = z;
      all_target[u].insert(i);
    }
    for (auto& [u, i] : ds.edges[ds.target_behavior()]) {
      CHECK(train_target[u].insert(i).second);  // no duplicates
    }
    for (int u = 0; u < ds.num_users; ++u) {
      std::set<int> rebuilt = train_target[u];
      if (ds.valid_item[u] >= 0) CHECK(rebuilt.insert(ds.valid_item[u]).second);
      if (ds.test_item[u] >= 0) CHECK(rebuilt.insert(ds.test_item[u]).second);
      CHECK(rebuilt == all_target[u]);
    }
  }
}

TEST_CASE("stored item counts match a brute-force scan") {
  std::mt19937_64 rng(109);
  Dataset ds = testing::random_dataset(6, 8, 3, 0.35, rng);
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (int i = 0; i < ds.num_items; ++i) {
      std::unordered_set<int> users;
      for (auto& [u, item] : ds.edges[k])
        if (item == i) users.insert(u);
      CHECK(ds.item_counts[k][i] == static_cast<int>(users.size()));
    }
}

TEST_CASE("cold-start masking with zero users changes nothing") {
  std::mt19937_64 rng(113);
  Dataset ds = testing::random_dataset(5, 6, 2, 0.4, rng);
  auto masked = mask_cold_start(ds, 0, 9);
  CHECK(masked.cold_users.empty());
  CHECK(masked.dataset.edges == ds.edges);
}

TEST_CASE("cold users lose their target training edges and the matching auxiliary pairs") {
  // u0: views i0, i1; buys i0 (train), i2 (valid), i3 (test) -- after masking
  // only the view of i1 survives
  std::vector<InteractionRecord> in = {
      {"u0", "i0", "view", 1}, {"u0", "i1", "view", 2}, {"u0", "i0", "buy", 3},
      {"u0", "i2", "buy", 4},  {"u0", "i3", "buy", 5},
  };
  Dataset ds = build_dataset(deduplicate(in), {"view", "buy"});
  REQUIRE(ds.test_item[0] == 3);
  auto masked = mask_cold_start(ds, 1, 4);
  REQUIRE(masked.cold_users == std::vector<int>{0});
  CHECK(masked.dataset.edges[1].empty());
  REQUIRE(masked.dataset.edges[0].size() == 1);
  CHECK(masked.dataset.edges[0][0] == std::pair<int, int>(0, 1));
  CHECK(masked.dataset.test_item[0] == 3);  // evaluation target retained
}

TEST_CASE("requesting more cold users than test users fails") {
  std::mt19937_64 rng(127);
  Dataset ds = testing::random_dataset(4, 5, 2, 0.4, rng);
  CHECK_THROWS_AS(mask_cold_start(ds, ds.num_users + 1, 1), NotEnoughTestUsers);
}

TEST_CASE("masking is reproducible and leaves no target edges for cold users") {
  std::mt19937_64 rng(131);
  Dataset ds = testing::random_dataset(12, 10, 3, 0.3, rng);
  int n_test = static_cast<int>(ds.test_users().size());
  REQUIRE(n_test >= 3);
  auto a = mask_cold_start(ds, 3, 2024);
  auto b = mask_cold_start(ds, 3, 2024);
  CHECK(a.cold_users == b.cold_users);
  CHECK(a.dataset.edges == b.dataset.edges);

  std::set<int> cold(a.cold_users.begin(), a.cold_users.end());
  for (auto& [u, i] : a.dataset.edges[ds.target_behavior()]) CHECK(cold.count(u) == 0);
  // counts stay consistent after masking
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (int i = 0; i < ds.num_items; ++i) {
      int brute = 0;
      for (auto& [u, item] : a.dataset.edges[k]) brute += (item == i);
      CHECK(a.dataset.item_counts[k][i] == brute);
    }
}

TEST_CASE("bundles round-trip through save and load") {
  std::mt19937_64 rng(137);
  Dataset ds = testing::random_dataset(6, 7, 2, 0.4, rng);
  save_bundle(ds, "bundle_roundtrip.tmp");
  Dataset loaded = load_bundle("bundle_roundtrip.tmp");
  CHECK(loaded.num_users == ds.num_users);
  CHECK(loaded.num_items == ds.num_items);
  CHECK(loaded.behavior_order == ds.behavior_order);
  CHECK(loaded.user_ids == ds.user_ids);
  CHECK(loaded.item_ids == ds.item_ids);
  CHECK(loaded.edges == ds.edges);
  CHECK(loaded.valid_item == ds.valid_item);
  CHECK(loaded.test_item == ds.test_item);
  CHECK(loaded.item_counts == ds.item_counts);
  std::remove("bundle_roundtrip.tmp");
}

TEST_CASE("loading rejects files without the magic header") {
  TempFile f("not a bundle\n", "bundle_bad.tmp");
  CHECK_THROWS_AS(load_bundle(f.path), IoError);
}

TEST_CASE("the id map sidecar lists every entity") {
  std::mt19937_64 rng(139);
  Dataset ds = testing::random_dataset(4, 5, 2, 0.5, rng);
  save_id_map(ds, "idmap.tmp");
  std::ifstream in("idmap.tmp");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == ds.num_users + ds.num_items);
  std::remove("idmap.tmp");
}
