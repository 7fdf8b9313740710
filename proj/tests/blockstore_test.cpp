#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

#include "drc/blockstore.hpp"

using namespace drc;
using namespace drc::store;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / fmt::format("drc_store_{}_{}", ::getpid(), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Bytes random_bytes(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

fs::path write_input(const fs::path& dir, const std::string& name, const Bytes& content) {
  auto p = dir / name;
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(content.data()),
                                          static_cast<std::streamsize>(content.size()));
  return p;
}

int count_block_files(const fs::path& root) {
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().extension() == ".blk") ++n;
  }
  return n;
}

struct StoreFixture {
  TempDir tmp;
  fs::path root;
  Bytes content;
  std::string name = "input.bin";
  BlockStore store;

  StoreFixture(const CodeScheme& s, int nodes, std::size_t size, std::uint64_t block_size, std::uint32_t seed = 1)
      : root(tmp.path() / "store"), content(random_bytes(size, seed)), store(BlockStore::init(root, nodes)) {
    store.put(write_input(tmp.path(), name, content), s, block_size, seed);
  }
};

}  // namespace

TEST(BlockStore, ThirtySixMiBIsOnePentagonStripe) {
  StoreFixture f(CodeScheme::pentagon(), 5, 36u << 20, kDefaultBlockSize);
  auto m = f.store.manifest(f.name);
  EXPECT_EQ(m.stripes.size(), 1u);
  EXPECT_EQ(m.padding, 0u);
  EXPECT_EQ(count_block_files(f.root), 20);
  EXPECT_EQ(f.store.get(f.name).data, f.content);
}

TEST(BlockStore, ThirtySevenMiBPadsToTwoStripes) {
  StoreFixture f(CodeScheme::pentagon(), 5, 37u << 20, kDefaultBlockSize);
  auto m = f.store.manifest(f.name);
  EXPECT_EQ(m.stripes.size(), 2u);
  EXPECT_EQ(m.padding, 35u << 20);
  EXPECT_EQ(count_block_files(f.root), 40);
  EXPECT_EQ(f.store.get(f.name).data, f.content);
}

TEST(BlockStore, EmptyFile) {
  StoreFixture f(CodeScheme::pentagon(), 5, 0, 4096);
  EXPECT_TRUE(f.store.manifest(f.name).stripes.empty());
  EXPECT_TRUE(f.store.get(f.name).data.empty());
  EXPECT_TRUE(f.store.fsck().clean());
}

TEST(BlockStore, RoundtripEverySchemeOnLargerCluster) {
  for (auto s : {CodeScheme::replication(2), CodeScheme::replication(3), CodeScheme::pentagon(),
                 CodeScheme::heptagon(), CodeScheme::heptagon_local(), CodeScheme::raid_mirror(9),
                 CodeScheme::raid_mirror(11)}) {
    StoreFixture f(s, 25, 100'003, 1024, 7);
    auto m = f.store.manifest(f.name);
    for (const auto& st : m.stripes) {
      std::set<NodeId> distinct(st.nodes.begin(), st.nodes.end());
      EXPECT_EQ(static_cast<int>(distinct.size()), s.length()) << s.name();
    }
    EXPECT_EQ(f.store.get(f.name).data, f.content) << s.name();
    EXPECT_TRUE(f.store.fsck().clean()) << s.name();
  }
}

TEST(BlockStore, ManifestJsonRoundtrip) {
  StoreFixture f(CodeScheme::heptagon_local(), 15, 5000, 64);
  auto m = f.store.manifest(f.name);
  nlohmann::json j = m;
  EXPECT_EQ(j.at("stripe_count").get<std::size_t>(), m.stripes.size());
  auto back = j.get<StoreManifest>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.scheme, CodeScheme::heptagon_local());
}

TEST(BlockStore, PlacementIsDeterministicPerSeed) {
  StoreFixture a(CodeScheme::pentagon(), 12, 20'000, 256, 3);
  StoreFixture b(CodeScheme::pentagon(), 12, 20'000, 256, 3);
  EXPECT_EQ(nlohmann::json(a.store.manifest(a.name)), nlohmann::json(b.store.manifest(b.name)));
}

TEST(BlockStore, GetUnderEveryRecoverableDownSet) {
  const auto s = CodeScheme::pentagon();
  const auto& model = code_model(s);
  for (std::uint64_t mask = 1; mask < 32; ++mask) {
    if (std::popcount(mask) > 2) continue;
    StoreFixture f(s, 5, 9 * 512 * 3, 512, 11);
    for (int n = 0; n < 5; ++n) {
      if (mask >> n & 1u) f.store.kill_node(n);
    }
    auto r = f.store.get(f.name);
    EXPECT_EQ(r.data, f.content) << "mask " << mask;
    // Only a data block with both copies down needs decoding; each costs 3 transfers.
    int lost_data = 0;
    const auto m = f.store.manifest(f.name);
    for (const auto& st : m.stripes) {
      for (int i = 0; i < model.data_count(); ++i) {
        bool all_down = true;
        for (const auto& rep : st.blocks[static_cast<std::size_t>(model.data_block_id(i))].replicas) {
          all_down = all_down && (mask >> rep.node & 1u);
        }
        lost_data += all_down;
      }
    }
    EXPECT_EQ(static_cast<int>(r.degraded.size()), lost_data);
    for (const auto& d : r.degraded) EXPECT_EQ(d.transfers, 3);
  }
}

TEST(BlockStore, ThreeKillsArePentagonDataLoss) {
  StoreFixture f(CodeScheme::pentagon(), 5, 10'000, 512);
  for (int n : {0, 2, 4}) f.store.kill_node(n);
  EXPECT_THROW(f.store.get(f.name), Unrecoverable);
  auto r = f.store.fsck();
  EXPECT_FALSE(r.fatal.empty());
  EXPECT_THROW(f.store.repair(), Unrecoverable);
}

TEST(BlockStore, FsckFindsMissingAndCorruptCopies) {
  StoreFixture f(CodeScheme::pentagon(), 5, 9 * 256, 256);
  EXPECT_TRUE(f.store.fsck().clean());
  auto m = f.store.manifest(f.name);
  const auto& rec = m.stripes[0].blocks[3];
  {
    auto p = f.root / rec.replicas[0].file;
    auto bytes = *store::detail::try_read_file(p);
    bytes[17] ^= 0x40;
    store::detail::write_file_atomic(p, bytes);
  }
  fs::remove(f.root / rec.replicas[1].file);
  auto r = f.store.fsck();
  ASSERT_EQ(r.corrupt.size(), 1u);
  ASSERT_EQ(r.missing.size(), 1u);
  EXPECT_EQ(r.corrupt[0].block, 3);
  EXPECT_EQ(r.corrupt[0].node, rec.replicas[0].node);
  EXPECT_EQ(r.missing[0].node, rec.replicas[1].node);
  EXPECT_TRUE(r.fatal.empty());
  // Both copies of block 3 are bad, so the read decodes it.
  auto got = f.store.get(f.name);
  EXPECT_EQ(got.data, f.content);
  EXPECT_EQ(got.degraded.size(), 1u);

  auto rep = f.store.repair();
  EXPECT_EQ(rep.bandwidth_blocks, rep.planned_bandwidth);
  EXPECT_TRUE(f.store.fsck().clean());
  EXPECT_TRUE(f.store.get(f.name).degraded.empty());
}

TEST(BlockStore, KilledNodeShowsAsMissing) {
  StoreFixture f(CodeScheme::pentagon(), 5, 9 * 128, 128);
  f.store.kill_node(2);
  auto r = f.store.fsck();
  EXPECT_EQ(r.missing.size(), 4u);
  for (const auto& i : r.missing) EXPECT_EQ(i.node, 2);
  EXPECT_FALSE(fs::exists(f.root / "n2"));
}

TEST(BlockStore, RepairBandwidthSingleAndDoubleFailures) {
  const int stripes = 3;
  for (auto killed : {std::vector<int>{1}, std::vector<int>{0, 3}}) {
    StoreFixture f(CodeScheme::pentagon(), 5, 9 * 1024 * stripes, 1024);
    for (int n : killed) f.store.kill_node(n);
    auto rep = f.store.repair();
    const int per_stripe = killed.size() == 1 ? 4 : 10;
    EXPECT_EQ(rep.plans_executed, stripes);
    EXPECT_EQ(rep.planned_bandwidth, per_stripe * stripes);
    EXPECT_EQ(rep.bandwidth_blocks, rep.planned_bandwidth);
    EXPECT_EQ(rep.bytes_moved, static_cast<std::uint64_t>(rep.bandwidth_blocks) * 1024);
    EXPECT_EQ(rep.revived, killed);
    EXPECT_TRUE(f.store.fsck().clean());
    EXPECT_EQ(f.store.get(f.name).data, f.content);
  }
}

TEST(BlockStore, RepairOnLargerClusterMatchesPlans) {
  StoreFixture f(CodeScheme::heptagon_local(), 20, 40 * 64 * 4, 64, 5);
  for (int n : {3, 9, 14}) f.store.kill_node(n);
  auto rep = f.store.repair();
  EXPECT_GT(rep.plans_executed, 0);
  EXPECT_EQ(rep.bandwidth_blocks, rep.planned_bandwidth);
  EXPECT_TRUE(f.store.fsck().clean());
  EXPECT_EQ(f.store.get(f.name).data, f.content);
}

TEST(BlockStore, RepairOfHealthyStoreDoesNothing) {
  StoreFixture f(CodeScheme::pentagon(), 5, 1000, 64);
  auto rep = f.store.repair();
  EXPECT_EQ(rep.plans_executed, 0);
  EXPECT_EQ(rep.bandwidth_blocks, 0);
}

TEST(BlockStore, KillAndReviveAreIdempotent) {
  TempDir tmp;
  auto s = BlockStore::init(tmp.path() / "st", 4);
  EXPECT_EQ(s.kill_node(1).status, NodeStatus::down);
  EXPECT_EQ(s.kill_node(1).status, NodeStatus::down);
  EXPECT_EQ(s.up_nodes(), (std::vector<NodeId>{0, 2, 3}));
  EXPECT_EQ(s.revive_node(1).status, NodeStatus::up);
  EXPECT_EQ(s.revive_node(1).status, NodeStatus::up);
  EXPECT_EQ(s.up_nodes().size(), 4u);
  EXPECT_THROW(s.kill_node(9), InvalidArgument);
  auto reopened = BlockStore::open(tmp.path() / "st");
  EXPECT_EQ(reopened.up_nodes().size(), 4u);
}

TEST(BlockStore, StateSurvivesReopen) {
  StoreFixture f(CodeScheme::pentagon(), 6, 4000, 100);
  f.store.kill_node(4);
  auto again = BlockStore::open(f.root);
  EXPECT_EQ(again.up_nodes(), (std::vector<NodeId>{0, 1, 2, 3, 5}));
  EXPECT_EQ(again.files(), std::vector<std::string>{f.name});
  EXPECT_EQ(again.get(f.name).data, f.content);
}

TEST(BlockStore, Errors) {
  TempDir tmp;
  EXPECT_THROW(BlockStore::init(tmp.path() / "a", 0), InvalidArgument);
  auto s = BlockStore::init(tmp.path() / "a", 4);
  EXPECT_THROW(BlockStore::init(tmp.path() / "a", 4), StoreError);
  EXPECT_THROW(BlockStore::open(tmp.path() / "nothing"), StoreError);
  auto in = write_input(tmp.path(), "f.bin", random_bytes(100, 1));
  EXPECT_THROW(s.put(in, CodeScheme::pentagon(), 64, 1), StoreError);  // 4 nodes < 5
  s.put(in, CodeScheme::replication(2), 64, 1);
  EXPECT_THROW(s.put(in, CodeScheme::replication(2), 64, 1), StoreError);
  EXPECT_THROW(s.put(in, CodeScheme::replication(2), 0, 1), InvalidArgument);
  EXPECT_THROW(s.manifest("nope"), StoreError);
}
