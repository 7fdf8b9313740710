#include <gtest/gtest.h>

#include <set>

#include "drc/repair.hpp"
#include "test_util.hpp"

using namespace drc;

namespace {

BlockReader reader_for(const CodeScheme& s, const std::map<BlockId, Bytes>& enc, std::uint64_t failed) {
  return [&s, &enc, failed](NodeIndex node, BlockId block) -> std::optional<Chunk> {
    if (node < 0 || (failed >> node & 1u)) return std::nullopt;
    const auto& on = code_model(s).blocks_on(node);
    if (std::find(on.begin(), on.end(), block) == on.end()) return std::nullopt;
    const auto& b = enc.at(block);
    return Chunk{b, crc32(b)};
  };
}

void expect_restores(const CodeScheme& s, const ErasurePattern& p, std::uint32_t seed) {
  auto data = testutil::random_data(s, 48, seed);
  auto enc = encode_stripe(s, data);
  auto plan = plan_repair(s, p);
  ExecStats stats;
  auto got = execute_plan(plan, reader_for(s, enc, p.mask()), &stats);
  EXPECT_EQ(stats.transfers, plan.bandwidth_blocks());
  std::set<BlockTarget> want;
  for (auto n : p.failed) {
    for (auto id : code_model(s).blocks_on(n)) want.insert({n, id});
  }
  EXPECT_EQ(std::set<BlockTarget>(plan.restores.begin(), plan.restores.end()), want);
  for (const auto& t : want) {
    ASSERT_TRUE(got.count(t.block));
    EXPECT_EQ(got.at(t.block), enc.at(t.block)) << s.name() << " block " << t.block;
  }
}

}  // namespace

TEST(PlanRepair, PentagonSingleIsFourCopies) {
  const auto s = CodeScheme::pentagon();
  for (int f = 0; f < 5; ++f) {
    auto plan = plan_repair(s, {f});
    EXPECT_EQ(plan.bandwidth_blocks(), 4);
    for (const auto& t : plan.transfers()) {
      EXPECT_TRUE(t.whole_copy());
      EXPECT_EQ(t.dst, f);
    }
    expect_restores(s, {f}, 100 + f);
  }
}

TEST(PlanRepair, PolygonDoubleBandwidthFormula) {
  for (int n = 3; n <= 9; ++n) {
    const auto s = CodeScheme::polygon(n);
    for_each_subset(n, 2, [&](std::uint64_t m) {
      auto p = ErasurePattern::from_mask(m);
      auto plan = plan_repair(s, p);
      EXPECT_EQ(plan.bandwidth_blocks(), 3 * (n - 2) + 1) << "n=" << n << " mask " << m;
      int copies = 0, partial = 0;
      for (const auto& t : plan.transfers()) (t.payload.size() > 1 ? partial : copies)++;
      EXPECT_EQ(partial, n - 2);
      EXPECT_EQ(copies, 2 * (n - 2) + 1);
      expect_restores(s, p, static_cast<std::uint32_t>(m));
    });
  }
  // The headline number.
  EXPECT_EQ(plan_repair(CodeScheme::pentagon(), {0, 1}).bandwidth_blocks(), 10);
  EXPECT_EQ(plan_repair(CodeScheme::heptagon(), {2, 5}).bandwidth_blocks(), 16);
}

TEST(PlanRepair, PolygonPartialParitiesExactlyCoverSurvivors) {
  for (int n : {5, 7}) {
    const auto s = CodeScheme::polygon(n);
    const auto& m = code_model(s);
    for_each_subset(n, 2, [&](std::uint64_t mask) {
      auto p = ErasurePattern::from_mask(mask);
      int f1 = *p.failed.begin(), f2 = *p.failed.rbegin();
      BlockId pair = m.edge_block(f1, f2);
      std::multiset<BlockId> covered;
      std::set<NodeIndex> senders;
      for (const auto& t : plan_repair(s, p).transfers()) {
        if (t.payload.size() == 1) continue;
        EXPECT_EQ(t.dst, f1);
        EXPECT_TRUE(senders.insert(t.src).second);
        for (const auto& term : t.payload) {
          EXPECT_EQ(term.coeff, 1);
          covered.insert(term.block);
          // Survivor-survivor edges go to their lower endpoint.
          const auto& hosts = m.block(term.block).hosts;
          if (!p.contains(hosts[0]) && !p.contains(hosts[1])) {
            EXPECT_EQ(t.src, hosts[0]);
          }
        }
      }
      std::multiset<BlockId> want;
      for (int b = 0; b < m.block_count(); ++b) {
        if (b != pair) want.insert(b);
      }
      EXPECT_EQ(covered, want);
    });
  }
}

TEST(PlanRepair, PairEdgeReconstructionEqualsXorOfOthers) {
  const auto s = CodeScheme::pentagon();
  auto data = testutil::random_data(s, 4096, 77);
  auto enc = encode_stripe(s, data);
  ErasurePattern p{1, 2};
  auto got = execute_plan(plan_repair(s, p), reader_for(s, enc, p.mask()));
  BlockId pair = code_model(s).edge_block(1, 2);
  Bytes x(4096, 0);
  for (const auto& [id, b] : enc) {
    if (id == pair) continue;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] ^= b[i];
  }
  EXPECT_EQ(got.at(pair), x);
}

TEST(PlanRepair, HeptagonLocalRepairsStayLocalForOneOrTwoFailures) {
  const auto s = CodeScheme::heptagon_local();
  for (int k = 1; k <= 2; ++k) {
    for_each_subset(7, k, [&](std::uint64_t mask) {
      for (int base : {0, 7}) {
        auto p = ErasurePattern::from_mask(mask << base);
        auto plan = plan_repair(s, p);
        for (const auto& t : plan.transfers()) {
          EXPECT_GE(t.src, base);
          EXPECT_LT(t.src, base + 7);
        }
        EXPECT_EQ(plan.bandwidth_blocks(), k == 1 ? 6 : 16);
      }
    });
  }
  expect_restores(s, {3, 5}, 8);
}

TEST(PlanRepair, HeptagonLocalTripleInOneHeptagonUsesOtherHeptagonAndGlobals) {
  const auto s = CodeScheme::heptagon_local();
  for_each_subset(7, 3, [&](std::uint64_t mask) {
    auto p = ErasurePattern::from_mask(mask);
    auto plan = plan_repair(s, p);
    std::set<NodeIndex> sources;
    for (const auto& t : plan.transfers()) sources.insert(t.src);
    EXPECT_TRUE(sources.count(14));
    EXPECT_TRUE(std::any_of(sources.begin(), sources.end(), [](NodeIndex n) { return n >= 7 && n < 14; }));
    expect_restores(s, p, static_cast<std::uint32_t>(mask));
  });
}

TEST(PlanRepair, EveryRecoverablePatternRestoresExactly) {
  for (const auto& s : testutil::all_schemes()) {
    const int n = s.length();
    const int max_k = std::min(n, s.is<HeptagonLocal>() ? 4 : 3);
    for (int k = 1; k <= max_k; ++k) {
      int step = 0;
      for_each_subset(n, k, [&](std::uint64_t mask) {
        // Thin out the largest enumerations; every pattern is still planned.
        auto p = ErasurePattern::from_mask(mask);
        if (!is_recoverable(s, p)) {
          EXPECT_THROW(plan_repair(s, p), Unrecoverable);
          return;
        }
        auto plan = plan_repair(s, p);
        if (++step % 7 == 0 || n <= 7) expect_restores(s, p, static_cast<std::uint32_t>(mask));
      });
    }
  }
}

TEST(PlanRepair, EmptyAndFatal) {
  EXPECT_TRUE(plan_repair(CodeScheme::pentagon(), {}).empty());
  EXPECT_THROW(plan_repair(CodeScheme::pentagon(), {0, 1, 2}), Unrecoverable);
  EXPECT_THROW(plan_repair(CodeScheme::pentagon(), {7}), InvalidArgument);
}

TEST(DegradedRead, PentagonVersusRaidMirror) {
  const auto pent = CodeScheme::pentagon();
  const auto& m = code_model(pent);
  auto plan = plan_degraded_read(pent, m.edge_block(0, 1), {0, 1});
  EXPECT_EQ(plan.bandwidth_blocks(), 3);
  for (const auto& t : plan.transfers()) EXPECT_EQ(t.dst, kReaderNode);

  const auto raid = CodeScheme::raid_mirror(9);
  for (BlockId b = 0; b < 10; ++b) {
    EXPECT_EQ(plan_degraded_read(raid, b, {2 * b, 2 * b + 1}).bandwidth_blocks(), 9);
  }

  const auto hept = CodeScheme::heptagon();
  const auto& hm = code_model(hept);
  for_each_subset(7, 2, [&](std::uint64_t mask) {
    auto p = ErasurePattern::from_mask(mask);
    int a = *p.failed.begin(), b = *p.failed.rbegin();
    EXPECT_EQ(plan_degraded_read(hept, hm.edge_block(a, b), p.failed).bandwidth_blocks(), 5);
  });
}

TEST(DegradedRead, ExecutesToTheLostBlock) {
  for (const auto& s : {CodeScheme::pentagon(), CodeScheme::heptagon(), CodeScheme::raid_mirror(9),
                        CodeScheme::heptagon_local()}) {
    auto enc = encode_stripe(s, testutil::random_data(s, 256, 5));
    const auto& m = code_model(s);
    for (const auto& b : m.blocks()) {
      std::set<NodeIndex> down(b.hosts.begin(), b.hosts.end());
      auto plan = plan_degraded_read(s, b.id, down);
      auto got = execute_plan(plan, reader_for(s, enc, ErasurePattern(down).mask()));
      EXPECT_EQ(got.at(b.id), enc.at(b.id));
    }
  }
}

TEST(DegradedRead, Errors) {
  const auto s = CodeScheme::pentagon();
  const auto& m = code_model(s);
  EXPECT_THROW(plan_degraded_read(s, m.edge_block(0, 1), {0}), InvalidArgument);
  EXPECT_THROW(plan_degraded_read(s, m.edge_block(0, 1), {0, 1, 2}), Unrecoverable);
  EXPECT_THROW(plan_degraded_read(s, 99, {0, 1}), InvalidArgument);
  // Replication with every copy gone.
  EXPECT_THROW(plan_degraded_read(CodeScheme::replication(2), 0, {0, 1}), Unrecoverable);
}

TEST(ExecutePlan, EmptyPlan) {
  RepairPlan plan;
  auto got = execute_plan(plan, [](NodeIndex, BlockId) -> std::optional<Chunk> { return std::nullopt; });
  EXPECT_TRUE(got.empty());
}

TEST(ExecutePlan, CorruptOrMissingSource) {
  const auto s = CodeScheme::pentagon();
  auto enc = encode_stripe(s, testutil::random_data(s, 4096, 9));
  ErasurePattern p{0, 1};
  auto plan = plan_repair(s, p);
  auto good = reader_for(s, enc, p.mask());
  auto corrupt = [&](NodeIndex n, BlockId b) -> std::optional<Chunk> {
    auto c = good(n, b);
    if (c && n == 3) c->bytes[17] ^= 0x40;  // stored CRC no longer matches
    return c;
  };
  EXPECT_THROW(execute_plan(plan, corrupt), ChecksumMismatch);
  auto missing = [&](NodeIndex n, BlockId b) -> std::optional<Chunk> {
    return n == 4 ? std::nullopt : good(n, b);
  };
  EXPECT_THROW(execute_plan(plan, missing), MissingBlock);
}
