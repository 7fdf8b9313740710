#include <gtest/gtest.h>

#include <set>

#include "drc/mapsched.hpp"

using namespace drc;
using namespace drc::mapsched;

namespace {

/// Simple augmenting-path matching over slot-expanded nodes.
int kuhn_local(const ClusterModel& c, const Workload& w) {
  const int right = c.total_slots();
  std::vector<int> owner(static_cast<std::size_t>(right), -1);
  int matched = 0;
  for (std::size_t t = 0; t < w.tasks.size(); ++t) {
    std::vector<bool> seen(static_cast<std::size_t>(right), false);
    std::function<bool(std::size_t)> try_task = [&](std::size_t u) {
      for (NodeId v : c.hosts[w.tasks[u]]) {
        for (int k = 0; k < c.slots; ++k) {
          auto r = static_cast<std::size_t>(v * c.slots + k);
          if (seen[r]) continue;
          seen[r] = true;
          if (owner[r] < 0 || try_task(static_cast<std::size_t>(owner[r]))) {
            owner[r] = static_cast<int>(u);
            return true;
          }
        }
      }
      return false;
    };
    if (try_task(t)) ++matched;
  }
  return matched;
}

void check_valid(const ClusterModel& c, const Workload& w, const Assignment& a, bool single_wave = true) {
  ASSERT_EQ(a.node.size(), w.tasks.size());
  std::vector<int> used(static_cast<std::size_t>(c.nodes), 0);
  for (std::size_t t = 0; t < w.tasks.size(); ++t) {
    ASSERT_GE(a.node[t], 0);
    ASSERT_LT(a.node[t], c.nodes);
    EXPECT_EQ(a.local[t], c.hosts_block(w.tasks[t], a.node[t]));
    ++used[static_cast<std::size_t>(a.node[t])];
  }
  if (single_wave) {
    for (int u : used) EXPECT_LE(u, c.slots);
  }
}

ClusterModel manual(int nodes, int slots, std::vector<std::vector<NodeId>> hosts) {
  ClusterModel c;
  c.nodes = nodes;
  c.slots = slots;
  c.hosts = std::move(hosts);
  return c;
}

Workload tasks(std::vector<std::size_t> t) {
  Workload w;
  w.load_pct = 100;
  w.tasks = std::move(t);
  return w;
}

const std::vector<CodeScheme>& sched_schemes() {
  static const std::vector<CodeScheme> s{CodeScheme::replication(2), CodeScheme::replication(3), CodeScheme::pentagon(),
                                         CodeScheme::heptagon(), CodeScheme::heptagon_local(),
                                         CodeScheme::raid_mirror(9)};
  return s;
}

}  // namespace

TEST(Workload, TaskCounts) {
  EXPECT_EQ(task_count(100, 4, 62.5), 250);
  EXPECT_EQ(task_count(25, 2, 100), 50);
  EXPECT_EQ(task_count(25, 8, 25), 50);
  EXPECT_EQ(task_count(10, 1, 5), 0);
  auto c = build_cluster(CodeScheme::pentagon(), 100, 4, 40, 1);
  EXPECT_EQ(generate_workload(c, 62.5, 3).tasks.size(), 250u);
  EXPECT_THROW(generate_workload(c, 0, 3), InvalidArgument);
  EXPECT_THROW(generate_workload(c, 250, 3), InvalidArgument);
  EXPECT_THROW(generate_workload(manual(2, 1, {}), 50, 3), InvalidArgument);
}

TEST(Workload, DeterministicPerSeed) {
  auto c1 = build_cluster(CodeScheme::heptagon(), 25, 4, 30, 11);
  auto c2 = build_cluster(CodeScheme::heptagon(), 25, 4, 30, 11);
  EXPECT_EQ(c1.hosts, c2.hosts);
  EXPECT_NE(c1.hosts, build_cluster(CodeScheme::heptagon(), 25, 4, 30, 12).hosts);
  EXPECT_EQ(generate_workload(c1, 75, 4).tasks, generate_workload(c1, 75, 4).tasks);
  EXPECT_NE(generate_workload(c1, 75, 4).tasks, generate_workload(c1, 75, 5).tasks);
}

TEST(Cluster, CatalogHoldsDataBlocks) {
  auto p = build_cluster(CodeScheme::pentagon(), 25, 2, 7, 1);
  EXPECT_EQ(p.catalog_size(), 7u * 9u);
  for (const auto& h : p.hosts) {
    ASSERT_EQ(h.size(), 2u);
    EXPECT_LT(h[0], h[1]);
    EXPECT_LT(h[1], 25);
  }
  auto r = build_cluster(CodeScheme::replication(2), 25, 2, 10, 1);
  EXPECT_EQ(r.catalog_size(), 10u);
  for (const auto& h : r.hosts) {
    ASSERT_EQ(h.size(), 2u);
    EXPECT_NE(h[0], h[1]);
  }
  auto hl = build_cluster(CodeScheme::heptagon_local(), 25, 2, 3, 1);
  EXPECT_EQ(hl.catalog_size(), 3u * 40u);
  for (const auto& h : hl.hosts) EXPECT_EQ(h.size(), 2u);
}

TEST(Cluster, StripeNodesAreDistinct) {
  for (auto layout : {StripeLayoutMode::random, StripeLayoutMode::rotated}) {
    auto c = build_cluster(CodeScheme::heptagon(), 25, 2, 5, 3, layout);
    ASSERT_EQ(c.catalog_size(), 5u * 20u);
    // Each stripe's 20 data blocks span exactly 7 distinct nodes.
    for (std::size_t s = 0; s < 5; ++s) {
      std::set<NodeId> nodes;
      for (std::size_t b = 0; b < 20; ++b) nodes.insert(c.hosts[s * 20 + b].begin(), c.hosts[s * 20 + b].end());
      EXPECT_EQ(nodes.size(), 7u);
    }
  }
}

TEST(Cluster, Errors) {
  EXPECT_THROW(build_cluster(CodeScheme::heptagon_local(), 13, 2, 1, 1), InvalidArgument);
  EXPECT_NO_THROW(build_cluster(CodeScheme::heptagon_local(), 14, 2, 1, 1));
  EXPECT_THROW(build_cluster(CodeScheme::pentagon(), 4, 2, 1, 1), InvalidArgument);
  EXPECT_THROW(build_cluster(CodeScheme::pentagon(), 5, 0, 1, 1), InvalidArgument);
  EXPECT_THROW(build_cluster(CodeScheme::pentagon(), 5, 1, 0, 1), InvalidArgument);
  EXPECT_EQ(placed_nodes(CodeScheme::heptagon_local()), 14);
  EXPECT_EQ(default_stripes(CodeScheme::pentagon(), 25, 2), 12);  // ceil(100 / 9)
  EXPECT_EQ(scheduler_from_string("matching"), Scheduler::maxmatch);
  EXPECT_THROW(scheduler_from_string("fifo"), InvalidArgument);
}

TEST(Schedulers, RespectCapacityAndReportLocality) {
  for (const auto& s : sched_schemes()) {
    for (int mu : {1, 2, 4}) {
      for (double load : {30.0, 75.0, 100.0}) {
        auto c = build_cluster(s, 20, mu, default_stripes(s, 20, mu), derive_seed(1, {static_cast<std::uint64_t>(mu)}));
        auto w = generate_workload(c, load, 9);
        check_valid(c, w, schedule_maxmatch(c, w));
        check_valid(c, w, schedule_delay(c, w, 1, 5));
        check_valid(c, w, schedule_delay(c, w, 0, 5));
        check_valid(c, w, schedule_peeling(c, w, 5));
      }
    }
  }
}

TEST(Schedulers, MaxMatchIsOptimal) {
  for (const auto& s : sched_schemes()) {
    for (int rep = 0; rep < 10; ++rep) {
      const int mu = 1 + rep % 4;
      auto c = build_cluster(s, 22, mu, default_stripes(s, 22, mu, 1.0 + rep % 3), derive_seed(2, {static_cast<std::uint64_t>(rep)}));
      auto w = generate_workload(c, 40.0 + 15 * (rep % 5), derive_seed(3, {static_cast<std::uint64_t>(rep)}));
      const int best = kuhn_local(c, w);
      EXPECT_EQ(schedule_maxmatch(c, w).local_tasks(), best) << s.name();
      EXPECT_LE(schedule_delay(c, w, 1, rep).local_tasks(), best) << s.name();
      EXPECT_LE(schedule_peeling(c, w, rep).local_tasks(), best) << s.name();
    }
  }
}

TEST(Schedulers, NodeCapacityLimitsLocality) {
  auto c = manual(3, 2, {{0}});
  auto w = tasks({0, 0, 0, 0});
  for (auto s : {Scheduler::maxmatch, Scheduler::delay, Scheduler::peeling}) {
    auto a = schedule(c, w, s, 5, 1);
    check_valid(c, w, a);
    EXPECT_EQ(a.local_tasks(), 2) << to_string(s);
  }
}

TEST(Schedulers, PeelingPlacesForcedTasksFirst) {
  // Block 0 lives on nodes 0 and 1, block 1 only on node 0. Taking node 0 for
  // the first task would force the second remote.
  auto c = manual(2, 1, {{0, 1}, {0}});
  auto w = tasks({0, 1});
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_EQ(schedule_peeling(c, w, seed).local_tasks(), 2);
  EXPECT_EQ(schedule_maxmatch(c, w).local_tasks(), 2);
}

TEST(Schedulers, PatientDelaySchedulingFindsPerfectPlacement) {
  std::vector<std::vector<NodeId>> hosts;
  std::vector<std::size_t> t;
  for (int v = 0; v < 10; ++v) {
    hosts.push_back({v});
    t.push_back(static_cast<std::size_t>(9 - v));
  }
  auto c = manual(10, 1, hosts);
  auto w = tasks(t);
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_EQ(schedule_delay(c, w, 100, seed).locality_pct(), 100.0);
  EXPECT_EQ(schedule_maxmatch(c, w).locality_pct(), 100.0);
}

TEST(Schedulers, ZeroDelayLaunchesHeadTaskAnywhere) {
  // With no patience the first heartbeat takes the head task whatever node it is.
  auto c = manual(2, 1, {{1}, {0}});
  auto w = tasks({0, 1});
  auto a = schedule_delay(c, w, 0, 1);
  check_valid(c, w, a);
  EXPECT_LE(a.local_tasks(), 2);
}

TEST(Schedulers, OverloadedWaveThrows) {
  auto c = manual(2, 1, {{0}});
  auto w = tasks({0, 0, 0});
  EXPECT_THROW(schedule_maxmatch(c, w), Overload);
  EXPECT_THROW(schedule_delay(c, w, 1, 1), Overload);
  EXPECT_THROW(schedule_peeling(c, w, 1), Overload);
}

TEST(Schedulers, LoadsAboveCapacityRunInWaves) {
  auto c = build_cluster(CodeScheme::pentagon(), 10, 2, 10, 4);
  auto w = generate_workload(c, 150, 8);
  ASSERT_EQ(w.tasks.size(), 30u);
  for (auto s : {Scheduler::maxmatch, Scheduler::delay, Scheduler::peeling}) {
    auto a = schedule(c, w, s, 1, 2);
    check_valid(c, w, a, false);
    // The first wave fills every slot once.
    std::vector<int> used(10, 0);
    for (std::size_t t = 0; t < 20; ++t) ++used[static_cast<std::size_t>(a.node[t])];
    for (int u : used) EXPECT_EQ(u, 2);
  }
}

TEST(Schedulers, DeterministicPerSeed) {
  auto c = build_cluster(CodeScheme::heptagon(), 25, 4, 20, 6);
  auto w = generate_workload(c, 80, 6);
  EXPECT_EQ(schedule_delay(c, w, 1, 3).node, schedule_delay(c, w, 1, 3).node);
  EXPECT_EQ(schedule_peeling(c, w, 3).node, schedule_peeling(c, w, 3).node);
  EXPECT_EQ(schedule_maxmatch(c, w).node, schedule_maxmatch(c, w).node);
}

TEST(Sweep, ShapeAndMonotoneLoad) {
  SweepConfig cfg;
  cfg.slots = {2};
  cfg.reps = 8;
  cfg.seed = 17;
  auto r = locality_sweep(cfg);
  EXPECT_EQ(r.instances.size(), 3u * 3u * 4u * 8u);
  EXPECT_EQ(r.summary.size(), 3u * 3u * 4u);
  for (const auto& s : cfg.schemes) {
    for (auto sched : cfg.schedulers) {
      EXPECT_GE(r.find(s.name(), sched, 2, 25).mean_locality_pct + 0.5, r.find(s.name(), sched, 2, 100).mean_locality_pct);
    }
    for (double load : cfg.loads) {
      const auto& best = r.find(s.name(), Scheduler::maxmatch, 2, load);
      EXPECT_GE(best.mean_locality_pct, r.find(s.name(), Scheduler::delay, 2, load).mean_locality_pct);
      EXPECT_GE(best.mean_locality_pct, r.find(s.name(), Scheduler::peeling, 2, load).mean_locality_pct);
      EXPECT_DOUBLE_EQ(best.remote_traffic_bytes, best.mean_remote_blocks * static_cast<double>(cfg.block_size));
    }
  }
  EXPECT_THROW(r.find("pentagon", Scheduler::delay, 3, 25), InvalidArgument);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  SweepConfig cfg;
  cfg.slots = {2, 4};
  cfg.loads = {50, 100};
  cfg.reps = 4;
  auto a = locality_sweep(cfg);
  cfg.threads = 4;
  auto b = locality_sweep(cfg);
  ASSERT_EQ(a.instances.size(), b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    EXPECT_EQ(a.instances[i].local_tasks, b.instances[i].local_tasks);
    EXPECT_EQ(a.instances[i].seed, b.instances[i].seed);
  }
}

TEST(Sweep, SchedulersShareInstances) {
  SweepConfig cfg;
  cfg.slots = {4};
  cfg.loads = {75};
  cfg.reps = 3;
  auto r = locality_sweep(cfg);
  for (std::size_t i = 0; i + 2 < r.instances.size(); i += 3) {
    EXPECT_EQ(r.instances[i].seed, r.instances[i + 1].seed);
    EXPECT_EQ(r.instances[i].tasks, r.instances[i + 2].tasks);
  }
}

TEST(Sweep, RejectsBadConfig) {
  SweepConfig cfg;
  cfg.reps = 0;
  EXPECT_THROW(locality_sweep(cfg), InvalidArgument);
  cfg = {};
  cfg.delay = -1;
  EXPECT_THROW(locality_sweep(cfg), InvalidArgument);
}
