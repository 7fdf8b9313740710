#pragma once

// Map-task placement on a cluster that stores data blocks under a code
// scheme. A task reads one data block and is local when it runs on a node
// holding a copy of that block.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "drc/codes.hpp"
#include "drc/errors.hpp"
#include "drc/parallel.hpp"
#include "drc/random.hpp"

namespace drc::mapsched {

struct ClusterModel {
  int nodes = 0;
  int slots = 0;
  /// Catalog entry i lists the nodes holding data block i, ascending.
  std::vector<std::vector<NodeId>> hosts;

  int total_slots() const { return nodes * slots; }
  std::size_t catalog_size() const { return hosts.size(); }
  bool hosts_block(std::size_t block, NodeId node) const {
    const auto& h = hosts[block];
    return std::binary_search(h.begin(), h.end(), node);
  }
};

/// Nodes of a stripe that take part in task placement. The heptagon-local
/// global node holds no data blocks and is left out.
inline int placed_nodes(const CodeScheme& scheme) {
  return scheme.is<HeptagonLocal>() ? 14 : scheme.length();
}

/// Stripes whose data blocks fill `waves` full waves of slots, rounded up.
inline int default_stripes(const CodeScheme& scheme, int nodes, int slots, double waves = 2.0) {
  if (!(waves > 0)) throw InvalidArgument("catalog waves must be positive");
  return std::max(1, static_cast<int>(std::ceil(waves * nodes * slots / scheme.data_blocks() - 1e-9)));
}

enum class StripeLayoutMode {
  /// Each stripe on an independent random set of distinct nodes.
  random,
  /// Stripes on consecutive runs of one seeded node permutation, wrapping
  /// around, so they tile the cluster evenly. Replication still uses random sets.
  rotated,
};

inline std::string to_string(StripeLayoutMode m) { return m == StripeLayoutMode::random ? "random" : "rotated"; }

inline StripeLayoutMode layout_mode_from_string(std::string_view s) {
  if (s == "random") return StripeLayoutMode::random;
  if (s == "rotated") return StripeLayoutMode::rotated;
  throw InvalidArgument(fmt::format("layout must be random or rotated, got '{}'", s));
}

inline ClusterModel build_cluster(const CodeScheme& scheme, int nodes, int slots, int stripes, std::uint64_t seed,
                                  StripeLayoutMode layout = StripeLayoutMode::random) {
  const int len = placed_nodes(scheme);
  if (nodes < len) throw InvalidArgument(fmt::format("{} needs at least {} nodes, got {}", scheme.name(), len, nodes));
  if (slots < 1) throw InvalidArgument("slots per node must be at least 1");
  if (stripes < 1) throw InvalidArgument("need at least one stripe");
  const auto& model = code_model(scheme);
  Rng rng(seed);
  std::vector<NodeId> perm(static_cast<std::size_t>(nodes));
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(std::span(perm), rng);
  const bool replicated = scheme.is<Replication>() || layout == StripeLayoutMode::random;

  ClusterModel c;
  c.nodes = nodes;
  c.slots = slots;
  for (int s = 0; s < stripes; ++s) {
    std::vector<NodeId> chosen(static_cast<std::size_t>(len));
    if (replicated) {
      std::vector<NodeId> pool = perm;
      for (int j = 0; j < len; ++j) {
        auto k = static_cast<std::size_t>(j) + static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(nodes - j)));
        std::swap(pool[static_cast<std::size_t>(j)], pool[k]);
        chosen[static_cast<std::size_t>(j)] = pool[static_cast<std::size_t>(j)];
      }
    } else {
      for (int j = 0; j < len; ++j) {
        chosen[static_cast<std::size_t>(j)] = perm[static_cast<std::size_t>((s * len + j) % nodes)];
      }
    }
    for (int i = 0; i < model.data_count(); ++i) {
      const auto& spec = model.block(model.data_block_id(i));
      std::vector<NodeId> h;
      for (auto canon : spec.hosts) h.push_back(chosen.at(static_cast<std::size_t>(canon)));
      std::sort(h.begin(), h.end());
      c.hosts.push_back(std::move(h));
    }
  }
  return c;
}

struct Workload {
  double load_pct = 0;
  /// Catalog index read by each task.
  std::vector<std::size_t> tasks;
};

inline int task_count(int nodes, int slots, double load_pct) {
  // Small epsilon so that e.g. 62.5% of 400 slots gives exactly 250.
  return static_cast<int>(std::floor(load_pct / 100.0 * nodes * slots + 1e-9));
}

inline Workload generate_workload(const ClusterModel& cluster, double load_pct, std::uint64_t seed) {
  if (!(load_pct > 0 && load_pct <= 200)) throw InvalidArgument(fmt::format("load must be in (0, 200], got {}", load_pct));
  if (cluster.hosts.empty()) throw InvalidArgument("empty block catalog");
  Rng rng(seed);
  Workload w;
  w.load_pct = load_pct;
  const int n = task_count(cluster.nodes, cluster.slots, load_pct);
  for (int i = 0; i < n; ++i) w.tasks.push_back(static_cast<std::size_t>(uniform_below(rng, cluster.hosts.size())));
  return w;
}

struct Assignment {
  std::vector<NodeId> node;
  std::vector<bool> local;

  int tasks() const { return static_cast<int>(node.size()); }
  int local_tasks() const { return static_cast<int>(std::count(local.begin(), local.end(), true)); }
  int remote_blocks() const { return tasks() - local_tasks(); }
  double locality_pct() const { return tasks() == 0 ? 100.0 : 100.0 * local_tasks() / tasks(); }
};

namespace detail {

inline void check_fits(const ClusterModel& c, const Workload& w) {
  if (static_cast<long>(w.tasks.size()) > c.total_slots()) {
    throw Overload(fmt::format("{} tasks exceed {} slots", w.tasks.size(), c.total_slots()));
  }
}

inline Assignment empty_assignment(const Workload& w) {
  Assignment a;
  a.node.assign(w.tasks.size(), -1);
  a.local.assign(w.tasks.size(), false);
  return a;
}

/// Gives every unassigned task a slot on the least-loaded node (lowest id on ties).
inline void assign_remote(const ClusterModel& c, const Workload& w, Assignment& a, std::vector<int>& used) {
  for (std::size_t t = 0; t < w.tasks.size(); ++t) {
    if (a.node[t] >= 0) continue;
    auto it = std::min_element(used.begin(), used.end());
    if (*it >= c.slots) throw Overload("no free slot for remote task");
    a.node[t] = static_cast<NodeId>(it - used.begin());
    a.local[t] = c.hosts_block(w.tasks[t], a.node[t]);
    ++*it;
  }
}

}  // namespace detail

/// Maximum matching between tasks and node slots over hosting edges
/// (Hopcroft-Karp with node capacities), then remote placement of the rest.
inline Assignment schedule_maxmatch(const ClusterModel& c, const Workload& w) {
  detail::check_fits(c, w);
  const int tasks = static_cast<int>(w.tasks.size());
  const int right = c.total_slots();
  // Right vertex v*slots + k is slot k of node v.
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(tasks));
  for (int t = 0; t < tasks; ++t) {
    for (auto v : c.hosts[w.tasks[static_cast<std::size_t>(t)]]) {
      for (int k = 0; k < c.slots; ++k) adj[static_cast<std::size_t>(t)].push_back(v * c.slots + k);
    }
  }
  constexpr int kFree = -1;
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_l(static_cast<std::size_t>(tasks), kFree), match_r(static_cast<std::size_t>(right), kFree);
  std::vector<int> dist(static_cast<std::size_t>(tasks));

  auto bfs = [&] {
    std::queue<int> q;
    bool found = false;
    for (int t = 0; t < tasks; ++t) {
      if (match_l[static_cast<std::size_t>(t)] == kFree) {
        dist[static_cast<std::size_t>(t)] = 0;
        q.push(t);
      } else {
        dist[static_cast<std::size_t>(t)] = kInf;
      }
    }
    while (!q.empty()) {
      int t = q.front();
      q.pop();
      for (int r : adj[static_cast<std::size_t>(t)]) {
        int u = match_r[static_cast<std::size_t>(r)];
        if (u == kFree) {
          found = true;
        } else if (dist[static_cast<std::size_t>(u)] == kInf) {
          dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(t)] + 1;
          q.push(u);
        }
      }
    }
    return found;
  };
  std::vector<std::size_t> cursor(static_cast<std::size_t>(tasks));
  auto dfs = [&](auto&& self, int t) -> bool {
    auto& edges = adj[static_cast<std::size_t>(t)];
    for (auto& i = cursor[static_cast<std::size_t>(t)]; i < edges.size(); ++i) {
      int r = edges[i];
      int u = match_r[static_cast<std::size_t>(r)];
      if (u == kFree || (dist[static_cast<std::size_t>(u)] == dist[static_cast<std::size_t>(t)] + 1 && self(self, u))) {
        match_l[static_cast<std::size_t>(t)] = r;
        match_r[static_cast<std::size_t>(r)] = t;
        return true;
      }
    }
    dist[static_cast<std::size_t>(t)] = kInf;
    return false;
  };
  while (bfs()) {
    std::fill(cursor.begin(), cursor.end(), 0);
    for (int t = 0; t < tasks; ++t) {
      if (match_l[static_cast<std::size_t>(t)] == kFree) dfs(dfs, t);
    }
  }

  auto a = detail::empty_assignment(w);
  std::vector<int> used(static_cast<std::size_t>(c.nodes), 0);
  for (int t = 0; t < tasks; ++t) {
    int r = match_l[static_cast<std::size_t>(t)];
    if (r == kFree) continue;
    a.node[static_cast<std::size_t>(t)] = r / c.slots;
    a.local[static_cast<std::size_t>(t)] = true;
    ++used[static_cast<std::size_t>(r / c.slots)];
  }
  detail::assign_remote(c, w, a, used);
  return a;
}

/// Delay scheduling over heartbeat rounds. In each round every free slot
/// reports once, in a seeded random order, and takes the first pending task
/// (in workload order) whose block it holds. If it holds none, the oldest
/// pending task is launched there remotely once that task has been passed
/// over for `delay` full rounds; otherwise the slot stays idle this round.
inline Assignment schedule_delay(const ClusterModel& c, const Workload& w, int delay, std::uint64_t seed) {
  if (delay < 0) throw InvalidArgument("delay must be non-negative");
  detail::check_fits(c, w);
  Rng rng(seed);
  auto a = detail::empty_assignment(w);
  std::vector<int> pending(w.tasks.size());
  std::iota(pending.begin(), pending.end(), 0);
  std::vector<int> skipped(w.tasks.size(), 0);
  std::vector<int> free_slots(static_cast<std::size_t>(c.nodes), c.slots);
  while (!pending.empty()) {
    std::vector<NodeId> beats;
    for (int v = 0; v < c.nodes; ++v) {
      for (int k = 0; k < free_slots[static_cast<std::size_t>(v)]; ++k) beats.push_back(v);
    }
    shuffle(std::span(beats), rng);
    for (auto v : beats) {
      if (pending.empty()) break;
      auto it = std::find_if(pending.begin(), pending.end(), [&](int t) {
        return c.hosts_block(w.tasks[static_cast<std::size_t>(t)], v);
      });
      bool local = it != pending.end();
      if (!local) {
        if (skipped[static_cast<std::size_t>(pending.front())] < delay) continue;
        it = pending.begin();
      }
      a.node[static_cast<std::size_t>(*it)] = v;
      a.local[static_cast<std::size_t>(*it)] = local;
      --free_slots[static_cast<std::size_t>(v)];
      pending.erase(it);
    }
    for (int t : pending) ++skipped[static_cast<std::size_t>(t)];
  }
  return a;
}

/// Greedy peeling. A task with a single hosting node that still has free
/// slots is placed there first. Otherwise the task whose hosting nodes have
/// the most free slots in total is placed on its least contended hosting
/// node, where contention is pending demand minus free slots. The seed fixes
/// the order in which tasks are examined, which settles ties between tasks;
/// ties between nodes go to the lowest id. Tasks left without a free hosting
/// slot run remotely at the end.
inline Assignment schedule_peeling(const ClusterModel& c, const Workload& w, std::uint64_t seed) {
  detail::check_fits(c, w);
  Rng rng(seed);
  auto a = detail::empty_assignment(w);
  std::vector<int> order(w.tasks.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span(order), rng);
  std::vector<int> free_slots(static_cast<std::size_t>(c.nodes), c.slots);
  std::vector<int> demand(static_cast<std::size_t>(c.nodes), 0);
  for (auto b : w.tasks) {
    for (auto v : c.hosts[b]) ++demand[static_cast<std::size_t>(v)];
  }
  std::vector<int> pending = order;

  auto place = [&](std::size_t pos, NodeId v) {
    const auto t = static_cast<std::size_t>(pending[pos]);
    a.node[t] = v;
    a.local[t] = true;
    --free_slots[static_cast<std::size_t>(v)];
    for (auto h : c.hosts[w.tasks[t]]) --demand[static_cast<std::size_t>(h)];
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pos));
  };

  while (true) {
    std::size_t single = pending.size();
    NodeId single_node = -1;
    std::size_t best = pending.size();
    long best_slack = -1;
    std::vector<std::size_t> stranded;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto& hosts = c.hosts[w.tasks[static_cast<std::size_t>(pending[p])]];
      int options = 0;
      NodeId last = -1;
      long slack = 0;
      for (auto v : hosts) {
        if (free_slots[static_cast<std::size_t>(v)] > 0) {
          ++options;
          last = v;
          slack += free_slots[static_cast<std::size_t>(v)];
        }
      }
      if (options == 1 && single == pending.size()) {
        single = p;
        single_node = last;
      }
      if (options > 1 && slack > best_slack) {
        best = p;
        best_slack = slack;
      }
    }
    if (single < pending.size()) {
      place(single, single_node);
      continue;
    }
    if (best == pending.size()) break;
    NodeId target = -1;
    long target_contention = std::numeric_limits<long>::max();
    for (auto v : c.hosts[w.tasks[static_cast<std::size_t>(pending[best])]]) {
      if (free_slots[static_cast<std::size_t>(v)] == 0) continue;
      const long contention = demand[static_cast<std::size_t>(v)] - free_slots[static_cast<std::size_t>(v)];
      if (contention < target_contention) {
        target = v;
        target_contention = contention;
      }
    }
    place(best, target);
  }
  std::vector<int> used(static_cast<std::size_t>(c.nodes));
  for (int v = 0; v < c.nodes; ++v) used[static_cast<std::size_t>(v)] = c.slots - free_slots[static_cast<std::size_t>(v)];
  detail::assign_remote(c, w, a, used);
  return a;
}

enum class Scheduler { maxmatch, delay, peeling };

inline std::string to_string(Scheduler s) {
  switch (s) {
    case Scheduler::maxmatch: return "maxmatch";
    case Scheduler::delay: return "delay";
    case Scheduler::peeling: return "peeling";
  }
  return "?";
}

inline Scheduler scheduler_from_string(std::string_view s) {
  if (s == "maxmatch" || s == "matching") return Scheduler::maxmatch;
  if (s == "delay") return Scheduler::delay;
  if (s == "peeling") return Scheduler::peeling;
  throw InvalidArgument(fmt::format("unknown scheduler '{}'", s));
}

/// Runs a scheduler, splitting workloads larger than one slot wave into
/// consecutive waves that each start on an idle cluster.
inline Assignment schedule(const ClusterModel& c, const Workload& w, Scheduler s, int delay, std::uint64_t seed) {
  const auto wave = static_cast<std::size_t>(c.total_slots());
  Assignment out;
  for (std::size_t start = 0, k = 0; start < w.tasks.size() || (start == 0 && k == 0); start += wave, ++k) {
    Workload part;
    part.load_pct = w.load_pct;
    part.tasks.assign(w.tasks.begin() + static_cast<std::ptrdiff_t>(start),
                      w.tasks.begin() + static_cast<std::ptrdiff_t>(std::min(w.tasks.size(), start + wave)));
    const auto wave_seed = derive_seed(seed, {k});
    Assignment a;
    switch (s) {
      case Scheduler::maxmatch: a = schedule_maxmatch(c, part); break;
      case Scheduler::delay: a = schedule_delay(c, part, delay, wave_seed); break;
      case Scheduler::peeling: a = schedule_peeling(c, part, wave_seed); break;
    }
    out.node.insert(out.node.end(), a.node.begin(), a.node.end());
    out.local.insert(out.local.end(), a.local.begin(), a.local.end());
    if (w.tasks.empty()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepConfig {
  std::vector<CodeScheme> schemes{CodeScheme::replication(2), CodeScheme::pentagon(), CodeScheme::heptagon_local()};
  std::vector<Scheduler> schedulers{Scheduler::maxmatch, Scheduler::delay, Scheduler::peeling};
  std::vector<int> slots{2, 4, 8};
  std::vector<double> loads{25, 50, 75, 100};
  int nodes = 25;
  int reps = 20;
  int delay = 1;
  /// Stripes per cluster; 0 sizes the catalog to catalog_waves slot waves.
  int stripes = 0;
  double catalog_waves = 2.0;
  StripeLayoutMode layout = StripeLayoutMode::random;
  std::uint64_t block_size = 64ull << 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct InstanceRow {
  std::string scheme;
  Scheduler scheduler;
  int nodes, slots;
  double load_pct;
  std::uint64_t seed;
  int tasks, local_tasks;
  double locality_pct;
  int remote_blocks;
};

struct SummaryRow {
  std::string scheme;
  Scheduler scheduler;
  int nodes, slots;
  double load_pct;
  int reps;
  double mean_tasks;
  double mean_locality_pct, std_locality_pct;
  double mean_remote_blocks, std_remote_blocks;
  double remote_traffic_bytes;  // mean remote blocks times block size
};

struct SweepResult {
  std::vector<InstanceRow> instances;
  std::vector<SummaryRow> summary;

  const SummaryRow& find(const std::string& scheme, Scheduler s, int slots, double load) const {
    for (const auto& r : summary) {
      if (r.scheme == scheme && r.scheduler == s && r.slots == slots && r.load_pct == load) return r;
    }
    throw InvalidArgument(fmt::format("no sweep cell {} {} mu={} load={}", scheme, to_string(s), slots, load));
  }
};

/// Repetition r of a (slots, load) point uses the same seed for every scheme
/// and scheduler, so schedulers are compared on identical instances.
inline std::uint64_t instance_seed(std::uint64_t base, int slots, double load, int rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(slots), static_cast<std::uint64_t>(std::llround(load * 1000)),
                            static_cast<std::uint64_t>(rep)});
}

inline SweepResult locality_sweep(const SweepConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("reps must be at least 1");
  if (cfg.nodes < 1) throw InvalidArgument("nodes must be at least 1");
  if (cfg.delay < 0) throw InvalidArgument("delay must be non-negative");
  struct Cell {
    std::size_t scheme;
    int slots;
    double load;
    int rep;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
    for (int mu : cfg.slots) {
      for (double load : cfg.loads) {
        for (int r = 0; r < cfg.reps; ++r) cells.push_back({s, mu, load, r});
      }
    }
  }
  const std::size_t nsched = cfg.schedulers.size();
  std::vector<InstanceRow> rows(cells.size() * nsched);
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const auto& cell = cells[i];
    const auto& scheme = cfg.schemes[cell.scheme];
    const auto seed = instance_seed(cfg.seed, cell.slots, cell.load, cell.rep);
    const int stripes = cfg.stripes > 0 ? cfg.stripes : default_stripes(scheme, cfg.nodes, cell.slots, cfg.catalog_waves);
    auto cluster = build_cluster(scheme, cfg.nodes, cell.slots, stripes, derive_seed(seed, {0}), cfg.layout);
    auto work = generate_workload(cluster, cell.load, derive_seed(seed, {1}));
    for (std::size_t k = 0; k < nsched; ++k) {
      auto a = schedule(cluster, work, cfg.schedulers[k], cfg.delay, derive_seed(seed, {2}));
      rows[i * nsched + k] = {scheme.name(), cfg.schedulers[k], cfg.nodes, cell.slots, cell.load, seed,
                              a.tasks(), a.local_tasks(), a.locality_pct(), a.remote_blocks()};
    }
  });

  SweepResult out;
  out.instances = rows;
  // Rows are laid out cell-major: scheme, slots, load, rep, scheduler.
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  for (std::size_t base = 0; base < cells.size(); base += reps) {
    for (std::size_t k = 0; k < nsched; ++k) {
      double sl = 0, sl2 = 0, sr = 0, sr2 = 0, st = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& row = rows[(base + r) * nsched + k];
        sl += row.locality_pct;
        sl2 += row.locality_pct * row.locality_pct;
        sr += row.remote_blocks;
        sr2 += static_cast<double>(row.remote_blocks) * row.remote_blocks;
        st += row.tasks;
      }
      const double n = static_cast<double>(reps);
      auto sd = [&](double s, double s2) { return reps > 1 ? std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1))) : 0.0; };
      const auto& first = rows[base * nsched + k];
      out.summary.push_back({first.scheme, first.scheduler, first.nodes, first.slots, first.load_pct, cfg.reps, st / n,
                             sl / n, sd(sl, sl2), sr / n, sd(sr, sr2),
                             sr / n * static_cast<double>(cfg.block_size)});
    }
  }
  return out;
}

}  // namespace drc::mapsched
