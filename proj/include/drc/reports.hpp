#pragma once

// CSV tables for the experiment campaigns.

#include <string>
#include <vector>

#include <fmt/format.h>

#include "drc/codes.hpp"
#include "drc/csv.hpp"
#include "drc/mapsched.hpp"
#include "drc/reliability.hpp"
#include "drc/repair.hpp"

namespace drc::reports {

struct ReliabilityRow {
  std::string scheme;
  reliability::FailureModel model;
  reliability::AnalyticResult analytic;
  reliability::MonteCarloResult mc;
};

inline csv::Table reliability_table(const std::vector<ReliabilityRow>& rows) {
  csv::Table t{{"scheme", "lambda", "mu", "mode", "analytic_hours", "mc_mean_hours", "mc_ci_low", "mc_ci_high",
                "trials", "seed"},
               {}};
  for (const auto& r : rows) {
    t.add({r.scheme, csv::number(r.model.lambda_fail), csv::number(r.model.mu_repair), to_string(r.model.mode),
           csv::number(r.analytic.hours), csv::number(r.mc.mean_hours), csv::number(r.mc.ci_low),
           csv::number(r.mc.ci_high), std::to_string(r.mc.trials), std::to_string(r.mc.seed)});
  }
  return t;
}

inline csv::Table locality_instances_table(const mapsched::SweepResult& r) {
  csv::Table t{{"scheme", "scheduler", "nodes", "slots", "load_pct", "seed", "tasks", "local_tasks", "locality_pct",
                "remote_blocks"},
               {}};
  for (const auto& x : r.instances) {
    t.add({x.scheme, to_string(x.scheduler), std::to_string(x.nodes), std::to_string(x.slots), csv::number(x.load_pct),
           std::to_string(x.seed), std::to_string(x.tasks), std::to_string(x.local_tasks), csv::number(x.locality_pct),
           std::to_string(x.remote_blocks)});
  }
  return t;
}

inline csv::Table locality_summary_table(const mapsched::SweepResult& r) {
  csv::Table t{{"scheme", "scheduler", "nodes", "slots", "load_pct", "reps", "mean_tasks", "mean_locality_pct",
                "std_locality_pct", "mean_remote_blocks", "std_remote_blocks", "remote_traffic_bytes"},
               {}};
  for (const auto& x : r.summary) {
    t.add({x.scheme, to_string(x.scheduler), std::to_string(x.nodes), std::to_string(x.slots), csv::number(x.load_pct),
           std::to_string(x.reps), csv::number(x.mean_tasks), csv::number(x.mean_locality_pct),
           csv::number(x.std_locality_pct), csv::number(x.mean_remote_blocks), csv::number(x.std_remote_blocks),
           csv::number(x.remote_traffic_bytes)});
  }
  return t;
}

/// Blocks moved to rebuild node 0, or -1 if that is impossible.
inline int single_repair_blocks(const CodeScheme& scheme) {
  try {
    return plan_repair(scheme, ErasurePattern{0}).bandwidth_blocks();
  } catch (const Unrecoverable&) {
    return -1;
  }
}

/// Blocks moved to serve data block 0 with every copy of it down, or -1
/// when no such read is possible.
inline int degraded_read_blocks(const CodeScheme& scheme) {
  const auto& model = code_model(scheme);
  const auto id = model.data_block_id(0);
  const auto& hosts = model.block(id).hosts;
  std::set<NodeIndex> down(hosts.begin(), hosts.end());
  if (!is_recoverable(scheme, ErasurePattern(down))) return -1;
  return plan_degraded_read(scheme, id, down).bandwidth_blocks();
}

/// One row per scheme: overhead, length, tolerance, repair traffic and
/// MTTDL under the given model for one group and for a cluster of
/// `cluster_nodes` split into disjoint groups.
inline csv::Table scheme_table(const std::vector<CodeScheme>& schemes, const reliability::FailureModel& model,
                               int cluster_nodes) {
  csv::Table t{{"scheme", "overhead", "length", "tolerance", "single_repair_blocks", "degraded_read_blocks",
                "mttdl_group_years", "groups", "mttdl_system_years", "chain"},
               {}};
  for (const auto& s : schemes) {
    auto a = reliability::mttdl_analytic(s, model);
    const int groups = reliability::groups_in_cluster(s, cluster_nodes);
    auto cell = [](int v) { return v < 0 ? std::string("n/a") : std::to_string(v); };
    t.add({s.name(), storage_overhead(s).to_string(), std::to_string(s.length()), std::to_string(tolerance(s)),
           cell(single_repair_blocks(s)), cell(degraded_read_blocks(s)), fmt::format("{:.3e}", a.years()),
           std::to_string(groups), fmt::format("{:.3e}", reliability::system_mttdl(a.hours, groups) / reliability::kHoursPerYear),
           a.note()});
  }
  return t;
}

}  // namespace drc::reports
