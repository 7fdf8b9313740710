#pragma once

// Repair and degraded-read planning with partial parities, and a plan
// executor that turns plans into bytes.
//
// A plan is an ordered list of steps. A Transfer moves exactly one block's
// worth of bytes from one node to another: either a stored block (whole
// copy) or a linear combination of blocks the source holds (partial
// parity). A Combine step materialises a block at a node from payloads it
// has received. Repair bandwidth is the number of transfers.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "drc/checksum.hpp"
#include "drc/codes.hpp"
#include "drc/errors.hpp"
#include "drc/gf256.hpp"
#include "drc/linalg.hpp"
#include "drc/scheme.hpp"

namespace drc {

/// Destination of degraded reads: a client outside the stripe.
inline constexpr NodeIndex kReaderNode = -1;

struct Term {
  BlockId block = 0;
  gf256::Element coeff = 1;
  bool operator==(const Term&) const = default;
};

struct Transfer {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  std::vector<Term> payload;

  bool whole_copy() const { return payload.size() == 1 && payload.front().coeff == 1; }
  bool operator==(const Transfer&) const = default;
};

struct Combine {
  NodeIndex node = 0;
  BlockId block = 0;
  /// (transfer ordinal, coefficient); every referenced transfer targets node.
  std::vector<std::pair<std::size_t, gf256::Element>> inputs;
  bool operator==(const Combine&) const = default;
};

using PlanStep = std::variant<Transfer, Combine>;

struct BlockTarget {
  NodeIndex node = 0;
  BlockId block = 0;
  auto operator<=>(const BlockTarget&) const = default;
};

struct RepairPlan {
  std::vector<PlanStep> steps;
  /// Blocks the plan delivers and where.
  std::vector<BlockTarget> restores;

  std::vector<Transfer> transfers() const {
    std::vector<Transfer> out;
    for (const auto& s : steps) {
      if (auto* t = std::get_if<Transfer>(&s)) out.push_back(*t);
    }
    return out;
  }

  int bandwidth_blocks() const {
    return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const PlanStep& s) {
      return std::holds_alternative<Transfer>(s);
    }));
  }

  bool empty() const { return steps.empty(); }
};

inline std::string describe(const Transfer& t) {
  auto node = [](NodeIndex n) { return n == kReaderNode ? std::string("reader") : fmt::format("N{}", n); };
  if (t.whole_copy()) {
    return fmt::format("{} -> {}: copy b{}", node(t.src), node(t.dst), t.payload.front().block);
  }
  std::vector<std::string> terms;
  for (const auto& x : t.payload) {
    terms.push_back(x.coeff == 1 ? fmt::format("b{}", x.block)
                                 : fmt::format("{:#04x}*b{}", x.coeff, x.block));
  }
  return fmt::format("{} -> {}: partial {}", node(t.src), node(t.dst), fmt::join(terms, "+"));
}

namespace detail {

/// Builds the steps that deliver each target, given which nodes are
/// unavailable and where lost blocks are reassembled.
///
/// Blocks with a surviving copy travel as whole copies from their
/// lowest-indexed surviving host. Each lost block is expressed over a basis
/// of surviving blocks (data first, then local, then global parities); every
/// basis block is charged to its lowest-indexed surviving host, and each host
/// sends the fewest combinations of its charged blocks that span what the
/// lost blocks need from it. The combiner reassembles the lost blocks and
/// forwards them to their other targets.
inline RepairPlan plan_recovery(const CodeModel& model, std::uint64_t unavailable,
                                const std::vector<BlockTarget>& targets, NodeIndex combiner) {
  RepairPlan plan;
  plan.restores = targets;
  const int d = model.data_count();

  auto first_live_host = [&](BlockId id) -> std::optional<NodeIndex> {
    for (auto h : model.block(id).hosts) {
      if (!(unavailable >> h & 1u)) return h;
    }
    return std::nullopt;
  };

  std::vector<BlockId> lost;
  std::vector<Transfer> copies;
  for (const auto& t : targets) {
    if (auto src = first_live_host(t.block)) {
      copies.push_back({*src, t.node, {{t.block, 1}}});
    } else if (std::find(lost.begin(), lost.end(), t.block) == lost.end()) {
      lost.push_back(t.block);
    }
  }
  for (auto& c : copies) plan.steps.emplace_back(std::move(c));
  if (lost.empty()) return plan;

  std::vector<BlockId> order = available_blocks(model, unavailable);
  auto rank_of = [&](BlockId id) {
    switch (model.block(id).role.kind) {
      case BlockRole::Kind::data: return 0;
      case BlockRole::Kind::local_parity: return 1;
      case BlockRole::Kind::global_parity: return 2;
    }
    return 3;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](BlockId a, BlockId b) { return rank_of(a) < rank_of(b); });

  SpanBuilder span(d);
  std::vector<BlockId> basis;
  for (auto id : order) {
    if (span.add(model.block(id).coeffs)) basis.push_back(id);
  }

  // Coefficients of each lost block over the basis.
  std::vector<Coeffs> expr;
  for (auto id : lost) {
    auto e = span.express(model.block(id).coeffs);
    if (!e) throw Unrecoverable(fmt::format("block {} cannot be rebuilt from surviving nodes", id));
    expr.push_back(std::move(*e));
  }

  std::map<NodeIndex, std::vector<std::size_t>> charged;  // host -> basis positions
  for (std::size_t k = 0; k < basis.size(); ++k) {
    charged[*first_live_host(basis[k])].push_back(k);
  }

  // combos[j] accumulates (transfer ordinal, coeff) pairs for lost block j.
  std::vector<std::vector<std::pair<std::size_t, gf256::Element>>> combos(lost.size());
  std::size_t ordinal = static_cast<std::size_t>(plan.bandwidth_blocks());
  for (const auto& [host, positions] : charged) {
    // Rows: what each lost block needs from this host.
    const int cols = static_cast<int>(positions.size());
    std::vector<Coeffs> need(lost.size(), Coeffs(positions.size(), 0));
    for (std::size_t j = 0; j < lost.size(); ++j) {
      for (std::size_t c = 0; c < positions.size(); ++c) need[j][c] = expr[j][positions[c]];
    }
    SpanBuilder rows(cols);
    std::vector<std::size_t> sent;  // lost-block rows sent as payloads
    for (std::size_t j = 0; j < lost.size(); ++j) {
      if (rows.add(need[j])) sent.push_back(j);
    }
    std::vector<std::size_t> ordinals;
    for (auto j : sent) {
      Transfer t{host, combiner, {}};
      for (std::size_t c = 0; c < positions.size(); ++c) {
        if (need[j][c] != 0) t.payload.push_back({basis[positions[c]], need[j][c]});
      }
      plan.steps.emplace_back(std::move(t));
      ordinals.push_back(ordinal++);
    }
    for (std::size_t j = 0; j < lost.size(); ++j) {
      auto e = rows.express(need[j]);
      for (std::size_t k = 0; k < e->size(); ++k) {
        if ((*e)[k] != 0) combos[j].emplace_back(ordinals[k], (*e)[k]);
      }
    }
  }

  for (std::size_t j = 0; j < lost.size(); ++j) {
    plan.steps.emplace_back(Combine{combiner, lost[j], std::move(combos[j])});
  }
  for (const auto& t : targets) {
    if (t.node == combiner) continue;
    if (std::find(lost.begin(), lost.end(), t.block) == lost.end()) continue;
    plan.steps.emplace_back(Transfer{combiner, t.node, {{t.block, 1}}});
  }
  return plan;
}

}  // namespace detail

/// Plan to restore every block stored on the failed nodes onto replacement
/// nodes with the same indices. Empty pattern yields an empty plan.
inline RepairPlan plan_repair(const CodeScheme& scheme, const ErasurePattern& pattern) {
  check_pattern(scheme, pattern);
  if (!is_recoverable(scheme, pattern)) {
    throw Unrecoverable(fmt::format("{}: erasure pattern {{{}}} is unrecoverable", scheme.name(),
                                    fmt::join(pattern.failed, ",")));
  }
  if (pattern.empty()) return {};
  const auto& model = code_model(scheme);
  std::vector<BlockTarget> targets;
  for (auto n : pattern.failed) {
    for (auto id : model.blocks_on(n)) targets.push_back({n, id});
  }
  return detail::plan_recovery(model, pattern.mask(), targets, *pattern.failed.begin());
}

/// Plan delivering one block whose every copy sits on a down node to a
/// reader outside the stripe.
inline RepairPlan plan_degraded_read(const CodeScheme& scheme, BlockId block,
                                     const std::set<NodeIndex>& down_nodes) {
  ErasurePattern pattern(down_nodes);
  check_pattern(scheme, pattern);
  const auto& model = code_model(scheme);
  if (block < 0 || block >= model.block_count()) {
    throw InvalidArgument(fmt::format("{} has no block {}", scheme.name(), block));
  }
  for (auto h : model.block(block).hosts) {
    if (!pattern.contains(h)) {
      throw InvalidArgument(fmt::format("block {} is still available on node {}; no degraded read needed",
                                        block, h));
    }
  }
  return detail::plan_recovery(model, pattern.mask(), {{kReaderNode, block}}, kReaderNode);
}

// ---------------------------------------------------------------------------
// Execution

struct Chunk {
  Bytes bytes;
  std::uint32_t crc = 0;
};

/// Returns the stored copy of a block on a node, or nullopt when absent.
using BlockReader = std::function<std::optional<Chunk>(NodeIndex, BlockId)>;

struct ExecStats {
  int transfers = 0;
  std::uint64_t bytes_moved = 0;
  int partial_parities = 0;
};

/// Runs a plan against stored blocks. Source reads are CRC-checked; partial
/// parities are computed at the source. Returns the restored blocks.
inline std::map<BlockId, Bytes> execute_plan(const RepairPlan& plan, const BlockReader& reader,
                                             ExecStats* stats = nullptr) {
  std::map<std::pair<NodeIndex, BlockId>, Bytes> held;  // produced during the plan
  std::vector<std::pair<NodeIndex, Bytes>> inbox;        // per transfer ordinal

  auto source = [&](NodeIndex node, BlockId block) -> Bytes {
    if (auto it = held.find({node, block}); it != held.end()) return it->second;
    auto chunk = reader(node, block);
    if (!chunk) throw MissingBlock(fmt::format("block {} missing on node {}", block, node));
    if (crc32(chunk->bytes) != chunk->crc) {
      throw ChecksumMismatch(fmt::format("block {} on node {} fails its checksum", block, node));
    }
    return std::move(chunk->bytes);
  };

  for (const auto& step : plan.steps) {
    if (const auto* t = std::get_if<Transfer>(&step)) {
      if (t->payload.empty()) throw InvalidArgument("transfer with empty payload");
      Bytes acc;
      for (const auto& term : t->payload) {
        Bytes b = source(t->src, term.block);
        if (acc.empty()) acc.assign(b.size(), 0);
        gf256::mul_add(acc, b, term.coeff);
      }
      if (stats) {
        ++stats->transfers;
        stats->bytes_moved += acc.size();
        if (!t->whole_copy()) ++stats->partial_parities;
      }
      if (t->whole_copy()) held[{t->dst, t->payload.front().block}] = acc;
      inbox.emplace_back(t->dst, std::move(acc));
    } else {
      const auto& c = std::get<Combine>(step);
      Bytes acc;
      for (const auto& [ord, coeff] : c.inputs) {
        if (ord >= inbox.size() || inbox[ord].first != c.node) {
          throw InvalidArgument(fmt::format("combine at node {} uses transfer {} not yet received", c.node, ord));
        }
        if (acc.empty()) acc.assign(inbox[ord].second.size(), 0);
        gf256::mul_add(acc, inbox[ord].second, coeff);
      }
      held[{c.node, c.block}] = std::move(acc);
    }
  }

  std::map<BlockId, Bytes> out;
  for (const auto& r : plan.restores) {
    auto it = held.find({r.node, r.block});
    if (it == held.end()) {
      throw InvalidArgument(fmt::format("plan never delivers block {} to node {}", r.block, r.node));
    }
    auto [pos, inserted] = out.emplace(r.block, it->second);
    if (!inserted && pos->second != it->second) {
      throw Inconsistent(fmt::format("plan restores block {} with differing contents", r.block));
    }
  }
  return out;
}

}  // namespace drc
