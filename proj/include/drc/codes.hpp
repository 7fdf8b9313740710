#pragma once

// Stripe layout, encoding, decoding and recoverability for every scheme.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "drc/errors.hpp"
#include "drc/gf256.hpp"
#include "drc/linalg.hpp"
#include "drc/random.hpp"
#include "drc/scheme.hpp"

namespace drc {

using NodeId = int;

// ---------------------------------------------------------------------------
// Storage overhead

struct Overhead {
  int stored = 0;
  int data = 0;

  double ratio() const { return static_cast<double>(stored) / data; }
  /// Three significant digits, e.g. "2.22", "2.10", "3.00".
  std::string to_string() const { return fmt::format("{:#.3g}", ratio()); }
};

inline Overhead storage_overhead(const CodeScheme& scheme) {
  return {scheme.stored_blocks(), scheme.data_blocks()};
}

// ---------------------------------------------------------------------------
// Layout

struct Placement {
  NodeId node = 0;
  int copy = 0;
  bool operator==(const Placement&) const = default;
};

struct StripeLayout {
  CodeScheme scheme;
  /// Physical node id for each code node index.
  std::vector<NodeId> nodes;
  std::map<BlockId, std::vector<Placement>> block_placements;
  std::map<BlockId, BlockRole> block_roles;

  std::vector<BlockId> blocks_on(NodeId node) const {
    std::vector<BlockId> out;
    for (const auto& [id, places] : block_placements) {
      for (const auto& p : places) {
        if (p.node == node) out.push_back(id);
      }
    }
    return out;
  }

  std::optional<NodeIndex> index_of(NodeId node) const {
    auto it = std::find(nodes.begin(), nodes.end(), node);
    if (it == nodes.end()) return std::nullopt;
    return static_cast<NodeIndex>(it - nodes.begin());
  }

  bool operator==(const StripeLayout&) const = default;
};

/// Places one stripe on nodes from the pool. Polygon and heptagon-local
/// codes use the first length() pool entries in order; replication and
/// RAID+m take a seed-driven sample of distinct pool nodes.
inline StripeLayout build_layout(const CodeScheme& scheme, std::span<const NodeId> pool,
                                 std::uint64_t seed) {
  const int len = scheme.length();
  if (static_cast<int>(pool.size()) < len) {
    throw InvalidArgument(fmt::format("node pool of {} is smaller than code length {} of {}",
                                      pool.size(), len, scheme.name()));
  }
  {
    std::set<NodeId> uniq(pool.begin(), pool.end());
    if (uniq.size() != pool.size()) throw InvalidArgument("node pool has duplicate ids");
  }

  StripeLayout layout;
  layout.scheme = scheme;
  if (scheme.is<Replication>() || scheme.is<RaidMirror>()) {
    std::vector<NodeId> shuffled(pool.begin(), pool.end());
    Rng rng(seed);
    shuffle(std::span<NodeId>(shuffled), rng);
    layout.nodes.assign(shuffled.begin(), shuffled.begin() + len);
  } else {
    layout.nodes.assign(pool.begin(), pool.begin() + len);
  }

  const auto& model = code_model(scheme);
  for (const auto& b : model.blocks()) {
    auto& places = layout.block_placements[b.id];
    for (std::size_t c = 0; c < b.hosts.size(); ++c) {
      places.push_back({layout.nodes[static_cast<std::size_t>(b.hosts[c])], static_cast<int>(c)});
    }
    layout.block_roles[b.id] = b.role;
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Erasure patterns and recoverability

struct ErasurePattern {
  std::set<NodeIndex> failed;

  ErasurePattern() = default;
  ErasurePattern(std::initializer_list<NodeIndex> nodes) : failed(nodes) {}
  explicit ErasurePattern(std::set<NodeIndex> nodes) : failed(std::move(nodes)) {}

  static ErasurePattern from_mask(std::uint64_t mask) {
    ErasurePattern p;
    for (int i = 0; mask != 0; ++i, mask >>= 1) {
      if (mask & 1u) p.failed.insert(i);
    }
    return p;
  }

  std::uint64_t mask() const {
    std::uint64_t m = 0;
    for (auto n : failed) m |= std::uint64_t{1} << n;
    return m;
  }

  bool contains(NodeIndex n) const { return failed.count(n) != 0; }
  std::size_t size() const { return failed.size(); }
  bool empty() const { return failed.empty(); }
};

inline void check_pattern(const CodeScheme& scheme, const ErasurePattern& pattern) {
  for (auto n : pattern.failed) {
    if (n < 0 || n >= scheme.length()) {
      throw InvalidArgument(
          fmt::format("node {} outside {} (length {})", n, scheme.name(), scheme.length()));
    }
  }
}

/// Distinct blocks with at least one copy on a node outside the mask.
inline std::vector<BlockId> available_blocks(const CodeModel& model, std::uint64_t failed_mask) {
  std::vector<BlockId> out;
  for (const auto& b : model.blocks()) {
    for (auto h : b.hosts) {
      if (!(failed_mask >> h & 1u)) {
        out.push_back(b.id);
        break;
      }
    }
  }
  return out;
}

/// True iff the given distinct blocks determine every data block.
inline bool can_decode(const CodeModel& model, std::span<const BlockId> known) {
  const int d = model.data_count();
  if (static_cast<int>(known.size()) < d) return false;
  if (model.binary() && d <= 64) {
    std::vector<std::uint64_t> rows;
    rows.reserve(known.size());
    for (auto id : known) {
      std::uint64_t bits = 0;
      const auto& c = model.block(id).coeffs;
      for (int i = 0; i < d; ++i) {
        if (c[static_cast<std::size_t>(i)]) bits |= std::uint64_t{1} << i;
      }
      rows.push_back(bits);
    }
    return rank_gf2(std::move(rows)) == d;
  }
  SpanBuilder sb(d);
  for (auto id : known) {
    sb.add(model.block(id).coeffs);
    if (sb.rank() == d) return true;
  }
  return false;
}

inline bool is_recoverable(const CodeScheme& scheme, const ErasurePattern& pattern) {
  check_pattern(scheme, pattern);
  const auto& model = code_model(scheme);
  auto known = available_blocks(model, pattern.mask());
  return can_decode(model, known);
}

/// Calls fn(mask) for every subset of {0..n-1} of size k, in increasing
/// lexicographic order of the member lists.
template <typename Fn>
void for_each_subset(int n, int k, Fn&& fn) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    std::uint64_t mask = 0;
    for (int i : idx) mask |= std::uint64_t{1} << i;
    fn(mask);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// Largest t such that every t-node erasure pattern is recoverable.
inline int tolerance(const CodeScheme& scheme) {
  const auto& model = code_model(scheme);
  const int n = scheme.length();
  int t = 0;
  for (int k = 1; k <= n; ++k) {
    bool all = true;
    for_each_subset(n, k, [&](std::uint64_t mask) {
      if (all && !can_decode(model, available_blocks(model, mask))) all = false;
    });
    if (!all) break;
    t = k;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Encoding

/// Encodes one stripe. Returns every distinct block keyed by block id.
inline std::map<BlockId, Bytes> encode_stripe(const CodeScheme& scheme,
                                             std::span<const Bytes> data) {
  const auto& model = code_model(scheme);
  if (static_cast<int>(data.size()) != model.data_count()) {
    throw InvalidArgument(fmt::format("{} expects {} data blocks, got {}", scheme.name(),
                                      model.data_count(), data.size()));
  }
  const std::size_t len = data.empty() ? 0 : data.front().size();
  for (const auto& d : data) {
    if (d.size() != len) throw InvalidArgument("data blocks have unequal lengths");
  }
  std::map<BlockId, Bytes> out;
  for (const auto& b : model.blocks()) {
    if (b.role.kind == BlockRole::Kind::data) {
      out[b.id] = data[static_cast<std::size_t>(b.role.index)];
      continue;
    }
    Bytes acc(len, 0);
    for (std::size_t i = 0; i < b.coeffs.size(); ++i) {
      gf256::mul_add(acc, data[i], b.coeffs[i]);
    }
    out[b.id] = std::move(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

/// Contents read from surviving nodes: node index -> block id -> bytes.
using NodeContents = std::map<NodeIndex, std::map<BlockId, Bytes>>;

/// What each node outside the pattern would hold for an encoded stripe.
inline NodeContents surviving_contents(const CodeScheme& scheme,
                                       const std::map<BlockId, Bytes>& encoded,
                                       const ErasurePattern& pattern) {
  check_pattern(scheme, pattern);
  const auto& model = code_model(scheme);
  NodeContents out;
  for (NodeIndex n = 0; n < model.length(); ++n) {
    if (pattern.contains(n)) continue;
    auto& slot = out[n];
    for (auto id : model.blocks_on(n)) slot[id] = encoded.at(id);
  }
  return out;
}

namespace detail {

/// Solves rows * x = rhs for the unknown byte vectors x by Gauss-Jordan
/// elimination. Rows may outnumber unknowns; extra rows must be consistent.
inline std::vector<Bytes> solve_bytes(std::vector<Coeffs> rows, std::vector<Bytes> rhs,
                                      std::size_t unknowns) {
  std::size_t r = 0;
  std::vector<std::size_t> pivot_row(unknowns);
  for (std::size_t col = 0; col < unknowns; ++col) {
    std::size_t p = r;
    while (p < rows.size() && rows[p][col] == 0) ++p;
    if (p == rows.size()) throw Unrecoverable("linear system is rank deficient");
    std::swap(rows[p], rows[r]);
    std::swap(rhs[p], rhs[r]);
    auto s = gf256::inv(rows[r][col]);
    for (auto& x : rows[r]) x = gf256::mul(x, s);
    gf256::scale(rhs[r], s);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == r || rows[i][col] == 0) continue;
      auto c = rows[i][col];
      for (std::size_t j = 0; j < unknowns; ++j) rows[i][j] ^= gf256::mul(c, rows[r][j]);
      gf256::mul_add(rhs[i], rhs[r], c);
    }
    pivot_row[col] = r;
    ++r;
  }
  for (std::size_t i = r; i < rows.size(); ++i) {
    if (std::any_of(rhs[i].begin(), rhs[i].end(), [](auto b) { return b != 0; })) {
      throw Inconsistent("surviving blocks violate a parity relation");
    }
  }
  std::vector<Bytes> x(unknowns);
  for (std::size_t col = 0; col < unknowns; ++col) x[col] = std::move(rhs[pivot_row[col]]);
  return x;
}

}  // namespace detail

/// Rebuilds all data blocks of a stripe from the surviving nodes' contents.
/// Replica copies are used first, then single-unknown parity relations, then
/// Gaussian elimination over the remaining parity rows.
inline std::vector<Bytes> decode_stripe(const CodeScheme& scheme, const NodeContents& surviving,
                                        const ErasurePattern& pattern) {
  check_pattern(scheme, pattern);
  const auto& model = code_model(scheme);
  const int d = model.data_count();

  std::map<BlockId, const Bytes*> known;
  std::optional<std::size_t> len;
  for (const auto& [node, blocks] : surviving) {
    if (node < 0 || node >= model.length()) {
      throw InvalidArgument(fmt::format("surviving node {} outside code", node));
    }
    if (pattern.contains(node)) {
      throw InvalidArgument(fmt::format("node {} is both failed and surviving", node));
    }
    const auto& hosted = model.blocks_on(node);
    for (const auto& [id, bytes] : blocks) {
      if (!std::binary_search(hosted.begin(), hosted.end(), id)) {
        throw InvalidArgument(fmt::format("block {} is not stored on node {}", id, node));
      }
      if (len && *len != bytes.size()) throw InvalidArgument("surviving blocks have unequal lengths");
      len = bytes.size();
      auto [it, inserted] = known.emplace(id, &bytes);
      if (!inserted && *it->second != bytes) {
        throw Inconsistent(fmt::format("replicas of block {} differ", id));
      }
    }
  }

  std::vector<BlockId> known_ids;
  for (const auto& [id, _] : known) known_ids.push_back(id);
  if (!can_decode(model, known_ids)) {
    throw Unrecoverable(fmt::format("{}: erasure pattern {{{}}} is unrecoverable", scheme.name(),
                                    fmt::join(pattern.failed, ",")));
  }
  const std::size_t size = len.value_or(0);

  std::vector<std::optional<Bytes>> data(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    auto it = known.find(model.data_block_id(i));
    if (it != known.end()) data[static_cast<std::size_t>(i)] = *it->second;
  }
  auto missing = [&] {
    std::vector<int> m;
    for (int i = 0; i < d; ++i) {
      if (!data[static_cast<std::size_t>(i)]) m.push_back(i);
    }
    return m;
  };

  std::vector<const BlockSpec*> parities;
  for (const auto& b : model.blocks()) {
    if (b.role.kind != BlockRole::Kind::data && known.count(b.id)) parities.push_back(&b);
  }

  // Peel parity relations that involve exactly one unknown data block.
  for (bool progress = true; progress;) {
    progress = false;
    for (const auto* p : parities) {
      int unknown = -1;
      int count = 0;
      for (int i = 0; i < d; ++i) {
        if (p->coeffs[static_cast<std::size_t>(i)] != 0 && !data[static_cast<std::size_t>(i)]) {
          unknown = i;
          ++count;
        }
      }
      if (count != 1) continue;
      Bytes acc = *known.at(p->id);
      for (int i = 0; i < d; ++i) {
        auto c = p->coeffs[static_cast<std::size_t>(i)];
        if (i != unknown && c != 0) gf256::mul_add(acc, *data[static_cast<std::size_t>(i)], c);
      }
      gf256::scale(acc, gf256::inv(p->coeffs[static_cast<std::size_t>(unknown)]));
      data[static_cast<std::size_t>(unknown)] = std::move(acc);
      progress = true;
    }
  }

  if (auto rest = missing(); !rest.empty()) {
    std::vector<Coeffs> rows;
    std::vector<Bytes> rhs;
    for (const auto* p : parities) {
      Coeffs row(rest.size());
      bool any = false;
      for (std::size_t j = 0; j < rest.size(); ++j) {
        row[j] = p->coeffs[static_cast<std::size_t>(rest[j])];
        any = any || row[j] != 0;
      }
      if (!any) continue;
      Bytes acc = *known.at(p->id);
      for (int i = 0; i < d; ++i) {
        auto c = p->coeffs[static_cast<std::size_t>(i)];
        if (c != 0 && data[static_cast<std::size_t>(i)]) {
          gf256::mul_add(acc, *data[static_cast<std::size_t>(i)], c);
        }
      }
      rows.push_back(std::move(row));
      rhs.push_back(std::move(acc));
    }
    auto solved = detail::solve_bytes(std::move(rows), std::move(rhs), rest.size());
    for (std::size_t j = 0; j < rest.size(); ++j) {
      data[static_cast<std::size_t>(rest[j])] = std::move(solved[j]);
    }
  }

  std::vector<Bytes> out;
  out.reserve(static_cast<std::size_t>(d));
  for (auto& b : data) out.push_back(std::move(*b));

  // Every surviving parity must agree with the decoded data.
  for (const auto* p : parities) {
    Bytes acc(size, 0);
    for (int i = 0; i < d; ++i) gf256::mul_add(acc, out[static_cast<std::size_t>(i)], p->coeffs[static_cast<std::size_t>(i)]);
    if (acc != *known.at(p->id)) {
      throw Inconsistent(fmt::format("parity block {} disagrees with decoded data", p->id));
    }
  }
  return out;
}

}  // namespace drc
