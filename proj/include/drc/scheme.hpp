#pragma once

// Coding-scheme descriptors and their linear structure.
//
// Every scheme is described as a set of distinct blocks, each a GF(2^8)
// linear combination of the stripe's data blocks, stored on one or more
// nodes of the stripe. Nodes are addressed by their index within the code
// (0 .. length-1); StripeLayout maps these to physical node ids.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "drc/errors.hpp"
#include "drc/gf256.hpp"

namespace drc {

using Bytes = std::vector<std::uint8_t>;
using NodeIndex = int;
using BlockId = int;

struct Replication {
  int copies = 3;
  bool operator==(const Replication&) const = default;
};

/// k data blocks plus one XOR parity, every block mirrored on two nodes.
struct RaidMirror {
  int data_blocks = 9;
  bool operator==(const RaidMirror&) const = default;
};

/// Complete-graph code: one block per edge of K_n, stored at both endpoints.
struct Polygon {
  int nodes = 5;
  bool operator==(const Polygon&) const = default;
};

/// Two heptagon codes plus a node holding two global parities.
struct HeptagonLocal {
  bool operator==(const HeptagonLocal&) const = default;
};

class CodeScheme {
 public:
  using Variant = std::variant<Replication, RaidMirror, Polygon, HeptagonLocal>;

  CodeScheme() : CodeScheme(Polygon{5}) {}
  CodeScheme(Variant v) : v_(v) { validate(); }  // NOLINT: implicit on purpose

  static CodeScheme replication(int copies) { return CodeScheme(Replication{copies}); }
  static CodeScheme raid_mirror(int data_blocks) { return CodeScheme(RaidMirror{data_blocks}); }
  static CodeScheme polygon(int nodes) { return CodeScheme(Polygon{nodes}); }
  static CodeScheme pentagon() { return CodeScheme(Polygon{5}); }
  static CodeScheme heptagon() { return CodeScheme(Polygon{7}); }
  static CodeScheme heptagon_local() { return CodeScheme(HeptagonLocal{}); }

  /// Accepts "pentagon", "heptagon", "heptagon-local", "polygon:<n>",
  /// "<r>-rep", "rep:<r>", "raid+m:<k>" and "(<k+1>,<k>)-raid+m".
  static CodeScheme parse(std::string_view text);

  const Variant& variant() const { return v_; }

  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(v_);
  }

  std::string name() const;

  /// Number of nodes a stripe spans.
  int length() const;
  int data_blocks() const;
  /// Distinct coded blocks per stripe (before replication).
  int distinct_blocks() const;
  /// Stored block copies per stripe.
  int stored_blocks() const;

  bool operator==(const CodeScheme&) const = default;

 private:
  void validate() const;
  Variant v_;
};

inline void CodeScheme::validate() const {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) {
          if (s.copies < 1 || s.copies > 32) throw InvalidArgument("replication needs 1 to 32 copies");
        } else if constexpr (std::is_same_v<T, RaidMirror>) {
          if (s.data_blocks < 1 || s.data_blocks > 30) {
            throw InvalidArgument("raid+m needs 1 to 30 data blocks");
          }
        } else if constexpr (std::is_same_v<T, Polygon>) {
          if (s.nodes < 3) throw InvalidArgument("polygon code needs at least 3 nodes");
          if (s.nodes > 11) throw InvalidArgument("polygon code supports at most 11 nodes");
        }
      },
      v_);
}

inline std::string CodeScheme::name() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) {
          return fmt::format("{}-rep", s.copies);
        } else if constexpr (std::is_same_v<T, RaidMirror>) {
          return fmt::format("({},{})-raid+m", s.data_blocks + 1, s.data_blocks);
        } else if constexpr (std::is_same_v<T, Polygon>) {
          if (s.nodes == 5) return "pentagon";
          if (s.nodes == 7) return "heptagon";
          return fmt::format("polygon:{}", s.nodes);
        } else {
          return "heptagon-local";
        }
      },
      v_);
}

inline int CodeScheme::length() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) return s.copies;
        else if constexpr (std::is_same_v<T, RaidMirror>) return 2 * (s.data_blocks + 1);
        else if constexpr (std::is_same_v<T, Polygon>) return s.nodes;
        else return 15;
      },
      v_);
}

inline int CodeScheme::data_blocks() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) return 1;
        else if constexpr (std::is_same_v<T, RaidMirror>) return s.data_blocks;
        else if constexpr (std::is_same_v<T, Polygon>) return s.nodes * (s.nodes - 1) / 2 - 1;
        else return 40;
      },
      v_);
}

inline int CodeScheme::distinct_blocks() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) return 1;
        else if constexpr (std::is_same_v<T, RaidMirror>) return s.data_blocks + 1;
        else if constexpr (std::is_same_v<T, Polygon>) return s.nodes * (s.nodes - 1) / 2;
        else return 44;
      },
      v_);
}

inline int CodeScheme::stored_blocks() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) return s.copies;
        else if constexpr (std::is_same_v<T, RaidMirror>) return 2 * (s.data_blocks + 1);
        else if constexpr (std::is_same_v<T, Polygon>) return s.nodes * (s.nodes - 1);
        else return 86;
      },
      v_);
}

namespace detail {

inline int parse_int(std::string_view text, std::string_view what) {
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) {
    throw InvalidArgument(fmt::format("bad {} in scheme: '{}'", what, text));
  }
  return v;
}

}  // namespace detail

inline CodeScheme CodeScheme::parse(std::string_view text) {
  if (text == "pentagon") return pentagon();
  if (text == "heptagon") return heptagon();
  if (text == "heptagon-local") return heptagon_local();
  if (text.starts_with("polygon:")) return polygon(detail::parse_int(text.substr(8), "node count"));
  if (text.starts_with("rep:")) return replication(detail::parse_int(text.substr(4), "copy count"));
  if (text.ends_with("-rep")) {
    return replication(detail::parse_int(text.substr(0, text.size() - 4), "copy count"));
  }
  if (text.starts_with("raid+m:")) {
    return raid_mirror(detail::parse_int(text.substr(7), "data block count"));
  }
  if (text.starts_with("(") && text.ends_with(")-raid+m")) {
    auto inner = text.substr(1, text.size() - 1 - 8);
    auto comma = inner.find(',');
    if (comma != std::string_view::npos) {
      int n = detail::parse_int(inner.substr(0, comma), "code length");
      int k = detail::parse_int(inner.substr(comma + 1), "data block count");
      if (n != k + 1) throw InvalidArgument(fmt::format("raid+m needs n = k + 1: '{}'", text));
      return raid_mirror(k);
    }
  }
  throw InvalidArgument(fmt::format("unknown scheme '{}'", text));
}

struct BlockRole {
  enum class Kind { data, local_parity, global_parity };
  Kind kind = Kind::data;
  /// Data index, local group, or global parity index depending on kind.
  int index = 0;

  bool operator==(const BlockRole&) const = default;
};

inline std::string to_string(const BlockRole& r) {
  switch (r.kind) {
    case BlockRole::Kind::data: return fmt::format("data:{}", r.index);
    case BlockRole::Kind::local_parity: return fmt::format("local_parity:{}", r.index);
    case BlockRole::Kind::global_parity: return fmt::format("global_parity:{}", r.index);
  }
  return "?";
}

inline BlockRole block_role_from_string(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos) throw InvalidArgument(fmt::format("bad role '{}'", s));
  auto kind = s.substr(0, colon);
  int index = detail::parse_int(s.substr(colon + 1), "role index");
  if (kind == "data") return {BlockRole::Kind::data, index};
  if (kind == "local_parity") return {BlockRole::Kind::local_parity, index};
  if (kind == "global_parity") return {BlockRole::Kind::global_parity, index};
  throw InvalidArgument(fmt::format("bad role '{}'", s));
}

struct BlockSpec {
  BlockId id = 0;
  BlockRole role;
  /// Node indices holding a copy; copy number = position in this list.
  std::vector<NodeIndex> hosts;
  /// Coefficients over the stripe's data blocks.
  std::vector<gf256::Element> coeffs;
};

/// Linear description of one stripe of a scheme.
class CodeModel {
 public:
  explicit CodeModel(const CodeScheme& scheme);

  const CodeScheme& scheme() const { return scheme_; }
  int length() const { return scheme_.length(); }
  int data_count() const { return scheme_.data_blocks(); }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  std::span<const BlockSpec> blocks() const { return blocks_; }
  const BlockSpec& block(BlockId id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  BlockId data_block_id(int data_index) const {
    return data_ids_.at(static_cast<std::size_t>(data_index));
  }
  /// Blocks hosted on a node, ascending by id.
  const std::vector<BlockId>& blocks_on(NodeIndex node) const {
    return node_blocks_.at(static_cast<std::size_t>(node));
  }
  /// True when all coefficients are 0 or 1, so rank can be taken over GF(2).
  bool binary() const { return binary_; }

  /// Polygon only: block id of edge (i, j).
  BlockId edge_block(NodeIndex i, NodeIndex j) const;

 private:
  void add_block(BlockRole role, std::vector<NodeIndex> hosts, std::vector<gf256::Element> coeffs);
  void add_polygon(int n, int node_offset, int data_offset, int group);

  CodeScheme scheme_;
  std::vector<BlockSpec> blocks_;
  std::vector<BlockId> data_ids_;
  std::vector<std::vector<BlockId>> node_blocks_;
  bool binary_ = true;
};

inline void CodeModel::add_block(BlockRole role, std::vector<NodeIndex> hosts,
                                 std::vector<gf256::Element> coeffs) {
  BlockSpec b;
  b.id = static_cast<BlockId>(blocks_.size());
  b.role = role;
  b.hosts = std::move(hosts);
  b.coeffs = std::move(coeffs);
  for (auto h : b.hosts) node_blocks_[static_cast<std::size_t>(h)].push_back(b.id);
  for (auto c : b.coeffs) binary_ = binary_ && c <= 1;
  if (role.kind == BlockRole::Kind::data) data_ids_.push_back(b.id);
  blocks_.push_back(std::move(b));
}

// Edges of K_n in lexicographic order; the last edge (n-2, n-1) carries the
// XOR parity of the other edges' data.
inline void CodeModel::add_polygon(int n, int node_offset, int data_offset, int group) {
  const int d = data_count();
  const int edges = n * (n - 1) / 2;
  int e = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++e) {
      std::vector<gf256::Element> coeffs(static_cast<std::size_t>(d), 0);
      BlockRole role;
      if (e + 1 < edges) {
        coeffs[static_cast<std::size_t>(data_offset + e)] = 1;
        role = {BlockRole::Kind::data, data_offset + e};
      } else {
        for (int k = 0; k < edges - 1; ++k) coeffs[static_cast<std::size_t>(data_offset + k)] = 1;
        role = {BlockRole::Kind::local_parity, group};
      }
      add_block(role, {node_offset + i, node_offset + j}, std::move(coeffs));
    }
  }
}

inline CodeModel::CodeModel(const CodeScheme& scheme) : scheme_(scheme) {
  node_blocks_.resize(static_cast<std::size_t>(scheme.length()));
  const int d = scheme.data_blocks();
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Replication>) {
          std::vector<NodeIndex> hosts(static_cast<std::size_t>(s.copies));
          for (int c = 0; c < s.copies; ++c) hosts[static_cast<std::size_t>(c)] = c;
          add_block({BlockRole::Kind::data, 0}, hosts, {1});
        } else if constexpr (std::is_same_v<T, RaidMirror>) {
          for (int b = 0; b < d; ++b) {
            std::vector<gf256::Element> coeffs(static_cast<std::size_t>(d), 0);
            coeffs[static_cast<std::size_t>(b)] = 1;
            add_block({BlockRole::Kind::data, b}, {2 * b, 2 * b + 1}, std::move(coeffs));
          }
          add_block({BlockRole::Kind::local_parity, 0}, {2 * d, 2 * d + 1},
                    std::vector<gf256::Element>(static_cast<std::size_t>(d), 1));
        } else if constexpr (std::is_same_v<T, Polygon>) {
          add_polygon(s.nodes, 0, 0, 0);
        } else {
          add_polygon(7, 0, 0, 0);
          add_polygon(7, 7, 20, 1);
          for (int g = 0; g < 2; ++g) {
            std::vector<gf256::Element> coeffs(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) {
              coeffs[static_cast<std::size_t>(i)] =
                  gf256::pow(gf256::kGenerator, static_cast<std::uint64_t>((g + 1) * i));
            }
            add_block({BlockRole::Kind::global_parity, g}, {14}, std::move(coeffs));
          }
        }
      },
      scheme.variant());
}

inline BlockId CodeModel::edge_block(NodeIndex i, NodeIndex j) const {
  if (!scheme_.is<Polygon>()) throw InvalidArgument("edge_block: not a polygon code");
  if (i > j) std::swap(i, j);
  const int n = length();
  if (i < 0 || j >= n || i == j) throw InvalidArgument("edge_block: bad edge");
  // Edges before row i: sum_{r<i} (n-1-r).
  return i * (n - 1) - i * (i - 1) / 2 + (j - i - 1);
}

/// Shared, immutable model per scheme.
inline const CodeModel& code_model(const CodeScheme& scheme) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<CodeModel>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[scheme.name()];
  if (!slot) slot = std::make_unique<CodeModel>(scheme);
  return *slot;
}

}  // namespace drc
