#pragma once

// A file-backed mini distributed store. Each simulated node is a directory
// under the store root; files are striped, encoded and spread over node
// directories, with a JSON manifest per stored file.
//
//   <root>/store.json                      node table
//   <root>/<file>.manifest.json            one per stored file
//   <root>/n<node>/s<stripe>_b<block>_r<copy>.blk

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include "json.hpp"

#include "drc/checksum.hpp"
#include "drc/codes.hpp"
#include "drc/errors.hpp"
#include "drc/random.hpp"
#include "drc/repair.hpp"

namespace drc::store {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kDefaultBlockSize = 4ull << 20;

enum class NodeStatus { up, down };

struct NodeState {
  NodeId id = 0;
  NodeStatus status = NodeStatus::up;
  fs::path dir;
};

struct ReplicaRecord {
  NodeId node = 0;
  int copy = 0;
  std::string file;  // relative to the store root
};

struct BlockRecord {
  BlockId id = 0;
  BlockRole role;
  std::uint32_t crc = 0;
  std::vector<ReplicaRecord> replicas;
};

struct StripeRecord {
  int index = 0;
  std::vector<NodeId> nodes;  // code node index -> physical node
  std::vector<BlockRecord> blocks;
};

struct StoreManifest {
  std::string file_name;
  std::uint64_t original_size = 0;
  CodeScheme scheme;
  std::uint64_t block_size = kDefaultBlockSize;
  std::uint64_t padding = 0;
  std::uint64_t seed = 0;
  std::vector<StripeRecord> stripes;

  std::size_t stripe_count() const { return stripes.size(); }
};

inline void to_json(nlohmann::json& j, const StoreManifest& m) {
  j = nlohmann::json{{"file", m.file_name},          {"size", m.original_size},
                     {"scheme", m.scheme.name()},    {"block_size", m.block_size},
                     {"padding", m.padding},         {"seed", m.seed},
                     {"stripe_count", m.stripes.size()}};
  auto& stripes = j["stripes"] = nlohmann::json::array();
  for (const auto& s : m.stripes) {
    nlohmann::json js{{"index", s.index}, {"nodes", s.nodes}};
    auto& blocks = js["blocks"] = nlohmann::json::array();
    for (const auto& b : s.blocks) {
      nlohmann::json jb{{"id", b.id}, {"role", to_string(b.role)}, {"crc32", crc_to_hex(b.crc)}};
      auto& reps = jb["replicas"] = nlohmann::json::array();
      for (const auto& r : b.replicas) reps.push_back({{"node", r.node}, {"copy", r.copy}, {"file", r.file}});
      blocks.push_back(std::move(jb));
    }
    stripes.push_back(std::move(js));
  }
}

inline void from_json(const nlohmann::json& j, StoreManifest& m) {
  m.file_name = j.at("file").get<std::string>();
  m.original_size = j.at("size").get<std::uint64_t>();
  m.scheme = CodeScheme::parse(j.at("scheme").get<std::string>());
  m.block_size = j.at("block_size").get<std::uint64_t>();
  m.padding = j.at("padding").get<std::uint64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.stripes.clear();
  for (const auto& js : j.at("stripes")) {
    StripeRecord s;
    s.index = js.at("index").get<int>();
    s.nodes = js.at("nodes").get<std::vector<NodeId>>();
    for (const auto& jb : js.at("blocks")) {
      BlockRecord b;
      b.id = jb.at("id").get<BlockId>();
      b.role = block_role_from_string(jb.at("role").get<std::string>());
      b.crc = crc_from_hex(jb.at("crc32").get<std::string>());
      for (const auto& jr : jb.at("replicas")) {
        b.replicas.push_back({jr.at("node").get<NodeId>(), jr.at("copy").get<int>(),
                              jr.at("file").get<std::string>()});
      }
      s.blocks.push_back(std::move(b));
    }
    m.stripes.push_back(std::move(s));
  }
  if (j.at("stripe_count").get<std::size_t>() != m.stripes.size()) {
    throw StoreError("manifest stripe_count disagrees with its stripe list");
  }
}

struct FsckIssue {
  std::string file;
  int stripe = 0;
  BlockId block = 0;
  NodeId node = 0;
  int copy = 0;
  bool operator==(const FsckIssue&) const = default;
};

struct FatalStripe {
  std::string file;
  int stripe = 0;
  bool operator==(const FatalStripe&) const = default;
};

struct FsckReport {
  std::vector<FsckIssue> missing;
  std::vector<FsckIssue> corrupt;
  std::vector<FatalStripe> fatal;

  bool clean() const { return missing.empty() && corrupt.empty() && fatal.empty(); }
};

struct DegradedRead {
  std::string file;
  int stripe = 0;
  BlockId block = 0;
  int transfers = 0;
};

struct ReadResult {
  Bytes data;
  std::vector<DegradedRead> degraded;

  int degraded_bandwidth() const {
    int total = 0;
    for (const auto& d : degraded) total += d.transfers;
    return total;
  }
};

struct RepairReport {
  int plans_executed = 0;
  /// Transfers actually performed.
  int bandwidth_blocks = 0;
  /// Sum of bandwidth_blocks over the plans.
  int planned_bandwidth = 0;
  std::uint64_t bytes_moved = 0;
  std::vector<NodeId> revived;
};

namespace detail {

/// flock()-based lock on <root>/.lock: shared for readers, exclusive for
/// anything that mutates the store.
class StoreLock {
 public:
  StoreLock(const fs::path& root, bool exclusive) {
    fd_ = ::open((root / ".lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StoreError(fmt::format("cannot open lock file in {}", root.string()));
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      throw StoreError("cannot lock store");
    }
  }
  ~StoreLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

inline std::optional<Bytes> try_read_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  std::ifstream in(p, std::ios::binary | std::ios::ate);
  if (!in) return std::nullopt;
  const auto size = static_cast<std::size_t>(in.tellg());
  Bytes out(size);
  in.seekg(0);
  if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size))) return std::nullopt;
  return out;
}

inline Bytes read_file(const fs::path& p) {
  auto b = try_read_file(p);
  if (!b) throw StoreError(fmt::format("cannot read {}", p.string()));
  return std::move(*b);
}

inline void write_file_atomic(const fs::path& p, std::span<const std::uint8_t> bytes) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(fmt::format("cannot write {}", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StoreError(fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, p);
}

inline void write_text_atomic(const fs::path& p, const std::string& text) {
  write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace detail

class BlockStore {
 public:
  /// Creates an empty store with the given number of up nodes.
  static BlockStore init(const fs::path& root, int node_count) {
    if (node_count < 1) throw InvalidArgument("store needs at least one node");
    fs::create_directories(root);
    if (fs::exists(root / "store.json")) {
      throw StoreError(fmt::format("{} already holds a store", root.string()));
    }
    BlockStore s(root);
    for (int i = 0; i < node_count; ++i) {
      s.nodes_.push_back({i, NodeStatus::up, root / fmt::format("n{}", i)});
      fs::create_directories(s.nodes_.back().dir);
    }
    s.save_nodes();
    return s;
  }

  static BlockStore open(const fs::path& root) {
    BlockStore s(root);
    auto path = root / "store.json";
    if (!fs::exists(path)) throw StoreError(fmt::format("no store at {}", root.string()));
    auto j = nlohmann::json::parse(std::ifstream(path));
    for (const auto& jn : j.at("nodes")) {
      NodeId id = jn.at("id").get<NodeId>();
      auto st = jn.at("status").get<std::string>();
      if (st != "up" && st != "down") throw StoreError(fmt::format("bad node status '{}'", st));
      s.nodes_.push_back({id, st == "up" ? NodeStatus::up : NodeStatus::down,
                          root / fmt::format("n{}", id)});
    }
    return s;
  }

  const fs::path& root() const { return root_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }

  std::vector<NodeId> up_nodes() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
      if (n.status == NodeStatus::up) out.push_back(n.id);
    }
    return out;
  }

  std::vector<std::string> files() const {
    std::vector<std::string> out;
    const std::string suffix = ".manifest.json";
    for (const auto& e : fs::directory_iterator(root_)) {
      auto name = e.path().filename().string();
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        out.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  StoreManifest manifest(const std::string& name) const {
    auto path = manifest_path(name);
    if (!fs::exists(path)) throw StoreError(fmt::format("no such file '{}'", name));
    return nlohmann::json::parse(std::ifstream(path)).get<StoreManifest>();
  }

  /// Stores a file: pads it to whole stripes, encodes every stripe and
  /// writes each block copy to its node. Returns the persisted manifest.
  StoreManifest put(const fs::path& file, const CodeScheme& scheme,
                    std::uint64_t block_size = kDefaultBlockSize, std::uint64_t seed = 0) {
    if (block_size == 0) throw InvalidArgument("block size must be positive");
    detail::StoreLock lock(root_, true);
    const auto name = file.filename().string();
    if (name.empty()) throw InvalidArgument("put needs a file path");
    if (fs::exists(manifest_path(name))) throw StoreError(fmt::format("'{}' is already stored", name));
    auto pool = up_nodes();
    if (static_cast<int>(pool.size()) < scheme.length()) {
      throw StoreError(fmt::format("{} needs {} up nodes, store has {}", scheme.name(), scheme.length(),
                                   pool.size()));
    }
    Bytes content = detail::read_file(file);

    StoreManifest m;
    m.file_name = name;
    m.original_size = content.size();
    m.scheme = scheme;
    m.block_size = block_size;
    m.seed = seed;
    const std::uint64_t d = static_cast<std::uint64_t>(scheme.data_blocks());
    const std::uint64_t stripe_bytes = d * block_size;
    const std::uint64_t stripes = (content.size() + stripe_bytes - 1) / stripe_bytes;
    m.padding = stripes * stripe_bytes - content.size();
    content.resize(stripes * stripe_bytes, 0);

    for (std::uint64_t s = 0; s < stripes; ++s) {
      std::vector<NodeId> shuffled = pool;
      Rng rng(derive_seed(seed, {s, 0}));
      shuffle(std::span<NodeId>(shuffled), rng);
      auto layout = build_layout(scheme, shuffled, derive_seed(seed, {s, 1}));

      std::vector<Bytes> data(d);
      for (std::uint64_t i = 0; i < d; ++i) {
        auto begin = content.begin() + static_cast<std::ptrdiff_t>((s * d + i) * block_size);
        data[i].assign(begin, begin + static_cast<std::ptrdiff_t>(block_size));
      }
      auto encoded = encode_stripe(scheme, data);

      StripeRecord rec;
      rec.index = static_cast<int>(s);
      rec.nodes = layout.nodes;
      for (const auto& [id, bytes] : encoded) {
        BlockRecord b{id, layout.block_roles.at(id), crc32(bytes), {}};
        for (const auto& p : layout.block_placements.at(id)) {
          auto rel = block_file(p.node, rec.index, id, p.copy);
          detail::write_file_atomic(root_ / rel, bytes);
          b.replicas.push_back({p.node, p.copy, rel});
        }
        rec.blocks.push_back(std::move(b));
      }
      m.stripes.push_back(std::move(rec));
    }
    detail::write_text_atomic(manifest_path(name), nlohmann::json(m).dump(1));
    return m;
  }

  /// Reads a file back. Blocks with no readable copy are rebuilt through a
  /// degraded-read plan; each such read is logged in the result.
  ReadResult get(const std::string& name) const {
    detail::StoreLock lock(root_, false);
    auto m = manifest(name);
    const auto& model = code_model(m.scheme);
    ReadResult out;
    out.data.reserve(m.stripes.size() * static_cast<std::size_t>(model.data_count()) * m.block_size);
    for (const auto& stripe : m.stripes) {
      for (int i = 0; i < model.data_count(); ++i) {
        const auto& rec = stripe.blocks.at(static_cast<std::size_t>(model.data_block_id(i)));
        std::optional<Bytes> bytes;
        for (const auto& r : rec.replicas) {
          if ((bytes = read_healthy(r, rec.crc))) break;
        }
        if (!bytes) bytes = degraded_read(m, stripe, rec, out);
        out.data.insert(out.data.end(), bytes->begin(), bytes->end());
      }
    }
    out.data.resize(m.original_size);
    return out;
  }

  /// Fails a node: marks it down and wipes its directory.
  NodeState kill_node(NodeId id) {
    detail::StoreLock lock(root_, true);
    auto& n = node(id);
    n.status = NodeStatus::down;
    std::error_code ec;
    fs::remove_all(n.dir, ec);
    save_nodes();
    return n;
  }

  /// Brings a node back up with an empty directory (a replacement node).
  NodeState revive_node(NodeId id) {
    detail::StoreLock lock(root_, true);
    auto& n = node(id);
    if (n.status == NodeStatus::down) {
      n.status = NodeStatus::up;
      fs::create_directories(n.dir);
      save_nodes();
    }
    return n;
  }

  FsckReport fsck() const {
    detail::StoreLock lock(root_, false);
    return scan();
  }

  /// Revives down nodes as replacements and restores every missing or
  /// corrupt block copy. Each damaged stripe is repaired with plan_repair,
  /// treating every node with a damaged copy as failed.
  RepairReport repair() {
    detail::StoreLock lock(root_, true);
    RepairReport report;
    auto before = scan();
    if (!before.fatal.empty()) {
      throw Unrecoverable(fmt::format("{} stripe(s) unrecoverable, first: {} stripe {}", before.fatal.size(),
                                      before.fatal.front().file, before.fatal.front().stripe));
    }
    for (auto& n : nodes_) {
      if (n.status == NodeStatus::down) {
        n.status = NodeStatus::up;
        fs::create_directories(n.dir);
        report.revived.push_back(n.id);
      }
    }
    save_nodes();

    std::map<std::pair<std::string, int>, std::set<NodeId>> damaged;
    for (const auto* list : {&before.missing, &before.corrupt}) {
      for (const auto& issue : *list) damaged[{issue.file, issue.stripe}].insert(issue.node);
    }
    std::map<std::string, StoreManifest> manifests;
    for (const auto& [key, bad_nodes] : damaged) {
      const auto& [file, stripe_index] = key;
      if (!manifests.count(file)) manifests.emplace(file, manifest(file));
      const auto& m = manifests.at(file);
      const auto& stripe = m.stripes.at(static_cast<std::size_t>(stripe_index));

      ErasurePattern pattern;
      for (auto phys : bad_nodes) {
        auto it = std::find(stripe.nodes.begin(), stripe.nodes.end(), phys);
        pattern.failed.insert(static_cast<NodeIndex>(it - stripe.nodes.begin()));
      }
      auto plan = plan_repair(m.scheme, pattern);
      ExecStats stats;
      auto reader = [&](NodeIndex idx, BlockId block) -> std::optional<Chunk> {
        if (pattern.contains(idx)) return std::nullopt;
        const auto& rec = stripe.blocks.at(static_cast<std::size_t>(block));
        for (const auto& r : rec.replicas) {
          if (r.node != stripe.nodes.at(static_cast<std::size_t>(idx))) continue;
          auto bytes = detail::try_read_file(root_ / r.file);
          if (!bytes) return std::nullopt;
          return Chunk{std::move(*bytes), rec.crc};
        }
        return std::nullopt;
      };
      auto restored = execute_plan(plan, reader, &stats);
      for (const auto& t : plan.restores) {
        const auto& rec = stripe.blocks.at(static_cast<std::size_t>(t.block));
        const auto& bytes = restored.at(t.block);
        if (crc32(bytes) != rec.crc) {
          throw ChecksumMismatch(fmt::format("rebuilt block {} of {} stripe {} fails its checksum", t.block,
                                             file, stripe_index));
        }
        NodeId phys = stripe.nodes.at(static_cast<std::size_t>(t.node));
        for (const auto& r : rec.replicas) {
          if (r.node == phys) detail::write_file_atomic(root_ / r.file, bytes);
        }
      }
      ++report.plans_executed;
      report.planned_bandwidth += plan.bandwidth_blocks();
      report.bandwidth_blocks += stats.transfers;
      report.bytes_moved += stats.bytes_moved;
    }
    return report;
  }

  static std::string block_file(NodeId node, int stripe, BlockId block, int copy) {
    return fmt::format("n{}/s{}_b{}_r{}.blk", node, stripe, block, copy);
  }

 private:
  explicit BlockStore(fs::path root) : root_(std::move(root)) {}

  fs::path manifest_path(const std::string& name) const { return root_ / (name + ".manifest.json"); }

  NodeState& node(NodeId id) {
    for (auto& n : nodes_) {
      if (n.id == id) return n;
    }
    throw InvalidArgument(fmt::format("unknown node {}", id));
  }

  bool is_up(NodeId id) const {
    for (const auto& n : nodes_) {
      if (n.id == id) return n.status == NodeStatus::up;
    }
    return false;
  }

  void save_nodes() const {
    nlohmann::json j;
    auto& arr = j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) {
      arr.push_back({{"id", n.id}, {"status", n.status == NodeStatus::up ? "up" : "down"}});
    }
    detail::write_text_atomic(root_ / "store.json", j.dump(1));
  }

  std::optional<Bytes> read_healthy(const ReplicaRecord& r, std::uint32_t crc) const {
    if (!is_up(r.node)) return std::nullopt;
    auto bytes = detail::try_read_file(root_ / r.file);
    if (!bytes || crc32(*bytes) != crc) return std::nullopt;
    return bytes;
  }

  Bytes degraded_read(const StoreManifest& m, const StripeRecord& stripe, const BlockRecord& rec,
                      ReadResult& log) const {
    std::set<NodeIndex> unavailable;
    for (std::size_t i = 0; i < stripe.nodes.size(); ++i) {
      if (!is_up(stripe.nodes[i])) unavailable.insert(static_cast<NodeIndex>(i));
    }
    for (const auto& r : rec.replicas) {
      auto it = std::find(stripe.nodes.begin(), stripe.nodes.end(), r.node);
      unavailable.insert(static_cast<NodeIndex>(it - stripe.nodes.begin()));
    }
    // A source that turns out missing or corrupt is marked unavailable and
    // the read is replanned without it.
    for (std::size_t attempt = 0; attempt <= stripe.nodes.size(); ++attempt) {
      auto plan = plan_degraded_read(m.scheme, rec.id, unavailable);
      std::optional<NodeIndex> bad;
      auto reader = [&](NodeIndex idx, BlockId block) -> std::optional<Chunk> {
        const auto& src = stripe.blocks.at(static_cast<std::size_t>(block));
        for (const auto& r : src.replicas) {
          if (r.node != stripe.nodes.at(static_cast<std::size_t>(idx))) continue;
          if (auto bytes = read_healthy(r, src.crc)) return Chunk{std::move(*bytes), src.crc};
        }
        bad = idx;
        return std::nullopt;
      };
      try {
        auto got = execute_plan(plan, reader);
        auto bytes = std::move(got.at(rec.id));
        if (crc32(bytes) != rec.crc) {
          throw ChecksumMismatch(fmt::format("degraded read of block {} in {} stripe {} fails its checksum",
                                             rec.id, m.file_name, stripe.index));
        }
        log.degraded.push_back({m.file_name, stripe.index, rec.id, plan.bandwidth_blocks()});
        return bytes;
      } catch (const MissingBlock&) {
        if (!bad) throw;
        unavailable.insert(*bad);
      }
    }
    throw Unrecoverable(fmt::format("block {} of {} stripe {} cannot be read", rec.id, m.file_name, stripe.index));
  }

  FsckReport scan() const {
    FsckReport report;
    for (const auto& name : files()) {
      auto m = manifest(name);
      const auto& model = code_model(m.scheme);
      for (const auto& stripe : m.stripes) {
        std::vector<BlockId> healthy;
        for (const auto& rec : stripe.blocks) {
          bool ok = false;
          for (const auto& r : rec.replicas) {
            FsckIssue issue{name, stripe.index, rec.id, r.node, r.copy};
            std::optional<Bytes> bytes;
            if (is_up(r.node)) bytes = detail::try_read_file(root_ / r.file);
            if (!bytes) {
              report.missing.push_back(issue);
            } else if (crc32(*bytes) != rec.crc) {
              report.corrupt.push_back(issue);
            } else {
              ok = true;
            }
          }
          if (ok) healthy.push_back(rec.id);
        }
        if (!can_decode(model, healthy)) report.fatal.push_back({name, stripe.index});
      }
    }
    return report;
  }

  fs::path root_;
  std::vector<NodeState> nodes_;
};

}  // namespace drc::store
