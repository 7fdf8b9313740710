#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include "json.hpp"

#include "drc/blockstore.hpp"
#include "drc/codes.hpp"
#include "drc/csv.hpp"
#include "drc/mapsched.hpp"
#include "drc/reliability.hpp"
#include "drc/repair.hpp"
#include "drc/reports.hpp"

namespace drc::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config files

std::map<std::string, std::string> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("--config: cannot read '{}'", path.string()));
  std::map<std::string, std::string> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("--config: {}:{}: expected key=value", path.string(), lineno));
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(fmt::format("--config: {}:{}: empty key", path.string(), lineno));
    out[key] = value;
  }
  return out;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
}

/// Pulls "--config PATH" out of args and returns PATH, if present.
std::optional<std::string> take_config_flag(std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config: missing file name");
      auto path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      return path;
    }
    if (args[i].starts_with("--config=")) {
      auto path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      return path;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shared option helpers

CLI::Validator scheme_validator() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          CodeScheme::parse(s);
          return {};
        } catch (const Error& e) {
          return e.what();
        }
      },
      "SCHEME", "scheme");
}

std::vector<CodeScheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<CodeScheme> out;
  for (const auto& n : names) out.push_back(CodeScheme::parse(n));
  return out;
}

unsigned default_threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

Bytes read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StoreError(fmt::format("cannot read {}", p.string()));
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& p, std::span<const std::uint8_t> data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw StoreError(fmt::format("cannot write {}", p.string()));
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void emit(const csv::Table& t, const std::string& path, std::ostream& out) {
  if (path == "-") {
    out << csv::to_string(t);
  } else {
    csv::emit_report(t, path);
  }
}

// ---------------------------------------------------------------------------
// code

struct CodeArgs {
  std::string scheme = "pentagon";
  std::string input, out, dir;
  std::uint64_t block_size = 4096;
  std::vector<int> failed;
  int read_block = -1;
};

int code_info(const CodeArgs& a, std::ostream& out) {
  auto s = CodeScheme::parse(a.scheme);
  const auto& model = code_model(s);
  out << fmt::format("scheme: {}\n", s.name());
  out << fmt::format("length: {}\n", s.length());
  out << fmt::format("data_blocks: {}\n", s.data_blocks());
  out << fmt::format("distinct_blocks: {}\n", s.distinct_blocks());
  out << fmt::format("stored_blocks: {}\n", s.stored_blocks());
  out << fmt::format("overhead: {}\n", storage_overhead(s).to_string());
  out << fmt::format("tolerance: {}\n", tolerance(s));
  auto cell = [](int v) { return v < 0 ? std::string("n/a") : std::to_string(v); };
  out << fmt::format("single_repair_blocks: {}\n", cell(reports::single_repair_blocks(s)));
  out << fmt::format("degraded_read_blocks: {}\n", cell(reports::degraded_read_blocks(s)));
  for (int n = 0; n < s.length(); ++n) {
    std::vector<std::string> roles;
    for (auto id : model.blocks_on(n)) roles.push_back(fmt::format("b{}({})", id, to_string(model.block(id).role)));
    out << fmt::format("node {}: {}\n", n, fmt::join(roles, " "));
  }
  return kOk;
}

std::string block_path(int node, std::size_t stripe, BlockId id) {
  return fmt::format("node{}/s{}_b{}.blk", node, stripe, id);
}

int code_encode(const CodeArgs& a, std::ostream& out) {
  auto s = CodeScheme::parse(a.scheme);
  auto content = read_bytes(a.input);
  const fs::path dir = a.out;
  const auto d = static_cast<std::uint64_t>(s.data_blocks());
  const std::uint64_t stripe_bytes = d * a.block_size;
  const std::uint64_t stripes = std::max<std::uint64_t>(1, (content.size() + stripe_bytes - 1) / stripe_bytes);
  const auto size = content.size();
  content.resize(stripes * stripe_bytes, 0);
  const auto& model = code_model(s);
  for (std::uint64_t st = 0; st < stripes; ++st) {
    std::vector<Bytes> data(d);
    for (std::uint64_t i = 0; i < d; ++i) {
      auto begin = content.begin() + static_cast<std::ptrdiff_t>((st * d + i) * a.block_size);
      data[i].assign(begin, begin + static_cast<std::ptrdiff_t>(a.block_size));
    }
    auto enc = encode_stripe(s, data);
    for (const auto& [id, bytes] : enc) {
      for (auto h : model.block(id).hosts) write_bytes(dir / block_path(h, st, id), bytes);
    }
  }
  nlohmann::json j{{"scheme", s.name()}, {"size", size}, {"block_size", a.block_size}, {"stripes", stripes}};
  std::ofstream(dir / "encoding.json") << j.dump(1) << "\n";
  out << fmt::format("encoded {} bytes as {} stripe(s) of {} over {} nodes into {}\n", size, stripes, s.name(),
                     s.length(), dir.string());
  return kOk;
}

int code_decode(const CodeArgs& a, std::ostream& out) {
  const fs::path dir = a.dir;
  std::ifstream jf(dir / "encoding.json");
  if (!jf) throw StoreError(fmt::format("{} has no encoding.json", dir.string()));
  auto j = nlohmann::json::parse(jf);
  auto s = CodeScheme::parse(j.at("scheme").get<std::string>());
  const auto size = j.at("size").get<std::uint64_t>();
  const auto stripes = j.at("stripes").get<std::uint64_t>();
  const auto& model = code_model(s);

  std::set<NodeIndex> erased(a.failed.begin(), a.failed.end());
  for (auto n : erased) {
    if (n < 0 || n >= s.length()) throw InvalidArgument(fmt::format("--failed: node {} outside 0..{}", n, s.length() - 1));
  }
  for (int n = 0; n < s.length(); ++n) {
    if (!fs::is_directory(dir / fmt::format("node{}", n))) erased.insert(n);
  }
  Bytes result;
  for (std::uint64_t st = 0; st < stripes; ++st) {
    ErasurePattern pattern(erased);
    NodeContents surviving;
    for (int n = 0; n < s.length(); ++n) {
      if (pattern.contains(n)) continue;
      for (auto id : model.blocks_on(n)) {
        auto p = dir / block_path(n, st, id);
        if (!fs::exists(p)) {
          pattern.failed.insert(n);
          surviving.erase(n);
          break;
        }
        surviving[n][id] = read_bytes(p);
      }
    }
    auto data = decode_stripe(s, surviving, pattern);
    for (const auto& b : data) result.insert(result.end(), b.begin(), b.end());
  }
  result.resize(size);
  write_bytes(a.out, result);
  out << fmt::format("decoded {} bytes from {} stripe(s); erased nodes {{{}}}\n", size, stripes, fmt::join(erased, ","));
  return kOk;
}

int code_repair_plan(const CodeArgs& a, std::ostream& out) {
  auto s = CodeScheme::parse(a.scheme);
  std::set<NodeIndex> failed(a.failed.begin(), a.failed.end());
  RepairPlan plan;
  if (a.read_block >= 0) {
    plan = plan_degraded_read(s, a.read_block, failed);
    out << fmt::format("degraded read of b{} with nodes {{{}}} down\n", a.read_block, fmt::join(failed, ","));
  } else {
    plan = plan_repair(s, ErasurePattern(failed));
    out << fmt::format("repair of nodes {{{}}}\n", fmt::join(failed, ","));
  }
  for (const auto& step : plan.steps) {
    if (const auto* t = std::get_if<Transfer>(&step)) {
      out << "  " << describe(*t) << "\n";
    } else {
      const auto& c = std::get<Combine>(step);
      out << fmt::format("  combine b{} at {} from {} input(s)\n", c.block,
                         c.node == kReaderNode ? std::string("reader") : fmt::format("N{}", c.node), c.inputs.size());
    }
  }
  out << fmt::format("bandwidth: {} blocks\n", plan.bandwidth_blocks());
  return kOk;
}

// ---------------------------------------------------------------------------
// store

struct StoreArgs {
  std::string root;
  int nodes = 25;
  std::string file, name, out, scheme = "pentagon";
  std::uint64_t block_size = store::kDefaultBlockSize;
  std::uint64_t seed = 0;
  int node = -1;
};

void print_fsck(const store::FsckReport& r, std::ostream& out) {
  for (const auto& i : r.missing) {
    out << fmt::format("missing {} stripe {} b{} copy {} on node {}\n", i.file, i.stripe, i.block, i.copy, i.node);
  }
  for (const auto& i : r.corrupt) {
    out << fmt::format("corrupt {} stripe {} b{} copy {} on node {}\n", i.file, i.stripe, i.block, i.copy, i.node);
  }
  for (const auto& f : r.fatal) out << fmt::format("unrecoverable {} stripe {}\n", f.file, f.stripe);
  out << fmt::format("fsck: {} missing, {} corrupt, {} unrecoverable stripe(s){}\n", r.missing.size(), r.corrupt.size(),
                     r.fatal.size(), r.clean() ? ", clean" : "");
}

// ---------------------------------------------------------------------------
// sim

struct LocalityArgs {
  std::vector<std::string> schemes{"2-rep", "pentagon", "heptagon-local"};
  std::vector<std::string> schedulers{"maxmatch", "delay", "peeling"};
  std::vector<int> slots{2, 4, 8};
  std::vector<double> loads{25, 50, 75, 100};
  int nodes = 25, reps = 20, delay = 1, stripes = 0;
  double catalog_waves = 2.0;
  std::string layout = "random";
  std::uint64_t block_size = 64ull << 20;
  std::uint64_t seed = 0;
  unsigned threads = default_threads();
  std::string out, summary = "-";
};

struct ReliabilityArgs {
  std::vector<std::string> schemes{"2-rep", "3-rep", "pentagon", "heptagon", "heptagon-local", "raid+m:9", "raid+m:11"};
  double mttf = 100, mttr = 10;
  std::string mode = "parallel", chain = "grouped";
  int trials = 10000;
  std::uint64_t seed = 0;
  unsigned threads = default_threads();
  std::string out = "-";
};

struct ReportArgs {
  std::vector<std::string> schemes{"3-rep", "2-rep", "pentagon", "heptagon", "heptagon-local", "raid+m:9", "raid+m:11"};
  double mttf = 4 * reliability::kHoursPerYear, mttr = 24;
  std::string mode = "parallel";
  int cluster_nodes = 25;
  std::string out = "-";
};

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double-replication erasure codes: coding, block store and simulation tools", "drc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.add_option("--config", "key=value file with defaults for the chosen command's flags");

  std::map<std::string, CLI::App*> leaves;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc, const std::string& key) {
    auto* sub = parent->add_subcommand(name, desc);
    leaves[key] = sub;
    return sub;
  };

  // code
  CodeArgs code;
  auto* code_cmd = app.add_subcommand("code", "Encode, decode and plan repairs for one code")->require_subcommand(1);
  auto* info = leaf(code_cmd, "info", "Print parameters of a scheme", "code info");
  info->add_option("--scheme", code.scheme, "Scheme name")->check(scheme_validator())->capture_default_str();
  auto* encode = leaf(code_cmd, "encode", "Encode a file into per-node block files", "code encode");
  encode->add_option("--scheme", code.scheme)->check(scheme_validator())->capture_default_str();
  encode->add_option("--input", code.input, "File to encode")->required()->check(CLI::ExistingFile);
  encode->add_option("--out", code.out, "Output directory")->required();
  encode->add_option("--block-size", code.block_size, "Bytes per block")->check(CLI::Range(1ull, 1ull << 32))->capture_default_str();
  auto* decode = leaf(code_cmd, "decode", "Decode a directory written by encode", "code decode");
  decode->add_option("--dir", code.dir, "Directory written by code encode")->required()->check(CLI::ExistingDirectory);
  decode->add_option("--out", code.out, "Decoded output file")->required();
  decode->add_option("--failed", code.failed, "Nodes to treat as erased (missing node directories count too)")->delimiter(',');
  auto* plan = leaf(code_cmd, "repair-plan", "Show the transfers that repair failed nodes", "code repair-plan");
  plan->add_option("--scheme", code.scheme)->check(scheme_validator())->capture_default_str();
  plan->add_option("--failed", code.failed, "Failed nodes, comma separated")->delimiter(',')->required();
  plan->add_option("--read", code.read_block, "Plan a degraded read of this block instead of a repair")->check(CLI::NonNegativeNumber);

  // store
  StoreArgs st;
  auto* store_cmd = app.add_subcommand("store", "Manage an on-disk block store")->require_subcommand(1);
  auto add_root = [&](CLI::App* c) { c->add_option("--root", st.root, "Store directory")->required(); };
  auto* s_init = leaf(store_cmd, "init", "Create a store", "store init");
  add_root(s_init);
  s_init->add_option("--nodes", st.nodes, "Number of nodes")->check(CLI::Range(1, 64))->capture_default_str();
  auto* s_put = leaf(store_cmd, "put", "Store a file", "store put");
  add_root(s_put);
  s_put->add_option("--file", st.file, "File to store")->required()->check(CLI::ExistingFile);
  s_put->add_option("--scheme", st.scheme)->check(scheme_validator())->capture_default_str();
  s_put->add_option("--block-size", st.block_size, "Bytes per block")->check(CLI::Range(1ull, 1ull << 32))->capture_default_str();
  s_put->add_option("--seed", st.seed, "Placement seed")->required();
  auto* s_get = leaf(store_cmd, "get", "Read a file back", "store get");
  add_root(s_get);
  s_get->add_option("--name", st.name, "Stored file name")->required();
  s_get->add_option("--out", st.out, "Output path")->required();
  auto* s_kill = leaf(store_cmd, "kill", "Fail a node and wipe its data", "store kill");
  add_root(s_kill);
  s_kill->add_option("--node", st.node, "Node id")->required()->check(CLI::NonNegativeNumber);
  auto* s_revive = leaf(store_cmd, "revive", "Bring a node back with an empty disk", "store revive");
  add_root(s_revive);
  s_revive->add_option("--node", st.node, "Node id")->required()->check(CLI::NonNegativeNumber);
  auto* s_fsck = leaf(store_cmd, "fsck", "Check every block copy", "store fsck");
  add_root(s_fsck);
  auto* s_repair = leaf(store_cmd, "repair", "Restore every missing or corrupt copy", "store repair");
  add_root(s_repair);

  // sim
  LocalityArgs loc;
  ReliabilityArgs rel;
  auto* sim_cmd = app.add_subcommand("sim", "Simulation campaigns")->require_subcommand(1);
  auto* s_loc = leaf(sim_cmd, "locality", "Map-task locality sweep", "sim locality");
  s_loc->add_option("--scheme", loc.schemes, "Schemes, comma separated")->delimiter(',')->check(scheme_validator())->capture_default_str();
  s_loc->add_option("--scheduler", loc.schedulers, "maxmatch, delay, peeling")
      ->delimiter(',')
      ->check(CLI::IsMember({"maxmatch", "delay", "peeling"}))
      ->capture_default_str();
  s_loc->add_option("--slots", loc.slots, "Map slots per node")->delimiter(',')->check(CLI::Range(1, 64))->capture_default_str();
  s_loc->add_option("--load", loc.loads, "Load points in percent")->delimiter(',')->check(CLI::Range(0.001, 200.0))->capture_default_str();
  s_loc->add_option("--nodes", loc.nodes, "Cluster nodes")->check(CLI::Range(1, 10000))->capture_default_str();
  s_loc->add_option("--reps", loc.reps, "Seeds per point")->check(CLI::Range(1, 100000))->capture_default_str();
  s_loc->add_option("--delay", loc.delay, "Delay-scheduler wait in heartbeat rounds")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_loc->add_option("--stripes", loc.stripes, "Stripes per cluster (0 = size by --catalog-waves)")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_loc->add_option("--catalog-waves", loc.catalog_waves, "Catalog size in slot waves of data blocks")->check(CLI::PositiveNumber)->capture_default_str();
  s_loc->add_option("--layout", loc.layout, "Stripe placement: random or rotated")->check(CLI::IsMember({"random", "rotated"}))->capture_default_str();
  s_loc->add_option("--block-size", loc.block_size, "Bytes per block for the remote traffic column")->capture_default_str();
  s_loc->add_option("--seed", loc.seed, "Base seed")->required();
  s_loc->add_option("--threads", loc.threads, "Worker threads")->check(CLI::Range(1u, 256u));
  s_loc->add_option("--out", loc.out, "Per-instance CSV path");
  s_loc->add_option("--summary", loc.summary, "Summary CSV path ('-' for stdout)")->capture_default_str();

  auto* s_rel = leaf(sim_cmd, "reliability", "MTTDL from the Markov chain and Monte Carlo", "sim reliability");
  s_rel->add_option("--scheme", rel.schemes, "Schemes, comma separated")->delimiter(',')->check(scheme_validator())->capture_default_str();
  s_rel->add_option("--mttf", rel.mttf, "Mean time to node failure, hours")->check(CLI::PositiveNumber)->capture_default_str();
  s_rel->add_option("--mttr", rel.mttr, "Mean time to repair one node, hours")->check(CLI::PositiveNumber)->capture_default_str();
  s_rel->add_option("--mode", rel.mode, "serial or parallel repair")->check(CLI::IsMember({"serial", "parallel"}))->capture_default_str();
  s_rel->add_option("--chain", rel.chain, "grouped, count or count-capped")->check(CLI::IsMember({"grouped", "count", "count-capped"}))->capture_default_str();
  s_rel->add_option("--trials", rel.trials, "Monte Carlo trials (0 = analytic only)")
      ->check(CLI::Validator(
          [](std::string& s) {
            int v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) return std::string("not an integer");
            return v == 0 || v >= 100 ? std::string() : std::string("must be 0 or at least 100");
          },
          "0|>=100"))
      ->capture_default_str();
  s_rel->add_option("--seed", rel.seed, "Monte Carlo seed")->required();
  s_rel->add_option("--threads", rel.threads, "Worker threads")->check(CLI::Range(1u, 256u));
  s_rel->add_option("--out", rel.out, "CSV path ('-' for stdout)")->capture_default_str();

  // report
  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Per-scheme comparison table");
  leaves["report"] = report_cmd;
  report_cmd->add_option("--scheme", rep.schemes, "Schemes, comma separated")->delimiter(',')->check(scheme_validator())->capture_default_str();
  report_cmd->add_option("--mttf", rep.mttf, "Mean time to node failure, hours")->check(CLI::PositiveNumber)->capture_default_str();
  report_cmd->add_option("--mttr", rep.mttr, "Mean time to repair one node, hours")->check(CLI::PositiveNumber)->capture_default_str();
  report_cmd->add_option("--mode", rep.mode, "serial or parallel repair")->check(CLI::IsMember({"serial", "parallel"}))->capture_default_str();
  report_cmd->add_option("--cluster-nodes", rep.cluster_nodes, "Cluster size for the system MTTDL column")->check(CLI::Range(1, 100000))->capture_default_str();
  report_cmd->add_option("--out", rep.out, "CSV path ('-' for stdout)")->capture_default_str();

  std::vector<std::string> args = raw_args;
  try {
    if (auto cfg_path = take_config_flag(args)) {
      std::string key = args.empty() ? "" : args[0];
      if (args.size() > 1 && key != "report") key += " " + args[1];
      auto it = leaves.find(key);
      if (it == leaves.end()) throw UsageError("--config: needs a command such as 'sim locality'");
      for (const auto& [k, v] : read_config(*cfg_path)) {
        const auto flag = "--" + k;
        if (it->second->get_option_no_throw(flag) == nullptr) {
          throw UsageError(fmt::format("--config: unknown key '{}' for '{}'", k, key));
        }
        if (!has_flag(args, flag)) args.push_back(flag + "=" + v);
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (info->parsed()) return code_info(code, out);
    if (encode->parsed()) return code_encode(code, out);
    if (decode->parsed()) return code_decode(code, out);
    if (plan->parsed()) return code_repair_plan(code, out);

    if (s_init->parsed()) {
      auto s = store::BlockStore::init(st.root, st.nodes);
      out << fmt::format("initialised store at {} with {} nodes\n", st.root, s.nodes().size());
      return kOk;
    }
    if (s_put->parsed()) {
      auto s = store::BlockStore::open(st.root);
      auto m = s.put(st.file, CodeScheme::parse(st.scheme), st.block_size, st.seed);
      out << fmt::format("stored {} ({} bytes) as {} stripe(s) of {}, padding {} bytes\n", m.file_name, m.original_size,
                         m.stripes.size(), m.scheme.name(), m.padding);
      return kOk;
    }
    if (s_get->parsed()) {
      auto s = store::BlockStore::open(st.root);
      auto r = s.get(st.name);
      write_bytes(st.out, r.data);
      for (const auto& d : r.degraded) {
        out << fmt::format("degraded read {} stripe {} b{}: {} transfers\n", d.file, d.stripe, d.block, d.transfers);
      }
      out << fmt::format("read {} bytes, {} degraded block(s), {} degraded transfers\n", r.data.size(),
                         r.degraded.size(), r.degraded_bandwidth());
      return kOk;
    }
    if (s_kill->parsed() || s_revive->parsed()) {
      auto s = store::BlockStore::open(st.root);
      auto n = s_kill->parsed() ? s.kill_node(st.node) : s.revive_node(st.node);
      out << fmt::format("node {} is {}\n", n.id, n.status == store::NodeStatus::up ? "up" : "down");
      return kOk;
    }
    if (s_fsck->parsed()) {
      auto r = store::BlockStore::open(st.root).fsck();
      print_fsck(r, out);
      if (!r.fatal.empty()) {
        err << fmt::format("error: {} stripe(s) unrecoverable\n", r.fatal.size());
        return kDomainError;
      }
      return kOk;
    }
    if (s_repair->parsed()) {
      auto s = store::BlockStore::open(st.root);
      auto r = s.repair();
      out << fmt::format("revived nodes {{{}}}\n", fmt::join(r.revived, ","));
      out << fmt::format("repaired {} stripe(s): {} block transfers (planned {}), {} bytes moved\n", r.plans_executed,
                         r.bandwidth_blocks, r.planned_bandwidth, r.bytes_moved);
      return kOk;
    }

    if (s_loc->parsed()) {
      mapsched::SweepConfig cfg;
      cfg.schemes = parse_schemes(loc.schemes);
      cfg.schedulers.clear();
      for (const auto& s : loc.schedulers) cfg.schedulers.push_back(mapsched::scheduler_from_string(s));
      cfg.slots = loc.slots;
      cfg.loads = loc.loads;
      cfg.nodes = loc.nodes;
      cfg.reps = loc.reps;
      cfg.delay = loc.delay;
      cfg.stripes = loc.stripes;
      cfg.catalog_waves = loc.catalog_waves;
      cfg.layout = mapsched::layout_mode_from_string(loc.layout);
      cfg.block_size = loc.block_size;
      cfg.seed = loc.seed;
      cfg.threads = loc.threads;
      auto r = mapsched::locality_sweep(cfg);
      if (!loc.out.empty()) emit(reports::locality_instances_table(r), loc.out, out);
      emit(reports::locality_summary_table(r), loc.summary, out);
      return kOk;
    }
    if (s_rel->parsed()) {
      auto model = reliability::FailureModel::from_hours(rel.mttf, rel.mttr, reliability::repair_mode_from_string(rel.mode));
      const auto kind = reliability::chain_kind_from_string(rel.chain);
      std::vector<reports::ReliabilityRow> rows;
      for (const auto& s : parse_schemes(rel.schemes)) {
        reports::ReliabilityRow row{s.name(), model, reliability::mttdl_analytic(s, model, kind), {}};
        if (rel.trials > 0) {
          row.mc = reliability::mttdl_montecarlo(s, model, rel.trials, rel.seed, rel.threads);
        } else {
          row.mc.seed = rel.seed;
        }
        rows.push_back(row);
      }
      auto table = reports::reliability_table(rows);
      if (rel.trials == 0) {
        for (auto& r : table.rows) {
          for (std::size_t c = 5; c <= 7; ++c) r[c] = "";
        }
      }
      emit(table, rel.out, out);
      return kOk;
    }
    if (report_cmd->parsed()) {
      auto model = reliability::FailureModel::from_hours(rep.mttf, rep.mttr, reliability::repair_mode_from_string(rep.mode));
      emit(reports::scheme_table(parse_schemes(rep.schemes), model, rep.cluster_nodes), rep.out, out);
      return kOk;
    }
  } catch (const Unrecoverable& e) {
    err << "error: unrecoverable: " << e.what() << "\n";
    return kDomainError;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  err << "usage error: no command given\n";
  return kUsageError;
}

}  // namespace drc::cli
