#pragma once

// Mean time to data loss (MTTDL) of one code group, estimated two ways:
// an absorbing birth-death Markov chain over the number of failed nodes,
// and an event-driven Monte Carlo simulation that checks the exact set of
// failed nodes against the code after every failure.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "drc/codes.hpp"
#include "drc/errors.hpp"
#include "drc/parallel.hpp"
#include "drc/random.hpp"

namespace drc::reliability {

inline constexpr double kHoursPerYear = 365.25 * 24.0;

enum class RepairMode { serial, parallel };

inline std::string to_string(RepairMode m) { return m == RepairMode::serial ? "serial" : "parallel"; }

inline RepairMode repair_mode_from_string(std::string_view s) {
  if (s == "serial") return RepairMode::serial;
  if (s == "parallel") return RepairMode::parallel;
  throw InvalidArgument(fmt::format("repair mode must be serial or parallel, got '{}'", s));
}

struct FailureModel {
  double lambda_fail = 1.0 / (4 * kHoursPerYear);  // per node, 1/hours
  double mu_repair = 1.0 / 24.0;                   // per failed node, 1/hours
  RepairMode mode = RepairMode::parallel;

  static FailureModel from_hours(double mttf_hours, double mttr_hours, RepairMode mode = RepairMode::parallel) {
    FailureModel m{1.0 / mttf_hours, 1.0 / mttr_hours, mode};
    m.validate();
    return m;
  }

  void validate() const {
    if (!(lambda_fail > 0) || !(mu_repair > 0) || !std::isfinite(lambda_fail) || !std::isfinite(mu_repair)) {
      throw InvalidArgument("failure and repair rates must be positive and finite");
    }
  }
};

/// MTTF 4 years, MTTR 1 day, parallel repair.
inline FailureModel default_model() { return {}; }

/// MTTF 100 h, MTTR 10 h: fast enough for Monte Carlo to reach data loss.
inline FailureModel stress_model() { return FailureModel::from_hours(100.0, 10.0); }

// ---------------------------------------------------------------------------
// Exact recoverability by failed-node mask

/// Answers "is this set of failed nodes recoverable" for one scheme, with a
/// bit-parallel rank test for 0/1 codes and memoisation for the rest.
class RecoverabilityOracle {
 public:
  explicit RecoverabilityOracle(const CodeScheme& scheme)
      : model_(code_model(scheme)), n_(scheme.length()) {
    const int d = model_.data_count();
    fast_ = model_.binary() && d <= 64;
    for (const auto& b : model_.blocks()) {
      std::uint64_t hosts = 0;
      for (auto h : b.hosts) hosts |= std::uint64_t{1} << h;
      host_masks_.push_back(hosts);
      std::uint64_t bits = 0;
      if (fast_) {
        for (int i = 0; i < d; ++i) {
          if (b.coeffs[static_cast<std::size_t>(i)]) bits |= std::uint64_t{1} << i;
        }
      }
      coeff_bits_.push_back(bits);
    }
    if (!fast_ && n_ <= 20) memo_.assign(std::size_t{1} << n_, -1);
  }

  int length() const { return n_; }

  bool recoverable(std::uint64_t failed) const {
    if (fast_) return fast_check(failed);
    if (!memo_.empty()) {
      auto& slot = memo_[failed];
      if (slot < 0) slot = slow_check(failed) ? 1 : 0;
      return slot == 1;
    }
    return slow_check(failed);
  }

 private:
  bool fast_check(std::uint64_t failed) const {
    const int d = model_.data_count();
    std::uint64_t rows[128];
    int count = 0;
    for (std::size_t b = 0; b < host_masks_.size(); ++b) {
      if (host_masks_[b] & ~failed) rows[count++] = coeff_bits_[b];
    }
    if (count < d) return false;
    int rank = 0;
    for (int i = 0; i < count; ++i) {
      auto pivot = rows[i];
      if (!pivot) continue;
      ++rank;
      auto low = pivot & (~pivot + 1);
      for (int j = i + 1; j < count; ++j) {
        if (rows[j] & low) rows[j] ^= pivot;
      }
    }
    return rank == d;
  }

  bool slow_check(std::uint64_t failed) const { return can_decode(model_, available_blocks(model_, failed)); }

  const CodeModel& model_;
  int n_;
  bool fast_ = false;
  std::vector<std::uint64_t> host_masks_;
  std::vector<std::uint64_t> coeff_bits_;
  mutable std::vector<std::int8_t> memo_;
};

// ---------------------------------------------------------------------------
// Node symmetry

/// Node groups whose members are interchangeable for recoverability: the
/// outer level lists families, a family lists groups of equal size that are
/// also interchangeable with each other. The failure state of a stripe is
/// then the per-group failure counts, sorted within each family.
using NodeGroups = std::vector<std::vector<std::vector<NodeIndex>>>;

inline NodeGroups symmetry_groups(const CodeScheme& scheme) {
  auto range = [](int lo, int hi) {
    std::vector<NodeIndex> v;
    for (int i = lo; i < hi; ++i) v.push_back(i);
    return v;
  };
  if (const auto* r = std::get_if<RaidMirror>(&scheme.variant())) {
    std::vector<std::vector<NodeIndex>> pairs;
    for (int b = 0; b <= r->data_blocks; ++b) pairs.push_back({2 * b, 2 * b + 1});
    return {pairs};
  }
  if (scheme.is<HeptagonLocal>()) return {{range(0, 7)}, {range(7, 14)}, {{14}}};
  return {{range(0, scheme.length())}};
}

namespace detail {

using StateKey = std::uint64_t;

struct GroupIndex {
  std::vector<std::vector<std::uint64_t>> masks;  // family -> group masks
  std::vector<std::vector<int>> sizes;

  explicit GroupIndex(const NodeGroups& groups) {
    int total = 0;
    for (const auto& fam : groups) {
      masks.emplace_back();
      sizes.emplace_back();
      for (const auto& g : fam) {
        std::uint64_t m = 0;
        for (auto v : g) m |= std::uint64_t{1} << v;
        masks.back().push_back(m);
        sizes.back().push_back(static_cast<int>(g.size()));
        if (g.size() > 15) throw InvalidArgument("symmetry group larger than 15 nodes");
        ++total;
      }
    }
    if (total > 16) throw InvalidArgument("too many symmetry groups");
  }

  /// Counts packed 4 bits each, sorted within a family.
  static StateKey pack(const std::vector<std::vector<int>>& counts) {
    StateKey k = 0;
    for (const auto& fam : counts) {
      auto sorted = fam;
      std::sort(sorted.begin(), sorted.end());
      for (int c : sorted) k = (k << 4) | static_cast<StateKey>(c);
    }
    return k;
  }

  StateKey key(std::uint64_t failed) const {
    std::vector<std::vector<int>> counts(masks.size());
    for (std::size_t f = 0; f < masks.size(); ++f) {
      for (auto m : masks[f]) counts[f].push_back(std::popcount(failed & m));
    }
    return pack(counts);
  }
};

struct Profile {
  std::vector<double> fatal;
  /// Recoverability per lumped state; empty when the grouping is not exact.
  std::unordered_map<StateKey, bool> state_ok;
};

inline Profile compute_profile(const CodeScheme& scheme) {
  const int n = scheme.length();
  if (n > 30) throw InvalidArgument("fatal profile enumeration limited to 30 nodes");
  RecoverabilityOracle oracle(scheme);
  GroupIndex groups(symmetry_groups(scheme));
  std::vector<std::uint64_t> fatal(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::uint64_t> total(static_cast<std::size_t>(n) + 1, 0);
  Profile p;
  bool lumpable = true;
  const std::uint64_t all = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < all; ++mask) {
    auto f = static_cast<std::size_t>(std::popcount(mask));
    ++total[f];
    const bool ok = oracle.recoverable(mask);
    if (!ok) ++fatal[f];
    if (lumpable) {
      auto [it, fresh] = p.state_ok.try_emplace(groups.key(mask), ok);
      if (!fresh && it->second != ok) lumpable = false;
    }
  }
  if (!lumpable) p.state_ok.clear();
  p.fatal.resize(static_cast<std::size_t>(n) + 1);
  for (std::size_t f = 0; f < p.fatal.size(); ++f) {
    p.fatal[f] = static_cast<double>(fatal[f]) / static_cast<double>(total[f]);
  }
  return p;
}

inline const Profile& profile(const CodeScheme& scheme) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<Profile>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[scheme.name()];
  if (!slot) slot = std::make_unique<Profile>(compute_profile(scheme));
  return *slot;
}

}  // namespace detail

/// fatal_profile(s)[f] = share of f-node erasure patterns that lose data.
inline const std::vector<double>& fatal_profile(const CodeScheme& scheme) { return detail::profile(scheme).fatal; }

inline double fatal_fraction(const CodeScheme& scheme, int failures) {
  if (failures < 0 || failures > scheme.length()) {
    throw InvalidArgument(fmt::format("failure count {} outside 0..{}", failures, scheme.length()));
  }
  return fatal_profile(scheme)[static_cast<std::size_t>(failures)];
}

/// True when recoverability depends only on per-group failure counts, which
/// makes the grouped chain an exact lumping of the per-node process.
inline bool grouping_is_exact(const CodeScheme& scheme) { return !detail::profile(scheme).state_ok.empty(); }

// ---------------------------------------------------------------------------
// Markov chain

enum class ChainKind {
  /// States are per-group failure counts; exact when grouping_is_exact().
  grouped,
  /// States are failure counts 0..; a failure from i survives with
  /// probability (1-ff(i+1))/(1-ff(i)).
  count,
  /// As count, but stops at tolerance+1 and treats any further failure as loss.
  count_capped,
};

inline std::string to_string(ChainKind k) {
  switch (k) {
    case ChainKind::grouped: return "grouped";
    case ChainKind::count: return "count";
    case ChainKind::count_capped: return "count-capped";
  }
  return "?";
}

inline ChainKind chain_kind_from_string(std::string_view s) {
  if (s == "grouped") return ChainKind::grouped;
  if (s == "count") return ChainKind::count;
  if (s == "count-capped") return ChainKind::count_capped;
  throw InvalidArgument(fmt::format("chain must be grouped, count or count-capped, got '{}'", s));
}

/// Absorbing chain. Transient states are 0..size()-1 with state 0 the
/// all-up state; the loss state is implicit and has no outgoing rate.
struct MarkovChain {
  struct Edge {
    int to;
    double rate;
  };
  ChainKind kind = ChainKind::grouped;
  int tolerance = 0;
  bool capped = false;
  bool exact = false;
  std::vector<std::string> labels;
  std::vector<std::vector<Edge>> edges;
  std::vector<double> loss_rate;

  int size() const { return static_cast<int>(labels.size()); }

  /// Generator including the loss state as the last row and column.
  std::vector<std::vector<double>> generator() const {
    const auto t = static_cast<std::size_t>(size());
    std::vector<std::vector<double>> q(t + 1, std::vector<double>(t + 1, 0.0));
    for (std::size_t i = 0; i < t; ++i) {
      double out = loss_rate[i];
      q[i][t] += loss_rate[i];
      for (const auto& e : edges[i]) {
        q[i][static_cast<std::size_t>(e.to)] += e.rate;
        out += e.rate;
      }
      q[i][i] -= out;
    }
    return q;
  }
};

namespace detail {

inline MarkovChain build_count_chain(const CodeScheme& scheme, const FailureModel& model, bool cap) {
  const auto& ff = fatal_profile(scheme);
  const int n = scheme.length();
  MarkovChain c;
  c.kind = cap ? ChainKind::count_capped : ChainKind::count;
  c.tolerance = tolerance(scheme);
  int last = 0;
  while (last + 1 <= n && ff[static_cast<std::size_t>(last + 1)] < 1.0) ++last;
  if (cap && last > c.tolerance + 1) {
    last = c.tolerance + 1;
    c.capped = true;
  }
  // Exact only when every survivable count is fully survivable.
  c.exact = !c.capped;
  for (int i = 0; i <= last; ++i) {
    if (ff[static_cast<std::size_t>(i)] > 0.0) c.exact = false;
  }
  for (int i = 0; i <= last; ++i) {
    c.labels.push_back(std::to_string(i));
    c.edges.emplace_back();
    const double fail = (n - i) * model.lambda_fail;
    double survive = 0.0;
    if (i < last) survive = (1.0 - ff[static_cast<std::size_t>(i + 1)]) / (1.0 - ff[static_cast<std::size_t>(i)]);
    if (survive > 0) c.edges.back().push_back({i + 1, fail * survive});
    c.loss_rate.push_back(fail * (1.0 - survive));
    if (i > 0) {
      const double rep = model.mode == RepairMode::parallel ? i * model.mu_repair : model.mu_repair;
      c.edges.back().push_back({i - 1, rep});
    }
  }
  return c;
}

inline MarkovChain build_grouped_chain(const CodeScheme& scheme, const FailureModel& model) {
  const auto& prof = profile(scheme);
  if (prof.state_ok.empty()) {
    throw Error(fmt::format("{}: recoverability is not a function of group failure counts", scheme.name()));
  }
  GroupIndex gi(symmetry_groups(scheme));
  using Counts = std::vector<std::vector<int>>;
  MarkovChain c;
  c.kind = ChainKind::grouped;
  c.tolerance = tolerance(scheme);
  c.exact = true;
  std::map<StateKey, int> index;
  std::vector<Counts> states;
  auto intern = [&](Counts counts) -> int {
    for (auto& fam : counts) std::sort(fam.begin(), fam.end());
    auto key = GroupIndex::pack(counts);
    if (!prof.state_ok.at(key)) return -1;
    auto [it, fresh] = index.try_emplace(key, static_cast<int>(states.size()));
    if (fresh) {
      std::string label;
      for (const auto& fam : counts) {
        if (!label.empty()) label += '|';
        for (std::size_t g = 0; g < fam.size(); ++g) label += (g ? "," : "") + std::to_string(fam[g]);
      }
      states.push_back(counts);
      c.labels.push_back(label);
      c.edges.emplace_back();
      c.loss_rate.push_back(0.0);
    }
    return it->second;
  };
  Counts zero;
  for (const auto& fam : gi.sizes) zero.emplace_back(fam.size(), 0);
  intern(zero);
  for (std::size_t s = 0; s < states.size(); ++s) {
    const Counts cur = states[s];
    int down = 0;
    for (const auto& fam : cur) {
      for (int x : fam) down += x;
    }
    std::map<int, double> out;
    double loss = 0;
    for (std::size_t f = 0; f < cur.size(); ++f) {
      for (std::size_t g = 0; g < cur[f].size(); ++g) {
        const int have = cur[f][g];
        const int size = gi.sizes[f][g];
        if (have < size) {
          auto next = cur;
          ++next[f][g];
          const double rate = (size - have) * model.lambda_fail;
          int to = intern(next);
          if (to < 0) loss += rate; else out[to] += rate;
        }
        if (have > 0) {
          auto next = cur;
          --next[f][g];
          const double rate = model.mode == RepairMode::parallel
                                  ? have * model.mu_repair
                                  : model.mu_repair * have / down;
          out[intern(next)] += rate;
        }
      }
    }
    c.loss_rate[s] = loss;
    for (auto [to, rate] : out) c.edges[s].push_back({to, rate});
  }
  return c;
}

}  // namespace detail

inline MarkovChain build_chain(const CodeScheme& scheme, const FailureModel& model,
                               ChainKind kind = ChainKind::grouped) {
  model.validate();
  switch (kind) {
    case ChainKind::grouped: return detail::build_grouped_chain(scheme, model);
    case ChainKind::count: return detail::build_count_chain(scheme, model, false);
    case ChainKind::count_capped: return detail::build_count_chain(scheme, model, true);
  }
  throw InvalidArgument("bad chain kind");
}

struct AnalyticResult {
  double hours = 0;
  ChainKind kind = ChainKind::grouped;
  int transient_states = 0;
  int tolerance = 0;
  bool capped = false;
  bool exact = false;

  double years() const { return hours / kHoursPerYear; }
  std::string note() const {
    std::string s = fmt::format("{} chain, {} transient states", to_string(kind), transient_states);
    if (capped) s += fmt::format(", failures beyond {} counted as loss", tolerance + 1);
    s += exact ? ", exact" : ", approximate";
    return s;
  }
};

/// Expected time to absorption from state 0, by solving (-Q_T) T = 1.
inline AnalyticResult mttdl_analytic(const CodeScheme& scheme, const FailureModel& model,
                                     ChainKind kind = ChainKind::grouped) {
  auto chain = build_chain(scheme, model, kind);
  const auto t = static_cast<std::size_t>(chain.size());
  auto q = chain.generator();
  std::vector<std::vector<long double>> a(t, std::vector<long double>(t + 1));
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) a[i][j] = -q[i][j];
    a[i][t] = 1.0L;
  }
  for (std::size_t col = 0; col < t; ++col) {
    std::size_t p = col;
    for (std::size_t r = col + 1; r < t; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[p][col])) p = r;
    }
    if (a[p][col] == 0.0L) throw Error("singular Markov chain system");
    std::swap(a[p], a[col]);
    for (std::size_t r = 0; r < t; ++r) {
      if (r == col || a[r][col] == 0.0L) continue;
      const auto f = a[r][col] / a[col][col];
      for (std::size_t k = col; k <= t; ++k) a[r][k] -= f * a[col][k];
    }
  }
  AnalyticResult r;
  r.hours = static_cast<double>(a[0][t] / a[0][0]);
  r.kind = kind;
  r.transient_states = chain.size();
  r.tolerance = chain.tolerance;
  r.capped = chain.capped;
  r.exact = chain.exact;
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloResult {
  double mean_hours = 0;
  double stddev_hours = 0;
  double ci_low = 0;
  double ci_high = 0;
  int trials = 0;
  std::uint64_t seed = 0;

  bool covers(double hours) const { return ci_low <= hours && hours <= ci_high; }
};

/// Time to data loss of a single trial. Each event is either a failure of a
/// uniformly chosen up node or the repair of a uniformly chosen down node;
/// serial mode differs from parallel only in the total repair rate. Trial i
/// always uses derive_seed(seed, {i}), so results do not depend on how
/// trials are split across workers.
inline double simulate_trial(const RecoverabilityOracle& oracle, const FailureModel& model, std::uint64_t seed) {
  Rng rng(seed);
  const int n = oracle.length();
  std::uint64_t failed = 0;
  int down = 0;
  double t = 0;
  auto pick = [&](bool want_failed, int k) {
    for (int node = 0;; ++node) {
      if (((failed >> node) & 1u) != want_failed) continue;
      if (k-- == 0) return node;
    }
  };
  while (true) {
    const double fail_rate = (n - down) * model.lambda_fail;
    double rep_rate = 0;
    if (down > 0) rep_rate = model.mode == RepairMode::parallel ? down * model.mu_repair : model.mu_repair;
    const double total = fail_rate + rep_rate;
    t += exponential(rng, total);
    if (uniform_unit(rng) * total < fail_rate) {
      int node = pick(false, static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - down))));
      failed |= std::uint64_t{1} << node;
      ++down;
      if (!oracle.recoverable(failed)) return t;
    } else {
      int node = pick(true, static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(down))));
      failed &= ~(std::uint64_t{1} << node);
      --down;
    }
  }
}

inline MonteCarloResult mttdl_montecarlo(const CodeScheme& scheme, const FailureModel& model, int trials,
                                         std::uint64_t seed, unsigned threads = 1) {
  model.validate();
  if (trials < 100) throw InvalidArgument("Monte Carlo needs at least 100 trials");
  const std::size_t workers = std::max(1u, threads);
  // One oracle per worker keeps the memo tables unshared.
  std::vector<std::unique_ptr<RecoverabilityOracle>> oracles;
  for (std::size_t w = 0; w < workers; ++w) oracles.push_back(std::make_unique<RecoverabilityOracle>(scheme));
  std::vector<double> samples(static_cast<std::size_t>(trials));
  const std::size_t chunk = (samples.size() + workers - 1) / workers;
  parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t w) {
    for (std::size_t i = w * chunk; i < std::min(samples.size(), (w + 1) * chunk); ++i) {
      samples[i] = simulate_trial(*oracles[w], model, derive_seed(seed, {i}));
    }
  });
  long double sum = 0, sq = 0;
  for (double x : samples) sum += x;
  const long double mean = sum / trials;
  for (double x : samples) sq += (x - mean) * (x - mean);
  MonteCarloResult r;
  r.trials = trials;
  r.seed = seed;
  r.mean_hours = static_cast<double>(mean);
  r.stddev_hours = static_cast<double>(std::sqrt(sq / (trials - 1)));
  const double half = 1.959963984540054 * r.stddev_hours / std::sqrt(static_cast<double>(trials));
  r.ci_low = r.mean_hours - half;
  r.ci_high = r.mean_hours + half;
  return r;
}

/// System MTTDL of independent code groups: the first loss among `groups`
/// exponential-like groups arrives `groups` times sooner.
inline double system_mttdl(double group_mttdl_hours, int groups) {
  if (groups < 1) throw InvalidArgument("need at least one group");
  return group_mttdl_hours / groups;
}

/// Disjoint code groups that fit in a cluster of the given size.
inline int groups_in_cluster(const CodeScheme& scheme, int cluster_nodes) {
  return std::max(1, cluster_nodes / scheme.length());
}

}  // namespace drc::reliability
