#pragma once

// Small dense linear algebra over GF(2^8).

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "drc/errors.hpp"
#include "drc/gf256.hpp"

namespace drc {

using Coeffs = std::vector<gf256::Element>;

/// Incrementally built row basis that remembers how each reduced row was
/// formed from the accepted input vectors, so membership queries return
/// the combination of accepted vectors producing the query.
class SpanBuilder {
 public:
  explicit SpanBuilder(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(rows_.size()); }

  /// Adds v if independent of the accepted vectors. Returns true if accepted.
  bool add(std::span<const gf256::Element> v) {
    Coeffs r(v.begin(), v.end());
    Coeffs p(rows_.size(), 0);
    p.push_back(1);
    reduce(r, p);
    int pivot = first_nonzero(r);
    if (pivot < 0) return false;
    auto s = gf256::inv(r[static_cast<std::size_t>(pivot)]);
    for (auto& x : r) x = gf256::mul(x, s);
    for (auto& x : p) x = gf256::mul(x, s);
    rows_.push_back({std::move(r), std::move(p), pivot});
    return true;
  }

  /// Coefficients over accepted vectors (in acceptance order) reproducing v,
  /// or nullopt when v lies outside the span.
  std::optional<Coeffs> express(std::span<const gf256::Element> v) const {
    Coeffs r(v.begin(), v.end());
    Coeffs p(rows_.size(), 0);
    reduce(r, p);
    if (first_nonzero(r) >= 0) return std::nullopt;
    // reduce() computed r - sum(...) = 0 with p holding minus the combination;
    // in characteristic 2 minus is plus.
    return p;
  }

  bool contains(std::span<const gf256::Element> v) const { return express(v).has_value(); }

 private:
  struct Row {
    Coeffs v;
    Coeffs prov;
    int pivot;
  };

  static int first_nonzero(const Coeffs& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] != 0) return static_cast<int>(i);
    }
    return -1;
  }

  void reduce(Coeffs& r, Coeffs& p) const {
    if (static_cast<int>(r.size()) != dim_) throw InvalidArgument("SpanBuilder: dimension mismatch");
    for (const auto& row : rows_) {
      auto c = r[static_cast<std::size_t>(row.pivot)];
      if (c == 0) continue;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] ^= gf256::mul(c, row.v[i]);
      for (std::size_t i = 0; i < row.prov.size(); ++i) p[i] ^= gf256::mul(c, row.prov[i]);
    }
  }

  int dim_;
  std::vector<Row> rows_;
};

inline int rank_gf256(std::span<const Coeffs> rows, int dim) {
  SpanBuilder sb(dim);
  for (const auto& r : rows) {
    sb.add(r);
    if (sb.rank() == dim) break;
  }
  return sb.rank();
}

/// Rank of 0/1 vectors packed as bit masks (at most 64 columns). For a 0/1
/// matrix this equals its rank over GF(2^8), since rank is unchanged by
/// extending the field.
inline int rank_gf2(std::vector<std::uint64_t> rows) {
  int rank = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto pivot_row = rows[i];
    if (pivot_row == 0) continue;
    ++rank;
    auto low = pivot_row & (~pivot_row + 1);
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      if (rows[j] & low) rows[j] ^= pivot_row;
    }
  }
  return rank;
}

}  // namespace drc
