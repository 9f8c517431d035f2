#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "hago/dataset.hpp"
#include "hago/errors.hpp"
#include "hago/matrix.hpp"

namespace hago {

// Per-domain coordinator node blocks. Each domain k owns rows
// [k*2n, k*2n + n) of the coordinator table for its user coordinators and
// [k*2n + n, (k+1)*2n) for its item coordinators.
struct CoordinatorSet {
  std::uint32_t per_type = 0;  // n
  std::uint32_t domains = 0;   // M + 1

  std::uint32_t total() const { return domains * 2 * per_type; }

  std::uint32_t user_coord_row(std::uint32_t domain, std::uint32_t j) const {
    return domain * 2 * per_type + j;
  }
  std::uint32_t item_coord_row(std::uint32_t domain, std::uint32_t j) const {
    return domain * 2 * per_type + per_type + j;
  }

  bool row_is_user_type(std::uint32_t row) const { return row % (2 * per_type) < per_type; }
  std::uint32_t row_domain(std::uint32_t row) const { return row / (2 * per_type); }
};

inline CoordinatorSet create_coordinators(const MultiDomainDataset& ds, std::uint32_t n) {
  if (n == 0) throw config_error("coordinator count n must be >= 1 (use mode none instead)");
  CoordinatorSet cs;
  cs.per_type = n;
  cs.domains = static_cast<std::uint32_t>(ds.domain_count());
  return cs;
}

// Soft/hard coordinator-node edge weight: cosine similarity when the inner
// product is strictly positive, 0 otherwise. The result is clamped to 1 from
// above so fp rounding of parallel vectors cannot leave the [0,1] range.
template <typename T>
T adaptive_weight(std::span<const T> e, std::span<const T> ec) {
  if (e.size() != ec.size()) throw shape_error("adaptive_weight: dimension mismatch");
  T d = dot(e, ec);
  if (!(d > T(0))) {
    T ne = squared_norm(e), nc = squared_norm(ec);
    if (ne == T(0) || nc == T(0)) throw numeric_error("adaptive_weight: zero-norm embedding");
    return T(0);
  }
  T ne = std::sqrt(squared_norm(e));
  T nc = std::sqrt(squared_norm(ec));
  if (ne == T(0) || nc == T(0)) throw numeric_error("adaptive_weight: zero-norm embedding");
  T w = d / (ne * nc);
  return std::min(w, T(1));
}

// Binary coordinator interconnection pattern: zero blocks on the user-user
// and item-item diagonals, all-ones blocks between the two types.
inline Matrix<std::uint8_t> coordinator_adjacency(std::uint32_t n_user, std::uint32_t n_item) {
  std::uint32_t n = n_user + n_item;
  Matrix<std::uint8_t> r(n, n, 0);
  for (std::uint32_t a = 0; a < n_user; ++a) {
    for (std::uint32_t b = 0; b < n_item; ++b) {
      r(a, n_user + b) = 1;
      r(n_user + b, a) = 1;
    }
  }
  return r;
}

}  // namespace hago
