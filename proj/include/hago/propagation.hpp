#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/parallel.hpp"
#include "hago/unified_graph.hpp"

namespace hago {

// Symmetrically normalized operator A~[a][b] = w_ab / sqrt(deg_w(a) deg_w(b))
// over weighted degrees. Reduces to the plain 1/sqrt(|N_u||N_i|) aggregation
// when all weights are 1; isolated nodes get all-zero rows.
template <typename T>
struct NormalizedAdjacency {
  const UnifiedGraph<T>* graph = nullptr;
  std::vector<T> entry_norm;  // per CSR entry
  std::vector<T> degree;      // weighted degree per node

  std::uint32_t nodes() const { return graph->node_count(); }

  // Y = A~ X, row-parallel.
  void multiply(const Matrix<T>& x, Matrix<T>& y) const {
    if (x.rows() != nodes()) throw shape_error("multiply: feature row count mismatch");
    if (!y.same_shape(x)) y = Matrix<T>(x.rows(), x.cols());
    const std::size_t d = x.cols();
    parallel_for(nodes(), [&](std::size_t a) {
      std::span<T> out = y.row(a);
      std::fill(out.begin(), out.end(), T(0));
      for (std::uint32_t k = graph->offsets[a]; k < graph->offsets[a + 1]; ++k) {
        T c = entry_norm[k];
        if (c == T(0)) continue;
        std::span<const T> src = x.row(graph->targets[k]);
        for (std::size_t j = 0; j < d; ++j) out[j] += c * src[j];
      }
    });
  }
};

// `entry_weights` overrides the graph's stored weights (used for augmented
// views with dropped edges); pass nullptr to normalize the graph as-is.
template <typename T>
NormalizedAdjacency<T> normalize_adjacency(const UnifiedGraph<T>& g,
                                           const std::vector<T>* entry_weights = nullptr) {
  const std::vector<T>& w = entry_weights ? *entry_weights : g.weights;
  if (w.size() != g.targets.size()) throw shape_error("normalize_adjacency: weight count mismatch");

  NormalizedAdjacency<T> norm;
  norm.graph = &g;
  norm.degree.assign(g.node_count(), T(0));
  for (std::uint32_t a = 0; a < g.node_count(); ++a) {
    for (std::uint32_t k = g.offsets[a]; k < g.offsets[a + 1]; ++k) {
      if (w[k] < T(0)) throw invariant_error("normalize_adjacency: negative edge weight");
      norm.degree[a] += w[k];
    }
  }
  norm.entry_norm.assign(g.targets.size(), T(0));
  for (std::uint32_t a = 0; a < g.node_count(); ++a) {
    if (norm.degree[a] == T(0)) continue;
    T inv_a = T(1) / std::sqrt(norm.degree[a]);
    for (std::uint32_t k = g.offsets[a]; k < g.offsets[a + 1]; ++k) {
      T db = norm.degree[g.targets[k]];
      if (w[k] == T(0) || db == T(0)) continue;
      norm.entry_norm[k] = w[k] * inv_a / std::sqrt(db);
    }
  }
  return norm;
}

// Per-layer node matrices e^(0..L) from repeated multiplication by A~.
// No nonlinearities, no weight matrices.
template <typename T>
struct PropagationTrace {
  std::vector<Matrix<T>> layers;  // size L + 1

  std::size_t layer_count() const { return layers.size(); }
  const Matrix<T>& layer(std::size_t l) const { return layers[l]; }
};

template <typename T>
PropagationTrace<T> propagate(const NormalizedAdjacency<T>& norm, const Matrix<T>& features,
                              std::size_t num_layers) {
  if (features.rows() != norm.nodes()) throw shape_error("propagate: feature row count mismatch");
  PropagationTrace<T> trace;
  trace.layers.reserve(num_layers + 1);
  trace.layers.push_back(features);
  for (std::size_t l = 0; l < num_layers; ++l) {
    Matrix<T> next(features.rows(), features.cols());
    norm.multiply(trace.layers.back(), next);
    trace.layers.push_back(std::move(next));
  }
  return trace;
}

template <typename T>
void check_layer_weights(const std::vector<T>& alpha) {
  T sum = T(0);
  for (T a : alpha) sum += a;
  if (std::abs(static_cast<double>(sum) - 1.0) > 1e-9) {
    throw config_error("layer weights alpha must sum to 1");
  }
}

// O = sum_l alpha_l e^(l)
template <typename T>
Matrix<T> combine_layers(const PropagationTrace<T>& trace, const std::vector<T>& alpha) {
  if (alpha.size() != trace.layer_count()) {
    throw config_error("combine_layers: alpha length must be layer count + 1");
  }
  check_layer_weights(alpha);
  Matrix<T> out(trace.layer(0).rows(), trace.layer(0).cols());
  for (std::size_t l = 0; l < alpha.size(); ++l) {
    if (alpha[l] == T(0)) continue;
    const auto& src = trace.layer(l).data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha[l] * src[i];
  }
  return out;
}

// Predicted interaction value: inner product of the final representations.
template <typename T>
T score(std::span<const T> user_repr, std::span<const T> item_repr) {
  return dot(user_repr, item_repr);
}

}  // namespace hago
