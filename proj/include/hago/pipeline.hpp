#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hago/matrix.hpp"
#include "hago/propagation.hpp"
#include "hago/unified_graph.hpp"

namespace hago {

// One augmented view of the pipeline input: optional per-entry drop flags
// (set for both directions of a dropped edge) and an optional column mask
// over the feature dimensions.
struct ViewSpec {
  const std::vector<std::uint8_t>* dropped = nullptr;   // per CSR entry, 1 = dropped
  const std::vector<std::uint8_t>* col_mask = nullptr;  // per dim, 1 = keep
};

template <typename T>
struct ViewForward {
  std::vector<T> view_weights;    // post-drop entry weights
  NormalizedAdjacency<T> norm;
  PropagationTrace<T> trace;      // e^(0) is the masked input
  Matrix<T> output;               // alpha-combined representations
};

template <typename T>
Matrix<T> apply_column_mask(const Matrix<T>& x, const std::vector<std::uint8_t>* mask) {
  if (mask == nullptr) return x;
  if (mask->size() != x.cols()) throw shape_error("column mask length != feature dimension");
  Matrix<T> out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::span<T> row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!(*mask)[j]) row[j] = T(0);
    }
  }
  return out;
}

// lookup -> (drop, mask) -> normalize -> propagate -> combine
template <typename T>
ViewForward<T> pipeline_forward(const UnifiedGraph<T>& g, const Matrix<T>& features,
                                const ViewSpec& view, const std::vector<T>& alpha) {
  if (alpha.empty()) throw config_error("alpha must have at least one entry");
  ViewForward<T> f;
  f.view_weights = g.weights;
  if (view.dropped != nullptr) {
    if (view.dropped->size() != g.targets.size()) {
      throw shape_error("drop flags length != CSR entry count");
    }
    for (std::size_t k = 0; k < f.view_weights.size(); ++k) {
      if ((*view.dropped)[k]) f.view_weights[k] = T(0);
    }
  }
  f.norm = normalize_adjacency(g, &f.view_weights);
  Matrix<T> masked = apply_column_mask(features, view.col_mask);
  f.trace = propagate(f.norm, masked, alpha.size() - 1);
  f.output = combine_layers(f.trace, alpha);
  return f;
}

// Exact reverse pass for one view.
//
// With G = dL/dO, O = sum_l alpha_l e^(l), e^(l+1) = A~ e^(l):
//   gbar^(L) = alpha_L G,   gbar^(l) = alpha_l G + A~ gbar^(l+1)
//   dL/de^(0) = gbar^(0)  (column mask re-applied, then added to grad_features)
//
// For the adaptive edge weights the normalization couples every entry to the
// degrees of its endpoints. With S_ab = dL/dA~_ab = sum_l gbar^(l+1)_a . e^(l)_b
// and T_x = sum_{y in N(x)} (S_xy + S_yx) A~_xy, the derivative of the loss in
// an undirected weight w_e, e = (c, n), is
//   dL/dw_e = (S_cn + S_nc)/sqrt(d_c d_n) - (T_c/d_c + T_n/d_n)/2,
// which is what this routine accumulates into grad_slot_w for soft slots
// (hard slots carry the zero subgradient and are skipped).
template <typename T>
void pipeline_backward(const UnifiedGraph<T>& g, const ViewForward<T>& f, const ViewSpec& view,
                       const std::vector<T>& alpha, const Matrix<T>& grad_output,
                       Matrix<T>& grad_features, std::vector<T>* grad_slot_w) {
  const std::size_t layers = alpha.size() - 1;
  const std::size_t d = grad_output.cols();
  if (!grad_features.same_shape(grad_output)) {
    throw shape_error("pipeline_backward: gradient shape mismatch");
  }

  std::vector<Matrix<T>> gbar(layers + 1);
  gbar[layers] = Matrix<T>(grad_output.rows(), d);
  if (alpha[layers] != T(0)) {
    auto& dst = gbar[layers].data();
    const auto& src = grad_output.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = alpha[layers] * src[i];
  }
  for (std::size_t l = layers; l-- > 0;) {
    gbar[l] = Matrix<T>(grad_output.rows(), d);
    f.norm.multiply(gbar[l + 1], gbar[l]);
    if (alpha[l] != T(0)) {
      auto& dst = gbar[l].data();
      const auto& src = grad_output.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha[l] * src[i];
    }
  }

  // input-feature path, masked columns contribute nothing
  for (std::size_t r = 0; r < grad_features.rows(); ++r) {
    std::span<T> acc = grad_features.row(r);
    std::span<const T> src = gbar[0].row(r);
    for (std::size_t j = 0; j < d; ++j) {
      if (view.col_mask != nullptr && !(*view.col_mask)[j]) continue;
      acc[j] += src[j];
    }
  }

  if (grad_slot_w == nullptr || g.slots.empty()) return;
  if (grad_slot_w->size() != g.slots.size()) {
    throw shape_error("pipeline_backward: slot gradient size mismatch");
  }

  // S per directed entry, then the degree aggregates T per node
  std::vector<T> entry_s(g.targets.size(), T(0));
  parallel_for(g.node_count(), [&](std::size_t a) {
    for (std::uint32_t k = g.offsets[a]; k < g.offsets[a + 1]; ++k) {
      std::uint32_t b = g.targets[k];
      T s = T(0);
      for (std::size_t l = 0; l + 1 <= layers; ++l) {
        s += dot(std::span<const T>(gbar[l + 1].row(a)),
                 std::span<const T>(f.trace.layer(l).row(b)));
      }
      entry_s[k] = s;
    }
  });

  std::vector<T> t_node(g.node_count(), T(0));
  for (std::uint32_t a = 0; a < g.node_count(); ++a) {
    T acc = T(0);
    for (std::uint32_t k = g.offsets[a]; k < g.offsets[a + 1]; ++k) {
      acc += (entry_s[k] + entry_s[g.twin[k]]) * f.norm.entry_norm[k];
    }
    t_node[a] = acc;
  }

  for (std::size_t s = 0; s < g.slots.size(); ++s) {
    const auto& slot = g.slots[s];
    if (f.view_weights[slot.entry] <= T(0)) continue;  // hard case or dropped
    T da = f.norm.degree[slot.node];
    T db = f.norm.degree[slot.coord];
    if (da == T(0) || db == T(0)) continue;
    T grad = (entry_s[slot.entry] + entry_s[g.twin[slot.entry]]) / std::sqrt(da * db);
    grad -= (t_node[slot.node] / da + t_node[slot.coord] / db) / T(2);
    (*grad_slot_w)[s] += grad;
  }
}

// Chains accumulated dL/dw through the cosine into the raw layer-0 rows.
// Soft case only; the vectors seen here have nonzero norms because a soft
// slot implies a strictly positive inner product.
template <typename T>
void adaptive_weight_backward(const UnifiedGraph<T>& g, const Matrix<T>& features,
                              const std::vector<T>& grad_slot_w, Matrix<T>& grad_features) {
  for (std::size_t s = 0; s < g.slots.size(); ++s) {
    const auto& slot = g.slots[s];
    T gw = grad_slot_w[s];
    if (gw == T(0)) continue;
    if (g.weights[slot.entry] <= T(0)) continue;
    std::span<const T> x = features.row(slot.node);
    std::span<const T> c = features.row(slot.coord);
    T nx = norm(x);
    T nc = norm(c);
    T w = dot(x, c) / (nx * nc);
    std::span<T> gx = grad_features.row(slot.node);
    std::span<T> gc = grad_features.row(slot.coord);
    T inv = T(1) / (nx * nc);
    for (std::size_t j = 0; j < x.size(); ++j) {
      gx[j] += gw * (c[j] * inv - w * x[j] / (nx * nx));
      gc[j] += gw * (x[j] * inv - w * c[j] / (nc * nc));
    }
  }
}

}  // namespace hago
