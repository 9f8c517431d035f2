#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hago/coordinators.hpp"
#include "hago/dataset.hpp"
#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/parallel.hpp"

namespace hago {

enum class NodeKind : std::uint8_t { User, Item, UserCoordinator, ItemCoordinator };

enum class GraphMode : std::uint8_t { None, HomoGO, HeterGO, HAGO };

inline const char* mode_name(GraphMode m) {
  switch (m) {
    case GraphMode::None: return "none";
    case GraphMode::HomoGO: return "homogo";
    case GraphMode::HeterGO: return "hetergo";
    case GraphMode::HAGO: return "hago";
  }
  return "?";
}

inline GraphMode mode_from_name(const std::string& s) {
  if (s == "none") return GraphMode::None;
  if (s == "homogo") return GraphMode::HomoGO;
  if (s == "hetergo") return GraphMode::HeterGO;
  if (s == "hago") return GraphMode::HAGO;
  throw config_error("unknown graph mode: " + s);
}

// The assembled weighted multi-domain graph. Symmetric CSR: every undirected
// edge is stored as two directed entries that reference each other through
// `twin`. Adaptive coordinator-node edges keep their CSR slot even when the
// hard case sets their weight to 0, so a later refresh can restore them; a
// zero weight contributes nothing to degrees or propagation, which is exactly
// edge removal under the weighted normalization.
template <typename T>
struct UnifiedGraph {
  GraphMode mode = GraphMode::None;
  std::uint32_t coordinators_per_type = 0;

  std::uint32_t user_count = 0;
  std::uint32_t item_count = 0;
  std::uint32_t coord_count = 0;
  std::vector<NodeKind> kinds;

  std::vector<std::uint32_t> offsets;      // node_count + 1
  std::vector<std::uint32_t> targets;      // directed entries
  std::vector<std::uint32_t> twin;         // reverse entry index
  std::vector<T> weights;                  // per entry; both directions agree
  std::vector<std::uint8_t> interaction;   // 1 for domain user-item edges (augmentable)

  struct AdaptiveSlot {
    std::uint32_t node;   // unified node id of the user/item endpoint
    std::uint32_t coord;  // unified node id of the coordinator endpoint
    std::uint32_t entry;  // CSR entry node -> coord (twin gives coord -> node)
  };
  std::vector<AdaptiveSlot> slots;

  std::uint32_t node_count() const { return user_count + item_count + coord_count; }
  std::size_t entry_count() const { return targets.size(); }
  std::size_t undirected_edge_count() const { return targets.size() / 2; }

  std::size_t active_edge_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] > T(0)) ++n;
    }
    return n / 2;
  }

  std::size_t soft_slot_count() const {
    std::size_t n = 0;
    for (const auto& s : slots) {
      if (weights[s.entry] > T(0)) ++n;
    }
    return n;
  }

  // Node id layout: users, then items, then coordinators.
  std::uint32_t user_node(UserIndex u) const { return u; }
  std::uint32_t item_node(ItemIndex i) const { return user_count + i; }
  std::uint32_t coord_node(std::uint32_t row) const { return user_count + item_count + row; }
};

namespace detail {

template <typename T>
struct EdgeRecord {
  std::uint32_t a, b;
  T w;
  bool interaction;
  std::int32_t slot = -1;  // index into slots, -1 for fixed-weight edges
};

template <typename T>
void finalize_csr(UnifiedGraph<T>& g, std::vector<EdgeRecord<T>>& edges) {
  const std::uint32_t n = g.node_count();
  g.offsets.assign(n + 1, 0);
  for (const auto& e : edges) {
    ++g.offsets[e.a + 1];
    ++g.offsets[e.b + 1];
  }
  for (std::uint32_t k = 0; k < n; ++k) g.offsets[k + 1] += g.offsets[k];

  const std::size_t m = edges.size() * 2;
  g.targets.assign(m, 0);
  g.twin.assign(m, 0);
  g.weights.assign(m, T(0));
  g.interaction.assign(m, 0);

  std::vector<std::uint32_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& rec = edges[e];
    std::uint32_t ka = cursor[rec.a]++;
    std::uint32_t kb = cursor[rec.b]++;
    g.targets[ka] = rec.b;
    g.targets[kb] = rec.a;
    g.twin[ka] = kb;
    g.twin[kb] = ka;
    g.weights[ka] = g.weights[kb] = rec.w;
    g.interaction[ka] = g.interaction[kb] = rec.interaction ? 1 : 0;
    if (rec.slot >= 0) g.slots[static_cast<std::size_t>(rec.slot)].entry = ka;
  }
}

}  // namespace detail

// Builds the unified weighted graph for a given coordinator strategy.
//   None    — union of the domain graphs in the global namespace, no coordinators.
//   HomoGO  — every coordinator links with weight 1 to all nodes of its domain
//             and to every coordinator of every other domain.
//   HeterGO — user coordinators link to their domain's users, item coordinators
//             to its items (weight 1); all user coordinators link to all item
//             coordinators (the binary R_C pattern, intra- and cross-domain).
//   HAGO    — HeterGO topology, but coordinator-node weights come from
//             adaptive_weight over `layer0` rows and are refreshed per step.
// `layer0` holds one embedding row per unified node and is required for HAGO.
template <typename T>
UnifiedGraph<T> assemble_unified(const MultiDomainDataset& ds, const CoordinatorSet* coords,
                                 GraphMode mode, const Matrix<T>* layer0 = nullptr) {
  if (mode == GraphMode::HAGO && layer0 == nullptr) {
    throw config_error("HAGO assembly requires layer-0 embeddings for the adaptive weights");
  }
  if (mode != GraphMode::None && coords == nullptr) {
    throw config_error("coordinator modes require a CoordinatorSet");
  }

  UnifiedGraph<T> g;
  g.mode = mode;
  g.user_count = static_cast<std::uint32_t>(ds.registry.user_count());
  g.item_count = static_cast<std::uint32_t>(ds.registry.item_count());
  g.coord_count = mode == GraphMode::None ? 0 : coords->total();
  g.coordinators_per_type = mode == GraphMode::None ? 0 : coords->per_type;

  g.kinds.assign(g.node_count(), NodeKind::User);
  for (std::uint32_t i = 0; i < g.item_count; ++i) g.kinds[g.user_count + i] = NodeKind::Item;
  if (g.coord_count > 0) {
    for (std::uint32_t r = 0; r < g.coord_count; ++r) {
      g.kinds[g.coord_node(r)] =
          coords->row_is_user_type(r) ? NodeKind::UserCoordinator : NodeKind::ItemCoordinator;
    }
  }
  if (layer0 != nullptr && layer0->rows() != g.node_count()) {
    throw shape_error("assemble_unified: layer0 row count != unified node count");
  }

  std::vector<detail::EdgeRecord<T>> edges;
  for (std::size_t k = 0; k < ds.domain_count(); ++k) {
    const DomainGraph& dom = ds.domain(k);
    for (const auto& [u, i] : dom.edges) {
      edges.push_back({g.user_node(u), g.item_node(i), T(1), true, -1});
    }
  }

  if (mode == GraphMode::HomoGO) {
    for (std::uint32_t k = 0; k < coords->domains; ++k) {
      const DomainGraph& dom = ds.domain(k);
      for (std::uint32_t t = 0; t < 2 * coords->per_type; ++t) {
        std::uint32_t row = k * 2 * coords->per_type + t;
        std::uint32_t c = g.coord_node(row);
        for (UserIndex u : dom.users) edges.push_back({c, g.user_node(u), T(1), false, -1});
        for (ItemIndex i : dom.items) edges.push_back({c, g.item_node(i), T(1), false, -1});
      }
    }
    // cross-domain: full interconnection between coordinators of distinct domains
    const std::uint32_t per_domain = 2 * coords->per_type;
    for (std::uint32_t ka = 0; ka < coords->domains; ++ka) {
      for (std::uint32_t kb = ka + 1; kb < coords->domains; ++kb) {
        for (std::uint32_t ta = 0; ta < per_domain; ++ta) {
          for (std::uint32_t tb = 0; tb < per_domain; ++tb) {
            edges.push_back({g.coord_node(ka * per_domain + ta),
                             g.coord_node(kb * per_domain + tb), T(1), false, -1});
          }
        }
      }
    }
  } else if (mode == GraphMode::HeterGO || mode == GraphMode::HAGO) {
    const bool adaptive = mode == GraphMode::HAGO;
    for (std::uint32_t k = 0; k < coords->domains; ++k) {
      const DomainGraph& dom = ds.domain(k);
      for (std::uint32_t j = 0; j < coords->per_type; ++j) {
        std::uint32_t cu = g.coord_node(coords->user_coord_row(k, j));
        for (UserIndex u : dom.users) {
          std::uint32_t node = g.user_node(u);
          T w = T(1);
          std::int32_t slot = -1;
          if (adaptive) {
            w = adaptive_weight<T>(layer0->row(node), layer0->row(cu));
            slot = static_cast<std::int32_t>(g.slots.size());
            g.slots.push_back({node, cu, 0});
          }
          edges.push_back({node, cu, w, false, slot});
        }
        std::uint32_t ci = g.coord_node(coords->item_coord_row(k, j));
        for (ItemIndex i : dom.items) {
          std::uint32_t node = g.item_node(i);
          T w = T(1);
          std::int32_t slot = -1;
          if (adaptive) {
            w = adaptive_weight<T>(layer0->row(node), layer0->row(ci));
            slot = static_cast<std::int32_t>(g.slots.size());
            g.slots.push_back({node, ci, 0});
          }
          edges.push_back({node, ci, w, false, slot});
        }
      }
    }
    // R_C: every user coordinator pairs with every item coordinator,
    // within and across domains; same-type pairs stay disconnected.
    for (std::uint32_t a = 0; a < g.coord_count; ++a) {
      if (!coords->row_is_user_type(a)) continue;
      for (std::uint32_t b = 0; b < g.coord_count; ++b) {
        if (coords->row_is_user_type(b)) continue;
        edges.push_back({g.coord_node(a), g.coord_node(b), T(1), false, -1});
      }
    }
  }

  detail::finalize_csr(g, edges);
  return g;
}

// Recomputes every adaptive slot from the current layer-0 embeddings.
// Slot order is fixed by construction, so the result is deterministic even
// when slots are processed in parallel.
template <typename T>
void refresh_adaptive_weights(UnifiedGraph<T>& g, const Matrix<T>& layer0) {
  if (g.mode != GraphMode::HAGO) {
    throw config_error("refresh_adaptive_weights requires a HAGO-mode graph");
  }
  if (layer0.rows() != g.node_count()) {
    throw shape_error("refresh_adaptive_weights: layer0 row count mismatch");
  }
  parallel_for(g.slots.size(), [&](std::size_t s) {
    const auto& slot = g.slots[s];
    T w = adaptive_weight<T>(layer0.row(slot.node), layer0.row(slot.coord));
    g.weights[slot.entry] = w;
    g.weights[g.twin[slot.entry]] = w;
  });
}

}  // namespace hago
