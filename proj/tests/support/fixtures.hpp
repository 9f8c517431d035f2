#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hago/hago.hpp"

namespace testing_support {

inline hago::DomainGraph make_graph(const std::string& label,
                                    std::vector<std::pair<std::string, std::string>> pairs,
                                    hago::EntityRegistry& registry) {
  std::set<std::pair<hago::UserIndex, hago::ItemIndex>> seen;
  for (auto& [u, i] : pairs) {
    seen.emplace(registry.user_index(u), registry.item_index(label, i));
  }
  hago::DomainGraph g;
  g.label = label;
  g.edges.assign(seen.begin(), seen.end());
  std::set<hago::UserIndex> users;
  std::set<hago::ItemIndex> items;
  for (auto& [u, i] : g.edges) {
    users.insert(u);
    items.insert(i);
  }
  g.users.assign(users.begin(), users.end());
  g.items.assign(items.begin(), items.end());
  g.build_local_adjacency();
  return g;
}

// 5 users (u1..u5, u1-u3 shared), 3+3 items, two domains. Small enough for
// finite differences, connected enough that every table gets gradient.
inline hago::MultiDomainDataset two_domain_fixture() {
  hago::EntityRegistry registry;
  auto src = make_graph(
      "src", {{"u1", "a"}, {"u1", "b"}, {"u2", "a"}, {"u3", "b"}, {"u3", "c"}, {"u4", "c"}},
      registry);
  auto tgt = make_graph("tgt",
                        {{"u1", "x"},
                         {"u2", "x"},
                         {"u2", "y"},
                         {"u3", "y"},
                         {"u3", "z"},
                         {"u5", "z"},
                         {"u5", "x"}},
                        registry);
  return hago::build_dataset({std::move(src)}, std::move(tgt), std::move(registry));
}

// Arbitrary weighted symmetric graph as a UnifiedGraph, for oracle tests.
struct WeightedEdge {
  std::uint32_t a, b;
  double w;
};

template <typename T>
hago::UnifiedGraph<T> graph_from_edges(std::uint32_t n_users, std::uint32_t n_items,
                                       const std::vector<WeightedEdge>& edges) {
  hago::UnifiedGraph<T> g;
  g.mode = hago::GraphMode::None;
  g.user_count = n_users;
  g.item_count = n_items;
  g.coord_count = 0;
  g.kinds.assign(g.node_count(), hago::NodeKind::User);
  for (std::uint32_t i = 0; i < n_items; ++i) g.kinds[n_users + i] = hago::NodeKind::Item;
  std::vector<hago::detail::EdgeRecord<T>> records;
  records.reserve(edges.size());
  for (const auto& e : edges) {
    records.push_back({e.a, e.b, static_cast<T>(e.w), true, -1});
  }
  hago::detail::finalize_csr(g, records);
  return g;
}

// Random bipartite weighted graph with every node touched by >= 1 edge.
template <typename T>
hago::UnifiedGraph<T> random_bipartite_graph(hago::Rng& rng, std::uint32_t max_nodes,
                                             std::vector<WeightedEdge>* out_edges = nullptr) {
  std::uint32_t n_users = 1 + static_cast<std::uint32_t>(rng.below(max_nodes / 2));
  std::uint32_t n_items = 1 + static_cast<std::uint32_t>(rng.below(max_nodes / 2));
  std::set<std::pair<std::uint32_t, std::uint32_t>> chosen;
  for (std::uint32_t u = 0; u < n_users; ++u) {
    chosen.emplace(u, static_cast<std::uint32_t>(rng.below(n_items)));
  }
  for (std::uint32_t i = 0; i < n_items; ++i) {
    chosen.emplace(static_cast<std::uint32_t>(rng.below(n_users)), i);
  }
  std::size_t extra = rng.below(2 * max_nodes);
  for (std::size_t e = 0; e < extra; ++e) {
    chosen.emplace(static_cast<std::uint32_t>(rng.below(n_users)),
                   static_cast<std::uint32_t>(rng.below(n_items)));
  }
  std::vector<WeightedEdge> edges;
  for (const auto& [u, i] : chosen) {
    double w = 1e-6 + (1.0 - 1e-6) * rng.uniform();  // (0, 1]
    edges.push_back({u, n_users + i, w});
  }
  if (out_edges != nullptr) *out_edges = edges;
  return graph_from_edges<T>(n_users, n_items, edges);
}

template <typename T>
hago::Matrix<T> random_matrix(hago::Rng& rng, std::size_t rows, std::size_t cols,
                              double stddev = 1.0) {
  hago::Matrix<T> m(rows, cols);
  for (auto& v : m.data()) v = static_cast<T>(rng.normal(0.0, stddev));
  return m;
}

}  // namespace testing_support
