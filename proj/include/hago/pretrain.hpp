#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hago/losses.hpp"
#include "hago/pipeline.hpp"
#include "hago/store.hpp"
#include "hago/unified_graph.hpp"

namespace hago {

struct PretrainConfig {
  std::uint32_t epochs = 100;
  std::uint32_t batch_size = 1024;  // node batch; InfoNCE needs in-batch negatives
  double learning_rate = 0.005;
  double temperature = 0.5;
  double edge_drop1 = 0.2;
  double edge_drop2 = 0.2;
  double feature_mask1 = 0.1;
  double feature_mask2 = 0.1;
  GraphMode mode = GraphMode::HAGO;
  std::uint64_t seed = 42;

  void validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    if (!rate_ok(edge_drop1) || !rate_ok(edge_drop2)) {
      throw config_error("edge drop rates must lie in [0, 1)");
    }
    if (!rate_ok(feature_mask1) || !rate_ok(feature_mask2)) {
      throw config_error("feature mask rates must lie in [0, 1)");
    }
    if (!(temperature > 0.0)) throw config_error("temperature must be positive");
    if (batch_size < 2) throw config_error("batch size must be >= 2");
  }
};

// GRACE-style stochastic view: domain interaction edges dropped independently
// (both CSR directions together), plus one Bernoulli column mask over the
// feature dimensions. Coordinator edges and coordinator rows are exempt.
struct AugmentedView {
  std::vector<std::uint8_t> dropped_entries;                  // per CSR entry
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dropped_edges;  // (node a, node b)
  std::vector<std::uint8_t> column_mask;                      // 1 = keep

  ViewSpec spec() const { return ViewSpec{&dropped_entries, &column_mask}; }
};

template <typename T>
AugmentedView augment_view(const UnifiedGraph<T>& g, std::size_t dim, double p_edge,
                           double p_feature, Rng& rng) {
  if (p_edge < 0.0 || p_edge >= 1.0 || p_feature < 0.0 || p_feature >= 1.0) {
    throw config_error("augmentation rates must lie in [0, 1)");
  }
  AugmentedView view;
  view.dropped_entries.assign(g.targets.size(), 0);
  // draw order: undirected interaction edges in ascending primary-entry order
  for (std::uint32_t a = 0; a < g.node_count(); ++a) {
    for (std::uint32_t k = g.offsets[a]; k < g.offsets[a + 1]; ++k) {
      if (!g.interaction[k] || k > g.twin[k]) continue;
      if (rng.bernoulli(p_edge)) {
        view.dropped_entries[k] = 1;
        view.dropped_entries[g.twin[k]] = 1;
        view.dropped_edges.emplace_back(a, g.targets[k]);
      }
    }
  }
  view.column_mask.assign(dim, 1);
  for (std::size_t j = 0; j < dim; ++j) {
    if (rng.bernoulli(p_feature)) view.column_mask[j] = 0;
  }
  return view;
}

// Where a graph node's layer-0 row lives in the store. prompt_row >= 0 adds
// the prompt table row on top (transfer only).
struct NodeRef {
  enum Table : std::uint8_t { Users = 0, Items = 1, Coords = 2 };
  std::uint8_t table = Users;
  std::uint32_t row = 0;
  std::int32_t prompt_row = -1;
};

// A graph plus its mapping into the parameter tables and the set of nodes the
// contrastive loss may draw (coordinators are never loss anchors/negatives).
template <typename T>
struct GraphBinding {
  UnifiedGraph<T> graph;
  std::vector<NodeRef> refs;
  std::vector<std::uint32_t> loss_nodes;
  std::string scope;  // rng substream label component
};

template <typename T>
Matrix<T> gather_features(const EmbeddingStore<T>& store, const std::vector<NodeRef>& refs) {
  Matrix<T> x(refs.size(), store.dim);
  for (std::size_t n = 0; n < refs.size(); ++n) {
    const NodeRef& ref = refs[n];
    const Matrix<T>& table = ref.table == NodeRef::Users   ? store.users
                             : ref.table == NodeRef::Items ? store.items
                                                           : store.coords;
    std::span<const T> src = table.row(ref.row);
    std::span<T> dst = x.row(n);
    std::copy(src.begin(), src.end(), dst.begin());
    if (ref.prompt_row >= 0) {
      axpy(T(1), std::span<const T>(store.prompts.row(ref.prompt_row)), dst);
    }
  }
  return x;
}

// Which tables may receive gradients.
struct TrainablePolicy {
  bool users = true;
  bool items = true;
  bool coords = true;
  bool prompts = false;
};

template <typename T>
void scatter_gradients(const std::vector<NodeRef>& refs, const Matrix<T>& grad_x,
                       const TrainablePolicy& policy, GradTables<T>& grads) {
  for (std::size_t n = 0; n < refs.size(); ++n) {
    std::span<const T> src = grad_x.row(n);
    bool nonzero = false;
    for (T v : src) {
      if (v != T(0)) {
        nonzero = true;
        break;
      }
    }
    if (!nonzero) continue;
    const NodeRef& ref = refs[n];
    bool table_ok = ref.table == NodeRef::Users   ? policy.users
                    : ref.table == NodeRef::Items ? policy.items
                                                  : policy.coords;
    if (table_ok) {
      std::span<T> dst = ref.table == NodeRef::Users   ? grads.touch_users(ref.row)
                         : ref.table == NodeRef::Items ? grads.touch_items(ref.row)
                                                       : grads.touch_coords(ref.row);
      axpy(T(1), src, dst);
    }
    if (policy.prompts && ref.prompt_row >= 0) {
      axpy(T(1), src, grads.touch_prompts(static_cast<std::uint32_t>(ref.prompt_row)));
    }
  }
}

// Joint binding over the full unified graph (coordinator modes, and mode None
// when a single merged loop is wanted). Node order matches the unified layout.
template <typename T>
GraphBinding<T> bind_unified(const MultiDomainDataset& ds, const CoordinatorSet* coords,
                             GraphMode mode, const EmbeddingStore<T>& store) {
  GraphBinding<T> b;
  b.scope = "joint";
  const std::uint32_t users = static_cast<std::uint32_t>(ds.registry.user_count());
  const std::uint32_t items = static_cast<std::uint32_t>(ds.registry.item_count());
  const std::uint32_t ncoord = mode == GraphMode::None ? 0 : coords->total();
  b.refs.reserve(users + items + ncoord);
  for (std::uint32_t u = 0; u < users; ++u) b.refs.push_back({NodeRef::Users, u, -1});
  for (std::uint32_t i = 0; i < items; ++i) b.refs.push_back({NodeRef::Items, i, -1});
  for (std::uint32_t c = 0; c < ncoord; ++c) b.refs.push_back({NodeRef::Coords, c, -1});
  Matrix<T> layer0 = gather_features(store, b.refs);
  b.graph = assemble_unified(ds, coords, mode, &layer0);
  b.loss_nodes.resize(users + items);
  for (std::uint32_t n = 0; n < users + items; ++n) b.loss_nodes[n] = n;
  return b;
}

// Single-domain binding used by the isolated (mode None) loops. The node
// order is the domain's local ordering [users..., items...].
template <typename T>
GraphBinding<T> bind_domain(const DomainGraph& dom) {
  GraphBinding<T> b;
  b.scope = "domain:" + dom.label;
  b.graph.mode = GraphMode::None;
  b.graph.user_count = static_cast<std::uint32_t>(dom.user_count());
  b.graph.item_count = static_cast<std::uint32_t>(dom.item_count());
  b.graph.coord_count = 0;
  b.graph.kinds.assign(b.graph.node_count(), NodeKind::User);
  for (std::uint32_t i = 0; i < b.graph.item_count; ++i) {
    b.graph.kinds[b.graph.user_count + i] = NodeKind::Item;
  }
  std::vector<detail::EdgeRecord<T>> edges;
  edges.reserve(dom.edge_count());
  for (const auto& [u, i] : dom.edges) {
    edges.push_back({dom.local_user(u), dom.local_item(i), T(1), true, -1});
  }
  detail::finalize_csr(b.graph, edges);

  b.refs.reserve(b.graph.node_count());
  for (UserIndex u : dom.users) b.refs.push_back({NodeRef::Users, u, -1});
  for (ItemIndex i : dom.items) b.refs.push_back({NodeRef::Items, i, -1});
  b.loss_nodes.resize(b.graph.node_count());
  for (std::uint32_t n = 0; n < b.graph.node_count(); ++n) b.loss_nodes[n] = n;
  return b;
}

// One contrastive evaluation on a node batch: refresh adaptive weights from
// the current layer-0 rows, forward both views, InfoNCE on the batch, and
// (optionally) exact gradients back into the tables. Batch rows whose output
// norm vanishes in either view (possible when augmentation isolates a node
// under alpha = [0,0,1]) are excluded; returns nullopt when fewer than two
// rows survive.
template <typename T>
std::optional<double> pretrain_batch_eval(GraphBinding<T>& binding, const EmbeddingStore<T>& store,
                                          const AugmentedView& view1, const AugmentedView& view2,
                                          const std::vector<std::uint32_t>& batch,
                                          const std::vector<T>& alpha, T tau,
                                          GradTables<T>* grads) {
  Matrix<T> x = gather_features(store, binding.refs);
  if (binding.graph.mode == GraphMode::HAGO) refresh_adaptive_weights(binding.graph, x);

  ViewForward<T> f1 = pipeline_forward(binding.graph, x, view1.spec(), alpha);
  ViewForward<T> f2 = pipeline_forward(binding.graph, x, view2.spec(), alpha);

  std::vector<std::uint32_t> rows;
  rows.reserve(batch.size());
  for (std::uint32_t n : batch) {
    T a = squared_norm(std::span<const T>(f1.output.row(n)));
    T b = squared_norm(std::span<const T>(f2.output.row(n)));
    if (a > T(1e-24) && b > T(1e-24)) rows.push_back(n);
  }
  if (rows.size() < 2) return std::nullopt;

  Matrix<T> z1(rows.size(), store.dim), z2(rows.size(), store.dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::span<const T> s1 = f1.output.row(rows[r]);
    std::span<const T> s2 = f2.output.row(rows[r]);
    std::copy(s1.begin(), s1.end(), z1.row(r).begin());
    std::copy(s2.begin(), s2.end(), z2.row(r).begin());
  }

  if (grads == nullptr) {
    return static_cast<double>(infonce_loss(z1, z2, tau));
  }

  InfoNceResult<T> nce = infonce_loss_grad(z1, z2, tau);
  Matrix<T> g1(x.rows(), x.cols()), g2(x.rows(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::span<const T> s1 = nce.grad_z1.row(r);
    std::span<const T> s2 = nce.grad_z2.row(r);
    std::copy(s1.begin(), s1.end(), g1.row(rows[r]).begin());
    std::copy(s2.begin(), s2.end(), g2.row(rows[r]).begin());
  }

  Matrix<T> grad_x(x.rows(), x.cols());
  const bool adaptive = !binding.graph.slots.empty();
  std::vector<T> slot_grads(binding.graph.slots.size(), T(0));
  pipeline_backward(binding.graph, f1, view1.spec(), alpha, g1, grad_x,
                    adaptive ? &slot_grads : nullptr);
  pipeline_backward(binding.graph, f2, view2.spec(), alpha, g2, grad_x,
                    adaptive ? &slot_grads : nullptr);
  if (adaptive) adaptive_weight_backward(binding.graph, x, slot_grads, grad_x);

  if (!all_finite(grad_x)) throw numeric_error("pretrain: non-finite gradient");
  TrainablePolicy policy;  // users, items, coordinators all train during pre-training
  scatter_gradients(binding.refs, grad_x, policy, *grads);
  return static_cast<double>(nce.loss);
}

struct PretrainEpochLog {
  std::uint32_t epoch = 0;
  double loss = 0.0;
  std::size_t adaptive_edges = 0;
  double wall_ms = 0.0;
  std::size_t steps = 0;
};

inline void write_epoch_log(std::ostream& os, const PretrainEpochLog& log) {
  os << "{\"epoch\":" << log.epoch << ",\"loss\":" << log.loss
     << ",\"adaptive_edges\":" << log.adaptive_edges << ",\"wall_ms\":" << log.wall_ms << "}\n";
}

template <typename T>
struct PretrainResult {
  EmbeddingStore<T> store;
  std::vector<PretrainEpochLog> log;
};

// Multi-domain collaborative pre-training. Coordinator modes run one joint
// loop over the unified graph; mode None pre-trains every domain in isolation
// (its own substreams, batches, and subgraph), which is the "without graph
// coordinators" baseline. Each optimizer step refreshes the adaptive weights
// and recomputes the propagation, so gradients always see fresh topology.
template <typename T>
PretrainResult<T> run_pretraining(const MultiDomainDataset& ds, const CoordinatorSet* coords,
                                  const PretrainConfig& cfg, const std::vector<T>& alpha,
                                  EmbeddingStore<T> store, std::ostream* log_stream = nullptr) {
  cfg.validate();
  check_layer_weights(alpha);
  if (cfg.mode != GraphMode::None && coords == nullptr) {
    throw config_error("pre-training in a coordinator mode requires coordinators");
  }

  std::vector<GraphBinding<T>> bindings;
  if (cfg.mode == GraphMode::None) {
    for (std::size_t k = 0; k < ds.domain_count(); ++k) {
      bindings.push_back(bind_domain<T>(ds.domain(k)));
    }
  } else {
    bindings.push_back(bind_unified(ds, coords, cfg.mode, store));
  }

  GradTables<T> grads;
  grads.match(store);
  AdamParams adam;
  adam.lr = cfg.learning_rate;

  PretrainResult<T> result;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (auto& binding : bindings) {
      const std::string prefix = "pretrain:" + binding.scope;
      Rng rng_v1(cfg.seed, prefix + ":aug:" + std::to_string(epoch) + ":1");
      Rng rng_v2(cfg.seed, prefix + ":aug:" + std::to_string(epoch) + ":2");
      AugmentedView v1 =
          augment_view(binding.graph, store.dim, cfg.edge_drop1, cfg.feature_mask1, rng_v1);
      AugmentedView v2 =
          augment_view(binding.graph, store.dim, cfg.edge_drop2, cfg.feature_mask2, rng_v2);

      std::vector<std::uint32_t> order = binding.loss_nodes;
      Rng rng_shuffle(cfg.seed, prefix + ":shuffle:" + std::to_string(epoch));
      rng_shuffle.shuffle(order.begin(), order.end());

      for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
        std::size_t end = std::min(order.size(), begin + cfg.batch_size);
        if (end - begin < 2) continue;
        std::vector<std::uint32_t> batch(order.begin() + begin, order.begin() + end);
        std::optional<double> loss =
            pretrain_batch_eval(binding, store, v1, v2, batch, alpha, static_cast<T>(cfg.temperature),
                                &grads);
        if (!loss.has_value()) continue;
        if (!std::isfinite(*loss)) {
          throw numeric_error("pretrain: non-finite loss at epoch " + std::to_string(epoch));
        }
        adam_step(store, grads, adam);
        grads.clear();
        loss_sum += *loss;
        ++steps;
      }
    }

    PretrainEpochLog log;
    log.epoch = epoch;
    log.steps = steps;
    log.loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
    for (const auto& binding : bindings) log.adaptive_edges += binding.graph.soft_slot_count();
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    if (log_stream != nullptr) write_epoch_log(*log_stream, log);
    result.log.push_back(log);
  }
  result.store = std::move(store);
  return result;
}

}  // namespace hago
