#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hago/dataset.hpp"
#include "hago/losses.hpp"
#include "hago/pipeline.hpp"
#include "hago/pretrain.hpp"
#include "hago/store.hpp"

namespace hago {

struct TransferConfig {
  double learning_rate = 0.1;
  std::uint32_t batch_size = 4096;  // (u, i, j) triples
  double l2 = 1e-4;
  std::uint32_t epochs = 100;
  std::uint64_t seed = 42;
  bool freeze_pretrained = true;
  bool use_prompts = true;          // false trains the embeddings directly (backbone setup)
  bool propagate_unified = false;   // coordinators participate in downstream propagation

  void validate() const {
    if (l2 < 0.0) throw config_error("l2 coefficient must be >= 0");
    if (batch_size < 1) throw config_error("batch size must be >= 1");
    if (!use_prompts && freeze_pretrained) {
      throw config_error("freeze=true with prompts disabled leaves nothing trainable");
    }
  }
};

// All-zero prompt table for the target domain's nodes.
template <typename T>
Matrix<T> init_prompts(std::size_t target_users, std::size_t target_items, std::size_t dim) {
  return Matrix<T>(target_users + target_items, dim);
}

// X# rows: elementwise e*_v + p_v.
template <typename T>
Matrix<T> prompted_features(const Matrix<T>& pretrained, const Matrix<T>& prompts) {
  if (!pretrained.same_shape(prompts)) throw shape_error("prompted_features: shape mismatch");
  Matrix<T> out = pretrained;
  const auto& p = prompts.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += p[i];
  return out;
}

// Uniform sample over target items the user has not interacted with in the
// training split. `train_items` must be sorted.
inline ItemIndex sample_negative(const std::vector<ItemIndex>& train_items,
                                 const std::vector<ItemIndex>& item_universe, Rng& rng) {
  if (train_items.size() >= item_universe.size()) {
    throw input_error("negative sampling: user interacted with every item");
  }
  while (true) {
    ItemIndex candidate = item_universe[rng.below(item_universe.size())];
    if (!std::binary_search(train_items.begin(), train_items.end(), candidate)) {
      return candidate;
    }
  }
}

// The trained transfer model: target-node ordering, the (frozen or tuned)
// pre-trained input rows, the prompt table, and the final representations.
template <typename T>
struct TransferModel {
  std::vector<UserIndex> users;  // sorted global target users
  std::vector<ItemIndex> items;  // sorted global target items
  std::vector<T> alpha;
  Matrix<T> pretrained;  // (users+items) x d input rows from E*
  Matrix<T> prompts;     // same shape
  Matrix<T> outputs;     // final representations

  std::size_t user_slot(UserIndex u) const {
    auto it = std::lower_bound(users.begin(), users.end(), u);
    if (it == users.end() || *it != u) throw query_error("user not in target domain");
    return static_cast<std::size_t>(it - users.begin());
  }

  std::size_t item_slot(ItemIndex i) const {
    auto it = std::lower_bound(items.begin(), items.end(), i);
    if (it == items.end() || *it != i) throw query_error("item not in target domain");
    return static_cast<std::size_t>(it - items.begin());
  }

  std::span<const T> user_repr(std::size_t slot) const { return outputs.row(slot); }
  std::span<const T> item_repr(std::size_t slot) const {
    return outputs.row(users.size() + slot);
  }

  T score_slots(std::size_t user, std::size_t item) const {
    return score(user_repr(user), item_repr(item));
  }
};

struct TransferEpochLog {
  std::uint32_t epoch = 0;
  double bpr_loss = 0.0;
  double reg_term = 0.0;
  double wall_ms = 0.0;
};

inline void write_epoch_log(std::ostream& os, const TransferEpochLog& log) {
  os << "{\"epoch\":" << log.epoch << ",\"bpr_loss\":" << log.bpr_loss
     << ",\"reg_term\":" << log.reg_term << ",\"wall_ms\":" << log.wall_ms << "}\n";
}

template <typename T>
struct TransferResult {
  TransferModel<T> model;
  EmbeddingStore<T> store;
  std::vector<TransferEpochLog> log;
};

namespace detail {

// Target-only binding: bipartite graph over the target's nodes with
// training-split edges exclusively (validation/test edges never propagate).
template <typename T>
GraphBinding<T> bind_target_train(const DomainGraph& target, const InteractionSplit& split,
                                  bool with_prompts) {
  GraphBinding<T> b;
  b.scope = "target";
  b.graph.mode = GraphMode::None;
  b.graph.user_count = static_cast<std::uint32_t>(target.user_count());
  b.graph.item_count = static_cast<std::uint32_t>(target.item_count());
  b.graph.coord_count = 0;
  b.graph.kinds.assign(b.graph.node_count(), NodeKind::User);
  for (std::uint32_t i = 0; i < b.graph.item_count; ++i) {
    b.graph.kinds[b.graph.user_count + i] = NodeKind::Item;
  }
  std::vector<EdgeRecord<T>> edges;
  for (std::size_t s = 0; s < split.users.size(); ++s) {
    std::uint32_t lu = target.local_user(split.users[s]);
    for (ItemIndex i : split.train[s]) {
      edges.push_back({lu, target.local_item(i), T(1), true, -1});
    }
  }
  finalize_csr(b.graph, edges);

  b.refs.reserve(b.graph.node_count());
  for (std::size_t s = 0; s < target.users.size(); ++s) {
    b.refs.push_back({NodeRef::Users, target.users[s],
                      with_prompts ? static_cast<std::int32_t>(s) : -1});
  }
  for (std::size_t s = 0; s < target.items.size(); ++s) {
    b.refs.push_back({NodeRef::Items, target.items[s],
                      with_prompts ? static_cast<std::int32_t>(target.users.size() + s) : -1});
  }
  return b;
}

}  // namespace detail

// One BPR evaluation over a triple batch (node ids of the bound graph):
// forward with the current parameters, pairwise loss plus L2 over the
// trainable rows bound to this graph, and exact gradients when `grads` is
// given. The regularization gradient lands directly on each parameter row, so
// a table's penalty never leaks into the prompt sharing its node.
template <typename T>
double transfer_batch_eval(GraphBinding<T>& binding, const EmbeddingStore<T>& store,
                           const std::vector<std::array<std::uint32_t, 3>>& triples,
                           const std::vector<T>& alpha, T lambda, const TrainablePolicy& policy,
                           GradTables<T>* grads, double* reg_out = nullptr) {
  if (triples.empty()) throw config_error("transfer: empty triple batch");
  Matrix<T> x = gather_features(store, binding.refs);
  if (binding.graph.mode == GraphMode::HAGO) refresh_adaptive_weights(binding.graph, x);

  ViewSpec plain;
  ViewForward<T> f = pipeline_forward(binding.graph, x, plain, alpha);

  const std::size_t n = triples.size();
  std::vector<T> pos(n), neg(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& [u, i, j] = triples[t];
    pos[t] = score(std::span<const T>(f.output.row(u)), std::span<const T>(f.output.row(i)));
    neg[t] = score(std::span<const T>(f.output.row(u)), std::span<const T>(f.output.row(j)));
  }

  auto table_trainable = [&](const NodeRef& ref) {
    return ref.table == NodeRef::Users   ? policy.users
           : ref.table == NodeRef::Items ? policy.items
                                         : policy.coords;
  };
  auto table_of = [&](const NodeRef& ref) -> const Matrix<T>& {
    return ref.table == NodeRef::Users   ? store.users
           : ref.table == NodeRef::Items ? store.items
                                         : store.coords;
  };

  // L2 over the trainable parameters reachable from this graph
  T theta_sq = T(0);
  if (lambda > T(0)) {
    for (const NodeRef& ref : binding.refs) {
      if (table_trainable(ref)) {
        theta_sq += squared_norm(std::span<const T>(table_of(ref).row(ref.row)));
      }
      if (policy.prompts && ref.prompt_row >= 0) {
        theta_sq += squared_norm(std::span<const T>(store.prompts.row(ref.prompt_row)));
      }
    }
  }
  if (reg_out != nullptr) *reg_out = static_cast<double>(lambda * theta_sq);

  T loss = bpr_loss(std::span<const T>(pos), std::span<const T>(neg), theta_sq, lambda);
  if (grads == nullptr) return static_cast<double>(loss);

  Matrix<T> g(x.rows(), x.cols());
  const T inv_b = T(1) / static_cast<T>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& [u, i, j] = triples[t];
    T coef = bpr_pairwise_grad(pos[t], neg[t]) * inv_b;
    std::span<const T> ou = f.output.row(u);
    std::span<const T> oi = f.output.row(i);
    std::span<const T> oj = f.output.row(j);
    std::span<T> gu = g.row(u);
    std::span<T> gi = g.row(i);
    std::span<T> gj = g.row(j);
    for (std::size_t c = 0; c < ou.size(); ++c) {
      gu[c] += coef * (oi[c] - oj[c]);
      gi[c] += coef * ou[c];
      gj[c] -= coef * ou[c];
    }
  }

  Matrix<T> grad_x(x.rows(), x.cols());
  const bool adaptive = !binding.graph.slots.empty();
  std::vector<T> slot_grads(binding.graph.slots.size(), T(0));
  pipeline_backward(binding.graph, f, plain, alpha, g, grad_x, adaptive ? &slot_grads : nullptr);
  if (adaptive) adaptive_weight_backward(binding.graph, x, slot_grads, grad_x);

  if (!all_finite(grad_x)) throw numeric_error("transfer: non-finite gradient");
  scatter_gradients(binding.refs, grad_x, policy, *grads);

  if (lambda > T(0)) {
    for (const NodeRef& ref : binding.refs) {
      if (table_trainable(ref)) {
        std::span<T> dst = ref.table == NodeRef::Users   ? grads->touch_users(ref.row)
                           : ref.table == NodeRef::Items ? grads->touch_items(ref.row)
                                                         : grads->touch_coords(ref.row);
        axpy(T(2) * lambda, std::span<const T>(table_of(ref).row(ref.row)), dst);
      }
      if (policy.prompts && ref.prompt_row >= 0) {
        std::uint32_t r = static_cast<std::uint32_t>(ref.prompt_row);
        axpy(T(2) * lambda, std::span<const T>(store.prompts.row(r)), grads->touch_prompts(r));
      }
    }
  }
  return static_cast<double>(loss);
}

// Fine-tunes on the target domain with BPR over sampled triples. By default
// E* stays frozen and only the additive prompts train; propagation runs over
// the target train-edge graph. With propagate_unified the whole coordinator
// graph participates and gradients still flow through the adaptive weights.
template <typename T>
TransferResult<T> run_transfer(const MultiDomainDataset& ds, const InteractionSplit& split,
                               EmbeddingStore<T> store, const TransferConfig& cfg,
                               const std::vector<T>& alpha,
                               const CoordinatorSet* coords = nullptr,
                               GraphMode mode = GraphMode::None,
                               std::ostream* log_stream = nullptr) {
  cfg.validate();
  check_layer_weights(alpha);
  const DomainGraph& target = ds.target;

  const std::size_t prompt_rows = target.user_count() + target.item_count();
  if (store.prompts.rows() != prompt_rows) store.allocate_prompts(prompt_rows);

  GraphBinding<T> binding;
  if (cfg.propagate_unified) {
    if (mode == GraphMode::None || coords == nullptr) {
      throw config_error("propagate_unified requires a coordinator mode and CoordinatorSet");
    }
    binding = bind_unified(ds, coords, mode, store);
    if (cfg.use_prompts) {
      for (std::size_t s = 0; s < target.users.size(); ++s) {
        binding.refs[binding.graph.user_node(target.users[s])].prompt_row =
            static_cast<std::int32_t>(s);
      }
      for (std::size_t s = 0; s < target.items.size(); ++s) {
        binding.refs[binding.graph.item_node(target.items[s])].prompt_row =
            static_cast<std::int32_t>(target.users.size() + s);
      }
    }
  } else {
    binding = detail::bind_target_train<T>(target, split, cfg.use_prompts);
  }

  TrainablePolicy policy;
  policy.users = policy.items = policy.coords = !cfg.freeze_pretrained;
  policy.prompts = cfg.use_prompts;

  // training triples in (user node, item node) unified/local ids
  auto user_node = [&](UserIndex u) {
    return cfg.propagate_unified ? binding.graph.user_node(u) : target.local_user(u);
  };
  auto item_node = [&](ItemIndex i) {
    return cfg.propagate_unified ? binding.graph.item_node(i) : target.local_item(i);
  };
  std::vector<std::array<std::uint32_t, 2>> interactions;
  std::vector<std::size_t> slot_of_interaction;
  for (std::size_t s = 0; s < split.users.size(); ++s) {
    for (ItemIndex i : split.train[s]) {
      interactions.push_back({user_node(split.users[s]), item_node(i)});
      slot_of_interaction.push_back(s);
    }
  }

  GradTables<T> grads;
  grads.match(store);
  AdamParams adam;
  adam.lr = cfg.learning_rate;

  TransferResult<T> result;
  std::vector<std::size_t> order(interactions.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng_shuffle(cfg.seed, "transfer:shuffle:" + std::to_string(epoch));
    rng_shuffle.shuffle(order.begin(), order.end());
    Rng rng_neg(cfg.seed, "transfer:neg:" + std::to_string(epoch));

    double loss_sum = 0.0, reg_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::array<std::uint32_t, 3>> triples;
      triples.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& [un, in] = interactions[order[k]];
        std::size_t s = slot_of_interaction[order[k]];
        ItemIndex j = sample_negative(split.train[s], target.items, rng_neg);
        triples.push_back({un, in, item_node(j)});
      }
      double reg = 0.0;
      double loss = transfer_batch_eval(binding, store, triples, alpha, static_cast<T>(cfg.l2),
                                        policy, &grads, &reg);
      if (!std::isfinite(loss)) {
        throw numeric_error("transfer: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_step(store, grads, adam);
      grads.clear();
      loss_sum += loss - reg;
      reg_sum += reg;
      ++steps;
    }

    TransferEpochLog log;
    log.epoch = epoch;
    log.bpr_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
    log.reg_term = steps > 0 ? reg_sum / static_cast<double>(steps) : 0.0;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    if (log_stream != nullptr) write_epoch_log(*log_stream, log);
    result.log.push_back(log);
  }

  // final representations with the trained parameters
  Matrix<T> x = gather_features(store, binding.refs);
  if (binding.graph.mode == GraphMode::HAGO) refresh_adaptive_weights(binding.graph, x);
  ViewSpec plain;
  ViewForward<T> f = pipeline_forward(binding.graph, x, plain, alpha);

  TransferModel<T> model;
  model.users = target.users;
  model.items = target.items;
  model.alpha = alpha;
  model.prompts = store.prompts;
  model.pretrained = Matrix<T>(prompt_rows, store.dim);
  model.outputs = Matrix<T>(prompt_rows, store.dim);
  for (std::size_t s = 0; s < target.users.size(); ++s) {
    std::span<const T> e = store.users.row(target.users[s]);
    std::copy(e.begin(), e.end(), model.pretrained.row(s).begin());
    std::span<const T> o = f.output.row(user_node(target.users[s]));
    std::copy(o.begin(), o.end(), model.outputs.row(s).begin());
  }
  for (std::size_t s = 0; s < target.items.size(); ++s) {
    std::span<const T> e = store.items.row(target.items[s]);
    std::copy(e.begin(), e.end(), model.pretrained.row(target.users.size() + s).begin());
    std::span<const T> o = f.output.row(item_node(target.items[s]));
    std::copy(o.begin(), o.end(), model.outputs.row(target.users.size() + s).begin());
  }

  result.model = std::move(model);
  result.store = std::move(store);
  return result;
}

}  // namespace hago
