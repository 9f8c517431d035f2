#include <catch2/catch_amalgamated.hpp>

#include "hago/pretrain.hpp"
#include "hago/transfer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace hago;
using testing_support::two_domain_fixture;

namespace {

// Embeddings scaled up so every adaptive slot's inner product sits well away
// from the soft/hard boundary; finite differences at h=1e-3 must not flip a
// slot's branch. Seed 5 was screened for that property.
EmbeddingStore<double> gradcheck_store(const MultiDomainDataset& ds, const CoordinatorSet& coords,
                                       std::size_t dim) {
  auto store = init_embeddings<double>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, dim, 5);
  for (auto* table : {&store.users, &store.items, &store.coords}) {
    for (auto& v : table->data()) v *= 5.0;
  }
  return store;
}

}  // namespace

TEST_CASE("backward of a zero output gradient is zero", "[gradients]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = gradcheck_store(ds, coords, 4);
  auto binding = bind_unified(ds, &coords, GraphMode::HAGO, store);

  Matrix<double> x = gather_features(store, binding.refs);
  ViewSpec plain;
  std::vector<double> alpha = {0.0, 0.0, 1.0};
  auto f = pipeline_forward(binding.graph, x, plain, alpha);

  Matrix<double> zero_grad(x.rows(), x.cols());
  Matrix<double> grad_x(x.rows(), x.cols());
  std::vector<double> slot_grads(binding.graph.slots.size(), 0.0);
  pipeline_backward(binding.graph, f, plain, alpha, zero_grad, grad_x, &slot_grads);
  adaptive_weight_backward(binding.graph, x, slot_grads, grad_x);
  for (double v : grad_x.data()) CHECK(v == 0.0);
  for (double v : slot_grads) CHECK(v == 0.0);
}

TEST_CASE("gradient accumulation is deterministic", "[gradients]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = gradcheck_store(ds, coords, 4);
  std::vector<double> alpha = {0.2, 0.3, 0.5};

  auto run_once = [&]() {
    auto binding = bind_unified(ds, &coords, GraphMode::HAGO, store);
    Rng rng(7, "aug");
    auto v1 = augment_view(binding.graph, store.dim, 0.2, 0.25, rng);
    auto v2 = augment_view(binding.graph, store.dim, 0.2, 0.25, rng);
    std::vector<std::uint32_t> batch;
    for (std::uint32_t n = 0; n < binding.graph.user_count + binding.graph.item_count; ++n) {
      batch.push_back(n);
    }
    GradTables<double> grads;
    grads.match(store);
    pretrain_batch_eval(binding, store, v1, v2, batch, alpha, 0.5, &grads);
    return grads.users.data();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("InfoNCE end-to-end gradients match finite differences in HAGO mode", "[gradients]") {
  const std::size_t dim = 5;
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = gradcheck_store(ds, coords, dim);
  std::vector<double> alpha = {0.2, 0.3, 0.5};
  auto binding = bind_unified(ds, &coords, GraphMode::HAGO, store);

  // fixed augmentation: one dropped interaction edge and one masked column per view
  AugmentedView v1, v2;
  v1.dropped_entries.assign(binding.graph.targets.size(), 0);
  v2.dropped_entries.assign(binding.graph.targets.size(), 0);
  int dropped = 0;
  for (std::uint32_t a = 0; a < binding.graph.node_count() && dropped < 2; ++a) {
    for (std::uint32_t k = binding.graph.offsets[a];
         k < binding.graph.offsets[a + 1] && dropped < 2; ++k) {
      if (!binding.graph.interaction[k] || k > binding.graph.twin[k]) continue;
      auto& view = dropped == 0 ? v1 : v2;
      view.dropped_entries[k] = view.dropped_entries[binding.graph.twin[k]] = 1;
      ++dropped;
    }
  }
  v1.column_mask.assign(dim, 1);
  v1.column_mask[1] = 0;
  v2.column_mask.assign(dim, 1);
  v2.column_mask[3] = 0;

  std::vector<std::uint32_t> batch;
  for (std::uint32_t n = 0; n < binding.graph.user_count + binding.graph.item_count; ++n) {
    batch.push_back(n);
  }

  GradTables<double> grads;
  grads.match(store);
  auto loss = pretrain_batch_eval(binding, store, v1, v2, batch, alpha, 0.5, &grads);
  REQUIRE(loss.has_value());

  auto loss_fn = [&]() {
    return *pretrain_batch_eval(binding, store, v1, v2, batch, alpha, 0.5,
                                static_cast<GradTables<double>*>(nullptr));
  };
  testing_support::FdStats stats;
  testing_support::fd_check_table(store.users, grads.users, loss_fn, 1e-3, stats);
  testing_support::fd_check_table(store.items, grads.items, loss_fn, 1e-3, stats);
  testing_support::fd_check_table(store.coords, grads.coords, loss_fn, 1e-3, stats);
  stats.finish();
  INFO("max_rel=" << stats.max_rel << " p95=" << stats.p95_rel);
  CHECK(stats.max_rel <= 1e-3);
  CHECK(stats.p95_rel <= 1e-4);
}

TEST_CASE("BPR end-to-end gradients match finite differences in HAGO mode", "[gradients]") {
  const std::size_t dim = 5;
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = gradcheck_store(ds, coords, dim);
  store.allocate_prompts(ds.target.user_count() + ds.target.item_count());
  Rng rng(5, "test:prompts");
  for (auto& v : store.prompts.data()) v = rng.normal(0.0, 0.3);

  auto binding = bind_unified(ds, &coords, GraphMode::HAGO, store);
  for (std::size_t s = 0; s < ds.target.users.size(); ++s) {
    binding.refs[binding.graph.user_node(ds.target.users[s])].prompt_row =
        static_cast<std::int32_t>(s);
  }
  for (std::size_t s = 0; s < ds.target.items.size(); ++s) {
    binding.refs[binding.graph.item_node(ds.target.items[s])].prompt_row =
        static_cast<std::int32_t>(ds.target.users.size() + s);
  }

  std::vector<double> alpha = {0.2, 0.3, 0.5};
  TrainablePolicy policy;
  policy.prompts = true;
  const double lambda = 1e-3;

  auto user_node = [&](const char* u) { return binding.graph.user_node(*ds.registry.find_user(u)); };
  auto item_node = [&](const char* i) {
    return binding.graph.item_node(*ds.registry.find_item("tgt", i));
  };
  std::vector<std::array<std::uint32_t, 3>> triples = {
      {user_node("u1"), item_node("x"), item_node("y")},
      {user_node("u2"), item_node("y"), item_node("z")},
      {user_node("u3"), item_node("z"), item_node("x")},
  };

  GradTables<double> grads;
  grads.match(store);
  transfer_batch_eval(binding, store, triples, alpha, lambda, policy, &grads);

  auto loss_fn = [&]() {
    return transfer_batch_eval(binding, store, triples, alpha, lambda, policy,
                               static_cast<GradTables<double>*>(nullptr));
  };
  testing_support::FdStats stats;
  testing_support::fd_check_table(store.users, grads.users, loss_fn, 1e-3, stats);
  testing_support::fd_check_table(store.items, grads.items, loss_fn, 1e-3, stats);
  testing_support::fd_check_table(store.coords, grads.coords, loss_fn, 1e-3, stats);
  testing_support::fd_check_table(store.prompts, grads.prompts, loss_fn, 1e-3, stats);
  stats.finish();
  INFO("max_rel=" << stats.max_rel << " p95=" << stats.p95_rel);
  CHECK(stats.max_rel <= 1e-3);
  CHECK(stats.p95_rel <= 1e-4);
}
