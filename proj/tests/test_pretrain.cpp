#include <catch2/catch_amalgamated.hpp>

#include "hago/pretrain.hpp"
#include "support/fixtures.hpp"

using namespace hago;
using testing_support::two_domain_fixture;

TEST_CASE("augmentation identity at zero rates", "[pretrain]") {
  auto ds = two_domain_fixture();
  auto g = assemble_unified<double>(ds, nullptr, GraphMode::None);
  Rng rng(3, "aug");
  auto view = augment_view(g, 4, 0.0, 0.0, rng);
  for (auto flag : view.dropped_entries) CHECK(flag == 0);
  CHECK(view.dropped_edges.empty());
  for (auto keep : view.column_mask) CHECK(keep == 1);

  Matrix<double> x(g.node_count(), 4, 1.5);
  auto masked = apply_column_mask(x, &view.column_mask);
  CHECK(masked.data() == x.data());
}

TEST_CASE("column mask zeroes masked dimensions for every row", "[pretrain]") {
  Matrix<double> x(3, 2, 2.0);
  std::vector<std::uint8_t> mask = {1, 0};
  auto masked = apply_column_mask(x, &mask);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(masked(r, 0) == 2.0);
    CHECK(masked(r, 1) == 0.0);
  }
}

TEST_CASE("edge drops stay within the binomial envelope", "[pretrain]") {
  // 10,000 interaction edges at p=0.2: expect 2000 +- 3 sigma (120)
  std::vector<testing_support::WeightedEdge> edges;
  edges.reserve(10000);
  for (std::uint32_t e = 0; e < 10000; ++e) {
    edges.push_back({e % 100, 100 + e / 100, 1.0});
  }
  auto g = testing_support::graph_from_edges<double>(100, 100, edges);
  Rng rng(99, "aug");
  auto view = augment_view(g, 4, 0.2, 0.0, rng);
  CHECK(view.dropped_edges.size() >= 2000 - 120);
  CHECK(view.dropped_edges.size() <= 2000 + 120);
  // both directions flagged together
  std::size_t flagged = 0;
  for (std::uint32_t k = 0; k < g.targets.size(); ++k) {
    if (view.dropped_entries[k]) {
      ++flagged;
      CHECK(view.dropped_entries[g.twin[k]] == 1);
    }
  }
  CHECK(flagged == 2 * view.dropped_edges.size());
  // coordinator edges are never dropped: all flagged entries are interactions
  for (std::uint32_t k = 0; k < g.targets.size(); ++k) {
    if (view.dropped_entries[k]) CHECK(g.interaction[k] == 1);
  }
}

TEST_CASE("zero epochs return the initialization unchanged", "[pretrain]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = init_embeddings<float>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, 8, 3);
  auto snapshot = store.users.data();

  PretrainConfig cfg;
  cfg.epochs = 0;
  cfg.mode = GraphMode::HAGO;
  cfg.seed = 3;
  std::vector<float> alpha = {0.f, 0.f, 1.f};
  auto result = run_pretraining(ds, &coords, cfg, alpha, std::move(store));
  CHECK(result.store.users.data() == snapshot);
  CHECK(result.log.empty());
}

TEST_CASE("config validation", "[pretrain]") {
  PretrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = {};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = {};
  cfg.edge_drop1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = {};
  cfg.feature_mask2 = -0.1;
  CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("coordinators stay out of the loss but receive gradient", "[pretrain]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = init_embeddings<double>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, 6, 11);
  for (auto* t : {&store.users, &store.items, &store.coords}) {
    for (auto& v : t->data()) v *= 5.0;  // healthy cosine margins
  }

  auto binding = bind_unified(ds, &coords, GraphMode::HAGO, store);
  // loss candidates never include coordinator nodes
  for (std::uint32_t n : binding.loss_nodes) {
    CHECK(n < binding.graph.user_count + binding.graph.item_count);
  }

  Rng rng(11, "aug");
  auto v1 = augment_view(binding.graph, store.dim, 0.0, 0.0, rng);
  auto v2 = augment_view(binding.graph, store.dim, 0.1, 0.1, rng);
  std::vector<double> alpha = {0.0, 0.0, 1.0};
  GradTables<double> grads;
  grads.match(store);
  auto loss =
      pretrain_batch_eval(binding, store, v1, v2, binding.loss_nodes, alpha, 0.5, &grads);
  REQUIRE(loss.has_value());

  // connected coordinators still receive signal through propagation
  double coord_grad_norm = 0.0;
  for (double v : grads.coords.data()) coord_grad_norm += v * v;
  CHECK(coord_grad_norm > 0.0);
}

TEST_CASE("mode none pre-training separates over disjoint domains", "[pretrain]") {
  // one registry, two domains with disjoint users and items
  EntityRegistry reg;
  auto a = testing_support::make_graph(
      "alpha", {{"a1", "x1"}, {"a1", "x2"}, {"a2", "x1"}, {"a3", "x3"}, {"a3", "x2"}}, reg);
  auto b = testing_support::make_graph(
      "beta", {{"b1", "y1"}, {"b2", "y1"}, {"b2", "y2"}, {"b3", "y3"}, {"b1", "y3"}}, reg);

  auto ds_joint = build_dataset({a}, b, reg);
  auto ds_alpha = build_dataset({}, a, reg);
  auto ds_beta = build_dataset({}, b, reg);

  PretrainConfig cfg;
  cfg.mode = GraphMode::None;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.seed = 17;
  std::vector<float> alpha_w = {0.f, 0.f, 1.f};

  auto init = [&] {
    return init_embeddings<float>({reg.user_count(), reg.item_count(), 0}, 6, 17);
  };
  auto joint = run_pretraining(ds_joint, nullptr, cfg, alpha_w, init());
  auto solo_a = run_pretraining(ds_alpha, nullptr, cfg, alpha_w, init());
  auto solo_b = run_pretraining(ds_beta, nullptr, cfg, alpha_w, init());

  // rows of domain alpha match the alpha-only run, rows of beta the beta-only run
  for (UserIndex u : a.users) {
    CHECK(std::equal(joint.store.users.row(u).begin(), joint.store.users.row(u).end(),
                     solo_a.store.users.row(u).begin()));
  }
  for (ItemIndex i : a.items) {
    CHECK(std::equal(joint.store.items.row(i).begin(), joint.store.items.row(i).end(),
                     solo_a.store.items.row(i).begin()));
  }
  for (UserIndex u : b.users) {
    CHECK(std::equal(joint.store.users.row(u).begin(), joint.store.users.row(u).end(),
                     solo_b.store.users.row(u).begin()));
  }
  for (ItemIndex i : b.items) {
    CHECK(std::equal(joint.store.items.row(i).begin(), joint.store.items.row(i).end(),
                     solo_b.store.items.row(i).begin()));
  }
}

TEST_CASE("epoch log carries loss and adaptive edge counts", "[pretrain]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = init_embeddings<float>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, 6, 21);
  PretrainConfig cfg;
  cfg.mode = GraphMode::HAGO;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 21;
  std::vector<float> alpha = {0.f, 0.f, 1.f};
  std::ostringstream log;
  auto result = run_pretraining(ds, &coords, cfg, alpha, std::move(store), &log);
  REQUIRE(result.log.size() == 2);
  CHECK(result.log[0].steps > 0);
  CHECK(std::isfinite(result.log[0].loss));
  CHECK(result.log[0].loss > 0.0);
  CHECK(result.log[1].adaptive_edges > 0);
  CHECK(log.str().find("\"epoch\":0") != std::string::npos);
  CHECK(log.str().find("\"adaptive_edges\"") != std::string::npos);
  CHECK(log.str().find("\"wall_ms\"") != std::string::npos);

  // identical setup reproduces identical tables
  auto store2 = init_embeddings<float>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, 6, 21);
  auto again = run_pretraining(ds, &coords, cfg, alpha, std::move(store2));
  CHECK(again.store.users.data() == result.store.users.data());
  CHECK(again.store.coords.data() == result.store.coords.data());
}

TEST_CASE("pre-training in coordinator mode requires coordinators", "[pretrain]") {
  auto ds = two_domain_fixture();
  PretrainConfig cfg;
  cfg.mode = GraphMode::HeterGO;
  std::vector<float> alpha = {0.f, 0.f, 1.f};
  auto store = init_embeddings<float>({ds.registry.user_count(), ds.registry.item_count(), 0}, 4, 1);
  CHECK_THROWS_AS(run_pretraining(ds, nullptr, cfg, alpha, std::move(store)), config_error);
}
