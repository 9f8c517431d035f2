#include <catch2/catch_amalgamated.hpp>

#include "hago/evaluate.hpp"
#include "hago/transfer.hpp"
#include "support/fixtures.hpp"

using namespace hago;
using testing_support::two_domain_fixture;

namespace {

struct TransferSetup {
  MultiDomainDataset ds;
  InteractionSplit split;
  EmbeddingStore<float> store;
};

TransferSetup make_setup(std::uint64_t seed) {
  TransferSetup s{two_domain_fixture(), {}, {}};
  s.split = split_interactions(s.ds.target, {0.6, 0.2, 0.2}, seed);
  s.store = init_embeddings<float>(
      {s.ds.registry.user_count(), s.ds.registry.item_count(), 0}, 6, seed);
  return s;
}

}  // namespace

TEST_CASE("prompts initialize to zero and add pointwise", "[transfer]") {
  auto prompts = init_prompts<double>(3, 4, 5);
  CHECK(prompts.rows() == 7);
  for (double v : prompts.data()) CHECK(v == 0.0);

  Matrix<double> pretrained(2, 2);
  pretrained(0, 0) = 1.0;
  pretrained(0, 1) = 2.0;
  Matrix<double> p(2, 2);
  p(0, 0) = 0.5;
  p(0, 1) = -2.0;
  auto combined = prompted_features(pretrained, p);
  CHECK(combined(0, 0) == 1.5);
  CHECK(combined(0, 1) == 0.0);

  // ||X# - E*||_F == ||P||_F
  double diff = 0, pn = 0;
  for (std::size_t i = 0; i < p.data().size(); ++i) {
    double d = combined.data()[i] - pretrained.data()[i];
    diff += d * d;
    pn += p.data()[i] * p.data()[i];
  }
  CHECK(diff == Catch::Approx(pn));

  Matrix<double> wrong(3, 2);
  CHECK_THROWS_AS(prompted_features(pretrained, wrong), shape_error);
}

TEST_CASE("negative sampling avoids training items", "[transfer]") {
  Rng rng(5);
  std::vector<ItemIndex> universe = {10, 11};
  std::vector<ItemIndex> train = {10};
  for (int t = 0; t < 20; ++t) CHECK(sample_negative(train, universe, rng) == 11);

  std::vector<ItemIndex> all = {10, 11};
  CHECK_THROWS_AS(sample_negative(all, universe, rng), input_error);
}

TEST_CASE("negative sampling is uniform over candidates", "[transfer]") {
  Rng rng(6);
  std::vector<ItemIndex> universe;
  for (ItemIndex i = 0; i < 12; ++i) universe.push_back(i);
  std::vector<ItemIndex> train = {3, 7};  // 10 candidates remain
  std::vector<std::size_t> counts(12, 0);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) ++counts[sample_negative(train, universe, rng)];
  CHECK(counts[3] == 0);
  CHECK(counts[7] == 0);
  for (ItemIndex i = 0; i < 12; ++i) {
    if (i == 3 || i == 7) continue;
    // 1000 +- 3 sigma (~95)
    CHECK(counts[i] >= 1000 - 95);
    CHECK(counts[i] <= 1000 + 95);
  }
}

TEST_CASE("zero-epoch transfer is the zero-prompt identity", "[transfer]") {
  auto s = make_setup(9);
  TransferConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  std::vector<float> alpha = {0.f, 0.f, 1.f};
  auto snapshot = s.store.users.data();
  auto result = run_transfer(s.ds, s.split, std::move(s.store), cfg, alpha);

  // prompts untouched, pretrained tables untouched
  for (float v : result.store.prompts.data()) CHECK(v == 0.0f);
  CHECK(result.store.users.data() == snapshot);

  // outputs equal propagation of the raw pre-trained rows: rankings identical
  auto& model = result.model;
  for (std::size_t r = 0; r < model.pretrained.rows(); ++r) {
    for (std::size_t c = 0; c < model.pretrained.cols(); ++c) {
      CHECK(model.prompts(r, c) == 0.0f);
    }
  }
}

TEST_CASE("frozen tables stay byte-identical through training", "[transfer]") {
  auto s = make_setup(10);
  TransferConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 10;
  cfg.freeze_pretrained = true;
  std::vector<float> alpha = {0.f, 0.f, 1.f};
  auto users_before = s.store.users.data();
  auto items_before = s.store.items.data();
  auto result = run_transfer(s.ds, s.split, std::move(s.store), cfg, alpha);
  CHECK(result.store.users.data() == users_before);
  CHECK(result.store.items.data() == items_before);

  // prompts moved: at least one row nonzero after updates
  double pn = 0;
  for (float v : result.store.prompts.data()) pn += static_cast<double>(v) * v;
  CHECK(pn > 0.0);
}

TEST_CASE("one step on a single triple decreases its loss", "[transfer]") {
  auto ds = two_domain_fixture();
  auto store = init_embeddings<double>(
      {ds.registry.user_count(), ds.registry.item_count(), 0}, 6, 12);
  store.allocate_prompts(ds.target.user_count() + ds.target.item_count());

  auto split = split_interactions(ds.target, {0.6, 0.2, 0.2}, 12);
  auto binding = detail::bind_target_train<double>(ds.target, split, true);
  std::vector<double> alpha = {0.5, 0.25, 0.25};
  TrainablePolicy policy;
  policy.users = policy.items = policy.coords = false;
  policy.prompts = true;

  std::uint32_t u = ds.target.local_user(split.users[0]);
  REQUIRE_FALSE(split.train[0].empty());
  std::uint32_t pos = ds.target.local_item(split.train[0][0]);
  // pick any non-train item as the fixed negative
  ItemIndex neg_item = 0;
  for (ItemIndex i : ds.target.items) {
    if (!std::binary_search(split.train[0].begin(), split.train[0].end(), i)) {
      neg_item = i;
      break;
    }
  }
  std::vector<std::array<std::uint32_t, 3>> triples = {{u, pos, ds.target.local_item(neg_item)}};

  GradTables<double> grads;
  grads.match(store);
  double before = transfer_batch_eval(binding, store, triples, alpha, 0.0, policy, &grads);
  AdamParams adam;
  adam.lr = 1e-3;
  adam_step(store, grads, adam);
  double after = transfer_batch_eval(binding, store, triples, alpha, 0.0, policy,
                                     static_cast<GradTables<double>*>(nullptr));
  CHECK(after < before);
}

TEST_CASE("training graph holds only training-split edges", "[transfer]") {
  auto ds = two_domain_fixture();
  auto split = split_interactions(ds.target, {0.6, 0.2, 0.2}, 14);
  auto binding = detail::bind_target_train<double>(ds.target, split, true);

  std::set<std::pair<std::uint32_t, std::uint32_t>> train_pairs;
  for (std::size_t s = 0; s < split.users.size(); ++s) {
    for (ItemIndex i : split.train[s]) {
      train_pairs.emplace(ds.target.local_user(split.users[s]), ds.target.local_item(i));
    }
  }
  std::size_t seen = 0;
  for (std::uint32_t a = 0; a < binding.graph.user_count; ++a) {
    for (std::uint32_t k = binding.graph.offsets[a]; k < binding.graph.offsets[a + 1]; ++k) {
      CHECK(train_pairs.count({a, binding.graph.targets[k]}) == 1);
      ++seen;
    }
  }
  CHECK(seen == train_pairs.size());

  // no validation or test edge may appear
  for (std::size_t s = 0; s < split.users.size(); ++s) {
    for (const auto* part : {&split.valid[s], &split.test[s]}) {
      for (ItemIndex i : *part) {
        CHECK(train_pairs.count(
                  {ds.target.local_user(split.users[s]), ds.target.local_item(i)}) == 0);
      }
    }
  }
}

TEST_CASE("config validation", "[transfer]") {
  TransferConfig cfg;
  cfg.l2 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = {};
  cfg.use_prompts = false;  // frozen + promptless has nothing to train
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg.freeze_pretrained = false;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unified propagation mode trains prompts through coordinators", "[transfer]") {
  auto ds = two_domain_fixture();
  auto coords = create_coordinators(ds, 1);
  auto store = init_embeddings<float>(
      {ds.registry.user_count(), ds.registry.item_count(), coords.total()}, 6, 15);
  auto split = split_interactions(ds.target, {0.6, 0.2, 0.2}, 15);

  TransferConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 15;
  cfg.propagate_unified = true;
  std::vector<float> alpha = {0.f, 0.f, 1.f};

  CHECK_THROWS_AS(run_transfer(ds, split, store, cfg, alpha, nullptr, GraphMode::None),
                  config_error);

  auto result = run_transfer(ds, split, std::move(store), cfg, alpha, &coords, GraphMode::HAGO);
  double pn = 0;
  for (float v : result.store.prompts.data()) pn += static_cast<double>(v) * v;
  CHECK(pn > 0.0);
  CHECK(result.model.outputs.rows() == ds.target.user_count() + ds.target.item_count());
}
