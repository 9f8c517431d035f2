#include <catch2/catch_amalgamated.hpp>

#include "hago/analysis.hpp"
#include "support/fixtures.hpp"

using namespace hago;

TEST_CASE("cross-domain neighbors rank by cosine", "[analysis]") {
  // 5 candidate items plus a query whose embedding equals candidate 2
  Matrix<double> table(6, 3);
  Rng rng(61);
  for (auto& v : table.data()) v = rng.normal(0.0, 1.0);
  std::copy(table.row(2).begin(), table.row(2).end(), table.row(5).begin());

  std::vector<std::uint32_t> candidates = {0, 1, 2, 3, 4};
  auto hits = cross_domain_neighbors(table, 5, candidates, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].item_row == 2);
  CHECK(hits[0].similarity == Catch::Approx(1.0));

  // k beyond the catalog truncates to the full ordering
  auto all = cross_domain_neighbors(table, 5, candidates, 99);
  CHECK(all.size() == 5);
  for (std::size_t i = 1; i < all.size(); ++i) {
    CHECK(all[i - 1].similarity >= all[i].similarity);
  }

  // the query row itself is excluded when it appears among candidates
  std::vector<std::uint32_t> with_self = {0, 1, 2, 3, 4, 5};
  auto no_self = cross_domain_neighbors(table, 5, with_self, 99);
  for (const auto& h : no_self) CHECK(h.item_row != 5);
}

TEST_CASE("neighbors match an exhaustive scan", "[analysis]") {
  Rng rng(62);
  Matrix<double> table(21, 4);
  for (auto& v : table.data()) v = rng.normal(0.0, 1.0);
  std::vector<std::uint32_t> candidates;
  for (std::uint32_t i = 1; i <= 20; ++i) candidates.push_back(i);

  auto hits = cross_domain_neighbors(table, 0, candidates, 20);
  // oracle: compute every cosine, sort
  std::vector<std::pair<double, std::uint32_t>> oracle;
  for (std::uint32_t c : candidates) {
    double sim = dot(std::span<const double>(table.row(0)), std::span<const double>(table.row(c))) /
                 (norm(std::span<const double>(table.row(0))) *
                  norm(std::span<const double>(table.row(c))));
    oracle.emplace_back(sim, c);
  }
  std::sort(oracle.begin(), oracle.end(), [](auto& a, auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  REQUIRE(hits.size() == oracle.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].item_row == oracle[i].second);
    CHECK(hits[i].similarity == Catch::Approx(oracle[i].first));
  }
}

TEST_CASE("neighbor similarities ignore positive query rescaling", "[analysis]") {
  Rng rng(63);
  Matrix<double> table(10, 4);
  for (auto& v : table.data()) v = rng.normal(0.0, 1.0);
  std::vector<std::uint32_t> candidates = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto before = cross_domain_neighbors(table, 0, candidates, 5);
  for (auto& v : table.row(0)) v *= 37.5;
  auto after = cross_domain_neighbors(table, 0, candidates, 5);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].item_row == after[i].item_row);
    CHECK(before[i].similarity == Catch::Approx(after[i].similarity).margin(1e-12));
  }
}

TEST_CASE("angle distribution dispersion extremes", "[analysis]") {
  // all embeddings along one direction: fully concentrated, R-bar = 1
  {
    Matrix<double> table(40, 6);
    Rng rng(64);
    std::vector<double> direction(6);
    for (auto& v : direction) v = rng.normal(0.0, 1.0);
    for (std::size_t r = 0; r < 40; ++r) {
      double scale = 0.5 + rng.uniform();
      // slight second component so the covariance has rank 2
      for (std::size_t c = 0; c < 6; ++c) table(r, c) = scale * direction[c];
      table(r, 0) += 1e-3 * rng.normal(0.0, 1.0);
    }
    std::vector<AngleAnalysisInput> domains(1);
    domains[0].domain = "d";
    for (std::uint32_t r = 0; r < 40; ++r) domains[0].item_rows.push_back(r);
    auto dists = angle_distribution(table, domains, 2000, 16, 7);
    REQUIRE(dists.size() == 1);
    CHECK(dists[0].resultant_length > 0.99);
    CHECK(dists[0].sampled == 40);
  }

  // angles on a symmetric grid cancel: R-bar ~ 0
  {
    const std::size_t n = 64;
    Matrix<double> table(n, 2);
    for (std::size_t r = 0; r < n; ++r) {
      // half-step offset keeps grid points off the bin boundaries
      double angle = 2.0 * 3.14159265358979323846 * (static_cast<double>(r) + 0.5) / n;
      table(r, 0) = std::cos(angle);
      table(r, 1) = std::sin(angle);
    }
    std::vector<AngleAnalysisInput> domains(1);
    domains[0].domain = "grid";
    for (std::uint32_t r = 0; r < n; ++r) domains[0].item_rows.push_back(r);
    auto dists = angle_distribution(table, domains, 2000, 8, 7);
    CHECK(dists[0].resultant_length < 1e-9);
    // every bin receives the same count
    for (std::size_t b = 0; b < dists[0].histogram.size(); ++b) {
      CHECK(dists[0].histogram[b] == n / 8);
    }
  }
}

TEST_CASE("angle distribution caps samples and validates inputs", "[analysis]") {
  Rng rng(65);
  Matrix<double> table(3000, 4);
  for (auto& v : table.data()) v = rng.normal(0.0, 1.0);
  std::vector<AngleAnalysisInput> domains(1);
  domains[0].domain = "big";
  for (std::uint32_t r = 0; r < 3000; ++r) domains[0].item_rows.push_back(r);
  auto dists = angle_distribution(table, domains, 2000, 64, 7);
  CHECK(dists[0].sampled == 2000);
  CHECK(dists[0].histogram.size() == 64);
  std::size_t total = 0;
  for (auto c : dists[0].histogram) total += c;
  CHECK(total == 2000);

  // rank-deficient embeddings cannot be projected to 2-D
  Matrix<double> flat(10, 3);
  for (std::size_t r = 0; r < 10; ++r) flat(r, 0) = static_cast<double>(r);
  std::vector<AngleAnalysisInput> bad(1);
  bad[0].domain = "flat";
  for (std::uint32_t r = 0; r < 10; ++r) bad[0].item_rows.push_back(r);
  CHECK_THROWS_AS(angle_distribution(flat, bad, 100, 8, 7), numeric_error);

  std::vector<AngleAnalysisInput> tiny(1);
  tiny[0].domain = "tiny";
  tiny[0].item_rows = {0};
  CHECK_THROWS_AS(angle_distribution(table, tiny, 100, 8, 7), config_error);
}
