#include <catch2/catch_amalgamated.hpp>

#include "hago/losses.hpp"
#include "support/fixtures.hpp"

using namespace hago;

TEST_CASE("bpr loss closed forms", "[losses]") {
  std::vector<double> pos = {1.0}, neg = {1.0};
  CHECK(bpr_loss<double>(pos, neg, 0.0, 0.0) == Catch::Approx(std::log(2.0)));

  pos = {41.0};
  neg = {1.0};
  CHECK(bpr_loss<double>(pos, neg, 0.0, 0.0) < 1e-12);

  pos = {1.0};
  neg = {0.0};
  CHECK(bpr_loss<double>(pos, neg, 0.0, 0.0) == Catch::Approx(0.31326168751822286));

  // regularization adds lambda * ||Theta||^2
  CHECK(bpr_loss<double>(pos, neg, 4.0, 0.5) ==
        Catch::Approx(0.31326168751822286 + 2.0));

  std::vector<double> mismatched = {1.0, 2.0};
  CHECK_THROWS_AS(bpr_loss<double>(pos, mismatched, 0.0, 0.0), shape_error);
}

TEST_CASE("bpr pairwise derivative at zero gap is -1/2", "[losses]") {
  CHECK(bpr_pairwise_grad(3.0, 3.0) == Catch::Approx(-0.5));
}

TEST_CASE("infonce closed forms", "[losses]") {
  // two identical views with orthogonal unit rows at tau=1:
  // per anchor -log(e / (e + 2)) = log(1 + 2/e)
  Matrix<double> z(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = 1.0;
  double expect = std::log(1.0 + 2.0 / std::exp(1.0));
  CHECK(infonce_loss(z, z, 1.0) == Catch::Approx(expect).epsilon(1e-9));

  // large temperature flattens the logits: loss -> log(2N - 1)
  CHECK(infonce_loss(z, z, 1e9) == Catch::Approx(std::log(3.0)).epsilon(1e-6));

  // perfect positives against fully opposed negatives vanish at low tau
  Matrix<double> z1(2, 2), z2(2, 2);
  z1(0, 0) = 1.0;
  z1(1, 0) = -1.0;
  z2 = z1;  // positives at cosine 1, all negatives at cosine -1
  CHECK(infonce_loss(z1, z2, 0.1) < 1e-8);
}

TEST_CASE("infonce input validation", "[losses]") {
  Matrix<double> z(2, 2);
  z(0, 0) = 1.0;  // second row stays zero
  CHECK_THROWS_AS(infonce_loss(z, z, 1.0), numeric_error);

  Matrix<double> one(1, 2);
  one(0, 0) = 1.0;
  CHECK_THROWS_AS(infonce_loss(one, one, 1.0), config_error);

  Matrix<double> odd(2, 3);
  CHECK_THROWS_AS(infonce_loss(z, odd, 1.0), shape_error);
}

TEST_CASE("infonce is permutation equivariant", "[losses]") {
  Rng rng(404);
  auto z1 = testing_support::random_matrix<double>(rng, 8, 5);
  auto z2 = testing_support::random_matrix<double>(rng, 8, 5);
  double base = infonce_loss(z1, z2, 0.5);

  std::vector<std::size_t> perm = {3, 0, 7, 5, 1, 6, 2, 4};
  Matrix<double> p1(8, 5), p2(8, 5);
  for (std::size_t r = 0; r < 8; ++r) {
    std::copy(z1.row(perm[r]).begin(), z1.row(perm[r]).end(), p1.row(r).begin());
    std::copy(z2.row(perm[r]).begin(), z2.row(perm[r]).end(), p2.row(r).begin());
  }
  CHECK(infonce_loss(p1, p2, 0.5) == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("infonce ignores positive row rescaling", "[losses]") {
  Rng rng(405);
  auto z1 = testing_support::random_matrix<double>(rng, 6, 4);
  auto z2 = testing_support::random_matrix<double>(rng, 6, 4);
  double base = infonce_loss(z1, z2, 0.5);
  for (auto& v : z1.row(2)) v *= 13.7;
  for (auto& v : z2.row(4)) v *= 0.03;
  CHECK(infonce_loss(z1, z2, 0.5) == Catch::Approx(base).margin(1e-7));
}

TEST_CASE("infonce gradients match finite differences", "[losses]") {
  Rng rng(406);
  auto z1 = testing_support::random_matrix<double>(rng, 5, 3);
  auto z2 = testing_support::random_matrix<double>(rng, 5, 3);
  auto res = infonce_loss_grad(z1, z2, 0.7);
  CHECK(res.loss == Catch::Approx(infonce_loss(z1, z2, 0.7)));

  const double h = 1e-6;
  auto check_view = [&](Matrix<double>& z, const Matrix<double>& g) {
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        double keep = z(r, c);
        z(r, c) = keep + h;
        double lp = infonce_loss(z1, z2, 0.7);
        z(r, c) = keep - h;
        double lm = infonce_loss(z1, z2, 0.7);
        z(r, c) = keep;
        CHECK(g(r, c) == Catch::Approx((lp - lm) / (2 * h)).margin(1e-6));
      }
    }
  };
  check_view(z1, res.grad_z1);
  check_view(z2, res.grad_z2);
}

TEST_CASE("softplus stays stable at extremes", "[losses]") {
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)));
  CHECK(sigmoid(0.0) == Catch::Approx(0.5));
  CHECK(sigmoid(40.0) == Catch::Approx(1.0));
}
