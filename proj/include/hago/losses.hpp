#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/parallel.hpp"

namespace hago {

template <typename T>
T softplus(T x) {
  if (x > T(30)) return x;
  if (x < T(-30)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

// Pairwise ranking loss: -(1/|B|) sum ln sigma(pos - neg) + lambda * ||Theta||^2.
// ln sigma(x) is evaluated as -softplus(-x).
template <typename T>
T bpr_loss(std::span<const T> pos_scores, std::span<const T> neg_scores, T theta_sq_norm,
           T lambda) {
  if (pos_scores.size() != neg_scores.size()) throw shape_error("bpr_loss: score length mismatch");
  if (pos_scores.empty()) throw config_error("bpr_loss: empty batch");
  T acc = T(0);
  for (std::size_t i = 0; i < pos_scores.size(); ++i) {
    acc += softplus(neg_scores[i] - pos_scores[i]);
  }
  return acc / static_cast<T>(pos_scores.size()) + lambda * theta_sq_norm;
}

// d(-ln sigma(pos-neg))/d(pos) per triple, before the 1/|B| batch average.
template <typename T>
T bpr_pairwise_grad(T pos, T neg) {
  return sigmoid(pos - neg) - T(1);
}

template <typename T>
struct InfoNceResult {
  T loss = T(0);
  Matrix<T> grad_z1;
  Matrix<T> grad_z2;
};

namespace detail {

template <typename T>
void normalized_rows(const Matrix<T>& z, Matrix<T>& zhat, std::vector<T>& norms) {
  norms.resize(z.rows());
  zhat = Matrix<T>(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    T n = norm(std::span<const T>(z.row(i)));
    if (!(n > T(1e-12))) throw numeric_error("infonce_loss: zero-norm embedding row");
    norms[i] = n;
    std::span<const T> src = z.row(i);
    std::span<T> dst = zhat.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / n;
  }
}

template <typename T>
Matrix<T> cosine_matrix(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.rows());
  parallel_for(a.rows(), [&](std::size_t i) {
    std::span<const T> ra = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      c(i, j) = dot(ra, std::span<const T>(b.row(j)));
    }
  });
  return c;
}

// Per-anchor term for anchor i of the "self" view against the "other" view:
//   l = -log exp(cos_inter[i][i]/tau) / (exp(cos_inter[i][i]/tau)
//        + sum_{k!=i} exp(cos_inter[i][k]/tau) + sum_{k!=i} exp(cos_self[i][k]/tau))
// Softmax gradients are written into d_inter / d_self scaled by `scale`.
template <typename T>
T anchor_term(std::size_t i, const Matrix<T>& cos_inter, const Matrix<T>& cos_self, T tau,
              T scale, Matrix<T>* d_inter, Matrix<T>* d_self) {
  const std::size_t n = cos_inter.rows();
  T max_logit = cos_inter(i, i) / tau;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i) continue;
    max_logit = std::max(max_logit, cos_inter(i, k) / tau);
    max_logit = std::max(max_logit, cos_self(i, k) / tau);
  }
  T denom = std::exp(cos_inter(i, i) / tau - max_logit);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i) continue;
    denom += std::exp(cos_inter(i, k) / tau - max_logit);
    denom += std::exp(cos_self(i, k) / tau - max_logit);
  }
  T lse = max_logit + std::log(denom);
  T loss = lse - cos_inter(i, i) / tau;
  if (d_inter != nullptr) {
    T inv = T(1) / denom;
    (*d_inter)(i, i) +=
        scale * (std::exp(cos_inter(i, i) / tau - max_logit) * inv - T(1)) / tau;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      (*d_inter)(i, k) += scale * std::exp(cos_inter(i, k) / tau - max_logit) * inv / tau;
      (*d_self)(i, k) += scale * std::exp(cos_self(i, k) / tau - max_logit) * inv / tau;
    }
  }
  return loss;
}

}  // namespace detail

// GRACE-style InfoNCE over two views of the same node batch: for each anchor,
// the matching row of the other view is the positive; the other in-batch rows
// of both views are negatives. Symmetrized and averaged over 2N anchors.
template <typename T>
T infonce_loss(const Matrix<T>& z1, const Matrix<T>& z2, T tau) {
  if (!z1.same_shape(z2)) throw shape_error("infonce_loss: view shape mismatch");
  if (z1.rows() < 2) throw config_error("infonce_loss: batch must have at least 2 rows");
  if (!(tau > T(0))) throw config_error("infonce_loss: temperature must be positive");

  Matrix<T> h1, h2;
  std::vector<T> n1, n2;
  detail::normalized_rows(z1, h1, n1);
  detail::normalized_rows(z2, h2, n2);
  Matrix<T> c12 = detail::cosine_matrix(h1, h2);
  Matrix<T> c11 = detail::cosine_matrix(h1, h1);
  Matrix<T> c22 = detail::cosine_matrix(h2, h2);
  Matrix<T> c21 = detail::cosine_matrix(h2, h1);

  const std::size_t n = z1.rows();
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    total += detail::anchor_term<T>(i, c12, c11, tau, T(0), nullptr, nullptr);
    total += detail::anchor_term<T>(i, c21, c22, tau, T(0), nullptr, nullptr);
  }
  return total / static_cast<T>(2 * n);
}

// Loss plus gradients with respect to both raw (unnormalized) view batches.
template <typename T>
InfoNceResult<T> infonce_loss_grad(const Matrix<T>& z1, const Matrix<T>& z2, T tau) {
  if (!z1.same_shape(z2)) throw shape_error("infonce_loss: view shape mismatch");
  if (z1.rows() < 2) throw config_error("infonce_loss: batch must have at least 2 rows");
  if (!(tau > T(0))) throw config_error("infonce_loss: temperature must be positive");

  Matrix<T> h1, h2;
  std::vector<T> n1, n2;
  detail::normalized_rows(z1, h1, n1);
  detail::normalized_rows(z2, h2, n2);
  Matrix<T> c12 = detail::cosine_matrix(h1, h2);
  Matrix<T> c11 = detail::cosine_matrix(h1, h1);
  Matrix<T> c22 = detail::cosine_matrix(h2, h2);
  Matrix<T> c21 = detail::cosine_matrix(h2, h1);

  const std::size_t n = z1.rows();
  const std::size_t d = z1.cols();
  const T scale = T(1) / static_cast<T>(2 * n);

  Matrix<T> d12(n, n), d11(n, n), d22(n, n), d21(n, n);
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    total += detail::anchor_term<T>(i, c12, c11, tau, scale, &d12, &d11);
    total += detail::anchor_term<T>(i, c21, c22, tau, scale, &d21, &d22);
  }

  // dL/dh1_i = sum_j d12[i][j] h2_j + d21[j][i] h2_j + (d11[i][j] + d11[j][i]) h1_j
  Matrix<T> gh1(n, d), gh2(n, d);
  parallel_for(n, [&](std::size_t i) {
    std::span<T> g1 = gh1.row(i);
    std::span<T> g2 = gh2.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      T a1 = d12(i, j) + d21(j, i);
      if (a1 != T(0)) axpy(a1, std::span<const T>(h2.row(j)), g1);
      T b1 = d11(i, j) + d11(j, i);
      if (b1 != T(0)) axpy(b1, std::span<const T>(h1.row(j)), g1);
      T a2 = d21(i, j) + d12(j, i);
      if (a2 != T(0)) axpy(a2, std::span<const T>(h1.row(j)), g2);
      T b2 = d22(i, j) + d22(j, i);
      if (b2 != T(0)) axpy(b2, std::span<const T>(h2.row(j)), g2);
    }
  });

  InfoNceResult<T> res;
  res.loss = total * scale;
  res.grad_z1 = Matrix<T>(n, d);
  res.grad_z2 = Matrix<T>(n, d);
  // through the row normalization: dL/dz = (g - (g.h) h) / |z|
  for (std::size_t i = 0; i < n; ++i) {
    auto back = [&](const Matrix<T>& h, const std::vector<T>& norms, const Matrix<T>& gh,
                    Matrix<T>& gz) {
      std::span<const T> hr = h.row(i);
      std::span<const T> gr = gh.row(i);
      T proj = dot(gr, hr);
      std::span<T> out = gz.row(i);
      for (std::size_t j = 0; j < d; ++j) out[j] = (gr[j] - proj * hr[j]) / norms[i];
    };
    back(h1, n1, gh1, res.grad_z1);
    back(h2, n2, gh2, res.grad_z2);
  }
  return res;
}

}  // namespace hago
