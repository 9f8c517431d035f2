#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/rng.hpp"

namespace hago {

struct NeighborHit {
  std::uint32_t item_row = 0;  // row in the item table
  double similarity = 0.0;
};

// Top-k cross-domain neighbors of one item row by cosine similarity over a
// candidate row set, ties broken by ascending row. k is truncated to the
// candidate count. The query row is skipped if it appears among candidates.
template <typename T>
std::vector<NeighborHit> cross_domain_neighbors(const Matrix<T>& item_table,
                                                std::uint32_t query_row,
                                                const std::vector<std::uint32_t>& candidate_rows,
                                                std::size_t k) {
  std::span<const T> q = item_table.row(query_row);
  double qn = static_cast<double>(norm(q));
  if (!(qn > 0.0)) throw numeric_error("cross_domain_neighbors: zero-norm query embedding");

  std::vector<NeighborHit> hits;
  hits.reserve(candidate_rows.size());
  for (std::uint32_t row : candidate_rows) {
    if (row == query_row) continue;
    std::span<const T> c = item_table.row(row);
    double cn = static_cast<double>(norm(c));
    if (!(cn > 0.0)) continue;
    double sim = static_cast<double>(dot(q, c)) / (qn * cn);
    hits.push_back({row, sim});
  }
  std::sort(hits.begin(), hits.end(), [](const NeighborHit& a, const NeighborHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.item_row < b.item_row;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Good enough for the
// d x d covariance matrices used by the 2-D projection.
inline void jacobi_eigen(Matrix<double>& a, std::vector<double>& values,
                         Matrix<double>& vectors) {
  const std::size_t n = a.rows();
  vectors = Matrix<double>(n, n);
  for (std::size_t i = 0; i < n; ++i) vectors(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-30) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
}

}  // namespace detail

struct AngleDistribution {
  std::string domain;
  std::vector<std::size_t> histogram;  // counts per bin over [-pi, pi)
  std::vector<double> angles;
  double resultant_length = 0.0;  // R-bar: 1 = fully concentrated, 0 = uniform
  std::size_t sampled = 0;
};

struct AngleAnalysisInput {
  std::string domain;
  std::vector<std::uint32_t> item_rows;
};

// Samples up to `sample_size` items per domain, projects the pooled sample to
// 2-D along the top two eigenvectors of its (uncentered) second-moment
// matrix, normalizes each point onto the unit circle, and histograms the
// angles per domain. The moment matrix is deliberately not mean-centered:
// the analysis concerns embedding directions, and centering would split a
// single shared direction into antipodal points. The dispersion statistic is
// the resultant vector length of each domain's angle set.
template <typename T>
std::vector<AngleDistribution> angle_distribution(const Matrix<T>& item_table,
                                                  const std::vector<AngleAnalysisInput>& domains,
                                                  std::size_t sample_size, std::size_t bins,
                                                  std::uint64_t seed) {
  if (bins == 0) throw config_error("angle_distribution: bins must be >= 1");
  const std::size_t dim = item_table.cols();

  std::vector<std::vector<std::uint32_t>> samples;
  std::size_t total = 0;
  for (const auto& dom : domains) {
    if (dom.item_rows.size() < 2) {
      throw config_error("angle_distribution: domain '" + dom.domain + "' has fewer than 2 items");
    }
    std::vector<std::uint32_t> rows = dom.item_rows;
    Rng rng(seed, "analysis:angles:" + dom.domain);
    rng.shuffle(rows.begin(), rows.end());
    if (rows.size() > sample_size) rows.resize(sample_size);
    std::sort(rows.begin(), rows.end());
    total += rows.size();
    samples.push_back(std::move(rows));
  }

  // pooled second moment
  Matrix<double> cov(dim, dim);
  for (const auto& rows : samples) {
    for (std::uint32_t r : rows) {
      std::span<const T> e = item_table.row(r);
      for (std::size_t a = 0; a < dim; ++a) {
        double da = static_cast<double>(e[a]);
        for (std::size_t b = a; b < dim; ++b) {
          cov(a, b) += da * static_cast<double>(e[b]);
        }
      }
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      cov(a, b) /= static_cast<double>(total);
      cov(b, a) = cov(a, b);
    }
  }

  std::vector<double> eigvals;
  Matrix<double> eigvecs;
  detail::jacobi_eigen(cov, eigvals, eigvecs);
  std::size_t top1 = 0, top2 = 1;
  if (dim < 2) throw numeric_error("angle_distribution: embeddings have rank < 2");
  if (eigvals[top2] > eigvals[top1]) std::swap(top1, top2);
  for (std::size_t j = 2; j < dim; ++j) {
    if (eigvals[j] > eigvals[top1]) {
      top2 = top1;
      top1 = j;
    } else if (eigvals[j] > eigvals[top2]) {
      top2 = j;
    }
  }
  if (!(eigvals[top2] > 1e-18)) {
    throw numeric_error("angle_distribution: pooled embeddings are rank-deficient (< 2)");
  }

  const double pi = 3.14159265358979323846;
  std::vector<AngleDistribution> out;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    AngleDistribution dist;
    dist.domain = domains[k].domain;
    dist.histogram.assign(bins, 0);
    dist.sampled = samples[k].size();
    double sum_cos = 0.0, sum_sin = 0.0;
    for (std::uint32_t r : samples[k]) {
      std::span<const T> e = item_table.row(r);
      double px = 0.0, py = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        double v = static_cast<double>(e[j]);
        px += v * eigvecs(j, top1);
        py += v * eigvecs(j, top2);
      }
      double len = std::hypot(px, py);
      if (!(len > 0.0)) continue;  // a point at the projection origin has no angle
      double angle = std::atan2(py / len, px / len);
      if (angle >= pi) angle -= 2 * pi;
      dist.angles.push_back(angle);
      sum_cos += std::cos(angle);
      sum_sin += std::sin(angle);
      auto bin = static_cast<std::size_t>((angle + pi) / (2 * pi) * static_cast<double>(bins));
      if (bin >= bins) bin = bins - 1;
      ++dist.histogram[bin];
    }
    if (!dist.angles.empty()) {
      dist.resultant_length =
          std::hypot(sum_cos, sum_sin) / static_cast<double>(dist.angles.size());
    }
    out.push_back(std::move(dist));
  }
  return out;
}

}  // namespace hago
