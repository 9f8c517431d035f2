#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/rng.hpp"

namespace hago {

struct AdamParams {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-row first/second moments and update counts. Rows are stepped lazily:
// a row's state advances only when a gradient actually lands on it, so
// training on one domain leaves every other domain's rows bit-identical.
template <typename T>
struct AdamState {
  Matrix<T> m;
  Matrix<T> v;
  std::vector<std::uint32_t> step;

  void reset(std::size_t rows, std::size_t cols) {
    m = Matrix<T>(rows, cols);
    v = Matrix<T>(rows, cols);
    step.assign(rows, 0);
  }
};

template <typename T>
void adam_step_row(Matrix<T>& table, AdamState<T>& state, std::uint32_t row,
                   std::span<const T> grad, const AdamParams& p) {
  for (T g : grad) {
    if (!std::isfinite(static_cast<double>(g))) {
      throw numeric_error("adam_step: non-finite gradient");
    }
  }
  std::uint32_t t = ++state.step[row];
  const double bc1 = 1.0 - std::pow(p.beta1, t);
  const double bc2 = 1.0 - std::pow(p.beta2, t);
  std::span<T> x = table.row(row);
  std::span<T> m = state.m.row(row);
  std::span<T> v = state.v.row(row);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    m[j] = static_cast<T>(p.beta1 * m[j] + (1.0 - p.beta1) * grad[j]);
    v[j] = static_cast<T>(p.beta2 * v[j] + (1.0 - p.beta2) * grad[j] * grad[j]);
    double mhat = m[j] / bc1;
    double vhat = v[j] / bc2;
    x[j] = static_cast<T>(x[j] - p.lr * mhat / (std::sqrt(vhat) + p.eps));
  }
}

// Trainable tables for users, items, coordinators, and (during transfer)
// prompts, with optimizer state. Production runs use T = float; tests run a
// double shadow path through the same templates.
template <typename T>
struct EmbeddingStore {
  std::size_t dim = 0;
  Matrix<T> users;
  Matrix<T> items;
  Matrix<T> coords;
  Matrix<T> prompts;  // rows stay exactly zero until the first transfer update
  AdamState<T> users_opt;
  AdamState<T> items_opt;
  AdamState<T> coords_opt;
  AdamState<T> prompts_opt;

  void allocate_prompts(std::size_t rows) {
    prompts = Matrix<T>(rows, dim);
    prompts_opt.reset(rows, dim);
  }
};

struct EmbeddingCounts {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t coords = 0;
};

// Rows drawn from N(0, 0.1^2). Each row uses its own (seed, table, row)
// substream, so a row's initialization depends only on its identity, not on
// how many other rows exist.
template <typename T>
EmbeddingStore<T> init_embeddings(const EmbeddingCounts& counts, std::size_t dim,
                                  std::uint64_t seed) {
  if (dim == 0) throw config_error("embedding dimension must be >= 1");
  EmbeddingStore<T> store;
  store.dim = dim;
  auto fill = [&](Matrix<T>& table, const char* label, std::size_t rows) {
    table = Matrix<T>(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
      Rng rng(substream_seed(seed, label, r));
      std::span<T> row = table.row(r);
      for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<T>(rng.normal(0.0, 0.1));
    }
  };
  fill(store.users, "init:users", counts.users);
  fill(store.items, "init:items", counts.items);
  fill(store.coords, "init:coords", counts.coords);
  store.users_opt.reset(counts.users, dim);
  store.items_opt.reset(counts.items, dim);
  store.coords_opt.reset(counts.coords, dim);
  return store;
}

// Dense per-table gradient accumulators with touched-row tracking. clear()
// rezeroes only rows that were written, so reuse across steps is cheap.
template <typename T>
struct GradTables {
  Matrix<T> users, items, coords, prompts;
  std::vector<std::uint32_t> touched_users, touched_items, touched_coords, touched_prompts;
  std::vector<std::uint8_t> seen_users, seen_items, seen_coords, seen_prompts;

  void match(const EmbeddingStore<T>& store) {
    auto prep = [](Matrix<T>& g, std::vector<std::uint8_t>& seen, const Matrix<T>& t) {
      if (!g.same_shape(t)) {
        g = Matrix<T>(t.rows(), t.cols());
        seen.assign(t.rows(), 0);
      }
    };
    prep(users, seen_users, store.users);
    prep(items, seen_items, store.items);
    prep(coords, seen_coords, store.coords);
    prep(prompts, seen_prompts, store.prompts);
  }

  void clear() {
    auto wipe = [](Matrix<T>& g, std::vector<std::uint32_t>& touched,
                   std::vector<std::uint8_t>& seen) {
      for (std::uint32_t r : touched) {
        std::span<T> row = g.row(r);
        std::fill(row.begin(), row.end(), T(0));
        seen[r] = 0;
      }
      touched.clear();
    };
    wipe(users, touched_users, seen_users);
    wipe(items, touched_items, seen_items);
    wipe(coords, touched_coords, seen_coords);
    wipe(prompts, touched_prompts, seen_prompts);
  }

  std::span<T> touch_users(std::uint32_t r) { return touch(users, touched_users, seen_users, r); }
  std::span<T> touch_items(std::uint32_t r) { return touch(items, touched_items, seen_items, r); }
  std::span<T> touch_coords(std::uint32_t r) {
    return touch(coords, touched_coords, seen_coords, r);
  }
  std::span<T> touch_prompts(std::uint32_t r) {
    return touch(prompts, touched_prompts, seen_prompts, r);
  }

 private:
  std::span<T> touch(Matrix<T>& g, std::vector<std::uint32_t>& touched,
                     std::vector<std::uint8_t>& seen, std::uint32_t r) {
    if (!seen[r]) {
      seen[r] = 1;
      touched.push_back(r);
    }
    return g.row(r);
  }
};

// Applies one lazy Adam update to every touched row. Rows are processed in
// ascending index order for a deterministic update sequence.
template <typename T>
void adam_step(EmbeddingStore<T>& store, GradTables<T>& grads, const AdamParams& params) {
  auto apply = [&](Matrix<T>& table, AdamState<T>& st, Matrix<T>& g,
                   std::vector<std::uint32_t>& touched) {
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t r : touched) {
      adam_step_row(table, st, r, std::span<const T>(g.row(r)), params);
    }
  };
  apply(store.users, store.users_opt, grads.users, grads.touched_users);
  apply(store.items, store.items_opt, grads.items, grads.touched_items);
  apply(store.coords, store.coords_opt, grads.coords, grads.touched_coords);
  apply(store.prompts, store.prompts_opt, grads.prompts, grads.touched_prompts);
}

}  // namespace hago
