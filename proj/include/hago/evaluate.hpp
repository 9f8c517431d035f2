#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hago/dataset.hpp"
#include "hago/errors.hpp"
#include "hago/parallel.hpp"
#include "hago/transfer.hpp"

namespace hago {

// Full-catalog ranking for one user: every target item whose flag in
// `excluded` is clear, sorted by score descending with ascending-index
// tie-breaking. Returns item slots.
template <typename T>
std::vector<std::uint32_t> rank_items(const TransferModel<T>& model, std::size_t user_slot,
                                      const std::vector<std::uint8_t>& excluded) {
  std::vector<std::pair<T, std::uint32_t>> scored;
  scored.reserve(model.items.size());
  std::span<const T> u = model.user_repr(user_slot);
  for (std::uint32_t s = 0; s < model.items.size(); ++s) {
    if (s < excluded.size() && excluded[s]) continue;
    scored.emplace_back(score(u, model.item_repr(s)), s);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::uint32_t> out;
  out.reserve(scored.size());
  for (const auto& [_, s] : scored) out.push_back(s);
  return out;
}

struct MetricRow {
  double recall = 0.0;
  double hr = 0.0;
  double ndcg = 0.0;
  double rr = 0.0;  // reciprocal rank over the full ranking, no cutoff
};

// Top-K metrics with binary relevance. `relevant` must be sorted and
// nonempty; `ranked` is the full candidate ranking.
inline MetricRow compute_metrics(const std::vector<std::uint32_t>& ranked,
                                 const std::vector<std::uint32_t>& relevant, std::size_t k) {
  if (relevant.empty()) throw invariant_error("compute_metrics: empty relevant set");
  MetricRow row;
  std::size_t hits = 0;
  double dcg = 0.0;
  std::size_t first_hit = ranked.size();
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    bool hit = std::binary_search(relevant.begin(), relevant.end(), ranked[pos]);
    if (!hit) continue;
    if (first_hit == ranked.size()) first_hit = pos;
    if (pos < k) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    }
  }
  double idcg = 0.0;
  std::size_t ideal = std::min(relevant.size(), k);
  for (std::size_t pos = 0; pos < ideal; ++pos) {
    idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  }
  row.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  row.hr = hits > 0 ? 1.0 : 0.0;
  row.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
  row.rr = first_hit < ranked.size() ? 1.0 / static_cast<double>(first_hit + 1) : 0.0;
  return row;
}

enum class EvalPhase { Valid, Test };

// Per-user and aggregate metrics over one split phase.
struct RankingReport {
  std::size_t k = 10;
  std::string exclusion;  // "train" or "train+valid"
  std::size_t evaluated_users = 0;
  double recall = 0.0, hr = 0.0, ndcg = 0.0, mrr = 0.0;
  std::vector<std::pair<UserIndex, MetricRow>> per_user;
};

// Ranks every evaluable user (nonempty phase set) over the full catalog minus
// the user's exclusions: train items for validation, train+valid for test.
// Users parallelize; the merge runs in fixed user order.
template <typename T>
RankingReport evaluate(const TransferModel<T>& model, const InteractionSplit& split,
                       std::size_t k, EvalPhase phase) {
  RankingReport report;
  report.k = k;
  report.exclusion = phase == EvalPhase::Test ? "train+valid" : "train";

  const std::size_t n_users = model.users.size();
  std::vector<std::uint8_t> evaluable(n_users, 0);
  std::vector<MetricRow> rows(n_users);

  parallel_for(n_users, [&](std::size_t s) {
    UserIndex u = model.users[s];
    std::size_t split_slot = split.user_slot(u);
    const std::vector<ItemIndex>& phase_items =
        phase == EvalPhase::Test ? split.test[split_slot] : split.valid[split_slot];
    if (phase_items.empty()) return;

    std::vector<std::uint8_t> excluded(model.items.size(), 0);
    for (ItemIndex i : split.train[split_slot]) excluded[model.item_slot(i)] = 1;
    if (phase == EvalPhase::Test) {
      for (ItemIndex i : split.valid[split_slot]) excluded[model.item_slot(i)] = 1;
    }
    std::vector<std::uint32_t> relevant;
    relevant.reserve(phase_items.size());
    for (ItemIndex i : phase_items) relevant.push_back(static_cast<std::uint32_t>(model.item_slot(i)));
    std::sort(relevant.begin(), relevant.end());

    std::vector<std::uint32_t> ranked = rank_items(model, s, excluded);
    rows[s] = compute_metrics(ranked, relevant, k);
    evaluable[s] = 1;
  });

  for (std::size_t s = 0; s < n_users; ++s) {
    if (!evaluable[s]) continue;
    report.per_user.emplace_back(model.users[s], rows[s]);
    report.recall += rows[s].recall;
    report.hr += rows[s].hr;
    report.ndcg += rows[s].ndcg;
    report.mrr += rows[s].rr;
  }
  report.evaluated_users = report.per_user.size();
  if (report.evaluated_users == 0) {
    throw input_error("evaluate: no users with a nonempty " +
                      std::string(phase == EvalPhase::Test ? "test" : "validation") + " set");
  }
  double n = static_cast<double>(report.evaluated_users);
  report.recall /= n;
  report.hr /= n;
  report.ndcg /= n;
  report.mrr /= n;
  return report;
}

}  // namespace hago
