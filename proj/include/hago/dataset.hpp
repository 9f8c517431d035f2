#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hago/errors.hpp"
#include "hago/rng.hpp"

namespace hago {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

// Global ID registry. Users share one namespace across all domains (the same
// raw ID always maps to the same node); items are namespaced per domain but
// drawn from one global counter, so item index ranges of different domains
// never overlap.
class EntityRegistry {
 public:
  UserIndex user_index(const std::string& raw) {
    auto it = user_map_.find(raw);
    if (it != user_map_.end()) return it->second;
    UserIndex idx = static_cast<UserIndex>(user_raws_.size());
    user_map_.emplace(raw, idx);
    user_raws_.push_back(raw);
    return idx;
  }

  ItemIndex item_index(const std::string& domain, const std::string& raw) {
    auto& map = item_maps_[domain];
    auto it = map.find(raw);
    if (it != map.end()) return it->second;
    ItemIndex idx = static_cast<ItemIndex>(item_raws_.size());
    map.emplace(raw, idx);
    item_raws_.emplace_back(domain, raw);
    return idx;
  }

  std::optional<UserIndex> find_user(const std::string& raw) const {
    auto it = user_map_.find(raw);
    if (it == user_map_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ItemIndex> find_item(const std::string& domain, const std::string& raw) const {
    auto dit = item_maps_.find(domain);
    if (dit == item_maps_.end()) return std::nullopt;
    auto it = dit->second.find(raw);
    if (it == dit->second.end()) return std::nullopt;
    return it->second;
  }

  std::size_t user_count() const { return user_raws_.size(); }
  std::size_t item_count() const { return item_raws_.size(); }

  const std::string& user_raw(UserIndex u) const { return user_raws_[u]; }
  const std::string& item_domain(ItemIndex i) const { return item_raws_[i].first; }
  const std::string& item_raw(ItemIndex i) const { return item_raws_[i].second; }

  std::vector<std::string> domains_seen() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : item_maps_) out.push_back(name);
    return out;
  }

 private:
  std::unordered_map<std::string, UserIndex> user_map_;
  std::map<std::string, std::unordered_map<std::string, ItemIndex>> item_maps_;
  std::vector<std::string> user_raws_;
  std::vector<std::pair<std::string, std::string>> item_raws_;  // (domain, raw)
};

// One domain's bipartite interaction graph over global indices, plus a CSR
// over the domain-local node ordering [users..., items...].
struct DomainGraph {
  std::string label;
  int domain_id = -1;  // assigned by build_dataset
  std::vector<UserIndex> users;  // sorted, unique
  std::vector<ItemIndex> items;  // sorted, unique
  std::vector<std::pair<UserIndex, ItemIndex>> edges;  // sorted, deduplicated

  // domain-local CSR: node ids are [0, users.size()) for users and
  // [users.size(), users.size() + items.size()) for items.
  std::vector<std::uint32_t> adj_offsets;
  std::vector<std::uint32_t> adj_indices;

  std::size_t user_count() const { return users.size(); }
  std::size_t item_count() const { return items.size(); }
  std::size_t edge_count() const { return edges.size(); }
  std::size_t node_count() const { return users.size() + items.size(); }

  std::uint32_t local_user(UserIndex u) const {
    auto it = std::lower_bound(users.begin(), users.end(), u);
    if (it == users.end() || *it != u) throw invariant_error("user not in domain: " + label);
    return static_cast<std::uint32_t>(it - users.begin());
  }

  std::uint32_t local_item(ItemIndex i) const {
    auto it = std::lower_bound(items.begin(), items.end(), i);
    if (it == items.end() || *it != i) throw invariant_error("item not in domain: " + label);
    return static_cast<std::uint32_t>(users.size() + (it - items.begin()));
  }

  void build_local_adjacency() {
    const std::size_t n = node_count();
    adj_offsets.assign(n + 1, 0);
    for (const auto& [u, i] : edges) {
      ++adj_offsets[local_user(u) + 1];
      ++adj_offsets[local_item(i) + 1];
    }
    for (std::size_t k = 0; k < n; ++k) adj_offsets[k + 1] += adj_offsets[k];
    adj_indices.assign(adj_offsets.back(), 0);
    std::vector<std::uint32_t> cursor(adj_offsets.begin(), adj_offsets.end() - 1);
    for (const auto& [u, i] : edges) {
      std::uint32_t lu = local_user(u);
      std::uint32_t li = local_item(i);
      adj_indices[cursor[lu]++] = li;
      adj_indices[cursor[li]++] = lu;
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

enum class FileFormat { Tsv, Csv };

// Reads a UTF-8 interaction log (user_id, item_id[, rating, timestamp]) and
// builds a deduplicated bipartite graph. '#'-prefixed and blank lines are
// skipped; a first line whose leading field starts with "user" is treated as
// a header. Ratings and timestamps are ignored (implicit feedback).
inline DomainGraph ingest_interactions(const std::string& path, FileFormat format,
                                       const std::string& domain_label,
                                       EntityRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open interaction file: " + path);
  const char delim = format == FileFormat::Tsv ? '\t' : ',';

  DomainGraph graph;
  graph.label = domain_label;

  std::set<std::pair<UserIndex, ItemIndex>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::vector<std::string> fields = detail::split_fields(line, delim);
    if (first_content_line) {
      first_content_line = false;
      if (!fields.empty() && detail::lowercase(fields[0]).rfind("user", 0) == 0) continue;
    }
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw parse_error("malformed interaction line in " + path + ": need user and item fields",
                        line_no);
    }
    UserIndex u = registry.user_index(fields[0]);
    ItemIndex i = registry.item_index(domain_label, fields[1]);
    seen.emplace(u, i);
  }
  if (seen.empty()) throw input_error("empty domain: no interactions in " + path);

  graph.edges.assign(seen.begin(), seen.end());
  std::set<UserIndex> users;
  std::set<ItemIndex> items;
  for (const auto& [u, i] : graph.edges) {
    users.insert(u);
    items.insert(i);
  }
  graph.users.assign(users.begin(), users.end());
  graph.items.assign(items.begin(), items.end());
  graph.build_local_adjacency();
  return graph;
}

// Registry plus the M source graphs and the single target graph.
struct MultiDomainDataset {
  std::vector<DomainGraph> sources;
  DomainGraph target;
  EntityRegistry registry;

  std::size_t domain_count() const { return sources.size() + 1; }

  const DomainGraph& domain(std::size_t k) const {
    return k < sources.size() ? sources[k] : target;
  }

  const DomainGraph* find_domain(const std::string& label) const {
    for (const auto& g : sources) {
      if (g.label == label) return &g;
    }
    if (target.label == label) return &target;
    return nullptr;
  }
};

inline MultiDomainDataset build_dataset(std::vector<DomainGraph> sources, DomainGraph target,
                                        EntityRegistry registry) {
  for (const auto& s : sources) {
    if (s.label == target.label) {
      throw config_error("target domain '" + target.label + "' also listed as a source");
    }
  }
  MultiDomainDataset ds;
  ds.sources = std::move(sources);
  ds.target = std::move(target);
  ds.registry = std::move(registry);
  for (std::size_t k = 0; k < ds.sources.size(); ++k) {
    ds.sources[k].domain_id = static_cast<int>(k);
  }
  ds.target.domain_id = static_cast<int>(ds.sources.size());
  return ds;
}

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Per-user train/validation/test partition of the target domain.
// Lists are parallel to `users`.
struct InteractionSplit {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::vector<UserIndex> users;  // sorted target users
  std::vector<std::vector<ItemIndex>> train;
  std::vector<std::vector<ItemIndex>> valid;
  std::vector<std::vector<ItemIndex>> test;

  std::size_t user_slot(UserIndex u) const {
    auto it = std::lower_bound(users.begin(), users.end(), u);
    if (it == users.end() || *it != u) throw invariant_error("user not in split");
    return static_cast<std::size_t>(it - users.begin());
  }
};

// Seeded per-user random partition. Each user's item list is shuffled with a
// user-keyed substream; fractional counts floor and the remainder goes to
// train. Users with fewer than 3 interactions train on everything.
inline InteractionSplit split_interactions(const DomainGraph& target, const SplitRatios& ratios,
                                           std::uint64_t seed) {
  if (!(ratios.train > 0) || !(ratios.valid >= 0) || !(ratios.test >= 0)) {
    throw config_error("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw config_error("split ratios must sum to 1");
  }

  std::unordered_map<UserIndex, std::vector<ItemIndex>> by_user;
  for (const auto& [u, i] : target.edges) by_user[u].push_back(i);

  InteractionSplit split;
  split.seed = seed;
  split.ratios = ratios;
  split.users = target.users;
  split.train.resize(split.users.size());
  split.valid.resize(split.users.size());
  split.test.resize(split.users.size());

  for (std::size_t s = 0; s < split.users.size(); ++s) {
    UserIndex u = split.users[s];
    std::vector<ItemIndex>& pool = by_user[u];
    std::sort(pool.begin(), pool.end());  // canonical order before shuffling
    Rng rng(substream_seed(seed, "split", u));
    rng.shuffle(pool.begin(), pool.end());

    const std::size_t n = pool.size();
    std::size_t n_valid = 0, n_test = 0;
    if (n >= 3) {
      n_valid = static_cast<std::size_t>(std::floor(ratios.valid * static_cast<double>(n) + 1e-9));
      n_test = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n) + 1e-9));
    }
    const std::size_t n_train = n - n_valid - n_test;
    split.train[s].assign(pool.begin(), pool.begin() + n_train);
    split.valid[s].assign(pool.begin() + n_train, pool.begin() + n_train + n_valid);
    split.test[s].assign(pool.begin() + n_train + n_valid, pool.end());
    std::sort(split.train[s].begin(), split.train[s].end());
    std::sort(split.valid[s].begin(), split.valid[s].end());
    std::sort(split.test[s].begin(), split.test[s].end());
  }
  return split;
}

struct DomainSummary {
  std::string label;
  bool is_target = false;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;  // 1 - interactions / (users * items), rounded to 4 decimals
};

inline double sparsity_of(std::size_t users, std::size_t items, std::size_t interactions) {
  if (users == 0 || items == 0) return 0.0;
  double s = 1.0 - static_cast<double>(interactions) /
                       (static_cast<double>(users) * static_cast<double>(items));
  return std::round(s * 1e4) / 1e4;
}

inline std::vector<DomainSummary> dataset_summary(const MultiDomainDataset& ds) {
  std::vector<DomainSummary> out;
  for (std::size_t k = 0; k < ds.domain_count(); ++k) {
    const DomainGraph& g = ds.domain(k);
    DomainSummary s;
    s.label = g.label;
    s.is_target = (&g == &ds.target);
    s.users = g.user_count();
    s.items = g.item_count();
    s.interactions = g.edge_count();
    s.sparsity = sparsity_of(s.users, s.items, s.interactions);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hago
