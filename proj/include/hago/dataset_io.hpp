#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hago/checkpoint.hpp"
#include "hago/dataset.hpp"
#include "hago/unified_graph.hpp"

namespace hago {

// Dataset directory layout: manifest.json (domain names, counts, seed),
// registry.json (raw-ID tables), edges/<domain>.edges (little-endian u32
// global index pairs).
inline void save_dataset(const std::string& dir, const MultiDomainDataset& ds,
                         std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "edges");

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = seed;
  manifest["target"] = ds.target.label;
  manifest["domains"] = nlohmann::json::array();
  for (std::size_t k = 0; k < ds.domain_count(); ++k) {
    const DomainGraph& g = ds.domain(k);
    manifest["domains"].push_back({{"name", g.label},
                                   {"users", g.user_count()},
                                   {"items", g.item_count()},
                                   {"interactions", g.edge_count()},
                                   {"target", &g == &ds.target}});
  }
  {
    std::ofstream os(fs::path(dir) / "manifest.json", std::ios::trunc);
    if (!os) throw input_error("cannot write dataset manifest under " + dir);
    os << manifest.dump(2) << "\n";
  }

  nlohmann::json registry;
  registry["users"] = nlohmann::json::array();
  for (std::size_t u = 0; u < ds.registry.user_count(); ++u) {
    registry["users"].push_back(ds.registry.user_raw(static_cast<UserIndex>(u)));
  }
  registry["items"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.registry.item_count(); ++i) {
    registry["items"].push_back({{"domain", ds.registry.item_domain(static_cast<ItemIndex>(i))},
                                 {"raw", ds.registry.item_raw(static_cast<ItemIndex>(i))}});
  }
  {
    std::ofstream os(fs::path(dir) / "registry.json", std::ios::trunc);
    if (!os) throw input_error("cannot write dataset registry under " + dir);
    os << registry.dump() << "\n";
  }

  for (std::size_t k = 0; k < ds.domain_count(); ++k) {
    const DomainGraph& g = ds.domain(k);
    std::ofstream os(fs::path(dir) / "edges" / (g.label + ".edges"),
                     std::ios::binary | std::ios::trunc);
    if (!os) throw input_error("cannot write edge list for domain " + g.label);
    for (const auto& [u, i] : g.edges) {
      detail::write_u32(os, u);
      detail::write_u32(os, i);
    }
  }
}

inline MultiDomainDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw artifact_error("missing dataset manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception&) {
    throw artifact_error("corrupt dataset manifest in " + dir);
  }

  std::ifstream rf(fs::path(dir) / "registry.json");
  if (!rf) throw artifact_error("missing dataset registry in " + dir);
  nlohmann::json registry_json;
  try {
    rf >> registry_json;
  } catch (const nlohmann::json::exception&) {
    throw artifact_error("corrupt dataset registry in " + dir);
  }

  EntityRegistry registry;
  for (const auto& raw : registry_json.at("users")) {
    registry.user_index(raw.get<std::string>());
  }
  for (const auto& item : registry_json.at("items")) {
    registry.item_index(item.at("domain").get<std::string>(), item.at("raw").get<std::string>());
  }

  std::vector<DomainGraph> sources;
  DomainGraph target;
  bool target_seen = false;
  for (const auto& dom : manifest.at("domains")) {
    DomainGraph g;
    g.label = dom.at("name").get<std::string>();
    std::ifstream es(fs::path(dir) / "edges" / (g.label + ".edges"), std::ios::binary);
    if (!es) throw artifact_error("missing edge list for domain " + g.label + " in " + dir);
    std::set<UserIndex> users;
    std::set<ItemIndex> items;
    while (true) {
      unsigned char buf[8];
      es.read(reinterpret_cast<char*>(buf), 8);
      if (es.gcount() == 0) break;
      if (es.gcount() != 8) throw artifact_error("truncated edge list for domain " + g.label);
      UserIndex u = static_cast<UserIndex>(buf[0]) | (static_cast<UserIndex>(buf[1]) << 8) |
                    (static_cast<UserIndex>(buf[2]) << 16) | (static_cast<UserIndex>(buf[3]) << 24);
      ItemIndex i = static_cast<ItemIndex>(buf[4]) | (static_cast<ItemIndex>(buf[5]) << 8) |
                    (static_cast<ItemIndex>(buf[6]) << 16) | (static_cast<ItemIndex>(buf[7]) << 24);
      g.edges.emplace_back(u, i);
      users.insert(u);
      items.insert(i);
    }
    g.users.assign(users.begin(), users.end());
    g.items.assign(items.begin(), items.end());
    g.build_local_adjacency();
    if (dom.at("target").get<bool>()) {
      target = std::move(g);
      target_seen = true;
    } else {
      sources.push_back(std::move(g));
    }
  }
  if (!target_seen) throw artifact_error("dataset manifest has no target domain: " + dir);
  return build_dataset(std::move(sources), std::move(target), std::move(registry));
}

// Stable fingerprint of the dataset identity, stamped into downstream
// artifacts to guard against swapped dataset directories.
inline std::string dataset_fingerprint(const MultiDomainDataset& ds) {
  std::string acc;
  for (std::size_t k = 0; k < ds.domain_count(); ++k) {
    const DomainGraph& g = ds.domain(k);
    acc += g.label + ":" + std::to_string(g.user_count()) + ":" + std::to_string(g.item_count()) +
           ":" + std::to_string(g.edge_count()) + ";";
  }
  acc += "target=" + ds.target.label;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(acc)));
  return buf;
}

// Debug dump of a unified graph: length-prefixed JSON header followed by the
// raw CSR (u32 offsets, u32 targets, f32 weights), all little-endian.
template <typename T>
void dump_unified_graph(const std::string& path, const UnifiedGraph<T>& g) {
  nlohmann::json header;
  header["mode"] = mode_name(g.mode);
  header["coordinators_per_type"] = g.coordinators_per_type;
  header["users"] = g.user_count;
  header["items"] = g.item_count;
  header["coordinators"] = g.coord_count;
  header["entries"] = g.targets.size();
  std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw input_error("cannot write graph dump: " + path);
  detail::write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::uint32_t v : g.offsets) detail::write_u32(os, v);
  for (std::uint32_t v : g.targets) detail::write_u32(os, v);
  for (T w : g.weights) detail::write_f32(os, static_cast<float>(w));
}

}  // namespace hago
