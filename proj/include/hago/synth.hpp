#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hago/dataset.hpp"
#include "hago/errors.hpp"
#include "hago/matrix.hpp"
#include "hago/rng.hpp"

namespace hago {

// Desk-scale verification fixture: user factors are shared across domains
// (the structure coordinator-based transfer is meant to exploit), item
// factors are per-domain, and interactions are sampled with probability
// proportional to the squashed inner product. The target is sparsified so
// cross-domain signal matters.
struct SynthParams {
  std::uint32_t users = 300;
  std::uint32_t items_per_domain = 200;
  std::uint32_t source_domains = 2;
  std::uint32_t latent_rank = 4;
  double source_density = 0.05;
  double target_density = 0.03;
  double noise = 0.1;  // stddev of the logit noise; large values drown the factors
  std::uint64_t seed = 42;

  void validate() const {
    if (users == 0 || items_per_domain == 0) throw config_error("synth: counts must be >= 1");
    if (latent_rank == 0) throw config_error("synth: latent rank must be >= 1");
    auto density_ok = [](double d) { return d > 0.0 && d < 1.0; };
    if (!density_ok(source_density) || !density_ok(target_density)) {
      throw config_error("synth: densities must lie in (0, 1)");
    }
    if (noise < 0.0) throw config_error("synth: noise must be >= 0");
  }
};

struct SynthDomain {
  std::string name;
  bool is_target = false;
  std::vector<std::pair<std::string, std::string>> interactions;  // (user raw, item raw)
};

inline std::vector<SynthDomain> synth_dataset(const SynthParams& params) {
  params.validate();
  const std::uint32_t domains = params.source_domains + 1;
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(params.latent_rank));

  Matrix<double> user_factors(params.users, params.latent_rank);
  for (std::uint32_t u = 0; u < params.users; ++u) {
    Rng rng(substream_seed(params.seed, "synth:user-factors", u));
    for (std::uint32_t r = 0; r < params.latent_rank; ++r) {
      user_factors(u, r) = rng.normal(0.0, 1.0);
    }
  }

  std::vector<SynthDomain> out;
  for (std::uint32_t k = 0; k < domains; ++k) {
    SynthDomain dom;
    dom.is_target = (k == domains - 1);
    dom.name = dom.is_target ? "target" : "source" + std::to_string(k);
    const double density = dom.is_target ? params.target_density : params.source_density;

    Matrix<double> item_factors(params.items_per_domain, params.latent_rank);
    Rng rng_items(params.seed, "synth:item-factors:" + dom.name);
    for (std::uint32_t i = 0; i < params.items_per_domain; ++i) {
      for (std::uint32_t r = 0; r < params.latent_rank; ++r) {
        item_factors(i, r) = rng_items.normal(0.0, 1.0);
      }
    }

    // logits 4 z + noise; the bias calibrating the density sits inside the
    // sigmoid, so interaction probability stays sharply concentrated on the
    // highest-scoring pairs instead of being flattened by a global rescale
    Rng rng_noise(params.seed, "synth:noise:" + dom.name);
    Matrix<double> logits(params.users, params.items_per_domain);
    for (std::uint32_t u = 0; u < params.users; ++u) {
      for (std::uint32_t i = 0; i < params.items_per_domain; ++i) {
        double z = dot(std::span<const double>(user_factors.row(u)),
                       std::span<const double>(item_factors.row(i))) *
                   inv_sqrt_r;
        logits(u, i) = 4.0 * z + params.noise * rng_noise.normal(0.0, 1.0);
      }
    }
    auto mean_propensity = [&](double bias) {
      double total = 0.0;
      for (double l : logits.data()) total += 1.0 / (1.0 + std::exp(-(l - bias)));
      return total / static_cast<double>(logits.data().size());
    };
    double lo = -60.0, hi = 60.0;
    for (int iter = 0; iter < 100; ++iter) {
      double mid = 0.5 * (lo + hi);
      (mean_propensity(mid) > density ? lo : hi) = mid;
    }
    const double bias = 0.5 * (lo + hi);

    Rng rng_edges(params.seed, "synth:edges:" + dom.name);
    char user_buf[16], item_buf[32];
    for (std::uint32_t u = 0; u < params.users; ++u) {
      for (std::uint32_t i = 0; i < params.items_per_domain; ++i) {
        double p = 1.0 / (1.0 + std::exp(-(logits(u, i) - bias)));
        if (rng_edges.bernoulli(p)) {
          std::snprintf(user_buf, sizeof(user_buf), "u%04u", u);
          std::snprintf(item_buf, sizeof(item_buf), "%s_i%04u", dom.name.c_str(), i);
          dom.interactions.emplace_back(user_buf, item_buf);
        }
      }
    }
    out.push_back(std::move(dom));
  }
  return out;
}

// Writes one TSV per domain (user_id \t item_id) plus a small params file.
// Returns the list of (domain name, file path, is_target).
struct SynthFile {
  std::string name;
  std::string path;
  bool is_target = false;
};

inline std::vector<SynthFile> write_synth_dataset(const SynthParams& params,
                                                  const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<SynthDomain> domains = synth_dataset(params);
  std::vector<SynthFile> files;
  for (const auto& dom : domains) {
    std::string path = (fs::path(dir) / (dom.name + ".tsv")).string();
    std::ofstream os(path, std::ios::trunc | std::ios::binary);
    if (!os) throw input_error("cannot write synthetic domain file: " + path);
    for (const auto& [u, i] : dom.interactions) {
      os << u << "\t" << i << "\n";
    }
    files.push_back({dom.name, path, dom.is_target});
  }
  return files;
}

// Convenience: synthesize straight into an in-memory dataset.
inline MultiDomainDataset synth_to_dataset(const SynthParams& params) {
  std::vector<SynthDomain> domains = synth_dataset(params);
  EntityRegistry registry;
  std::vector<DomainGraph> sources;
  DomainGraph target;
  for (const auto& dom : domains) {
    std::set<std::pair<UserIndex, ItemIndex>> seen;
    for (const auto& [u, i] : dom.interactions) {
      seen.emplace(registry.user_index(u), registry.item_index(dom.name, i));
    }
    DomainGraph g;
    g.label = dom.name;
    g.edges.assign(seen.begin(), seen.end());
    std::set<UserIndex> users;
    std::set<ItemIndex> items;
    for (const auto& [u, i] : g.edges) {
      users.insert(u);
      items.insert(i);
    }
    g.users.assign(users.begin(), users.end());
    g.items.assign(items.begin(), items.end());
    g.build_local_adjacency();
    if (dom.is_target) {
      target = std::move(g);
    } else {
      sources.push_back(std::move(g));
    }
  }
  return build_dataset(std::move(sources), std::move(target), std::move(registry));
}

}  // namespace hago
