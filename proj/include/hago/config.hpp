#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hago/errors.hpp"
#include "hago/pretrain.hpp"
#include "hago/rng.hpp"
#include "hago/transfer.hpp"
#include "hago/unified_graph.hpp"

namespace hago {

// One config drives the whole pipeline; every stage artifact is stamped with
// its hash so stale mixtures of outputs are refused. Defaults mirror the
// reference setup: d=64, L=2, alpha=[0,0,1], n=5, pre-train lr 0.005 /
// batch 1024, transfer lr 0.1 / batch 4096.
struct RunConfig {
  std::string dataset_dir;
  std::string out_dir;
  GraphMode mode = GraphMode::HAGO;
  std::uint32_t coordinators = 5;  // n per type per domain
  std::uint32_t dim = 64;
  std::uint32_t layers = 2;
  std::vector<double> alpha = {0.0, 0.0, 1.0};
  SplitRatios ratios;
  std::uint64_t seed = 42;
  std::size_t eval_k = 10;
  PretrainConfig pretrain;
  TransferConfig transfer;

  void validate() const {
    if (dim == 0) throw config_error("dim must be >= 1");
    if (alpha.size() != layers + 1) throw config_error("alpha must have layers+1 entries");
    std::vector<double> a(alpha.begin(), alpha.end());
    check_layer_weights(a);
    pretrain.validate();
    transfer.validate();
    if (eval_k == 0) throw config_error("eval k must be >= 1");
  }

  // Stage seeds all derive from the root seed through labeled substreams.
  RunConfig& sync_seeds() {
    pretrain.seed = seed;
    transfer.seed = seed;
    pretrain.mode = mode;
    return *this;
  }
};

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = cfg.dataset_dir;
  j["out"] = cfg.out_dir;
  j["mode"] = mode_name(cfg.mode);
  j["coordinators"] = cfg.coordinators;
  j["dim"] = cfg.dim;
  j["layers"] = cfg.layers;
  j["alpha"] = cfg.alpha;
  j["split"] = {{"train", cfg.ratios.train},
                {"valid", cfg.ratios.valid},
                {"test", cfg.ratios.test}};
  j["seed"] = cfg.seed;
  j["eval_k"] = cfg.eval_k;
  j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                   {"batch_size", cfg.pretrain.batch_size},
                   {"learning_rate", cfg.pretrain.learning_rate},
                   {"temperature", cfg.pretrain.temperature},
                   {"edge_drop", {cfg.pretrain.edge_drop1, cfg.pretrain.edge_drop2}},
                   {"feature_mask", {cfg.pretrain.feature_mask1, cfg.pretrain.feature_mask2}}};
  j["transfer"] = {{"epochs", cfg.transfer.epochs},
                   {"batch_size", cfg.transfer.batch_size},
                   {"learning_rate", cfg.transfer.learning_rate},
                   {"l2", cfg.transfer.l2},
                   {"freeze_pretrained", cfg.transfer.freeze_pretrained},
                   {"use_prompts", cfg.transfer.use_prompts},
                   {"propagate_unified", cfg.transfer.propagate_unified}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    if (j.contains("dataset")) cfg.dataset_dir = j.at("dataset").get<std::string>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("mode")) cfg.mode = mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("coordinators")) cfg.coordinators = j.at("coordinators").get<std::uint32_t>();
    if (j.contains("dim")) cfg.dim = j.at("dim").get<std::uint32_t>();
    if (j.contains("layers")) cfg.layers = j.at("layers").get<std::uint32_t>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<std::vector<double>>();
    if (j.contains("split")) {
      const auto& s = j.at("split");
      cfg.ratios.train = s.at("train").get<double>();
      cfg.ratios.valid = s.at("valid").get<double>();
      cfg.ratios.test = s.at("test").get<double>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("eval_k")) cfg.eval_k = j.at("eval_k").get<std::size_t>();
    if (j.contains("pretrain")) {
      const auto& p = j.at("pretrain");
      if (p.contains("epochs")) cfg.pretrain.epochs = p.at("epochs").get<std::uint32_t>();
      if (p.contains("batch_size")) cfg.pretrain.batch_size = p.at("batch_size").get<std::uint32_t>();
      if (p.contains("learning_rate")) cfg.pretrain.learning_rate = p.at("learning_rate").get<double>();
      if (p.contains("temperature")) cfg.pretrain.temperature = p.at("temperature").get<double>();
      if (p.contains("edge_drop")) {
        cfg.pretrain.edge_drop1 = p.at("edge_drop").at(0).get<double>();
        cfg.pretrain.edge_drop2 = p.at("edge_drop").at(1).get<double>();
      }
      if (p.contains("feature_mask")) {
        cfg.pretrain.feature_mask1 = p.at("feature_mask").at(0).get<double>();
        cfg.pretrain.feature_mask2 = p.at("feature_mask").at(1).get<double>();
      }
    }
    if (j.contains("transfer")) {
      const auto& t = j.at("transfer");
      if (t.contains("epochs")) cfg.transfer.epochs = t.at("epochs").get<std::uint32_t>();
      if (t.contains("batch_size")) cfg.transfer.batch_size = t.at("batch_size").get<std::uint32_t>();
      if (t.contains("learning_rate")) cfg.transfer.learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("l2")) cfg.transfer.l2 = t.at("l2").get<double>();
      if (t.contains("freeze_pretrained")) {
        cfg.transfer.freeze_pretrained = t.at("freeze_pretrained").get<bool>();
      }
      if (t.contains("use_prompts")) cfg.transfer.use_prompts = t.at("use_prompts").get<bool>();
      if (t.contains("propagate_unified")) {
        cfg.transfer.propagate_unified = t.at("propagate_unified").get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config: ") + e.what());
  }
  cfg.sync_seeds();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw input_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

// Hash of the canonical (key-sorted) JSON serialization. The out/dataset
// paths are excluded so moving a run directory does not invalidate it.
inline std::string config_hash(const RunConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("out");
  j.erase("dataset");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace hago
