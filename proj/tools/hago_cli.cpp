// Batch front end: synth -> ingest -> pretrain -> transfer -> evaluate,
// plus ablation sweeps and embedding analyses. One command per process;
// every stage artifact embeds the config hash and refuses stale inputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hago/hago.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitQuery = 4;
constexpr int kExitNumeric = 5;

using Scalar = float;  // production precision

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> dataset;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  std::optional<std::uint32_t> coordinators;
  std::optional<std::uint32_t> dim;
  std::optional<std::uint32_t> layers;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> pretrain_epochs;
  std::optional<std::uint32_t> transfer_epochs;
  std::optional<std::size_t> eval_k;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration");
  cmd->add_option("--dataset", flags.dataset, "dataset directory (overrides config)");
  cmd->add_option("--out", flags.out, "run output directory (overrides config)");
  cmd->add_option("--mode", flags.mode, "none|homogo|hetergo|hago (overrides config)");
  cmd->add_option("--n", flags.coordinators, "coordinators per type per domain");
  cmd->add_option("--dim", flags.dim, "embedding dimension");
  cmd->add_option("--layers", flags.layers, "propagation layers");
  cmd->add_option("--seed", flags.seed, "root seed");
  cmd->add_option("--pretrain-epochs", flags.pretrain_epochs, "pre-training epochs");
  cmd->add_option("--transfer-epochs", flags.transfer_epochs, "transfer epochs");
  cmd->add_option("--k", flags.eval_k, "evaluation cutoff K");
}

hago::RunConfig resolve_config(const CommonFlags& flags) {
  hago::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = hago::load_run_config(flags.config_path);
  if (flags.dataset) cfg.dataset_dir = *flags.dataset;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.mode) cfg.mode = hago::mode_from_name(*flags.mode);
  if (flags.coordinators) cfg.coordinators = *flags.coordinators;
  if (flags.dim) cfg.dim = *flags.dim;
  if (flags.layers) cfg.layers = *flags.layers;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.pretrain_epochs) cfg.pretrain.epochs = *flags.pretrain_epochs;
  if (flags.transfer_epochs) cfg.transfer.epochs = *flags.transfer_epochs;
  if (flags.eval_k) cfg.eval_k = *flags.eval_k;
  cfg.sync_seeds();
  if (cfg.alpha.size() != cfg.layers + 1) {
    // layers overridden without alpha: fall back to last-layer-only weights
    cfg.alpha.assign(cfg.layers + 1, 0.0);
    cfg.alpha.back() = 1.0;
  }
  cfg.validate();
  if (cfg.dataset_dir.empty()) throw hago::config_error("no dataset directory configured");
  if (cfg.out_dir.empty()) throw hago::config_error("no output directory configured");
  return cfg;
}

void write_run_manifest(const hago::RunConfig& cfg) {
  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  fs::create_directories(fs::path(cfg.out_dir) / "reports");
  json manifest;
  manifest["config"] = hago::to_json(cfg);
  manifest["config_hash"] = hago::config_hash(cfg);
  std::ofstream os(fs::path(cfg.out_dir) / "manifest.json", std::ios::trunc);
  if (!os) throw hago::input_error("cannot write run manifest under " + cfg.out_dir);
  os << manifest.dump(2) << "\n";
}

std::vector<Scalar> alpha_of(const hago::RunConfig& cfg) {
  return std::vector<Scalar>(cfg.alpha.begin(), cfg.alpha.end());
}

json registry_ids(const hago::MultiDomainDataset& ds) {
  json ids;
  ids["users"] = json::array();
  for (std::size_t u = 0; u < ds.registry.user_count(); ++u) {
    ids["users"].push_back(ds.registry.user_raw(static_cast<hago::UserIndex>(u)));
  }
  ids["items"] = json::array();
  for (std::size_t i = 0; i < ds.registry.item_count(); ++i) {
    ids["items"].push_back({{"domain", ds.registry.item_domain(static_cast<hago::ItemIndex>(i))},
                            {"raw", ds.registry.item_raw(static_cast<hago::ItemIndex>(i))}});
  }
  return ids;
}

// ---------------------------------------------------------------------------
// pipeline stages (shared by the stage commands and the ablation sweep)
// ---------------------------------------------------------------------------

hago::PretrainResult<Scalar> stage_pretrain(const hago::MultiDomainDataset& ds,
                                            const hago::RunConfig& cfg, std::ostream* log) {
  std::optional<hago::CoordinatorSet> coords;
  std::size_t coord_rows = 0;
  if (cfg.mode != hago::GraphMode::None) {
    coords = hago::create_coordinators(ds, cfg.coordinators);
    coord_rows = coords->total();
  }
  auto store = hago::init_embeddings<Scalar>(
      {ds.registry.user_count(), ds.registry.item_count(), coord_rows}, cfg.dim, cfg.seed);
  return hago::run_pretraining(ds, coords ? &*coords : nullptr, cfg.pretrain, alpha_of(cfg),
                               std::move(store), log);
}

hago::TransferResult<Scalar> stage_transfer(const hago::MultiDomainDataset& ds,
                                            const hago::InteractionSplit& split,
                                            hago::EmbeddingStore<Scalar> store,
                                            const hago::RunConfig& cfg, std::ostream* log) {
  std::optional<hago::CoordinatorSet> coords;
  if (cfg.mode != hago::GraphMode::None) coords = hago::create_coordinators(ds, cfg.coordinators);
  return hago::run_transfer(ds, split, std::move(store), cfg.transfer, alpha_of(cfg),
                            coords ? &*coords : nullptr, cfg.mode, log);
}

json report_to_json(const hago::RankingReport& report, const std::string& hash) {
  json j;
  j["k"] = report.k;
  j["users"] = report.evaluated_users;
  j["recall"] = report.recall;
  j["hr"] = report.hr;
  j["ndcg"] = report.ndcg;
  j["mrr"] = report.mrr;
  j["exclusion"] = report.exclusion;
  j["config_hash"] = hash;
  return j;
}

void check_artifact_hash(const json& sidecar, const hago::RunConfig& cfg,
                         const std::string& what) {
  const std::string expected = hago::config_hash(cfg);
  if (!sidecar.contains("config_hash") || sidecar.at("config_hash").get<std::string>() != expected) {
    throw hago::artifact_error(what + " was produced by a different configuration (hash mismatch); re-run the earlier stage");
  }
}

void check_dataset_fingerprint(const json& sidecar, const hago::MultiDomainDataset& ds,
                               const std::string& what) {
  const std::string expected = hago::dataset_fingerprint(ds);
  if (!sidecar.contains("dataset_fingerprint") ||
      sidecar.at("dataset_fingerprint").get<std::string>() != expected) {
    throw hago::artifact_error(what + " does not match the configured dataset");
  }
}

hago::EmbeddingStore<Scalar> store_from_checkpoint(const hago::Checkpoint& ckpt,
                                                   std::size_t dim) {
  hago::EmbeddingStore<Scalar> store;
  store.dim = dim;
  auto fetch = [&](const char* name) -> hago::Matrix<Scalar> {
    auto it = ckpt.tables.find(name);
    if (it == ckpt.tables.end()) return {};
    return hago::from_float_matrix<Scalar>(it->second);
  };
  store.users = fetch("users");
  store.items = fetch("items");
  store.coords = fetch("coords");
  store.prompts = fetch("prompts");
  store.users_opt.reset(store.users.rows(), dim);
  store.items_opt.reset(store.items.rows(), dim);
  store.coords_opt.reset(store.coords.rows(), dim);
  store.prompts_opt.reset(store.prompts.rows(), dim);
  return store;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_synth(const hago::SynthParams& params, const std::string& out_dir) {
  auto files = hago::write_synth_dataset(params, out_dir);
  json j;
  j["seed"] = params.seed;
  j["users"] = params.users;
  j["items_per_domain"] = params.items_per_domain;
  j["source_domains"] = params.source_domains;
  j["latent_rank"] = params.latent_rank;
  j["source_density"] = params.source_density;
  j["target_density"] = params.target_density;
  j["noise"] = params.noise;
  std::ofstream os(fs::path(out_dir) / "synth_params.json", std::ios::trunc);
  os << j.dump(2) << "\n";
  for (const auto& f : files) {
    std::cout << (f.is_target ? "target " : "source ") << f.name << " -> " << f.path << "\n";
  }
  return kExitOk;
}

int cmd_ingest(const std::vector<std::string>& domains, const std::vector<std::string>& inputs,
               std::string target_name, const std::string& format_name,
               const std::string& out_dir, std::uint64_t seed) {
  if (domains.empty()) throw hago::input_error("ingest: at least one --domain is required");
  if (domains.size() != inputs.size()) {
    throw hago::input_error("ingest: --domain and --input counts differ");
  }
  hago::FileFormat format;
  if (format_name == "tsv") {
    format = hago::FileFormat::Tsv;
  } else if (format_name == "csv") {
    format = hago::FileFormat::Csv;
  } else {
    throw hago::input_error("ingest: format must be tsv or csv");
  }
  if (target_name.empty()) {
    if (domains.size() == 1) {
      target_name = domains[0];
    } else {
      throw hago::input_error("ingest: --target <domain> is required with multiple domains");
    }
  }

  hago::EntityRegistry registry;
  std::vector<hago::DomainGraph> sources;
  std::optional<hago::DomainGraph> target;
  for (std::size_t k = 0; k < domains.size(); ++k) {
    auto g = hago::ingest_interactions(inputs[k], format, domains[k], registry);
    if (domains[k] == target_name) {
      target = std::move(g);
    } else {
      sources.push_back(std::move(g));
    }
  }
  if (!target) throw hago::input_error("ingest: target '" + target_name + "' not among domains");

  auto ds = hago::build_dataset(std::move(sources), std::move(*target), std::move(registry));
  hago::save_dataset(out_dir, ds, seed);
  for (const auto& s : hago::dataset_summary(ds)) {
    std::printf("%-12s %s users=%zu items=%zu interactions=%zu sparsity=%.2f%%\n", s.label.c_str(),
                s.is_target ? "[target]" : "        ", s.users, s.items, s.interactions,
                s.sparsity * 100.0);
  }
  std::cout << "dataset written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_pretrain(const hago::RunConfig& cfg) {
  auto ds = hago::load_dataset(cfg.dataset_dir);
  write_run_manifest(cfg);
  std::ofstream log_file(fs::path(cfg.out_dir) / "reports" / "pretrain_log.jsonl",
                         std::ios::trunc);
  std::ostringstream lines;
  auto result = stage_pretrain(ds, cfg, &lines);
  std::cout << lines.str();
  log_file << lines.str();

  json sidecar;
  sidecar["kind"] = "pretrain";
  sidecar["config_hash"] = hago::config_hash(cfg);
  sidecar["dataset_fingerprint"] = hago::dataset_fingerprint(ds);
  sidecar["mode"] = hago::mode_name(cfg.mode);
  sidecar["coordinators"] = cfg.coordinators;
  sidecar["dim"] = cfg.dim;
  sidecar["layers"] = cfg.layers;
  sidecar["alpha"] = cfg.alpha;
  sidecar["seed"] = cfg.seed;
  sidecar["ids"] = registry_ids(ds);

  auto users = hago::to_float_matrix(result.store.users);
  auto items = hago::to_float_matrix(result.store.items);
  auto coords = hago::to_float_matrix(result.store.coords);
  hago::save_checkpoint((fs::path(cfg.out_dir) / "checkpoints" / "pretrain.ckpt").string(),
                        {{"users", &users}, {"items", &items}, {"coords", &coords}}, sidecar);
  std::cout << "pretrain checkpoint written (" << result.log.size() << " epochs)\n";
  return kExitOk;
}

int cmd_transfer(const hago::RunConfig& cfg) {
  auto ds = hago::load_dataset(cfg.dataset_dir);
  const std::string in_path = (fs::path(cfg.out_dir) / "checkpoints" / "pretrain.ckpt").string();
  if (!fs::exists(in_path)) {
    throw hago::artifact_error("missing pre-training checkpoint: " + in_path);
  }
  auto ckpt = hago::load_checkpoint(in_path);
  check_artifact_hash(ckpt.sidecar, cfg, "pretrain checkpoint");
  check_dataset_fingerprint(ckpt.sidecar, ds, "pretrain checkpoint");

  auto split = hago::split_interactions(ds.target, cfg.ratios, cfg.seed);
  auto store = store_from_checkpoint(ckpt, cfg.dim);

  std::ofstream log_file(fs::path(cfg.out_dir) / "reports" / "transfer_log.jsonl",
                         std::ios::trunc);
  std::ostringstream lines;
  auto result = stage_transfer(ds, split, std::move(store), cfg, &lines);
  std::cout << lines.str();
  log_file << lines.str();

  json sidecar;
  sidecar["kind"] = "transfer";
  sidecar["config_hash"] = hago::config_hash(cfg);
  sidecar["dataset_fingerprint"] = hago::dataset_fingerprint(ds);
  sidecar["mode"] = hago::mode_name(cfg.mode);
  sidecar["alpha"] = cfg.alpha;
  sidecar["target"] = ds.target.label;
  sidecar["ids"] = registry_ids(ds);

  auto users = hago::to_float_matrix(result.store.users);
  auto items = hago::to_float_matrix(result.store.items);
  auto coords = hago::to_float_matrix(result.store.coords);
  auto prompts = hago::to_float_matrix(result.store.prompts);
  hago::save_checkpoint(
      (fs::path(cfg.out_dir) / "checkpoints" / "transfer.ckpt").string(),
      {{"users", &users}, {"items", &items}, {"coords", &coords}, {"prompts", &prompts}}, sidecar);
  std::cout << "transfer checkpoint written (" << result.log.size() << " epochs)\n";
  return kExitOk;
}

int cmd_evaluate(const hago::RunConfig& cfg, const std::string& phase_name) {
  auto ds = hago::load_dataset(cfg.dataset_dir);
  const std::string in_path = (fs::path(cfg.out_dir) / "checkpoints" / "transfer.ckpt").string();
  if (!fs::exists(in_path)) {
    throw hago::artifact_error("missing transfer checkpoint: " + in_path);
  }
  auto ckpt = hago::load_checkpoint(in_path);
  check_artifact_hash(ckpt.sidecar, cfg, "transfer checkpoint");
  check_dataset_fingerprint(ckpt.sidecar, ds, "transfer checkpoint");

  hago::EvalPhase phase;
  if (phase_name == "test") {
    phase = hago::EvalPhase::Test;
  } else if (phase_name == "valid") {
    phase = hago::EvalPhase::Valid;
  } else {
    throw hago::input_error("evaluate: phase must be test or valid");
  }

  auto split = hago::split_interactions(ds.target, cfg.ratios, cfg.seed);
  auto store = store_from_checkpoint(ckpt, cfg.dim);

  // rebuild the model from the stored tables: a 0-epoch run touches nothing
  hago::RunConfig eval_cfg = cfg;
  eval_cfg.transfer.epochs = 0;
  auto rebuilt = stage_transfer(ds, split, std::move(store), eval_cfg, nullptr);

  auto report = hago::evaluate(rebuilt.model, split, cfg.eval_k, phase);
  json j = report_to_json(report, hago::config_hash(cfg));
  fs::create_directories(fs::path(cfg.out_dir) / "reports");
  {
    std::ofstream os(fs::path(cfg.out_dir) / "reports" / ("evaluate_" + phase_name + ".json"),
                     std::ios::trunc);
    os << j.dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(cfg.out_dir) / "reports" / ("per_user_" + phase_name + ".csv"),
                     std::ios::trunc);
    os << "user,recall,hr,ndcg,rr\n";
    for (const auto& [user, row] : report.per_user) {
      os << ds.registry.user_raw(user) << "," << row.recall << "," << row.hr << "," << row.ndcg
         << "," << row.rr << "\n";
    }
  }
  std::cout << j.dump() << "\n";
  return kExitOk;
}

struct AblationCell {
  std::string mode;
  bool failed = false;
  std::vector<hago::RankingReport> runs;
};

// One full pipeline run for the sweep. "backbone" skips pre-training and
// trains the embeddings directly on the target with BPR.
hago::RankingReport ablation_run(const hago::MultiDomainDataset& ds, hago::RunConfig cfg,
                                 const std::string& mode, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.sync_seeds();
  auto split = hago::split_interactions(ds.target, cfg.ratios, cfg.seed);

  hago::EmbeddingStore<Scalar> store;
  if (mode == "backbone") {
    cfg.mode = hago::GraphMode::None;
    cfg.sync_seeds();
    cfg.transfer.freeze_pretrained = false;
    cfg.transfer.use_prompts = false;
    store = hago::init_embeddings<Scalar>(
        {ds.registry.user_count(), ds.registry.item_count(), 0}, cfg.dim, cfg.seed);
  } else {
    cfg.mode = hago::mode_from_name(mode);
    cfg.sync_seeds();
    auto pre = stage_pretrain(ds, cfg, nullptr);
    store = std::move(pre.store);
  }
  auto result = stage_transfer(ds, split, std::move(store), cfg, nullptr);
  return hago::evaluate(result.model, split, cfg.eval_k, hago::EvalPhase::Test);
}

int cmd_ablate(const hago::RunConfig& cfg, const std::vector<std::string>& modes,
               const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  if (modes.empty() || seeds.empty()) {
    throw hago::input_error("ablate: need at least one mode and one seed");
  }
  auto ds = hago::load_dataset(cfg.dataset_dir);
  write_run_manifest(cfg);

  std::vector<AblationCell> cells(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    cells[m].mode = modes[m];
    cells[m].runs.resize(seeds.size());
  }
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (std::size_t s = 0; s < seeds.size(); ++s) tasks.emplace_back(m, s);
  }

  std::mutex mu;
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      auto [m, s] = tasks[t];
      try {
        auto report = ablation_run(ds, cfg, modes[m], seeds[s]);
        std::lock_guard<std::mutex> lock(mu);
        cells[m].runs[s] = std::move(report);
        std::printf("run mode=%s seed=%llu recall@%zu=%.4f\n", modes[m].c_str(),
                    static_cast<unsigned long long>(seeds[s]), cfg.eval_k,
                    cells[m].runs[s].recall);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        cells[m].failed = true;
        std::fprintf(stderr, "run mode=%s seed=%llu FAILED: %s\n", modes[m].c_str(),
                     static_cast<unsigned long long>(seeds[s]), e.what());
      }
    }
  };
  if (jobs <= 1) {
    worker(0, tasks.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (tasks.size() + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(tasks.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    if (xs.size() > 1) var /= static_cast<double>(xs.size() - 1);
    return std::make_pair(mean, std::sqrt(var));
  };

  json table = json::array();
  std::ofstream csv(fs::path(cfg.out_dir) / "reports" / "ablation.csv", std::ios::trunc);
  csv << "mode,runs,failed,recall_mean,recall_std,hr_mean,hr_std,ndcg_mean,ndcg_std,mrr_mean,"
         "mrr_std\n";
  bool any_failed = false;
  for (const auto& cell : cells) {
    json row;
    row["mode"] = cell.mode;
    row["seeds"] = seeds;
    row["failed"] = cell.failed;
    any_failed = any_failed || cell.failed;
    if (!cell.failed) {
      std::vector<double> recall, hr, ndcg, mrr;
      for (const auto& r : cell.runs) {
        recall.push_back(r.recall);
        hr.push_back(r.hr);
        ndcg.push_back(r.ndcg);
        mrr.push_back(r.mrr);
      }
      auto [rm, rs] = mean_std(recall);
      auto [hm, hs] = mean_std(hr);
      auto [nm, ns] = mean_std(ndcg);
      auto [mm, ms] = mean_std(mrr);
      row["recall"] = {{"mean", rm}, {"std", rs}};
      row["hr"] = {{"mean", hm}, {"std", hs}};
      row["ndcg"] = {{"mean", nm}, {"std", ns}};
      row["mrr"] = {{"mean", mm}, {"std", ms}};
      csv << cell.mode << "," << seeds.size() << ",0," << rm << "," << rs << "," << hm << ","
          << hs << "," << nm << "," << ns << "," << mm << "," << ms << "\n";
      std::printf("%-9s recall=%.4f±%.4f hr=%.4f±%.4f ndcg=%.4f±%.4f mrr=%.4f±%.4f\n",
                  cell.mode.c_str(), rm, rs, hm, hs, nm, ns, mm, ms);
    } else {
      csv << cell.mode << "," << seeds.size() << ",1,,,,,,,,\n";
      std::printf("%-9s FAILED\n", cell.mode.c_str());
    }
    table.push_back(row);
  }
  std::ofstream js(fs::path(cfg.out_dir) / "reports" / "ablation.json", std::ios::trunc);
  js << table.dump(2) << "\n";
  return any_failed ? 1 : kExitOk;
}

// Suggest near-miss raw IDs for a failed item lookup.
std::vector<std::string> near_miss_ids(const json& items, const std::string& query,
                                       std::size_t limit) {
  std::vector<std::string> out;
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  std::string q = lower(query);
  for (const auto& item : items) {
    std::string raw = item.at("raw").get<std::string>();
    std::string l = lower(raw);
    if (l.find(q) != std::string::npos || q.find(l) != std::string::npos) {
      out.push_back(item.at("domain").get<std::string>() + "/" + raw);
      if (out.size() >= limit) break;
    }
  }
  return out;
}

int cmd_analyze_neighbors(const std::string& ckpt_path, const std::string& item_raw,
                          const std::string& from_domain, const std::string& to_domain,
                          std::size_t k, const std::string& out_path) {
  auto ckpt = hago::load_checkpoint(ckpt_path);
  auto it = ckpt.tables.find("items");
  if (it == ckpt.tables.end()) throw hago::artifact_error("checkpoint has no item table");
  const auto& items_json = ckpt.sidecar.at("ids").at("items");

  std::int64_t query_row = -1;
  for (std::size_t row = 0; row < items_json.size(); ++row) {
    if (items_json[row].at("raw").get<std::string>() != item_raw) continue;
    if (!from_domain.empty() && items_json[row].at("domain").get<std::string>() != from_domain) {
      continue;
    }
    query_row = static_cast<std::int64_t>(row);
    break;
  }
  if (query_row < 0) {
    std::string msg = "unknown item ID '" + item_raw + "'";
    auto near = near_miss_ids(items_json, item_raw, 5);
    if (!near.empty()) {
      msg += "; near misses:";
      for (const auto& n : near) msg += " " + n;
    }
    throw hago::query_error(msg);
  }

  std::vector<std::uint32_t> candidates;
  for (std::size_t row = 0; row < items_json.size(); ++row) {
    if (items_json[row].at("domain").get<std::string>() == to_domain) {
      candidates.push_back(static_cast<std::uint32_t>(row));
    }
  }
  if (candidates.empty()) throw hago::query_error("no items in domain '" + to_domain + "'");

  auto hits = hago::cross_domain_neighbors(it->second, static_cast<std::uint32_t>(query_row),
                                           candidates, k);
  std::ofstream os;
  if (!out_path.empty()) {
    os.open(out_path, std::ios::trunc);
    os << "rank,domain,item,similarity\n";
  }
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const auto& item = items_json[hits[r].item_row];
    std::printf("%zu\t%s/%s\t%.6f\n", r + 1, item.at("domain").get<std::string>().c_str(),
                item.at("raw").get<std::string>().c_str(), hits[r].similarity);
    if (os.is_open()) {
      os << (r + 1) << "," << item.at("domain").get<std::string>() << ","
         << item.at("raw").get<std::string>() << "," << hits[r].similarity << "\n";
    }
  }
  return kExitOk;
}

int cmd_analyze_angles(const std::string& ckpt_path, std::size_t bins, std::size_t sample,
                       std::uint64_t seed, const std::string& out_path) {
  auto ckpt = hago::load_checkpoint(ckpt_path);
  auto it = ckpt.tables.find("items");
  if (it == ckpt.tables.end()) throw hago::artifact_error("checkpoint has no item table");
  const auto& items_json = ckpt.sidecar.at("ids").at("items");

  std::map<std::string, std::vector<std::uint32_t>> by_domain;
  for (std::size_t row = 0; row < items_json.size(); ++row) {
    by_domain[items_json[row].at("domain").get<std::string>()].push_back(
        static_cast<std::uint32_t>(row));
  }
  std::vector<hago::AngleAnalysisInput> inputs;
  for (auto& [domain, rows] : by_domain) inputs.push_back({domain, std::move(rows)});

  auto dists = hago::angle_distribution(it->second, inputs, sample, bins, seed);

  std::ofstream os;
  if (!out_path.empty()) {
    os.open(out_path, std::ios::trunc);
    os << "bin_center,count,domain\n";
  }
  const double pi = 3.14159265358979323846;
  for (const auto& dist : dists) {
    for (std::size_t b = 0; b < dist.histogram.size(); ++b) {
      double center = -pi + (static_cast<double>(b) + 0.5) * 2 * pi /
                                static_cast<double>(dist.histogram.size());
      if (os.is_open()) os << center << "," << dist.histogram[b] << "," << dist.domain << "\n";
    }
    std::printf("%-12s sampled=%zu resultant_length=%.6f\n", dist.domain.c_str(), dist.sampled,
                dist.resultant_length);
  }
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"multi-domain graph recommendation toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-domain dataset");
  hago::SynthParams sp;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--users", sp.users, "user count");
  synth->add_option("--items", sp.items_per_domain, "items per domain");
  synth->add_option("--sources", sp.source_domains, "source domain count");
  synth->add_option("--rank", sp.latent_rank, "latent factor rank");
  synth->add_option("--source-density", sp.source_density, "source interaction density");
  synth->add_option("--target-density", sp.target_density, "target interaction density");
  synth->add_option("--noise", sp.noise, "logit noise stddev");
  synth->add_option("--seed", sp.seed, "seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "build a dataset directory from interaction logs");
  std::vector<std::string> ing_domains, ing_inputs;
  std::string ing_target, ing_format = "tsv", ing_out;
  std::uint64_t ing_seed = 42;
  ingest->add_option("--domain", ing_domains, "domain name (repeatable)");
  ingest->add_option("--input", ing_inputs, "interaction file (repeatable, pairs with --domain)");
  ingest->add_option("--target", ing_target, "target domain name")
      ->expected(0, 1)
      ->default_str("");
  ingest->add_option("--format", ing_format, "tsv|csv");
  ingest->add_option("--out", ing_out, "dataset output directory")->required();
  ingest->add_option("--seed", ing_seed, "seed recorded in the manifest");

  // stage commands
  CommonFlags pre_flags, tr_flags, ev_flags, ab_flags;
  auto* pretrain = app.add_subcommand("pretrain", "multi-domain contrastive pre-training");
  add_common_flags(pretrain, pre_flags);
  auto* transfer = app.add_subcommand("transfer", "prompt fine-tuning on the target domain");
  add_common_flags(transfer, tr_flags);
  auto* evaluate = app.add_subcommand("evaluate", "full-ranking Top-K evaluation");
  add_common_flags(evaluate, ev_flags);
  std::string phase = "test";
  evaluate->add_option("--phase", phase, "test|valid");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the coordinator-strategy comparison");
  add_common_flags(ablate, ab_flags);
  std::vector<std::string> ab_modes;
  std::vector<std::uint64_t> ab_seeds;
  unsigned ab_jobs = 1;
  ablate->add_option("--modes", ab_modes, "backbone|none|homogo|hetergo|hago (repeatable/CSV)")
      ->delimiter(',');
  ablate->add_option("--seeds", ab_seeds, "seeds (repeatable/CSV)")->delimiter(',');
  ablate->add_option("--jobs", ab_jobs, "parallel runs (opt-in)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "embedding analyses over a checkpoint");
  analyze->require_subcommand(1);
  auto* neighbors = analyze->add_subcommand("neighbors", "cross-domain nearest items by cosine");
  std::string an_ckpt, an_item, an_from, an_to, an_out;
  std::size_t an_k = 3;
  neighbors->add_option("--ckpt", an_ckpt, "pre-training checkpoint")->required();
  neighbors->add_option("--item", an_item, "raw item ID")->required();
  neighbors->add_option("--from", an_from, "domain of the query item (optional)");
  neighbors->add_option("--to", an_to, "domain to search")->required();
  neighbors->add_option("-k,--k", an_k, "neighbor count");
  neighbors->add_option("--out", an_out, "CSV output path");
  auto* angles = analyze->add_subcommand("angles", "angle distribution of item embeddings");
  std::string ang_ckpt, ang_out;
  std::size_t ang_bins = 64, ang_sample = 2000;
  std::uint64_t ang_seed = 42;
  angles->add_option("--ckpt", ang_ckpt, "pre-training checkpoint")->required();
  angles->add_option("--bins", ang_bins, "histogram bins");
  angles->add_option("--sample", ang_sample, "items sampled per domain");
  angles->add_option("--seed", ang_seed, "sampling seed");
  angles->add_option("--out", ang_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (synth->parsed()) return cmd_synth(sp, synth_out);
  if (ingest->parsed()) {
    return cmd_ingest(ing_domains, ing_inputs, ing_target, ing_format, ing_out, ing_seed);
  }
  if (pretrain->parsed()) return cmd_pretrain(resolve_config(pre_flags));
  if (transfer->parsed()) return cmd_transfer(resolve_config(tr_flags));
  if (evaluate->parsed()) return cmd_evaluate(resolve_config(ev_flags), phase);
  if (ablate->parsed()) return cmd_ablate(resolve_config(ab_flags), ab_modes, ab_seeds, ab_jobs);
  if (analyze->parsed()) {
    if (neighbors->parsed()) {
      return cmd_analyze_neighbors(an_ckpt, an_item, an_from, an_to, an_k, an_out);
    }
    return cmd_analyze_angles(ang_ckpt, ang_bins, ang_sample, ang_seed, ang_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const hago::input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const hago::artifact_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArtifact;
  } catch (const hago::query_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitQuery;
  } catch (const hago::numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
