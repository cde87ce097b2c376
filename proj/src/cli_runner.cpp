#include "htsc/cli_runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "htsc/cluster.hpp"
#include "htsc/dataset_io.hpp"
#include "htsc/errors.hpp"
#include "htsc/forecast.hpp"
#include "htsc/metrics.hpp"
#include "htsc/model_io.hpp"
#include "htsc/parallel.hpp"
#include "htsc/synth.hpp"

namespace htsc::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string hash_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const fs::path& path) { return hash_bytes(read_file(path)); }

/// Manifest embedded in every artifact: command, config and input hashes.
/// Contains no timestamps, so reruns with the same seed are byte-identical.
json make_manifest(const std::string& command, const json& config, const json& inputs) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = config;
  m["inputs"] = inputs;
  return m;
}

void write_json_artifact(const fs::path& path, json body, const json& manifest) {
  body["manifest"] = manifest;
  body["manifest_hash"] = hash_bytes(manifest.dump());
  write_file_atomic(path, body.dump(2));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

/// "l1=4,l2=6" or "1=4,2=6".
std::map<int, int> parse_k_per_level(const std::string& s) {
  std::map<int, int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw DataError("bad --k-per-level entry: " + tok);
    std::string key = tok.substr(0, eq);
    if (!key.empty() && (key[0] == 'l' || key[0] == 'L')) key = key.substr(1);
    out[std::stoi(key)] = std::stoi(tok.substr(eq + 1));
  }
  if (out.empty()) throw DataError("empty --k-per-level");
  return out;
}

struct CommonFlags {
  std::string input;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config_file;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_input) {
  if (needs_input)
    cmd->add_option("--input", f.input, "input dataset file (.json or .csv)")->required();
  cmd->add_option("--output-dir", f.output_dir, "output directory");
  cmd->add_option("--seed", f.seed, "master seed; all stages derive substreams from it");
  cmd->add_option("--threads", f.threads, "worker threads (0 = logical cores)");
  cmd->add_option("--config", f.config_file,
                  "JSON config file; precedence: flag > config > default");
}

/// Flag > config-file > default resolution for one key.
template <typename T>
void overlay(const CLI::App* cmd, const std::string& flag, const json& cfg,
             const std::string& key, T& value) {
  if (cmd->count(flag) > 0) return;  // explicit flag wins
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(std::string("config parse error: ") + e.what());
  }
}

struct ClusterFlags {
  std::string mode = "multilevel";
  std::string k_per_level;
  double gamma = 1.0;
  double epsilon = 0.0;
  double merge_eps = -1.0;
  int remove_eps = 1;
  bool no_postprocess = false;
  int max_outer = 100;
  double fuzziness = 2.0;
  int cost_power = 1;
};

void add_cluster_flags(CLI::App* cmd, ClusterFlags& f) {
  cmd->add_option("--mode", f.mode, "multilevel | two-level-alt | levelwise");
  cmd->add_option("--k-per-level", f.k_per_level, "cluster counts, e.g. l1=4,l2=8")
      ->required();
  cmd->add_option("--gamma", f.gamma, "soft-DTW smoothing");
  cmd->add_option("--epsilon", f.epsilon, "Sinkhorn regularization (0 = exact)");
  cmd->add_option("--merge-eps", f.merge_eps,
                  "merge threshold (<0 = 0.01 * median centroid distance)");
  cmd->add_option("--remove-eps", f.remove_eps, "drop clusters of size <= this");
  cmd->add_flag("--no-postprocess", f.no_postprocess, "skip merge/remove");
  cmd->add_option("--max-outer", f.max_outer, "outer iteration cap");
  cmd->add_option("--fuzziness", f.fuzziness, "fuzzy weight exponent parameter");
  cmd->add_option("--cost-power", f.cost_power, "ground cost power (1 or 2)");
}

ClusterConfig build_cluster_config(const CLI::App* cmd, const ClusterFlags& f,
                                   const json& file_cfg, std::uint64_t seed) {
  ClusterFlags r = f;
  overlay(cmd, "--mode", file_cfg, "mode", r.mode);
  overlay(cmd, "--gamma", file_cfg, "gamma", r.gamma);
  overlay(cmd, "--epsilon", file_cfg, "epsilon", r.epsilon);
  overlay(cmd, "--merge-eps", file_cfg, "merge_eps", r.merge_eps);
  overlay(cmd, "--remove-eps", file_cfg, "remove_eps", r.remove_eps);
  overlay(cmd, "--max-outer", file_cfg, "max_outer_iter", r.max_outer);
  overlay(cmd, "--fuzziness", file_cfg, "fuzziness", r.fuzziness);
  overlay(cmd, "--cost-power", file_cfg, "cost_power", r.cost_power);

  ClusterConfig cfg;
  cfg.k_per_level = parse_k_per_level(r.k_per_level);
  cfg.sdtw.gamma = r.gamma;
  cfg.ot.epsilon = r.epsilon;
  cfg.ot.cost_power = r.cost_power;
  cfg.max_outer_iter = r.max_outer;
  cfg.seed = seed;
  cfg.fuzziness = r.fuzziness;
  cfg.merge_eps = r.merge_eps;
  cfg.remove_eps = r.remove_eps;
  cfg.postprocess = !r.no_postprocess;
  return cfg;
}

json cluster_flags_to_json(const ClusterConfig& cfg, const std::string& mode) {
  json j;
  j["mode"] = mode;
  json k = json::object();
  for (const auto& [level, kk] : cfg.k_per_level) k[std::to_string(level)] = kk;
  j["k_per_level"] = std::move(k);
  j["gamma"] = cfg.sdtw.gamma;
  j["epsilon"] = cfg.ot.epsilon;
  j["cost_power"] = cfg.ot.cost_power;
  j["merge_eps"] = cfg.merge_eps;
  j["remove_eps"] = cfg.remove_eps;
  j["postprocess"] = cfg.postprocess;
  j["max_outer_iter"] = cfg.max_outer_iter;
  j["fuzziness"] = cfg.fuzziness;
  j["seed"] = cfg.seed;
  return j;
}

ClusterRunResult run_clustering(const HtsDataset& ds, const ClusterConfig& cfg,
                                const std::string& mode) {
  ClusterMode m = cluster_mode_from_string(mode);
  switch (m) {
    case ClusterMode::two_level_alt: {
      auto k1 = cfg.k_per_level.find(1);
      auto k2 = cfg.k_per_level.find(2);
      if (k1 == cfg.k_per_level.end() || k2 == cfg.k_per_level.end())
        throw DataError("two-level-alt needs k for levels 1 and 2");
      return two_level_alternating(ds, k1->second, k2->second, cfg);
    }
    case ClusterMode::levelwise:
      return cluster_levelwise(ds, cfg);
    case ClusterMode::multilevel:
    default:
      return cluster_hts(ds, cfg);
  }
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const CLI::App* cmd, const CommonFlags& common, const SynthConfig& scfg_in,
                 const std::string& offsets_str, const std::string& branching_str) {
  SynthConfig scfg = scfg_in;
  json file_cfg = load_config_file(common.config_file);
  if (!offsets_str.empty()) scfg.offsets = parse_double_list(offsets_str);
  if (!branching_str.empty()) scfg.branching = parse_int_list(branching_str);
  overlay(cmd, "--instances-per-cluster", file_cfg, "instances_per_cluster",
          scfg.instances_per_cluster);
  overlay(cmd, "--length-min", file_cfg, "length_min", scfg.length_min);
  overlay(cmd, "--length-max", file_cfg, "length_max", scfg.length_max);
  overlay(cmd, "--noise-std", file_cfg, "noise_std", scfg.noise_std);
  scfg.seed = common.seed;

  Benchmark bench = generate_benchmark(scfg);

  json cfg_json;
  cfg_json["offsets"] = scfg.offsets;
  cfg_json["instances_per_cluster"] = scfg.instances_per_cluster;
  cfg_json["length_min"] = scfg.length_min;
  cfg_json["length_max"] = scfg.length_max;
  cfg_json["branching"] = scfg.branching;
  cfg_json["noise_std"] = scfg.noise_std;
  cfg_json["burn_in"] = scfg.burn_in;
  cfg_json["seed"] = scfg.seed;
  json manifest = make_manifest("simulate", cfg_json, json::object());

  fs::create_directories(common.output_dir);
  fs::path ds_path = fs::path(common.output_dir) / "dataset.json";
  write_json_artifact(ds_path, json::parse(dataset_to_json(bench.dataset)), manifest);

  json labels;
  labels["levels"] = bench.dataset.levels;
  json per_level = json::object();
  for (const auto& [level, vec] : bench.labels) per_level[std::to_string(level)] = vec;
  labels["labels"] = std::move(per_level);
  write_json_artifact(fs::path(common.output_dir) / "labels.json", labels, manifest);
  std::cout << "wrote " << ds_path.string() << " (" << bench.dataset.instances.size()
            << " instances, " << bench.dataset.levels << " levels)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cluster

int cmd_cluster(const CLI::App* cmd, const CommonFlags& common, const ClusterFlags& flags) {
  json file_cfg = load_config_file(common.config_file);
  ClusterConfig cfg = build_cluster_config(cmd, flags, file_cfg, common.seed);
  std::string mode = flags.mode;
  overlay(cmd, "--mode", file_cfg, "mode", mode);

  HtsDataset ds = load_dataset(common.input);
  std::string ds_hash = hash_file(common.input);

  ClusterRunResult result = run_clustering(ds, cfg, mode);

  json inputs;
  inputs["dataset"] = common.input;
  inputs["dataset_hash"] = ds_hash;
  json manifest = make_manifest("cluster", cluster_flags_to_json(cfg, mode), inputs);

  fs::create_directories(common.output_dir);
  write_json_artifact(fs::path(common.output_dir) / "model.json",
                      json::parse(model_to_json(result.model)), manifest);

  json traces;
  for (const auto& [level, lm] : result.model.per_level) {
    json t;
    t["loss_trace"] = lm.loss_trace;
    t["post_trace"] = lm.post_trace;
    t["events"] = lm.events;
    t["k"] = lm.k;
    traces[std::to_string(level)] = std::move(t);
  }
  write_json_artifact(fs::path(common.output_dir) / "loss_trace.json",
                      json{{"levels", std::move(traces)}}, manifest);

  json timing;
  for (const auto& [level, ms] : result.level_wall_ms)
    timing[std::to_string(level)] = ms;
  write_file_atomic(fs::path(common.output_dir) / "timing.json",
                    json{{"wall_ms_per_level", timing}}.dump(2));
  std::cout << "wrote " << (fs::path(common.output_dir) / "model.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

std::map<int, std::vector<int>> load_labels(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(std::string("labels parse error: ") + e.what());
  }
  if (!j.contains("labels")) throw DataError("labels file missing 'labels'");
  std::map<int, std::vector<int>> out;
  for (const auto& [key, vec] : j.at("labels").items())
    out[std::stoi(key)] = vec.get<std::vector<int>>();
  return out;
}

struct LevelScores {
  double nmi = 0.0, ami = 0.0, ari = 0.0;
};

std::map<int, LevelScores> score_model(const MultiLevelClusterModel& model,
                                       const std::map<int, std::vector<int>>& labels) {
  std::map<int, LevelScores> out;
  for (const auto& [level, lm] : model.per_level) {
    auto it = labels.find(level);
    if (it == labels.end())
      throw DataError("labels incomplete: no labels for level " + std::to_string(level));
    if (it->second.size() != lm.assignment.size())
      throw DataError("labels incomplete: level " + std::to_string(level) +
                      " covers " + std::to_string(it->second.size()) + " of " +
                      std::to_string(lm.assignment.size()) + " nodes");
    metrics::Partition truth{it->second};
    metrics::Partition predicted{lm.assignment};
    out[level] = {metrics::nmi(truth, predicted), metrics::ami(truth, predicted),
                  metrics::ari(truth, predicted)};
  }
  return out;
}

void check_model_matches_dataset(const json& model_file, const std::string& ds_hash) {
  if (!model_file.contains("manifest")) return;  // hand-built model, nothing to check
  const json& manifest = model_file.at("manifest");
  if (manifest.contains("inputs") && manifest.at("inputs").contains("dataset_hash")) {
    if (manifest.at("inputs").at("dataset_hash").get<std::string>() != ds_hash)
      throw DataError("model/dataset mismatch: the model was fit on different data");
  }
}

int cmd_evaluate(const CLI::App* cmd, const CommonFlags& common, const ClusterFlags& flags,
                 const std::string& labels_path, const std::string& model_path,
                 int repeats) {
  auto labels = load_labels(labels_path);
  std::string ds_hash = hash_file(common.input);

  json out;
  json inputs;
  inputs["dataset"] = common.input;
  inputs["dataset_hash"] = ds_hash;
  inputs["labels"] = labels_path;

  if (!model_path.empty()) {
    json model_file = json::parse(read_file(model_path));
    check_model_matches_dataset(model_file, ds_hash);
    MultiLevelClusterModel model = model_from_json(read_file(model_path));
    auto scores = score_model(model, labels);
    json levels = json::object();
    for (const auto& [level, s] : scores) {
      levels[std::to_string(level)] = {
          {"nmi", {{"mean", s.nmi}, {"std", 0.0}}},
          {"ami", {{"mean", s.ami}, {"std", 0.0}}},
          {"ari", {{"mean", s.ari}, {"std", 0.0}}}};
    }
    out["levels"] = std::move(levels);
    out["repeats"] = 1;
    inputs["model"] = model_path;
  } else {
    // Re-run clustering `repeats` times on derived seeds and report
    // mean +- sample std per level and metric, plus mean stage wall time.
    json file_cfg = load_config_file(common.config_file);
    ClusterConfig base_cfg = build_cluster_config(cmd, flags, file_cfg, common.seed);
    std::string mode = flags.mode;
    overlay(cmd, "--mode", file_cfg, "mode", mode);
    HtsDataset ds = load_dataset(common.input);

    std::map<int, std::vector<LevelScores>> all;
    std::map<int, std::vector<double>> wall;
    for (int r = 0; r < repeats; ++r) {
      ClusterConfig cfg = base_cfg;
      cfg.seed = derive_seed(common.seed, "repeat", static_cast<std::uint64_t>(r));
      ClusterRunResult res = run_clustering(ds, cfg, mode);
      auto scores = score_model(res.model, labels);
      for (const auto& [level, s] : scores) all[level].push_back(s);
      for (const auto& [level, ms] : res.level_wall_ms)
        wall[level].push_back(static_cast<double>(ms));
    }
    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      double std_ = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair<double, double>(mean, std_);
    };
    json levels = json::object();
    for (const auto& [level, scores] : all) {
      std::vector<double> nmi_v, ami_v, ari_v;
      for (const auto& s : scores) {
        nmi_v.push_back(s.nmi);
        ami_v.push_back(s.ami);
        ari_v.push_back(s.ari);
      }
      auto [nm, ns] = mean_std(nmi_v);
      auto [am, as_] = mean_std(ami_v);
      auto [rm, rs] = mean_std(ari_v);
      levels[std::to_string(level)] = {{"nmi", {{"mean", nm}, {"std", ns}}},
                                       {"ami", {{"mean", am}, {"std", as_}}},
                                       {"ari", {{"mean", rm}, {"std", rs}}}};
    }
    json wall_json = json::object();
    for (const auto& [level, v] : wall) wall_json[std::to_string(level)] = mean_std(v).first;
    out["levels"] = std::move(levels);
    out["wall_ms_per_level"] = std::move(wall_json);
    out["repeats"] = repeats;
    inputs["mode"] = mode;
  }

  json manifest = make_manifest("evaluate", json::object(), inputs);
  fs::create_directories(common.output_dir);
  fs::path out_path = fs::path(common.output_dir) / "metrics.json";
  write_json_artifact(out_path, out, manifest);
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// forecast

HtsDataset truncate_dataset(const HtsDataset& ds, std::vector<int>& horizons) {
  HtsDataset out = ds;
  horizons.resize(ds.instances.size());
  for (std::size_t j = 0; j < out.instances.size(); ++j) {
    auto& inst = out.instances[j];
    const int n = static_cast<int>(inst.series.front().length());
    SplitSizes s = split_sizes(n);
    horizons[j] = s.test;
    const int keep = n - s.test;
    for (auto& ts : inst.series)
      ts.values.resize(static_cast<std::size_t>(keep));
  }
  return out;
}

std::map<int, double> level_mase(const HtsDataset& full, const HtsDataset& history,
                                 const ForecastResult& res) {
  std::map<int, double> sums;
  std::map<int, int> counts;
  for (int l = 1; l <= full.levels; ++l) {
    for (const auto& e : level_series(full, l)) {
      const auto& actual_full = e.series->values;
      const auto& hist = history.instances[e.instance].series[e.node].values;
      const auto& fc = res.forecasts[e.instance][e.node].values;
      std::vector<double> actual(actual_full.begin() + hist.size(), actual_full.end());
      sums[l] += mase(actual, fc, hist);
      counts[l] += 1;
    }
  }
  std::map<int, double> out;
  for (const auto& [l, s] : sums) out[l] = s / counts[l];
  return out;
}

int cmd_forecast(const CLI::App* cmd, const CommonFlags& common, const ClusterFlags& flags,
                 const std::string& model_path, int horizon, bool holdout,
                 bool baseline) {
  HtsDataset ds = load_dataset(common.input);
  std::string ds_hash = hash_file(common.input);
  json file_cfg = load_config_file(common.config_file);
  double fuzziness = flags.fuzziness;
  overlay(cmd, "--fuzziness", file_cfg, "fuzziness", fuzziness);
  const bool fuzziness_pinned = cmd->count("--fuzziness") > 0 || file_cfg.contains("fuzziness");

  ForecastResult res;
  std::map<int, double> mase_by_level;
  long long cluster_ms = 0;
  HtsDataset history;
  std::vector<int> horizons;
  Ar2Forecaster ar2;

  if (holdout) {
    history = truncate_dataset(ds, horizons);
    if (baseline) {
      res = forecast_per_series(history, ar2, horizons);
    } else {
      ClusterConfig cfg = build_cluster_config(cmd, flags, file_cfg, common.seed);
      std::string mode = flags.mode;
      overlay(cmd, "--mode", file_cfg, "mode", mode);
      auto t0 = std::chrono::steady_clock::now();
      ClusterRunResult run = run_clustering(history, cfg, mode);
      cluster_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
      res = forecast_with_clusters(history, run.model, ar2, horizons, fuzziness);
    }
    mase_by_level = level_mase(ds, history, res);
  } else {
    history = ds;
    horizons.assign(ds.instances.size(), horizon);
    if (baseline) {
      res = forecast_per_series(ds, ar2, horizons);
    } else {
      if (model_path.empty())
        throw DataError("forecast: --model is required without --holdout");
      json model_file = json::parse(read_file(model_path));
      check_model_matches_dataset(model_file, ds_hash);
      MultiLevelClusterModel model = model_from_json(read_file(model_path));
      // The model's stored fuzziness applies unless overridden explicitly.
      double m = fuzziness_pinned ? fuzziness : model.config.fuzziness;
      res = forecast_with_clusters(ds, model, ar2, horizons, m);
    }
  }

  // forecasts.csv: t is the 0-based absolute time index of the step.
  std::ostringstream csv;
  csv << "instance_id,node_id,t,forecast\n";
  for (std::size_t j = 0; j < ds.instances.size(); ++j) {
    const auto& inst = ds.instances[j];
    const std::size_t start = history.instances[j].series.front().length();
    for (int i = 0; i < inst.hierarchy.node_count; ++i) {
      const auto& fc = res.forecasts[j][i].values;
      for (std::size_t t = 0; t < fc.size(); ++t) {
        csv << inst.id << ',' << inst.series[i].id << ',' << (start + t) << ','
            << format_double(fc[t]) << '\n';
      }
    }
  }
  fs::create_directories(common.output_dir);
  write_file_atomic(fs::path(common.output_dir) / "forecasts.csv", csv.str());

  json timing;
  timing["fits"] = res.report.fits;
  timing["wall_ms"] = res.report.wall_ms;
  if (cluster_ms > 0) timing["cluster_ms"] = cluster_ms;
  json mase_json = json::object();
  for (const auto& [l, v] : mase_by_level) mase_json[std::to_string(l)] = v;
  timing["mase_per_level"] = std::move(mase_json);
  write_file_atomic(fs::path(common.output_dir) / "timing.json", timing.dump(2));
  std::cout << "wrote " << (fs::path(common.output_dir) / "forecasts.csv").string()
            << " (" << res.report.fits << " fits)\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"hierarchical time-series clustering and cluster-driven forecasting"};
  app.require_subcommand(1);

  CommonFlags sim_common, clu_common, eva_common, fore_common;
  SynthConfig scfg;
  std::string offsets_str, branching_str;
  ClusterFlags clu_flags, eva_flags, fore_flags;
  std::string eva_labels, eva_model, fore_model;
  int eva_repeats = 1;
  int fore_horizon = 12;
  bool fore_holdout = false, fore_baseline = false;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic benchmark");
  add_common(sim, sim_common, false);
  sim->add_option("--offsets", offsets_str, "per-cluster offsets, e.g. 0,8,16,24");
  sim->add_option("--instances-per-cluster", scfg.instances_per_cluster);
  sim->add_option("--length-min", scfg.length_min);
  sim->add_option("--length-max", scfg.length_max);
  sim->add_option("--branching", branching_str, "children per level, e.g. 3,3,2");
  sim->add_option("--noise-std", scfg.noise_std);

  auto* clu = app.add_subcommand("cluster", "fit a hierarchical clustering model");
  add_common(clu, clu_common, true);
  add_cluster_flags(clu, clu_flags);

  auto* eva = app.add_subcommand("evaluate", "score a model against true labels");
  add_common(eva, eva_common, true);
  eva->add_option("--labels", eva_labels, "labels sidecar JSON")->required();
  eva->add_option("--model", eva_model, "model file (omit to rerun clustering)");
  eva->add_option("--repeats", eva_repeats, "clustering reruns over derived seeds");
  add_cluster_flags(eva, eva_flags);
  // k-per-level is only needed when re-clustering.
  eva->get_option("--k-per-level")->required(false);

  auto* fore = app.add_subcommand("forecast", "forecast via cluster means");
  add_common(fore, fore_common, true);
  fore->add_option("--model", fore_model, "model file (plain mode)");
  fore->add_option("--horizon", fore_horizon, "steps past the end of each series");
  fore->add_flag("--holdout", fore_holdout,
                 "split 0.6/0.2/0.2, forecast the test segment and report MASE");
  fore->add_flag("--baseline", fore_baseline, "per-series pipeline (no clustering)");
  add_cluster_flags(fore, fore_flags);
  fore->get_option("--k-per-level")->required(false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) {
      set_thread_count(sim_common.threads);
      return cmd_simulate(sim, sim_common, scfg, offsets_str, branching_str);
    }
    if (clu->parsed()) {
      set_thread_count(clu_common.threads);
      return cmd_cluster(clu, clu_common, clu_flags);
    }
    if (eva->parsed()) {
      set_thread_count(eva_common.threads);
      if (eva_model.empty() && eva_flags.k_per_level.empty())
        throw DataError("evaluate: need --model or --k-per-level for re-clustering");
      return cmd_evaluate(eva, eva_common, eva_flags, eva_labels, eva_model, eva_repeats);
    }
    if (fore->parsed()) {
      set_thread_count(fore_common.threads);
      if (!fore_holdout && !fore_baseline && fore_model.empty())
        throw DataError("forecast: --model is required without --holdout");
      if (fore_holdout && !fore_baseline && fore_flags.k_per_level.empty())
        throw DataError("forecast --holdout: --k-per-level is required to cluster");
      return cmd_forecast(fore, fore_common, fore_flags, fore_model, fore_horizon,
                          fore_holdout, fore_baseline);
    }
    return 1;
  } catch (const SolverError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "numerical"}}.dump() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "data"}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "internal"}}.dump() << "\n";
    return 2;
  }
}

}  // namespace htsc::cli
