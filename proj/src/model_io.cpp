#include "htsc/model_io.hpp"

#include <json.hpp>

#include "htsc/errors.hpp"

namespace htsc {

using nlohmann::json;

namespace {

json series_to_json(const TimeSeries& ts) {
  return json{{"id", ts.id}, {"values", ts.values}};
}

TimeSeries series_from_json(const json& j) {
  TimeSeries ts;
  ts.id = j.value("id", std::string());
  ts.values = j.at("values").get<std::vector<double>>();
  return ts;
}

json config_to_json(const ClusterConfig& cfg) {
  json k = json::object();
  for (const auto& [level, kk] : cfg.k_per_level) k[std::to_string(level)] = kk;
  json j;
  j["k_per_level"] = std::move(k);
  j["gamma"] = cfg.sdtw.gamma;
  if (cfg.sdtw.band) j["band"] = *cfg.sdtw.band;
  j["epsilon"] = cfg.ot.epsilon;
  j["ot_max_iter"] = cfg.ot.max_iter;
  j["ot_tol"] = cfg.ot.tol;
  j["cost_power"] = cfg.ot.cost_power;
  j["mean_max_iter"] = cfg.mean.max_iter;
  j["mean_rel_tol"] = cfg.mean.rel_tol;
  j["barycenter_max_outer"] = cfg.barycenter.max_outer;
  j["max_outer_iter"] = cfg.max_outer_iter;
  j["seed"] = cfg.seed;
  j["fuzziness"] = cfg.fuzziness;
  j["merge_eps"] = cfg.merge_eps;
  j["remove_eps"] = cfg.remove_eps;
  j["postprocess"] = cfg.postprocess;
  j["boundary_ratio"] = cfg.boundary_ratio;
  return j;
}

ClusterConfig config_from_json(const json& j) {
  ClusterConfig cfg;
  for (const auto& [key, value] : j.at("k_per_level").items())
    cfg.k_per_level[std::stoi(key)] = value.get<int>();
  cfg.sdtw.gamma = j.at("gamma").get<double>();
  if (j.contains("band")) cfg.sdtw.band = j.at("band").get<int>();
  cfg.ot.epsilon = j.at("epsilon").get<double>();
  cfg.ot.max_iter = j.at("ot_max_iter").get<int>();
  cfg.ot.tol = j.at("ot_tol").get<double>();
  cfg.ot.cost_power = j.at("cost_power").get<int>();
  cfg.mean.max_iter = j.at("mean_max_iter").get<int>();
  cfg.mean.rel_tol = j.at("mean_rel_tol").get<double>();
  cfg.barycenter.max_outer = j.at("barycenter_max_outer").get<int>();
  cfg.max_outer_iter = j.at("max_outer_iter").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.fuzziness = j.at("fuzziness").get<double>();
  cfg.merge_eps = j.at("merge_eps").get<double>();
  cfg.remove_eps = j.at("remove_eps").get<int>();
  cfg.postprocess = j.at("postprocess").get<bool>();
  cfg.boundary_ratio = j.at("boundary_ratio").get<double>();
  return cfg;
}

}  // namespace

std::string model_to_json(const MultiLevelClusterModel& model) {
  json j;
  j["mode"] = to_string(model.mode);
  j["levels"] = model.levels;
  j["config"] = config_to_json(model.config);
  json per_level = json::object();
  for (const auto& [level, lm] : model.per_level) {
    json jl;
    jl["level"] = lm.level;
    jl["k"] = lm.k;
    json items = json::array();
    for (const auto& [inst, node] : lm.items) items.push_back(json::array({inst, node}));
    jl["items"] = std::move(items);
    jl["assignment"] = lm.assignment;
    json means = json::array();
    for (const auto& mu : lm.raw_means) means.push_back(series_to_json(mu));
    jl["raw_means"] = std::move(means);
    json barys = json::array();
    for (const auto& b : lm.barycenters) {
      json atoms = json::array();
      for (const auto& atom : b.atoms) atoms.push_back(series_to_json(atom));
      barys.push_back(json{{"atoms", std::move(atoms)}, {"weights", b.weights}});
    }
    jl["barycenters"] = std::move(barys);
    jl["loss_trace"] = lm.loss_trace;
    jl["post_trace"] = lm.post_trace;
    jl["events"] = lm.events;
    per_level[std::to_string(level)] = std::move(jl);
  }
  j["per_level"] = std::move(per_level);
  return j.dump(2);
}

MultiLevelClusterModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model parse error: ") + e.what());
  }
  MultiLevelClusterModel model;
  try {
    model.mode = cluster_mode_from_string(j.at("mode").get<std::string>());
    model.levels = j.at("levels").get<int>();
    model.config = config_from_json(j.at("config"));
    for (const auto& [key, jl] : j.at("per_level").items()) {
      LevelClusterModel lm;
      lm.level = jl.at("level").get<int>();
      lm.k = jl.at("k").get<int>();
      for (const auto& item : jl.at("items"))
        lm.items.emplace_back(item.at(0).get<int>(), item.at(1).get<int>());
      lm.assignment = jl.at("assignment").get<std::vector<int>>();
      for (const auto& mu : jl.at("raw_means")) lm.raw_means.push_back(series_from_json(mu));
      for (const auto& jb : jl.at("barycenters")) {
        MaterializedMeasure b;
        for (const auto& atom : jb.at("atoms")) b.atoms.push_back(series_from_json(atom));
        b.weights = jb.at("weights").get<std::vector<double>>();
        lm.barycenters.push_back(std::move(b));
      }
      lm.loss_trace = jl.at("loss_trace").get<std::vector<double>>();
      lm.post_trace = jl.at("post_trace").get<std::vector<double>>();
      lm.events = jl.at("events").get<std::vector<std::string>>();
      model.per_level.emplace(std::stoi(key), std::move(lm));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("model schema error: ") + e.what());
  }
  return model;
}

}  // namespace htsc
