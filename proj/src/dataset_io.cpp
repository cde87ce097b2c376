#include "htsc/dataset_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "htsc/errors.hpp"

namespace htsc {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp.string());
    out << content;
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct RawNode {
  std::string id;
  int level = 0;
  std::string parent;  // empty = root
  std::vector<double> values;
};

HtsInstance build_instance(const std::string& inst_id, const std::vector<RawNode>& nodes) {
  std::map<std::string, int> index_of;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (!index_of.emplace(nodes[i].id, i).second)
      throw DataError("instance '" + inst_id + "': duplicate node id '" + nodes[i].id + "'");
  }
  std::vector<int> levels, parents;
  levels.reserve(nodes.size());
  parents.reserve(nodes.size());
  for (const auto& n : nodes) {
    levels.push_back(n.level);
    if (n.parent.empty()) {
      parents.push_back(-1);
    } else {
      auto it = index_of.find(n.parent);
      if (it == index_of.end())
        throw DataError("instance '" + inst_id + "': unknown parent '" + n.parent + "'");
      parents.push_back(it->second);
    }
  }
  HtsInstance inst;
  inst.id = inst_id;
  inst.hierarchy = make_hierarchy(levels, parents);
  inst.series.reserve(nodes.size());
  for (const auto& n : nodes) inst.series.push_back({n.id, n.values});
  return inst;
}

void check_loaded(HtsDataset& ds) {
  if (auto r = validate_dataset(ds); !r) throw DataError("invariant error: " + r.violation);
}

}  // namespace

std::string dataset_to_json(const HtsDataset& ds) {
  json root;
  root["levels"] = ds.levels;
  json instances = json::array();
  for (const auto& inst : ds.instances) {
    json nodes = json::array();
    for (int i = 0; i < inst.hierarchy.node_count; ++i) {
      json node;
      node["id"] = inst.series[i].id;
      node["level"] = inst.hierarchy.level_of[i];
      int p = inst.hierarchy.parent_of[i];
      if (p < 0)
        node["parent"] = nullptr;
      else
        node["parent"] = inst.series[p].id;
      node["values"] = inst.series[i].values;
      nodes.push_back(std::move(node));
    }
    instances.push_back(json{{"id", inst.id}, {"nodes", std::move(nodes)}});
  }
  root["instances"] = std::move(instances);
  return root.dump(2);
}

HtsDataset dataset_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("parse error: ") + e.what());
  }
  if (!root.is_object() || !root.contains("levels") || !root.contains("instances"))
    throw DataError("schema error: expected object with 'levels' and 'instances'");
  HtsDataset ds;
  ds.levels = root.at("levels").get<int>();
  const auto& instances = root.at("instances");
  if (!instances.is_array() || instances.empty())
    throw DataError("schema error: 'instances' must be a non-empty array");
  for (const auto& jinst : instances) {
    if (!jinst.contains("id") || !jinst.contains("nodes"))
      throw DataError("schema error: instance needs 'id' and 'nodes'");
    std::vector<RawNode> nodes;
    for (const auto& jnode : jinst.at("nodes")) {
      RawNode n;
      if (!jnode.contains("id") || !jnode.contains("level") ||
          !jnode.contains("parent") || !jnode.contains("values"))
        throw DataError("schema error: node needs id/level/parent/values");
      n.id = jnode.at("id").get<std::string>();
      n.level = jnode.at("level").get<int>();
      if (!jnode.at("parent").is_null()) n.parent = jnode.at("parent").get<std::string>();
      const auto& vals = jnode.at("values");
      if (!vals.is_array()) throw DataError("schema error: 'values' must be an array");
      for (const auto& v : vals) {
        if (!v.is_number())
          throw DataError("invariant error: non-numeric value in series '" + n.id + "'");
        n.values.push_back(v.get<double>());
      }
      nodes.push_back(std::move(n));
    }
    ds.instances.push_back(build_instance(jinst.at("id").get<std::string>(), nodes));
  }
  check_loaded(ds);
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

HtsDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("parse error: empty CSV");
  auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"instance_id", "node_id", "level",
                                             "parent_id", "t", "value"};
  if (header != expected)
    throw DataError("schema error: CSV header must be instance_id,node_id,level,parent_id,t,value");

  // Nodes keep first-appearance order per instance; validate_dataset then
  // enforces that this order is level-order.
  std::vector<std::string> inst_order;
  std::map<std::string, std::vector<RawNode>> inst_nodes;
  std::map<std::string, std::map<std::string, std::size_t>> node_index;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 6)
      throw DataError("parse error: line " + std::to_string(line_no) + " has " +
                      std::to_string(f.size()) + " fields");
    const std::string& inst = f[0];
    if (!inst_nodes.count(inst)) {
      inst_order.push_back(inst);
      inst_nodes[inst] = {};
    }
    auto& nodes = inst_nodes[inst];
    auto& idx = node_index[inst];
    std::size_t ni;
    auto it = idx.find(f[1]);
    if (it == idx.end()) {
      ni = nodes.size();
      idx.emplace(f[1], ni);
      RawNode n;
      n.id = f[1];
      try {
        n.level = std::stoi(f[2]);
      } catch (...) {
        throw DataError("parse error: bad level on line " + std::to_string(line_no));
      }
      n.parent = f[3];
      nodes.push_back(std::move(n));
    } else {
      ni = it->second;
    }
    std::size_t t;
    double v;
    try {
      t = static_cast<std::size_t>(std::stoll(f[4]));
      v = std::stod(f[5]);
    } catch (...) {
      throw DataError("parse error: bad t/value on line " + std::to_string(line_no));
    }
    if (t != nodes[ni].values.size())
      throw DataError("schema error: non-consecutive t for node '" + f[1] +
                      "' on line " + std::to_string(line_no));
    nodes[ni].values.push_back(v);
  }

  if (inst_order.empty()) throw DataError("schema error: CSV has no data rows");
  HtsDataset ds;
  int depth = 0;
  for (const auto& id : inst_order) {
    ds.instances.push_back(build_instance(id, inst_nodes[id]));
    depth = std::max(depth, ds.instances.back().hierarchy.levels);
  }
  ds.levels = depth;
  check_loaded(ds);
  return ds;
}

}  // namespace

HtsDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::auto_detect)
    format = path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::json;
  const std::string text = read_file(path);
  return format == DatasetFormat::csv ? dataset_from_csv(text) : dataset_from_json(text);
}

void save_dataset_json(const HtsDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_json(ds));
}

}  // namespace htsc
