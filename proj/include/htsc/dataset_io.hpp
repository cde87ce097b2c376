#pragma once

#include <filesystem>
#include <string>

#include "htsc/dataset.hpp"

namespace htsc {

enum class DatasetFormat { auto_detect, json, csv };

/// Load and fully validate a dataset.
///
/// JSON schema: { "levels": L, "instances": [ { "id": str, "nodes": [
///   { "id": str, "level": int, "parent": str|null, "values": [num...] } ] } ] }
/// with nodes in level order. CSV long format:
///   instance_id,node_id,level,parent_id,t,value
/// with an empty parent_id for roots and 0-based consecutive t per node.
///
/// Throws DataError on parse, schema, or invariant violations.
HtsDataset load_dataset(const std::filesystem::path& path,
                        DatasetFormat format = DatasetFormat::auto_detect);

/// Serialize to the canonical JSON schema. Doubles round-trip bit-exactly
/// (shortest round-trip decimal encoding).
std::string dataset_to_json(const HtsDataset& ds);
HtsDataset dataset_from_json(const std::string& text);

void save_dataset_json(const HtsDataset& ds, const std::filesystem::path& path);

/// Write content to path via a temp file + rename so readers never observe
/// partial output.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace htsc
