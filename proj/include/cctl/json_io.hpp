#pragma once

#include <string>

#include "json.hpp"

#include "cctl/features.hpp"

namespace cctl {

using json = nlohmann::json;

json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& j);

json matrix_to_json(const std::string& name, const DenseMatrix& m);
DenseMatrix matrix_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

} // namespace cctl
