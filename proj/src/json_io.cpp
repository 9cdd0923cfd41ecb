#include "cctl/json_io.hpp"

#include <fstream>
#include <stdexcept>

namespace cctl {

json schema_to_json(const FeatureSchema& schema) {
    json j;
    j["domain"] = domain_name(schema.domain);
    j["embed_dim"] = schema.embed_dim;
    j["fields"] = json::array();
    for (const FieldSpec& f : schema.fields) {
        j["fields"].push_back({{"name", f.name},
                               {"vocab_size", f.vocab_size},
                               {"group", token_group_name(f.group)}});
    }
    if (schema.sequence) {
        j["sequence"] = {{"name", schema.sequence->name},
                         {"item_field", schema.sequence->item_field},
                         {"max_len", schema.sequence->max_len}};
    }
    return j;
}

FeatureSchema schema_from_json(const json& j) {
    FeatureSchema schema;
    std::string dom = j.at("domain").get<std::string>();
    if (dom == "source") {
        schema.domain = Domain::source;
    } else if (dom == "target") {
        schema.domain = Domain::target;
    } else {
        throw std::runtime_error("schema: unknown domain '" + dom + "'");
    }
    schema.embed_dim = j.at("embed_dim").get<size_t>();
    for (const json& f : j.at("fields")) {
        FieldSpec spec;
        spec.name = f.at("name").get<std::string>();
        spec.vocab_size = f.at("vocab_size").get<size_t>();
        spec.group = token_group_from_name(f.at("group").get<std::string>());
        schema.fields.push_back(std::move(spec));
    }
    if (j.contains("sequence")) {
        SequenceSpec seq;
        seq.name = j["sequence"].at("name").get<std::string>();
        seq.item_field = j["sequence"].at("item_field").get<std::string>();
        seq.max_len = j["sequence"].at("max_len").get<size_t>();
        schema.sequence = std::move(seq);
    }
    schema.validate();
    return schema;
}

json matrix_to_json(const std::string& name, const DenseMatrix& m) {
    return {{"name", name}, {"shape", {m.rows, m.cols}}, {"values", m.values}};
}

DenseMatrix matrix_from_json(const json& j) {
    DenseMatrix m;
    m.rows = j.at("shape").at(0).get<size_t>();
    m.cols = j.at("shape").at(1).get<size_t>();
    m.values = j.at("values").get<std::vector<double>>();
    if (m.values.size() != m.rows * m.cols) {
        throw std::runtime_error("matrix: shape/value mismatch for '" +
                                 j.value("name", std::string("?")) + "'");
    }
    return m;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    json j;
    in >> j;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << j.dump(2) << "\n";
}

} // namespace cctl
