#include "cctl/features.hpp"

#include <set>
#include <stdexcept>

namespace cctl {

const char* token_group_name(TokenGroup g) {
    switch (g) {
        case TokenGroup::user: return "user";
        case TokenGroup::item: return "item";
        case TokenGroup::context: return "context";
    }
    return "?";
}

TokenGroup token_group_from_name(const std::string& name) {
    if (name == "user") return TokenGroup::user;
    if (name == "item") return TokenGroup::item;
    if (name == "context") return TokenGroup::context;
    throw std::runtime_error("unknown token group '" + name + "'");
}

void FeatureSchema::validate() const {
    if (embed_dim == 0) {
        throw std::runtime_error("schema: embed_dim must be positive");
    }
    std::set<std::string> names;
    for (const FieldSpec& f : fields) {
        if (f.vocab_size == 0) {
            throw std::runtime_error("schema: field '" + f.name + "' has empty vocabulary");
        }
        if (!names.insert(f.name).second) {
            throw std::runtime_error("schema: duplicate field name '" + f.name + "'");
        }
    }
    if (sequence) {
        if (!names.count(sequence->item_field)) {
            throw std::runtime_error("schema: sequence item field '" + sequence->item_field +
                                     "' is not a schema field");
        }
        if (sequence->max_len == 0) {
            throw std::runtime_error("schema: sequence max_len must be positive");
        }
    }
}

size_t FeatureSchema::group_width(TokenGroup g) const {
    size_t n = 0;
    for (const FieldSpec& f : fields) {
        if (f.group == g) ++n;
    }
    return n * embed_dim;
}

size_t FeatureSchema::tower_input_width() const {
    return fields.size() * embed_dim + embed_dim;
}

const FieldSpec& FeatureSchema::field(const std::string& name) const {
    for (const FieldSpec& f : fields) {
        if (f.name == name) return f;
    }
    throw std::runtime_error("schema: no field named '" + name + "'");
}

bool FeatureSchema::same_token_widths(const FeatureSchema& other) const {
    return embed_dim == other.embed_dim &&
           group_width(TokenGroup::user) == other.group_width(TokenGroup::user) &&
           group_width(TokenGroup::item) == other.group_width(TokenGroup::item) &&
           group_width(TokenGroup::context) == other.group_width(TokenGroup::context);
}

const DenseMatrix& EmbeddingTables::table(const std::string& field_name) const {
    auto it = fields.find(field_name);
    if (it == fields.end()) {
        throw std::runtime_error("embedding tables: no table for field '" + field_name + "'");
    }
    return it->second;
}

DenseMatrix& EmbeddingTables::table(const std::string& field_name) {
    auto it = fields.find(field_name);
    if (it == fields.end()) {
        throw std::runtime_error("embedding tables: no table for field '" + field_name + "'");
    }
    return it->second;
}

EmbeddingTables make_embedding_tables(const FeatureSchema& schema, Rng rng) {
    schema.validate();
    EmbeddingTables tables;
    for (const FieldSpec& f : schema.fields) {
        DenseMatrix t(f.vocab_size, schema.embed_dim);
        Rng field_rng = rng.split(f.name);
        for (double& x : t.values) {
            x = field_rng.uniform(-0.01, 0.01);
        }
        tables.fields.emplace(f.name, std::move(t));
    }
    return tables;
}

std::vector<double> pool_sequence(const DenseMatrix& table, std::span<const int64_t> ids) {
    std::vector<double> out(table.cols, 0.0);
    if (ids.empty()) {
        return out;
    }
    for (int64_t id : ids) {
        if (id < 0 || static_cast<size_t>(id) >= table.rows) {
            throw std::runtime_error("pool_sequence: id " + std::to_string(id) +
                                     " out of range [0, " + std::to_string(table.rows) + ")");
        }
        std::span<const double> row = table.row(static_cast<size_t>(id));
        for (size_t c = 0; c < out.size(); ++c) {
            out[c] += row[c];
        }
    }
    double inv = 1.0 / static_cast<double>(ids.size());
    for (double& x : out) {
        x *= inv;
    }
    return out;
}

TokenVectors embed_sample(const EmbeddingTables& tables, const FeatureSchema& schema,
                          const Sample& sample) {
    if (sample.feature_ids.size() != schema.fields.size()) {
        throw std::runtime_error("embed_sample: sample has " +
                                 std::to_string(sample.feature_ids.size()) + " ids, schema has " +
                                 std::to_string(schema.fields.size()) + " fields");
    }
    TokenVectors tokens;
    for (size_t i = 0; i < schema.fields.size(); ++i) {
        const FieldSpec& f = schema.fields[i];
        int64_t id = sample.feature_ids[i];
        if (id < 0 || static_cast<size_t>(id) >= f.vocab_size) {
            throw std::runtime_error("embed_sample: id " + std::to_string(id) +
                                     " out of range for field '" + f.name + "' (vocab " +
                                     std::to_string(f.vocab_size) + ")");
        }
        std::span<const double> row = tables.table(f.name).row(static_cast<size_t>(id));
        std::vector<double>* dst = f.group == TokenGroup::user    ? &tokens.user
                                   : f.group == TokenGroup::item  ? &tokens.item
                                                                  : &tokens.context;
        dst->insert(dst->end(), row.begin(), row.end());
    }
    if (schema.sequence) {
        if (sample.sequence_ids.size() > schema.sequence->max_len) {
            throw std::runtime_error("embed_sample: sequence length " +
                                     std::to_string(sample.sequence_ids.size()) + " exceeds max " +
                                     std::to_string(schema.sequence->max_len));
        }
        tokens.seq = pool_sequence(tables.table(schema.sequence->item_field), sample.sequence_ids);
    } else {
        tokens.seq.assign(schema.embed_dim, 0.0);
    }
    return tokens;
}

std::vector<double> concat_tokens(const TokenVectors& tokens) {
    std::vector<double> out;
    out.reserve(tokens.user.size() + tokens.item.size() + tokens.context.size() +
                tokens.seq.size());
    out.insert(out.end(), tokens.user.begin(), tokens.user.end());
    out.insert(out.end(), tokens.item.begin(), tokens.item.end());
    out.insert(out.end(), tokens.context.begin(), tokens.context.end());
    out.insert(out.end(), tokens.seq.begin(), tokens.seq.end());
    return out;
}

namespace {

void add_row_grad(RowGrads& rows, int64_t id, std::span<const double> g, double scale,
                  size_t dim) {
    std::vector<double>& acc = rows[id];
    if (acc.empty()) {
        acc.assign(dim, 0.0);
    }
    for (size_t c = 0; c < dim; ++c) {
        acc[c] += scale * g[c];
    }
}

} // namespace

void scatter_token_grads(const FeatureSchema& schema, const Sample& sample,
                         const TokenVectors& token_grads, double scale, TableRowGrads& out) {
    size_t dim = schema.embed_dim;
    size_t user_off = 0, item_off = 0, context_off = 0;
    for (size_t i = 0; i < schema.fields.size(); ++i) {
        const FieldSpec& f = schema.fields[i];
        const std::vector<double>* src;
        size_t* off;
        switch (f.group) {
            case TokenGroup::user: src = &token_grads.user; off = &user_off; break;
            case TokenGroup::item: src = &token_grads.item; off = &item_off; break;
            default: src = &token_grads.context; off = &context_off; break;
        }
        std::span<const double> slice(src->data() + *off, dim);
        add_row_grad(out[f.name], sample.feature_ids[i], slice, scale, dim);
        *off += dim;
    }
    if (schema.sequence && !sample.sequence_ids.empty()) {
        double share = scale / static_cast<double>(sample.sequence_ids.size());
        RowGrads& rows = out[schema.sequence->item_field];
        for (int64_t id : sample.sequence_ids) {
            add_row_grad(rows, id, token_grads.seq, share, dim);
        }
    }
}

void scatter_input_grad(const FeatureSchema& schema, const Sample& sample,
                        std::span<const double> input_grad, double scale, TableRowGrads& out) {
    if (input_grad.size() != schema.tower_input_width()) {
        throw std::runtime_error("scatter_input_grad: width mismatch");
    }
    size_t uw = schema.group_width(TokenGroup::user);
    size_t iw = schema.group_width(TokenGroup::item);
    size_t cw = schema.group_width(TokenGroup::context);
    TokenVectors g;
    g.user.assign(input_grad.begin(), input_grad.begin() + uw);
    g.item.assign(input_grad.begin() + uw, input_grad.begin() + uw + iw);
    g.context.assign(input_grad.begin() + uw + iw, input_grad.begin() + uw + iw + cw);
    g.seq.assign(input_grad.begin() + uw + iw + cw, input_grad.end());
    scatter_token_grads(schema, sample, g, scale, out);
}

} // namespace cctl
