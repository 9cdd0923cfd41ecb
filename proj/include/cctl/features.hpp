#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cctl/numerics.hpp"
#include "cctl/types.hpp"

namespace cctl {

enum class TokenGroup { user, item, context };

const char* token_group_name(TokenGroup g);
TokenGroup token_group_from_name(const std::string& name);

struct FieldSpec {
    std::string name;
    size_t vocab_size = 0; // includes the reserved OOV id 0
    TokenGroup group = TokenGroup::context;
};

struct SequenceSpec {
    std::string name;
    std::string item_field; // field whose vocabulary (and embedding table) the sequence shares
    size_t max_len = 0;
};

struct FeatureSchema {
    Domain domain = Domain::target;
    std::vector<FieldSpec> fields;
    std::optional<SequenceSpec> sequence;
    size_t embed_dim = 8;

    void validate() const;
    size_t group_width(TokenGroup g) const;
    // user + item + context widths plus one pooled-sequence slot of embed_dim
    size_t tower_input_width() const;
    const FieldSpec& field(const std::string& name) const;
    bool same_token_widths(const FeatureSchema& other) const;
};

// One embedding table per schema field; the behavior sequence reads the item-id
// field's table, so sequence and id gradients land in the same parameter space.
struct EmbeddingTables {
    std::map<std::string, DenseMatrix> fields;

    const DenseMatrix& table(const std::string& field_name) const;
    DenseMatrix& table(const std::string& field_name);
};

EmbeddingTables make_embedding_tables(const FeatureSchema& schema, Rng rng);

struct Sample {
    Domain domain = Domain::target;
    std::vector<int64_t> feature_ids; // one id per schema field, schema order
    std::vector<int64_t> sequence_ids;
    int label = 0;
};

using Batch = std::vector<Sample>;

struct TokenVectors {
    std::vector<double> user;
    std::vector<double> item;
    std::vector<double> context;
    std::vector<double> seq; // always embed_dim long; zero when no sequence
};

// arithmetic mean of the rows of `ids`; empty -> zero vector
std::vector<double> pool_sequence(const DenseMatrix& table, std::span<const int64_t> ids);

// pure lookup + pooling; no training state is touched
TokenVectors embed_sample(const EmbeddingTables& tables, const FeatureSchema& schema,
                          const Sample& sample);

// fixed order: user || item || context || seq
std::vector<double> concat_tokens(const TokenVectors& tokens);

// Scatters d loss / d tower-input back onto the embedding rows the sample
// touched, scaled by `scale`. Sequence gradient spreads 1/len to each id.
using TableRowGrads = std::map<std::string, RowGrads>;
void scatter_input_grad(const FeatureSchema& schema, const Sample& sample,
                        std::span<const double> input_grad, double scale, TableRowGrads& out);

// same scatter but from per-token gradients (used behind the align network)
void scatter_token_grads(const FeatureSchema& schema, const Sample& sample,
                         const TokenVectors& token_grads, double scale, TableRowGrads& out);

// source id <-> target id maps for entities present in both domains; built by
// the data layer from its raw join keys
struct EntityLinkage {
    std::map<int64_t, int64_t> user_src2tgt;
    std::map<int64_t, int64_t> user_tgt2src;
    std::map<int64_t, int64_t> item_src2tgt;
    std::map<int64_t, int64_t> item_tgt2src;
};

} // namespace cctl
