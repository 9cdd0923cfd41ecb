#include "doctest.h"

#include <limits>
#include <stdexcept>

#include "cctl/features.hpp"

using namespace cctl;

namespace {

FeatureSchema demo_schema() {
    FeatureSchema schema;
    schema.domain = Domain::target;
    schema.fields = {{"user_id", 10, TokenGroup::user},
                     {"age", 5, TokenGroup::user},
                     {"item_id", 12, TokenGroup::item},
                     {"hour", 25, TokenGroup::context}};
    schema.sequence = SequenceSpec{"seq", "item_id", 6};
    schema.embed_dim = 8;
    return schema;
}

} // namespace

TEST_CASE("embed_sample produces the documented token widths") {
    FeatureSchema schema = demo_schema();
    EmbeddingTables tables = make_embedding_tables(schema, Rng(1));
    Sample s{Domain::target, {3, 1, 7, 12}, {2, 5}, 1};
    TokenVectors tokens = embed_sample(tables, schema, s);
    CHECK(tokens.user.size() == 16); // two user fields, dim 8
    CHECK(tokens.item.size() == 8);
    CHECK(tokens.context.size() == 8);
    CHECK(tokens.seq.size() == 8);
    CHECK(schema.tower_input_width() == 40);
}

TEST_CASE("embed_sample: zero tables give zero tokens") {
    FeatureSchema schema = demo_schema();
    EmbeddingTables tables;
    for (const FieldSpec& f : schema.fields) {
        tables.fields.emplace(f.name, DenseMatrix(f.vocab_size, schema.embed_dim));
    }
    Sample s{Domain::target, {1, 2, 3, 4}, {1}, 0};
    TokenVectors tokens = embed_sample(tables, schema, s);
    for (double v : tokens.user) CHECK(v == 0.0);
    for (double v : tokens.item) CHECK(v == 0.0);
    for (double v : tokens.context) CHECK(v == 0.0);
    for (double v : tokens.seq) CHECK(v == 0.0);
}

TEST_CASE("embed_sample: single-field lookup returns the exact table row") {
    FeatureSchema schema;
    schema.domain = Domain::target;
    schema.fields = {{"user_id", 6, TokenGroup::user}};
    schema.embed_dim = 4;
    EmbeddingTables tables = make_embedding_tables(schema, Rng(2));
    Sample s{Domain::target, {3}, {}, 0};
    TokenVectors tokens = embed_sample(tables, schema, s);
    std::span<const double> row = tables.table("user_id").row(3);
    CHECK(std::equal(tokens.user.begin(), tokens.user.end(), row.begin()));
}

TEST_CASE("embed_sample rejects an out-of-vocab id naming the field") {
    FeatureSchema schema = demo_schema();
    EmbeddingTables tables = make_embedding_tables(schema, Rng(3));
    Sample s{Domain::target, {3, 1, 99, 12}, {}, 1};
    CHECK_THROWS_WITH_AS(embed_sample(tables, schema, s), doctest::Contains("item_id"),
                         std::runtime_error);
}

TEST_CASE("pool_sequence: duplicates, empty list, and cancellation") {
    DenseMatrix table(4, 3);
    for (size_t c = 0; c < 3; ++c) {
        table.at(2, c) = 1.0 + static_cast<double>(c);
        table.at(0, c) = 5.0;
        table.at(1, c) = -5.0;
    }
    std::vector<int64_t> dup = {2, 2};
    std::vector<double> pooled = pool_sequence(table, dup);
    CHECK(pooled == std::vector<double>{1.0, 2.0, 3.0});

    std::vector<int64_t> empty;
    CHECK(pool_sequence(table, empty) == std::vector<double>(3, 0.0));

    std::vector<int64_t> cancel = {0, 1};
    CHECK(pool_sequence(table, cancel) == std::vector<double>(3, 0.0));

    std::vector<int64_t> bad = {9};
    CHECK_THROWS_AS(pool_sequence(table, bad), std::runtime_error);
}

TEST_CASE("concat_tokens: length, order, and slice recovery") {
    TokenVectors tokens;
    tokens.user = {1, 2};
    tokens.item = {3};
    tokens.context = {4, 5};
    tokens.seq = {6};
    std::vector<double> cat = concat_tokens(tokens);
    CHECK(cat == std::vector<double>{1, 2, 3, 4, 5, 6});
    // slicing at the recorded offsets recovers each token exactly
    CHECK(std::vector<double>(cat.begin(), cat.begin() + 2) == tokens.user);
    CHECK(std::vector<double>(cat.begin() + 2, cat.begin() + 3) == tokens.item);
    CHECK(std::vector<double>(cat.begin() + 3, cat.begin() + 5) == tokens.context);
    CHECK(std::vector<double>(cat.begin() + 5, cat.end()) == tokens.seq);
}

TEST_CASE("samples differing only in item id differ only in the item slice") {
    FeatureSchema schema = demo_schema();
    EmbeddingTables tables = make_embedding_tables(schema, Rng(5));
    Sample a{Domain::target, {3, 1, 7, 12}, {2}, 1};
    Sample b = a;
    b.feature_ids[2] = 8;
    std::vector<double> ca = concat_tokens(embed_sample(tables, schema, a));
    std::vector<double> cb = concat_tokens(embed_sample(tables, schema, b));
    size_t item_off = 16, item_end = 24;
    for (size_t i = 0; i < ca.size(); ++i) {
        if (i >= item_off && i < item_end) continue;
        CHECK(ca[i] == cb[i]);
    }
    bool differs = false;
    for (size_t i = item_off; i < item_end; ++i) {
        differs = differs || ca[i] != cb[i];
    }
    CHECK(differs);
}

TEST_CASE("source and target tables never share storage") {
    FeatureSchema src = demo_schema();
    src.domain = Domain::source;
    FeatureSchema tgt = demo_schema();
    EmbeddingTables source = make_embedding_tables(src, Rng(7).split("s"));
    EmbeddingTables target = make_embedding_tables(tgt, Rng(7).split("t"));
    double before = target.table("user_id").at(3, 0);
    source.table("user_id").at(3, 0) = 123.0;
    CHECK(target.table("user_id").at(3, 0) == before);
}

TEST_CASE("embed_sample leaves tables untouched (pure read)") {
    FeatureSchema schema = demo_schema();
    EmbeddingTables tables = make_embedding_tables(schema, Rng(9));
    EmbeddingTables copy = tables;
    Sample s{Domain::target, {1, 1, 1, 1}, {1, 2, 3}, 0};
    embed_sample(tables, schema, s);
    for (const auto& [name, m] : tables.fields) {
        CHECK(m.values == copy.table(name).values);
    }
}

TEST_CASE("scatter_input_grad routes slices to the touched rows") {
    FeatureSchema schema;
    schema.domain = Domain::target;
    schema.fields = {{"u", 4, TokenGroup::user}, {"i", 4, TokenGroup::item}};
    schema.sequence = SequenceSpec{"seq", "i", 4};
    schema.embed_dim = 2;
    Sample s{Domain::target, {1, 2}, {3, 3}, 1};
    // layout: u(2) | i(2) | ctx(0) | seq(2)
    std::vector<double> grad = {1, 2, 3, 4, 5, 6};
    TableRowGrads out;
    scatter_input_grad(schema, s, grad, 1.0, out);
    CHECK(out.at("u").at(1) == std::vector<double>{1, 2});
    // item row 2 gets the item slice; row 3 pools the whole seq slice (2 ids x 1/2)
    CHECK(out.at("i").at(2) == std::vector<double>{3, 4});
    CHECK(out.at("i").at(3) == std::vector<double>{5, 6});
}

TEST_CASE("schemas may omit a token group or the sequence field") {
    FeatureSchema schema;
    schema.domain = Domain::target;
    schema.fields = {{"user_id", 5, TokenGroup::user}, {"item_id", 5, TokenGroup::item}};
    schema.embed_dim = 3;
    schema.validate();
    CHECK(schema.group_width(TokenGroup::context) == 0);
    CHECK(schema.tower_input_width() == 9); // 2 fields + the pooled-sequence slot

    EmbeddingTables tables = make_embedding_tables(schema, Rng(21));
    Sample s{Domain::target, {1, 2}, {}, 1};
    TokenVectors tokens = embed_sample(tables, schema, s);
    CHECK(tokens.context.empty());
    CHECK(tokens.seq == std::vector<double>(3, 0.0)); // no sequence field -> zero slot
    CHECK(concat_tokens(tokens).size() == 9);

    // gradients for the absent pieces scatter nowhere and change nothing
    std::vector<double> grad(9, 1.0);
    TableRowGrads out;
    scatter_input_grad(schema, s, grad, 1.0, out);
    CHECK(out.size() == 2);
    CHECK(out.count("user_id") == 1);
    CHECK(out.count("item_id") == 1);
}

TEST_CASE("schema validation rejects duplicates and bad sequence fields") {
    FeatureSchema schema = demo_schema();
    schema.fields.push_back({"user_id", 3, TokenGroup::context});
    CHECK_THROWS_AS(schema.validate(), std::runtime_error);

    FeatureSchema schema2 = demo_schema();
    schema2.sequence = SequenceSpec{"seq", "nope", 5};
    CHECK_THROWS_AS(schema2.validate(), std::runtime_error);
}
