#pragma once

// Micro-scale fixtures shared by the scn tests and the acceptance suite.

#include <string>
#include <vector>

#include "cctl/data.hpp"
#include "cctl/ifn.hpp"
#include "cctl/scn.hpp"

namespace fixtures {

using namespace cctl;

inline FeatureSchema micro_schema(Domain d, size_t embed_dim = 3, size_t extra_user_fields = 0) {
    FeatureSchema schema;
    schema.domain = d;
    schema.fields.push_back({"user_id", 6, TokenGroup::user});
    for (size_t i = 0; i < extra_user_fields; ++i) {
        schema.fields.push_back({"u" + std::to_string(i), 4, TokenGroup::user});
    }
    schema.fields.push_back({"item_id", 6, TokenGroup::item});
    schema.fields.push_back({"ctx", 4, TokenGroup::context});
    schema.sequence = SequenceSpec{"seq", "item_id", 3};
    schema.embed_dim = embed_dim;
    return schema;
}

inline Batch micro_batch(const FeatureSchema& schema, size_t n, uint64_t seed) {
    Rng rng(seed);
    Batch batch;
    for (size_t i = 0; i < n; ++i) {
        Sample s;
        s.domain = schema.domain;
        for (const FieldSpec& f : schema.fields) {
            s.feature_ids.push_back(1 + static_cast<int64_t>(rng.below(f.vocab_size - 1)));
        }
        size_t len = rng.below(3);
        size_t item_vocab = schema.field("item_id").vocab_size;
        for (size_t k = 0; k < len; ++k) {
            s.sequence_ids.push_back(1 + static_cast<int64_t>(rng.below(item_vocab - 1)));
        }
        s.label = static_cast<int>(rng.below(2));
        batch.push_back(std::move(s));
    }
    return batch;
}

inline EntityLinkage identity_linkage(int64_t n_users, int64_t n_items) {
    EntityLinkage link;
    for (int64_t i = 1; i <= n_users; ++i) {
        link.user_src2tgt[i] = i;
        link.user_tgt2src[i] = i;
    }
    for (int64_t i = 1; i <= n_items; ++i) {
        link.item_src2tgt[i] = i;
        link.item_tgt2src[i] = i;
    }
    return link;
}

struct MicroWorld {
    FeatureSchema source_schema;
    FeatureSchema target_schema;
    ScnState scn;
    IfnState ifn;
    EntityLinkage linkage;
};

inline MicroWorld micro_world(uint64_t seed, ScnOptions sopts = {}, IfnOptions iopts = {},
                              std::vector<size_t> widths = {8, 1}) {
    MicroWorld w;
    w.source_schema = micro_schema(Domain::source);
    w.target_schema = micro_schema(Domain::target);
    AdamHyper hyper;
    w.scn = make_scn(w.source_schema, w.target_schema, widths, hyper, sopts, Rng(seed));
    w.ifn = make_ifn(w.source_schema, w.target_schema, iopts, hyper, Rng(seed));
    w.linkage = identity_linkage(5, 5);
    return w;
}

// redraw embedding tables at O(1) scale so pre-activations sit away from the
// relu kinks that a 1e-3 finite-difference step could cross
inline void inflate_tables(TowerParams& tower, uint64_t seed) {
    Rng rng(seed);
    for (auto& [dom, tables] : tower.tables) {
        for (auto& [name, m] : tables.fields) {
            Rng field_rng = rng.split(std::string(domain_name(dom)) + "." + name);
            for (double& x : m.values) {
                x = field_rng.uniform(-0.5, 0.5);
            }
        }
    }
}

inline bool towers_equal_target_side(const TowerParams& a, const TowerParams& b) {
    for (size_t l = 0; l < a.mlp.layers.size(); ++l) {
        if (a.mlp.layers[l].weight.values != b.mlp.layers[l].weight.values) return false;
        if (a.mlp.layers[l].bias != b.mlp.layers[l].bias) return false;
    }
    const EmbeddingTables& ta = a.tables.at(Domain::target);
    const EmbeddingTables& tb = b.tables.at(Domain::target);
    for (const auto& [name, m] : ta.fields) {
        if (m.values != tb.table(name).values) return false;
    }
    return true;
}

// every parameter array of a model family, for finite-difference sweeps
inline std::vector<ParamBlock> tower_blocks(TowerParams& tower, const std::string& prefix) {
    std::vector<ParamBlock> blocks;
    for (size_t l = 0; l < tower.mlp.layers.size(); ++l) {
        blocks.push_back({prefix + ".mlp.L" + std::to_string(l) + ".w",
                          tower.mlp.layers[l].weight.values.data(),
                          tower.mlp.layers[l].weight.values.size()});
        blocks.push_back({prefix + ".mlp.L" + std::to_string(l) + ".b",
                          tower.mlp.layers[l].bias.data(), tower.mlp.layers[l].bias.size()});
    }
    for (auto& [dom, tables] : tower.tables) {
        for (auto& [field, m] : tables.fields) {
            blocks.push_back({prefix + ".table." + std::string(domain_name(dom)) + "." + field,
                              m.values.data(), m.values.size()});
        }
    }
    return blocks;
}

inline std::vector<ParamBlock> mlp_blocks(MlpParams& mlp, const std::string& prefix) {
    std::vector<ParamBlock> blocks;
    for (size_t l = 0; l < mlp.layers.size(); ++l) {
        blocks.push_back({prefix + ".L" + std::to_string(l) + ".w",
                          mlp.layers[l].weight.values.data(), mlp.layers[l].weight.values.size()});
        blocks.push_back(
            {prefix + ".L" + std::to_string(l) + ".b", mlp.layers[l].bias.data(),
             mlp.layers[l].bias.size()});
    }
    return blocks;
}

inline std::vector<std::vector<double>> mlp_grad_arrays(const MlpGrads& g) {
    std::vector<std::vector<double>> out;
    for (size_t l = 0; l < g.dw.size(); ++l) {
        out.push_back(g.dw[l].values);
        out.push_back(g.db[l]);
    }
    return out;
}

// dense view of a sparse table-gradient map, aligned with tower_blocks order
inline std::vector<std::vector<double>> bundle_grad_arrays(const TowerParams& tower,
                                                           const GradientBundle& bundle) {
    std::vector<std::vector<double>> out = mlp_grad_arrays(bundle.mlp);
    for (const auto& [dom, tables] : tower.tables) {
        for (const auto& [field, m] : tables.fields) {
            std::vector<double> dense(m.values.size(), 0.0);
            auto dit = bundle.tables.find(dom);
            if (dit != bundle.tables.end()) {
                auto fit = dit->second.find(field);
                if (fit != dit->second.end()) {
                    for (const auto& [row, g] : fit->second) {
                        for (size_t c = 0; c < m.cols; ++c) {
                            dense[static_cast<size_t>(row) * m.cols + c] = g[c];
                        }
                    }
                }
            }
            out.push_back(std::move(dense));
        }
    }
    return out;
}

} // namespace fixtures
