#include "cctl/scn.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "cctl/json_io.hpp"

namespace cctl {

namespace {

const FieldSpec* first_field_of_group(const FeatureSchema& schema, TokenGroup g) {
    for (const FieldSpec& f : schema.fields) {
        if (f.group == g) return &f;
    }
    return nullptr;
}

size_t field_index(const FeatureSchema& schema, const std::string& name) {
    for (size_t i = 0; i < schema.fields.size(); ++i) {
        if (schema.fields[i].name == name) return i;
    }
    throw std::runtime_error("schema: no field named '" + name + "'");
}

// the id field whose table backs behavior sequences; falls back to the first
// item-group field when the schema has no sequence
const FieldSpec* item_id_field(const FeatureSchema& schema) {
    if (schema.sequence) {
        return &schema.field(schema.sequence->item_field);
    }
    return first_field_of_group(schema, TokenGroup::item);
}

void check_finite(double x, const char* component) {
    if (!std::isfinite(x)) {
        throw std::runtime_error(std::string("train_step: non-finite loss in ") + component);
    }
}

void apply_table_grads(AdamState& opt, TowerParams& tower, const GradientBundle& bundle) {
    for (const auto& [dom, table_grads] : bundle.tables) {
        EmbeddingTables& tables = tower.tables.at(dom);
        for (const auto& [field, rows] : table_grads) {
            opt.update_rows(std::string("table.") + domain_name(dom) + "." + field,
                            tables.table(field), rows);
        }
    }
}

} // namespace

bool bundle_all_finite(const GradientBundle& b) {
    if (!all_finite(b.mlp)) return false;
    for (const auto& [dom, tg] : b.tables) {
        for (const auto& [field, rows] : tg) {
            for (const auto& [row, g] : rows) {
                if (!all_finite(g)) return false;
            }
        }
    }
    return true;
}

PureForward target_tower_grads(const TowerParams& tower, const FeatureSchema& schema,
                               const Batch& batch, GradientBundle& bundle) {
    PureForward pf = pure_forward_loss(tower, schema, batch);
    check_finite(pf.loss, "pure tower");
    std::vector<double> input_grad;
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        double dldp = bce_loss_grad(pf.probs[i], batch[i].label, 1.0).second;
        double out_grad[1] = {dldp * inv_n};
        mlp_backward_accum(tower.mlp, pf.tapes[i], out_grad, bundle.mlp, input_grad);
        scatter_input_grad(schema, batch[i], input_grad, 1.0, bundle.tables[Domain::target]);
    }
    return pf;
}

void apply_tower_update(AdamState& opt, TowerParams& tower, const GradientBundle& bundle) {
    opt.begin_step();
    adam_update_mlp(opt, "mlp", tower.mlp, bundle.mlp);
    apply_table_grads(opt, tower, bundle);
}

GradientBundle make_zero_bundle(const TowerParams& tower) {
    GradientBundle b;
    b.mlp = make_zero_grads(tower.mlp);
    for (const auto& [dom, tables] : tower.tables) {
        b.tables[dom]; // empty row maps, filled lazily
    }
    return b;
}

ScnState make_scn(const FeatureSchema& source, const FeatureSchema& target,
                  const std::vector<size_t>& tower_widths, const AdamHyper& hyper,
                  const ScnOptions& opts, Rng run_rng) {
    source.validate();
    target.validate();
    if (tower_widths.empty() || tower_widths.back() != 1) {
        throw std::runtime_error("make_scn: tower widths must end in a width-1 CTR head");
    }
    if (opts.sync_interval <= 0) {
        throw std::runtime_error("make_scn: sync_interval must be positive");
    }
    ScnState state;
    state.source_schema = source;
    state.target_schema = target;
    state.opts = opts;
    state.mixed.mlp = make_mlp(target.tower_input_width(), tower_widths, Activation::relu,
                               Activation::sigmoid, run_rng.split("init.tower_mlp"));
    state.mixed.tables[Domain::target] =
        make_embedding_tables(target, run_rng.split("init.embed.target"));
    state.mixed.tables[Domain::source] =
        make_embedding_tables(source, run_rng.split("init.embed.source"));
    // the pure tower starts as a bitwise copy of the mixed tower's target side
    state.pure.mlp = state.mixed.mlp;
    state.pure.tables[Domain::target] = state.mixed.tables.at(Domain::target);
    state.mixed_opt = AdamState(hyper);
    state.pure_opt = AdamState(hyper);
    return state;
}

double tower_predict(const TowerParams& tower, const FeatureSchema& schema, Domain tables_domain,
                     const Sample& sample, MlpTape* tape) {
    TokenVectors tokens = embed_sample(tower.tables.at(tables_domain), schema, sample);
    std::vector<double> x = concat_tokens(tokens);
    return mlp_forward(tower.mlp, x, tape)[0];
}

PureForward pure_forward_loss(const TowerParams& pure, const FeatureSchema& target_schema,
                              const Batch& target) {
    if (target.empty()) {
        throw std::runtime_error("pure_forward_loss: empty batch");
    }
    PureForward out;
    out.tapes.resize(target.size());
    out.probs.resize(target.size());
    double sum = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        if (target[i].domain != Domain::target) {
            throw std::runtime_error("pure_forward_loss: batch contains a source-domain sample");
        }
        double p = tower_predict(pure, target_schema, Domain::target, target[i], &out.tapes[i]);
        out.probs[i] = p;
        sum += bce_loss(p, target[i].label, 1.0);
    }
    out.loss = sum / static_cast<double>(target.size());
    return out;
}

MixedForward mixed_forward_loss(const TowerParams& mixed, const FeatureSchema& target_schema,
                                const Batch& target, const std::vector<AlignedSource>& source) {
    if (target.empty()) {
        throw std::runtime_error("mixed_forward_loss: empty target batch");
    }
    MixedForward out;
    out.tgt_tapes.resize(target.size());
    out.tgt_probs.resize(target.size());
    double sum_tgt = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        double p = tower_predict(mixed, target_schema, Domain::target, target[i], &out.tgt_tapes[i]);
        out.tgt_probs[i] = p;
        sum_tgt += bce_loss(p, target[i].label, 1.0);
    }
    out.loss_tgt = sum_tgt / static_cast<double>(target.size());

    out.src_tapes.resize(source.size());
    out.src_probs.resize(source.size());
    double sum_src = 0.0;
    size_t expect = target_schema.tower_input_width();
    for (size_t j = 0; j < source.size(); ++j) {
        const AlignedSource& s = source[j];
        if (s.input.size() != expect) {
            throw std::runtime_error("mixed_forward_loss: aligned source width " +
                                     std::to_string(s.input.size()) + ", tower expects " +
                                     std::to_string(expect) + " (align network misconfigured)");
        }
        if (s.weight < 0.0 || s.weight > 1.0) {
            throw std::runtime_error("mixed_forward_loss: source weight outside [0,1]");
        }
        double p = mlp_forward(mixed.mlp, s.input, &out.src_tapes[j])[0];
        out.src_probs[j] = p;
        sum_src += bce_loss(p, s.label, s.weight);
    }
    out.loss_src = source.empty() ? 0.0 : sum_src / static_cast<double>(source.size());
    return out;
}

double information_gain(double loss_pure, double loss_tgt) {
    return loss_pure - loss_tgt;
}

void sync_params(ScnState& state) {
    if (state.pure.mlp.layers.size() != state.mixed.mlp.layers.size()) {
        throw std::runtime_error("sync_params: tower shapes diverged");
    }
    uint64_t next_rev = state.pure.mlp.revision + 1;
    state.pure.mlp = state.mixed.mlp;
    state.pure.mlp.revision = next_rev;
    state.pure.tables[Domain::target] = state.mixed.tables.at(Domain::target);
    if (state.opts.sync_moments == SyncMoments::copy) {
        state.pure_opt.copy_from(state.mixed_opt);
    } else {
        state.pure_opt.reset();
    }
    state.last_sync_step = state.step;
}

namespace {

struct RenWorkspace {
    std::vector<RenPair> pairs;
    // scatter targets per pair: sample pointers for sequence ids
    std::vector<const Sample*> src_samples;
    std::vector<const Sample*> tgt_samples;
    // item pairs contribute to the min-similarity term only
    std::vector<std::pair<int64_t, int64_t>> item_pairs; // (src item id, tgt item id)
};

RenWorkspace build_ren_pairs(const ScnState& scn, const EntityLinkage& linkage,
                             const Batch& target, const Batch& source, bool include_items) {
    RenWorkspace ws;
    const FieldSpec* src_user = first_field_of_group(scn.source_schema, TokenGroup::user);
    const FieldSpec* tgt_user = first_field_of_group(scn.target_schema, TokenGroup::user);
    const FieldSpec* src_item = item_id_field(scn.source_schema);
    const FieldSpec* tgt_item = item_id_field(scn.target_schema);
    if (!src_user || !tgt_user || !src_item || !tgt_item) {
        return ws;
    }
    size_t src_user_idx = field_index(scn.source_schema, src_user->name);
    size_t tgt_user_idx = field_index(scn.target_schema, tgt_user->name);

    const EmbeddingTables& src_tables = scn.mixed.tables.at(Domain::source);
    const EmbeddingTables& tgt_tables = scn.mixed.tables.at(Domain::target);

    std::map<int64_t, const Sample*> src_first;
    for (const Sample& s : source) {
        src_first.try_emplace(s.feature_ids[src_user_idx], &s);
    }
    std::set<int64_t> seen;
    for (const Sample& t : target) {
        int64_t tgt_uid = t.feature_ids[tgt_user_idx];
        if (!seen.insert(tgt_uid).second) continue;
        auto link = linkage.user_tgt2src.find(tgt_uid);
        if (link == linkage.user_tgt2src.end()) continue;
        auto hit = src_first.find(link->second);
        if (hit == src_first.end()) continue;
        const Sample* s = hit->second;
        RenPair pair;
        pair.entity_key = tgt_uid;
        auto copy_row = [](const DenseMatrix& m, int64_t row) {
            std::span<const double> r = m.row(static_cast<size_t>(row));
            return std::vector<double>(r.begin(), r.end());
        };
        pair.v_id_s = copy_row(src_tables.table(src_user->name), link->second);
        pair.v_id_t = copy_row(tgt_tables.table(tgt_user->name), tgt_uid);
        pair.v_seq_s = pool_sequence(src_tables.table(src_item->name), s->sequence_ids);
        pair.v_seq_t = pool_sequence(tgt_tables.table(tgt_item->name), t.sequence_ids);
        ws.pairs.push_back(std::move(pair));
        ws.src_samples.push_back(s);
        ws.tgt_samples.push_back(&t);
    }

    if (include_items) {
        size_t src_item_idx = field_index(scn.source_schema, src_item->name);
        size_t tgt_item_idx = field_index(scn.target_schema, tgt_item->name);
        std::set<int64_t> src_items;
        for (const Sample& s : source) {
            src_items.insert(s.feature_ids[src_item_idx]);
        }
        std::set<int64_t> done;
        for (const Sample& t : target) {
            int64_t tgt_iid = t.feature_ids[tgt_item_idx];
            if (!done.insert(tgt_iid).second) continue;
            auto link = linkage.item_tgt2src.find(tgt_iid);
            if (link == linkage.item_tgt2src.end()) continue;
            if (!src_items.count(link->second)) continue;
            ws.item_pairs.emplace_back(link->second, tgt_iid);
        }
    }
    return ws;
}

} // namespace

MixedEval eval_mixed_objective(const ScnState& scn, const SanParams& san, const Batch& target,
                               const Batch& source, std::span<const double> source_weights,
                               const EntityLinkage& linkage, bool want_grads) {
    if (source_weights.size() != source.size()) {
        throw std::runtime_error("eval_mixed_objective: one weight per source sample required");
    }
    MixedEval ev;
    std::vector<AlignedSource> aligned(source.size());
    std::vector<SanTape> san_tapes(source.size());
    std::vector<TokenVectors> src_tokens(source.size());
    for (size_t j = 0; j < source.size(); ++j) {
        if (source[j].domain != Domain::source) {
            throw std::runtime_error("train_step: source batch contains a target-domain sample");
        }
        src_tokens[j] =
            embed_sample(scn.mixed.tables.at(Domain::source), scn.source_schema, source[j]);
        aligned[j].input = align_source(san, src_tokens[j], &san_tapes[j]);
        aligned[j].label = source[j].label;
        aligned[j].weight = source_weights[j];
    }

    MixedForward mf = mixed_forward_loss(scn.mixed, scn.target_schema, target, aligned);
    check_finite(mf.loss_tgt, "mixed tower (target)");
    check_finite(mf.loss_src, "mixed tower (source)");
    ev.loss_tgt = mf.loss_tgt;
    ev.loss_src = mf.loss_src;

    RenWorkspace ren;
    std::vector<RenPairGrads> ren_grads;
    double beta = scn.opts.disable_ren ? 0.0 : scn.opts.ren_beta;
    if (beta != 0.0 && !source.empty()) {
        ren = build_ren_pairs(scn, linkage, target, source, scn.opts.include_item_pairs);
        ev.ren = ren_loss_grad(ren.pairs, ren_grads);
        if (!ren.item_pairs.empty()) {
            const std::string& sif = item_id_field(scn.source_schema)->name;
            const std::string& tif = item_id_field(scn.target_schema)->name;
            double inv = 1.0 / static_cast<double>(ren.item_pairs.size());
            for (const auto& [sid, tid] : ren.item_pairs) {
                ev.ren +=
                    inv * cosine_sim(scn.mixed.tables.at(Domain::source).table(sif).row(sid),
                                     scn.mixed.tables.at(Domain::target).table(tif).row(tid));
            }
        }
        check_finite(ev.ren, "representation enhancement");
    }
    ev.ren_pairs = ren.pairs.size() + ren.item_pairs.size();
    ev.objective = ev.loss_tgt + ev.loss_src + beta * ev.ren;
    if (!want_grads) {
        return ev;
    }

    ev.bundle = make_zero_bundle(scn.mixed);
    ev.san_grads = make_zero_san_grads(san);
    std::vector<double> input_grad;
    double inv_nt = 1.0 / static_cast<double>(target.size());
    for (size_t i = 0; i < target.size(); ++i) {
        double dldp = bce_loss_grad(mf.tgt_probs[i], target[i].label, 1.0).second;
        double out_grad[1] = {dldp * inv_nt};
        mlp_backward_accum(scn.mixed.mlp, mf.tgt_tapes[i], out_grad, ev.bundle.mlp, input_grad);
        scatter_input_grad(scn.target_schema, target[i], input_grad, 1.0,
                           ev.bundle.tables[Domain::target]);
    }
    if (!source.empty()) {
        double inv_ns = 1.0 / static_cast<double>(source.size());
        TokenVectors token_grads;
        for (size_t j = 0; j < source.size(); ++j) {
            double dldp = bce_loss_grad(mf.src_probs[j], source[j].label, aligned[j].weight).second;
            double out_grad[1] = {dldp * inv_ns};
            mlp_backward_accum(scn.mixed.mlp, mf.src_tapes[j], out_grad, ev.bundle.mlp, input_grad);
            san_backward_accum(san, san_tapes[j], src_tokens[j], input_grad, ev.san_grads,
                               token_grads);
            scatter_token_grads(scn.source_schema, source[j], token_grads, 1.0,
                                ev.bundle.tables[Domain::source]);
        }
    }
    if (!ren.pairs.empty() || !ren.item_pairs.empty()) {
        const FieldSpec* src_user = first_field_of_group(scn.source_schema, TokenGroup::user);
        const FieldSpec* tgt_user = first_field_of_group(scn.target_schema, TokenGroup::user);
        const std::string& sif = item_id_field(scn.source_schema)->name;
        const std::string& tif = item_id_field(scn.target_schema)->name;
        size_t src_user_idx = field_index(scn.source_schema, src_user->name);
        size_t tgt_user_idx = field_index(scn.target_schema, tgt_user->name);
        auto add_rows = [](RowGrads& rows, int64_t id, std::span<const double> g, double scale) {
            std::vector<double>& acc = rows[id];
            if (acc.empty()) acc.assign(g.size(), 0.0);
            for (size_t c = 0; c < g.size(); ++c) acc[c] += scale * g[c];
        };
        TableRowGrads& src_rows = ev.bundle.tables[Domain::source];
        TableRowGrads& tgt_rows = ev.bundle.tables[Domain::target];
        for (size_t k = 0; k < ren.pairs.size(); ++k) {
            const Sample* ss = ren.src_samples[k];
            const Sample* ts = ren.tgt_samples[k];
            add_rows(src_rows[src_user->name], ss->feature_ids[src_user_idx], ren_grads[k].d_id_s,
                     beta);
            add_rows(tgt_rows[tgt_user->name], ts->feature_ids[tgt_user_idx], ren_grads[k].d_id_t,
                     beta);
            if (!ss->sequence_ids.empty()) {
                double share = beta / static_cast<double>(ss->sequence_ids.size());
                for (int64_t id : ss->sequence_ids) {
                    add_rows(src_rows[sif], id, ren_grads[k].d_seq_s, share);
                }
            }
            if (!ts->sequence_ids.empty()) {
                double share = beta / static_cast<double>(ts->sequence_ids.size());
                for (int64_t id : ts->sequence_ids) {
                    add_rows(tgt_rows[tif], id, ren_grads[k].d_seq_t, share);
                }
            }
        }
        if (!ren.item_pairs.empty()) {
            double inv = 1.0 / static_cast<double>(ren.item_pairs.size());
            std::vector<double> da, db;
            for (const auto& [sid, tid] : ren.item_pairs) {
                cosine_sim_grad(scn.mixed.tables.at(Domain::source).table(sif).row(sid),
                                scn.mixed.tables.at(Domain::target).table(tif).row(tid), da, db);
                add_rows(src_rows[sif], sid, da, beta * inv);
                add_rows(tgt_rows[tif], tid, db, beta * inv);
            }
        }
    }
    return ev;
}

StepResult train_step(ScnState& scn, IfnState& ifn, const EntityLinkage& linkage,
                      const Batch& target, const Batch& source) {
    if (target.empty()) {
        throw std::runtime_error("train_step: empty target batch");
    }
    StepResult result;

    // 1) source weights from the selector; p is a constant below (stop-gradient)
    std::vector<double> weights(source.size(), 1.0);
    std::vector<SelectorLogEntry> logged;
    const bool selector_live = !ifn.opts.force_p.has_value();
    if (selector_live) {
        for (size_t j = 0; j < source.size(); ++j) {
            TokenVectors tokens =
                embed_sample(scn.mixed.tables.at(Domain::source), scn.source_schema, source[j]);
            std::vector<double> aligned = align_source(ifn.san, tokens);
            SelectorResult sel = selector_weight(ifn.selector, aligned);
            int action = 1;
            if (ifn.opts.selector_mode == SelectorMode::sample) {
                action = ifn.action_rng.uniform01() < sel.p ? 1 : 0;
                weights[j] = static_cast<double>(action);
            } else {
                weights[j] = sel.p;
            }
            result.selector_p.push_back(sel.p);
            logged.push_back({std::move(aligned), sel.p, action});
        }
    } else {
        std::fill(weights.begin(), weights.end(), *ifn.opts.force_p);
        result.selector_p.assign(source.size(), *ifn.opts.force_p);
    }

    // 2) mixed objective on the pre-update parameters
    MixedEval me = eval_mixed_objective(scn, ifn.san, target, source, weights, linkage, true);
    result.ren = me.ren;
    result.ren_pairs = me.ren_pairs;

    // 3) pure tower: identical forward/backward path as the standalone trainer
    GradientBundle pure_bundle = make_zero_bundle(scn.pure);
    PureForward pf = target_tower_grads(scn.pure, scn.target_schema, target, pure_bundle);

    if (!bundle_all_finite(me.bundle)) {
        throw std::runtime_error("train_step: non-finite gradient in mixed tower");
    }
    if (!bundle_all_finite(pure_bundle)) {
        throw std::runtime_error("train_step: non-finite gradient in pure tower");
    }

    // 4) apply updates
    scn.mixed_opt.begin_step();
    adam_update_mlp(scn.mixed_opt, "mlp", scn.mixed.mlp, me.bundle.mlp);
    apply_table_grads(scn.mixed_opt, scn.mixed, me.bundle);
    if (ifn.san.mode == SanMode::mlp && !source.empty()) {
        adam_update_san(ifn.san_opt, ifn.san, me.san_grads);
    }
    apply_tower_update(scn.pure_opt, scn.pure, pure_bundle);

    // 5) reward bookkeeping and scheduled updates
    scn.step += 1;
    double r = information_gain(pf.loss, me.loss_tgt);
    result.losses = {me.loss_src, me.loss_tgt, pf.loss, r};
    if (selector_live) {
        if (!ifn.buffer.revision_recorded && !logged.empty()) {
            ifn.buffer.selector_revision = ifn.selector.mlp.revision;
            ifn.buffer.revision_recorded = true;
        }
        ifn.buffer.entries.push_back({scn.step, r, std::move(logged)});
        if (scn.step % ifn.buffer.update_interval == 0) {
            result.reinforce = reinforce_update(ifn.buffer, ifn.selector, ifn.opts.baseline);
        }
    }
    if (scn.step % scn.opts.sync_interval == 0) {
        sync_params(scn);
        result.synced = true;
    }
    return result;
}

// ---------------- export ----------------

PureModel snapshot_pure_tower(const ScnState& state, const std::string& config_hash) {
    PureModel model;
    model.schema = state.target_schema;
    model.tables = state.pure.tables.at(Domain::target);
    model.mlp = state.pure.mlp;
    model.step = state.step;
    model.sync_step = state.last_sync_step;
    model.config_hash = config_hash;
    if (state.last_sync_step < state.step) {
        model.warning = "exported without a final synchronization (last sync at step " +
                        std::to_string(state.last_sync_step) + ", current step " +
                        std::to_string(state.step) + ")";
    }
    return model;
}

void save_pure_model(const PureModel& model, const std::string& path) {
    json j;
    j["format"] = "cctl-pure-tower";
    j["version"] = 1;
    j["schema"] = schema_to_json(model.schema);
    json params = json::array();
    for (const auto& [field, m] : model.tables.fields) {
        params.push_back(matrix_to_json("table." + field, m));
    }
    json activations = json::array();
    for (size_t l = 0; l < model.mlp.layers.size(); ++l) {
        const MlpLayer& layer = model.mlp.layers[l];
        params.push_back(matrix_to_json("mlp.L" + std::to_string(l) + ".w", layer.weight));
        DenseMatrix bias(1, layer.bias.size());
        bias.values = layer.bias;
        params.push_back(matrix_to_json("mlp.L" + std::to_string(l) + ".b", bias));
        activations.push_back(layer.activation == Activation::relu      ? "relu"
                              : layer.activation == Activation::sigmoid ? "sigmoid"
                                                                        : "identity");
    }
    j["params"] = std::move(params);
    j["mlp_activations"] = std::move(activations);
    json meta;
    meta["step"] = model.step;
    meta["sync_step"] = model.sync_step;
    meta["config_hash"] = model.config_hash;
    meta["synced"] = model.warning.empty();
    if (!model.warning.empty()) {
        meta["warning"] = model.warning;
    }
    j["meta"] = std::move(meta);
    write_json_file(path, j);
}

void export_pure_tower(const ScnState& state, const std::string& path,
                       const std::string& config_hash) {
    save_pure_model(snapshot_pure_tower(state, config_hash), path);
}

PureModel load_pure_tower(const std::string& path) {
    json j = read_json_file(path);
    if (j.value("format", std::string()) != "cctl-pure-tower") {
        throw std::runtime_error("load_pure_tower: '" + path + "' is not a pure-tower artifact");
    }
    PureModel model;
    model.schema = schema_from_json(j.at("schema"));
    std::map<std::string, DenseMatrix> blocks;
    for (const json& p : j.at("params")) {
        blocks.emplace(p.at("name").get<std::string>(), matrix_from_json(p));
    }
    for (const FieldSpec& f : model.schema.fields) {
        auto it = blocks.find("table." + f.name);
        if (it == blocks.end()) {
            throw std::runtime_error("load_pure_tower: missing table for field '" + f.name + "'");
        }
        model.tables.fields.emplace(f.name, it->second);
    }
    const json& acts = j.at("mlp_activations");
    for (size_t l = 0; l < acts.size(); ++l) {
        MlpLayer layer;
        layer.weight = blocks.at("mlp.L" + std::to_string(l) + ".w");
        layer.bias = blocks.at("mlp.L" + std::to_string(l) + ".b").values;
        std::string a = acts[l].get<std::string>();
        layer.activation = a == "relu"      ? Activation::relu
                           : a == "sigmoid" ? Activation::sigmoid
                                            : Activation::identity;
        model.mlp.layers.push_back(std::move(layer));
    }
    model.step = j.at("meta").at("step").get<int64_t>();
    model.sync_step = j.at("meta").at("sync_step").get<int64_t>();
    model.config_hash = j.at("meta").value("config_hash", std::string());
    model.warning = j.at("meta").value("warning", std::string());
    return model;
}

double predict(const PureModel& model, const Sample& sample) {
    TokenVectors tokens = embed_sample(model.tables, model.schema, sample);
    std::vector<double> x = concat_tokens(tokens);
    return mlp_forward(model.mlp, x)[0];
}

} // namespace cctl
