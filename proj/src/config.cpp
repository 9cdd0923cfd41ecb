#include "cctl/config.hpp"

#include <set>
#include <stdexcept>

namespace cctl {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw std::runtime_error("config: " + where + " must be an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw std::runtime_error("config: unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

void check_choice(const std::string& value, const std::set<std::string>& allowed,
                  const char* key) {
    if (!allowed.count(value)) {
        std::string opts;
        for (const std::string& a : allowed) {
            if (!opts.empty()) opts += ", ";
            opts += a;
        }
        throw std::runtime_error("config: " + std::string(key) + " must be one of {" + opts +
                                 "}, got '" + value + "'");
    }
}

SynthConfig synth_from_json(const json& j) {
    check_keys(j, {"n_users_source", "n_items_source", "n_users_target", "n_items_target",
                   "user_overlap", "item_overlap", "latent_dim", "domain_shift",
                   "source_label_noise", "n_samples_source", "n_samples_target", "max_seq_len",
                   "logit_scale", "context_vocab", "embed_dim", "seed"},
               "data.synthetic");
    SynthConfig cfg;
    get_if(j, "n_users_source", cfg.n_users_source);
    get_if(j, "n_items_source", cfg.n_items_source);
    get_if(j, "n_users_target", cfg.n_users_target);
    get_if(j, "n_items_target", cfg.n_items_target);
    get_if(j, "user_overlap", cfg.user_overlap);
    get_if(j, "item_overlap", cfg.item_overlap);
    get_if(j, "latent_dim", cfg.latent_dim);
    get_if(j, "domain_shift", cfg.domain_shift);
    get_if(j, "source_label_noise", cfg.source_label_noise);
    get_if(j, "n_samples_source", cfg.n_samples_source);
    get_if(j, "n_samples_target", cfg.n_samples_target);
    get_if(j, "max_seq_len", cfg.max_seq_len);
    get_if(j, "logit_scale", cfg.logit_scale);
    get_if(j, "context_vocab", cfg.context_vocab);
    get_if(j, "embed_dim", cfg.embed_dim);
    get_if(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

json synth_to_json(const SynthConfig& cfg) {
    return {{"n_users_source", cfg.n_users_source},
            {"n_items_source", cfg.n_items_source},
            {"n_users_target", cfg.n_users_target},
            {"n_items_target", cfg.n_items_target},
            {"user_overlap", cfg.user_overlap},
            {"item_overlap", cfg.item_overlap},
            {"latent_dim", cfg.latent_dim},
            {"domain_shift", cfg.domain_shift},
            {"source_label_noise", cfg.source_label_noise},
            {"n_samples_source", cfg.n_samples_source},
            {"n_samples_target", cfg.n_samples_target},
            {"max_seq_len", cfg.max_seq_len},
            {"logit_scale", cfg.logit_scale},
            {"context_vocab", cfg.context_vocab},
            {"embed_dim", cfg.embed_dim},
            {"seed", cfg.seed}};
}

} // namespace

void ExperimentConfig::validate() const {
    check_choice(method, {"cctl", "naive_mixed", "pure_dnn", "lr", "finetune"}, "method");
    if (seeds.empty()) {
        throw std::runtime_error("config: seeds must not be empty");
    }
    if (tower_widths.empty() || tower_widths.back() != 1) {
        throw std::runtime_error("config: tower_widths must end in the width-1 CTR head");
    }
    if (batch_size == 0 || source_batch_size == 0) {
        throw std::runtime_error("config: batch sizes must be positive");
    }
    if (epochs == 0) {
        throw std::runtime_error("config: epochs must be positive");
    }
    if (lr <= 0.0) {
        throw std::runtime_error("config: lr must be positive");
    }
    if (cctl.sync_interval <= 0 || cctl.update_interval <= 0) {
        throw std::runtime_error("config: cctl intervals must be positive");
    }
    if (cctl.gamma < 0.0 || cctl.gamma > 1.0) {
        throw std::runtime_error("config: cctl.gamma must lie in [0,1]");
    }
    if (cctl.force_p && (*cctl.force_p < 0.0 || *cctl.force_p > 1.0)) {
        throw std::runtime_error("config: cctl.force_p must lie in [0,1]");
    }
    check_choice(cctl.selector_mode, {"weight", "sample"}, "cctl.selector_mode");
    check_choice(cctl.san_mode, {"auto", "identity", "mlp"}, "cctl.san_mode");
    check_choice(cctl.reward_baseline, {"none", "mean"}, "cctl.reward_baseline");
    check_choice(cctl.sync_moments, {"reset", "copy"}, "cctl.sync_moments");
    check_choice(data.kind, {"synthetic", "csv"}, "data.kind");
    if (data.kind == "csv" && data.csv_dir.empty()) {
        throw std::runtime_error("config: data.csv_dir required for csv data");
    }
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, {"method", "seeds", "out_dir", "tower_widths", "batch_size",
                   "source_batch_size", "epochs", "pretrain_epochs", "lr",
                   "early_stop_patience", "cctl", "data"},
               "top level");
    ExperimentConfig cfg;
    get_if(j, "method", cfg.method);
    get_if(j, "seeds", cfg.seeds);
    get_if(j, "out_dir", cfg.out_dir);
    get_if(j, "tower_widths", cfg.tower_widths);
    get_if(j, "batch_size", cfg.batch_size);
    get_if(j, "source_batch_size", cfg.source_batch_size);
    get_if(j, "epochs", cfg.epochs);
    get_if(j, "pretrain_epochs", cfg.pretrain_epochs);
    get_if(j, "lr", cfg.lr);
    get_if(j, "early_stop_patience", cfg.early_stop_patience);
    if (j.contains("cctl")) {
        const json& c = j.at("cctl");
        check_keys(c, {"sync_interval", "gamma", "alpha", "beta", "update_interval",
                       "selector_mode", "san_mode", "reward_baseline", "sync_moments",
                       "selector_hidden", "san_hidden", "disable_ifn", "disable_ren",
                       "include_item_pairs", "force_p"},
                   "cctl");
        get_if(c, "sync_interval", cfg.cctl.sync_interval);
        get_if(c, "gamma", cfg.cctl.gamma);
        get_if(c, "alpha", cfg.cctl.alpha);
        get_if(c, "beta", cfg.cctl.beta);
        get_if(c, "update_interval", cfg.cctl.update_interval);
        get_if(c, "selector_mode", cfg.cctl.selector_mode);
        get_if(c, "san_mode", cfg.cctl.san_mode);
        get_if(c, "reward_baseline", cfg.cctl.reward_baseline);
        get_if(c, "sync_moments", cfg.cctl.sync_moments);
        get_if(c, "selector_hidden", cfg.cctl.selector_hidden);
        get_if(c, "san_hidden", cfg.cctl.san_hidden);
        get_if(c, "disable_ifn", cfg.cctl.disable_ifn);
        get_if(c, "disable_ren", cfg.cctl.disable_ren);
        get_if(c, "include_item_pairs", cfg.cctl.include_item_pairs);
        if (c.contains("force_p") && !c.at("force_p").is_null()) {
            cfg.cctl.force_p = c.at("force_p").get<double>();
        }
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"kind", "synthetic", "csv_dir"}, "data");
        get_if(d, "kind", cfg.data.kind);
        if (d.contains("synthetic")) {
            cfg.data.synth = synth_from_json(d.at("synthetic"));
        }
        get_if(d, "csv_dir", cfg.data.csv_dir);
    }
    cfg.validate();
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["method"] = cfg.method;
    j["seeds"] = cfg.seeds;
    j["out_dir"] = cfg.out_dir;
    j["tower_widths"] = cfg.tower_widths;
    j["batch_size"] = cfg.batch_size;
    j["source_batch_size"] = cfg.source_batch_size;
    j["epochs"] = cfg.epochs;
    j["pretrain_epochs"] = cfg.pretrain_epochs;
    j["lr"] = cfg.lr;
    j["early_stop_patience"] = cfg.early_stop_patience;
    json c;
    c["sync_interval"] = cfg.cctl.sync_interval;
    c["gamma"] = cfg.cctl.gamma;
    c["alpha"] = cfg.cctl.alpha;
    c["beta"] = cfg.cctl.beta;
    c["update_interval"] = cfg.cctl.update_interval;
    c["selector_mode"] = cfg.cctl.selector_mode;
    c["san_mode"] = cfg.cctl.san_mode;
    c["reward_baseline"] = cfg.cctl.reward_baseline;
    c["sync_moments"] = cfg.cctl.sync_moments;
    c["selector_hidden"] = cfg.cctl.selector_hidden;
    c["san_hidden"] = cfg.cctl.san_hidden;
    c["disable_ifn"] = cfg.cctl.disable_ifn;
    c["disable_ren"] = cfg.cctl.disable_ren;
    c["include_item_pairs"] = cfg.cctl.include_item_pairs;
    if (cfg.cctl.force_p) {
        c["force_p"] = *cfg.cctl.force_p;
    } else {
        c["force_p"] = nullptr;
    }
    j["cctl"] = std::move(c);
    json d;
    d["kind"] = cfg.data.kind;
    d["synthetic"] = synth_to_json(cfg.data.synth);
    d["csv_dir"] = cfg.data.csv_dir;
    j["data"] = std::move(d);
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    uint64_t h = fnv1a64(config_to_json(cfg).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(read_json_file(path));
}

} // namespace cctl
