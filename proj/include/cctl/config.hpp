#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cctl/data.hpp"
#include "cctl/json_io.hpp"

namespace cctl {

struct CctlKnobs {
    int64_t sync_interval = 1000;    // k, steps between parameter synchronizations
    double gamma = 0.80;             // reward discount
    double alpha = 0.5;              // selector ascent rate
    double beta = 0.1;               // weight of the contrastive auxiliary loss
    int64_t update_interval = 1000;  // steps between selector updates
    std::string selector_mode = "weight"; // weight | sample
    std::string san_mode = "auto";        // auto | identity | mlp
    std::string reward_baseline = "none"; // none | mean
    std::string sync_moments = "reset";   // reset | copy
    std::vector<size_t> selector_hidden = {32};
    std::vector<size_t> san_hidden = {};
    bool disable_ifn = false; // all source weights 1, selector frozen
    bool disable_ren = false; // beta treated as 0
    bool include_item_pairs = false;
    std::optional<double> force_p; // fixed source weight, overrides the selector
};

struct DataConfig {
    std::string kind = "synthetic"; // synthetic | csv
    SynthConfig synth;
    std::string csv_dir; // directory holding source.csv / target.csv / meta.json
};

struct ExperimentConfig {
    std::string method = "cctl"; // cctl | naive_mixed | pure_dnn | lr | finetune
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::string out_dir = "runs";
    std::vector<size_t> tower_widths = {256, 128, 32, 1};
    size_t batch_size = 128;
    size_t source_batch_size = 128; // source:target cadence is a knob
    size_t epochs = 5;
    size_t pretrain_epochs = 2;     // finetune only
    double lr = 1e-3;
    size_t early_stop_patience = 0; // 0 disables early stopping
    CctlKnobs cctl;
    DataConfig data;

    void validate() const;
};

// strict parse: unknown keys anywhere are hard errors
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg); // hex fnv-1a of the canonical dump

ExperimentConfig load_config(const std::string& path);

} // namespace cctl
