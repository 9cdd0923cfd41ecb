#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cctl/config.hpp"
#include "cctl/data.hpp"
#include "cctl/metrics.hpp"
#include "cctl/scn.hpp"

namespace cctl {

// JSON-lines sink; default-constructed loggers discard everything
class MetricsLogger {
public:
    MetricsLogger() = default;
    explicit MetricsLogger(const std::string& path);
    void log(const json& record);
    bool enabled() const { return static_cast<bool>(out_); }

private:
    std::shared_ptr<std::ofstream> out_;
};

struct EpochEval {
    size_t epoch = 0;
    EvalReport eval;
};

struct SeedResult {
    uint64_t seed = 0;
    std::vector<EpochEval> epochs;
    EvalReport final_eval;
    // mean logged selector weight over the trailing update window
    double final_p_mean = 1.0;
    size_t steps = 0;
    bool failed = false;
    std::string failure;
};

// one record per training step; tests compare these traces bitwise
struct TraceRecord {
    double loss_src = 0.0;
    double loss_tgt = 0.0;
    double loss_pure = 0.0;
    double r = 0.0;
    double ren = 0.0;
};

struct SeedRunData {
    SeedResult result;
    std::vector<TraceRecord> trace;
    PureModel model; // the evaluated tower (pure tower for the cctl family)
};

struct RunReport {
    std::string method;
    std::string hash;
    std::vector<SeedResult> per_seed;
    size_t n_failed = 0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    double logloss_mean = 0.0;
    double logloss_std = 0.0;
    double wall_clock_sec = 0.0; // excluded from determinism comparisons
};

// synthetic datasets are re-drawn per run seed; csv datasets are fixed
Dataset build_dataset(const ExperimentConfig& cfg, uint64_t run_seed);

SeedRunData run_seed(const ExperimentConfig& cfg, const Dataset& data, uint64_t seed,
                     MetricsLogger logger = {});

// trains every seed, aggregates mean/stdev, optionally writes the run directory
RunReport run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

json run_report_to_json(const RunReport& report, bool include_timing);

struct SweepRow {
    double value = 0.0;
    RunReport report;
};

// one run per value on a dotted numeric config key, constant seeds
std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& param,
                            const std::vector<double>& values, bool write_outputs = true);

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows);

// evaluate a frozen tower on one split of a dataset domain
EvalReport evaluate_model(const PureModel& model, const Dataset& ds, Domain domain, Split split);

} // namespace cctl
