#pragma once

#include <map>
#include <string>
#include <vector>

#include "cctl/features.hpp"
#include "cctl/ifn.hpp"
#include "cctl/numerics.hpp"
#include "cctl/ren.hpp"

namespace cctl {

// One tower: embedding tables per domain plus the shared MLP trunk. The pure
// tower only carries target-domain tables; the mixed tower carries both.
struct TowerParams {
    std::map<Domain, EmbeddingTables> tables;
    MlpParams mlp;
};

// gradients shaped like TowerParams; table rows are sparse
struct GradientBundle {
    MlpGrads mlp;
    std::map<Domain, TableRowGrads> tables;
};

GradientBundle make_zero_bundle(const TowerParams& tower);

struct StepLosses {
    double loss_src = 0.0;
    double loss_tgt = 0.0;
    double loss_pure = 0.0;
    double r = 0.0; // always loss_pure - loss_tgt
};

enum class SyncMoments { reset, copy };

struct ScnOptions {
    int64_t sync_interval = 1000;
    double ren_beta = 0.1;
    bool disable_ren = false;
    bool include_item_pairs = false;
    SyncMoments sync_moments = SyncMoments::reset;
};

struct ScnState {
    FeatureSchema source_schema;
    FeatureSchema target_schema;
    TowerParams mixed;
    TowerParams pure;
    AdamState mixed_opt;
    AdamState pure_opt;
    int64_t step = 0;
    int64_t last_sync_step = 0;
    ScnOptions opts;
};

// Towers share their initial target-side parameters bitwise, so the companion
// comparison starts from a synchronized state.
ScnState make_scn(const FeatureSchema& source, const FeatureSchema& target,
                  const std::vector<size_t>& tower_widths, const AdamHyper& hyper,
                  const ScnOptions& opts, Rng run_rng);

// prediction through one tower using the tables of `tables_domain`
double tower_predict(const TowerParams& tower, const FeatureSchema& schema, Domain tables_domain,
                     const Sample& sample, MlpTape* tape = nullptr);

struct PureForward {
    double loss = 0.0;
    std::vector<MlpTape> tapes;
    std::vector<double> probs;
};

PureForward pure_forward_loss(const TowerParams& pure, const FeatureSchema& target_schema,
                              const Batch& target);

struct AlignedSource {
    std::vector<double> input; // SAN output, target tower width
    double weight = 1.0;       // selector p
    int label = 0;
};

struct MixedForward {
    double loss_tgt = 0.0;
    double loss_src = 0.0;
    std::vector<MlpTape> tgt_tapes;
    std::vector<MlpTape> src_tapes;
    std::vector<double> tgt_probs;
    std::vector<double> src_probs;
};

MixedForward mixed_forward_loss(const TowerParams& mixed, const FeatureSchema& target_schema,
                                const Batch& target, const std::vector<AlignedSource>& source);

// forward + gradient accumulation for a target batch through one tower; the
// standalone single-domain trainer and the pure-tower branch share this path
// so their trajectories agree bitwise
PureForward target_tower_grads(const TowerParams& tower, const FeatureSchema& schema,
                               const Batch& batch, GradientBundle& bundle);
bool bundle_all_finite(const GradientBundle& bundle);
void apply_tower_update(AdamState& opt, TowerParams& tower, const GradientBundle& bundle);

// The full mixed objective loss_tgt + loss_src + beta * loss_ren evaluated at
// the current parameters, with source weights held constant. With want_grads
// the bundle holds exact partials for the trunk, both domains' tables, and the
// align network.
struct MixedEval {
    double loss_tgt = 0.0;
    double loss_src = 0.0;
    double ren = 0.0;
    double objective = 0.0;
    size_t ren_pairs = 0;
    GradientBundle bundle;
    SanGrads san_grads;
};

MixedEval eval_mixed_objective(const ScnState& scn, const SanParams& san, const Batch& target,
                               const Batch& source, std::span<const double> source_weights,
                               const EntityLinkage& linkage, bool want_grads);

// r = loss_pure - loss_tgt; r <= 0 flags negative transfer
double information_gain(double loss_pure, double loss_tgt);

// mixed -> pure: MLP and target tables copied bitwise, pure optimizer reset
// (or moments copied, per options); the mixed side is untouched
void sync_params(ScnState& state);

struct StepResult {
    StepLosses losses;
    double ren = 0.0;
    size_t ren_pairs = 0;
    std::vector<double> selector_p; // logged selector outputs, source batch order
    bool synced = false;
    ReinforceReport reinforce;
};

// One full training step: align + weight the source batch, update the mixed
// tower (and SAN) from the mixed objective, update the pure tower, record the
// reward, and fire REINFORCE / synchronization on schedule.
StepResult train_step(ScnState& scn, IfnState& ifn, const EntityLinkage& linkage,
                      const Batch& target, const Batch& source);

// ---------------- export ----------------

struct PureModel {
    FeatureSchema schema;
    EmbeddingTables tables;
    MlpParams mlp;
    int64_t step = 0;
    int64_t sync_step = 0;
    std::string config_hash;
    std::string warning;
};

PureModel snapshot_pure_tower(const ScnState& state, const std::string& config_hash);
void save_pure_model(const PureModel& model, const std::string& path);
void export_pure_tower(const ScnState& state, const std::string& path,
                       const std::string& config_hash);
PureModel load_pure_tower(const std::string& path);
double predict(const PureModel& model, const Sample& sample);

} // namespace cctl
