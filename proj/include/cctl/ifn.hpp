#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cctl/features.hpp"
#include "cctl/numerics.hpp"

namespace cctl {

// ---------------- semantic-align network ----------------

enum class SanMode { identity, mlp };

// One aligner per semantic token; maps source group widths onto target widths
// so the mixed tower can read both domains. Identity mode is the matching-
// schema shortcut and carries no parameters.
struct SanParams {
    SanMode mode = SanMode::identity;
    MlpParams user;
    MlpParams item;
    MlpParams context;
    MlpParams seq;
};

SanParams make_san(const FeatureSchema& source, const FeatureSchema& target,
                   const std::vector<size_t>& hidden, SanMode mode, Rng rng);

struct SanTape {
    MlpTape user, item, context, seq;
};

struct SanGrads {
    MlpGrads user, item, context, seq;
};

SanGrads make_zero_san_grads(const SanParams& san);

// per-group MLP then concat in the fixed token order; output has the target
// tower input width
std::vector<double> align_source(const SanParams& san, const TokenVectors& tokens,
                                 SanTape* tape = nullptr);

// d loss / d aligned -> SAN grads (accumulated) + source token grads
void san_backward_accum(const SanParams& san, const SanTape& tape, const TokenVectors& inputs,
                        std::span<const double> aligned_grad, SanGrads& grads,
                        TokenVectors& token_grads);

void adam_update_san(AdamState& state, SanParams& san, const SanGrads& grads);

// ---------------- selector ----------------

constexpr double kSelectorClamp = 1e-6; // p confined to [1e-6, 1 - 1e-6]

struct SelectorParams {
    MlpParams mlp; // sigmoid head of width 1
};

SelectorParams make_selector(size_t input_width, const std::vector<size_t>& hidden, Rng rng);

struct SelectorResult {
    double p = 0.5;
    MlpTape tape;
};

SelectorResult selector_weight(const SelectorParams& sel, std::span<const double> aligned);

// accumulates scale * d log pi(action) / d params; action 1 -> log p, 0 -> log(1-p)
void selector_logp_grad_accum(const SelectorParams& sel, const MlpTape& tape, double p, int action,
                              double scale, MlpGrads& grads);

// ---------------- REINFORCE ----------------

enum class SelectorMode { weight, sample };
enum class RewardBaseline { none, mean };

struct SelectorLogEntry {
    std::vector<double> aligned; // selector input at log time
    double p = 0.5;
    int action = 1;
};

struct RewardWindowStep {
    int64_t step = 0;
    double r = 0.0;
    std::vector<SelectorLogEntry> samples;
};

// Holds one update window of per-step rewards and logged selector outputs.
// The selector only ever changes inside reinforce_update, so the logged
// inputs reproduce each log-probability exactly at update time.
struct RewardBuffer {
    std::vector<RewardWindowStep> entries;
    double gamma = 0.80;
    int64_t update_interval = 1000;
    double alpha = 0.5;
    uint64_t selector_revision = 0;
    bool revision_recorded = false;
};

// discounted suffix sums: out[k] = sum_{j>=k} gamma^(j-k) * rewards[j]
std::vector<double> accumulate_rewards(std::span<const double> rewards, double gamma);

struct ReinforceReport {
    bool applied = false;
    size_t n_samples = 0;
    double r_accu_mean = 0.0;
    double r_accu_min = 0.0;
    double r_accu_max = 0.0;
    double p_mean = 0.0;
    std::string skipped; // non-empty when the update was skipped
};

// one plain-ascent step on the window, then the buffer is cleared
ReinforceReport reinforce_update(RewardBuffer& buffer, SelectorParams& sel,
                                 RewardBaseline baseline = RewardBaseline::none);

// ---------------- wiring ----------------

struct IfnOptions {
    double gamma = 0.80;
    int64_t update_interval = 1000;
    double alpha = 0.5;
    SelectorMode selector_mode = SelectorMode::weight;
    RewardBaseline baseline = RewardBaseline::none;
    std::optional<double> force_p; // fixed source weight; disables logging and updates
    std::vector<size_t> selector_hidden = {32};
    std::vector<size_t> san_hidden = {};
    SanMode san_mode = SanMode::identity;
};

struct IfnState {
    SanParams san;
    SelectorParams selector;
    AdamState san_opt;
    RewardBuffer buffer;
    Rng action_rng; // Bernoulli draws in sampled-action mode
    IfnOptions opts;

    IfnState() : action_rng(0) {}
};

// san_mode identity is only valid when token widths already match; callers
// resolve "auto" before this point
IfnState make_ifn(const FeatureSchema& source, const FeatureSchema& target,
                  const IfnOptions& opts, const AdamHyper& hyper, Rng run_rng);

} // namespace cctl
