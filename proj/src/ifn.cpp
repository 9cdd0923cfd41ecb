#include "cctl/ifn.hpp"

#include <cmath>
#include <stdexcept>

namespace cctl {

SanParams make_san(const FeatureSchema& source, const FeatureSchema& target,
                   const std::vector<size_t>& hidden, SanMode mode, Rng rng) {
    SanParams san;
    san.mode = mode;
    if (mode == SanMode::identity) {
        if (!source.same_token_widths(target)) {
            throw std::runtime_error("make_san: identity mode requires matching token widths");
        }
        return san;
    }
    auto build = [&](TokenGroup g, const char* name) {
        size_t in = source.group_width(g);
        size_t out = target.group_width(g);
        std::vector<size_t> widths = hidden;
        widths.push_back(out);
        if (out == 0) {
            return MlpParams{}; // group absent in the target; source info is dropped
        }
        return make_mlp(in, widths, Activation::relu, Activation::identity, rng.split(name));
    };
    san.user = build(TokenGroup::user, "san.user");
    san.item = build(TokenGroup::item, "san.item");
    san.context = build(TokenGroup::context, "san.context");
    std::vector<size_t> seq_widths = hidden;
    seq_widths.push_back(target.embed_dim);
    san.seq = make_mlp(source.embed_dim, seq_widths, Activation::relu, Activation::identity,
                       rng.split("san.seq"));
    return san;
}

SanGrads make_zero_san_grads(const SanParams& san) {
    SanGrads g;
    g.user = make_zero_grads(san.user);
    g.item = make_zero_grads(san.item);
    g.context = make_zero_grads(san.context);
    g.seq = make_zero_grads(san.seq);
    return g;
}

namespace {

void check_width(const char* what, size_t expected, size_t got) {
    if (expected != got) {
        throw std::runtime_error(std::string("align_source: ") + what + " width mismatch: expected " +
                                 std::to_string(expected) + ", got " + std::to_string(got));
    }
}

} // namespace

std::vector<double> align_source(const SanParams& san, const TokenVectors& tokens, SanTape* tape) {
    if (san.mode == SanMode::identity) {
        return concat_tokens(tokens);
    }
    std::vector<double> out;
    auto run = [&](const MlpParams& mlp, const std::vector<double>& in, MlpTape* t,
                   const char* what) {
        if (mlp.layers.empty()) {
            return; // group dropped
        }
        check_width(what, mlp.input_width(), in.size());
        std::vector<double> y = mlp_forward(mlp, in, t);
        out.insert(out.end(), y.begin(), y.end());
    };
    run(san.user, tokens.user, tape ? &tape->user : nullptr, "user");
    run(san.item, tokens.item, tape ? &tape->item : nullptr, "item");
    run(san.context, tokens.context, tape ? &tape->context : nullptr, "context");
    run(san.seq, tokens.seq, tape ? &tape->seq : nullptr, "seq");
    return out;
}

void san_backward_accum(const SanParams& san, const SanTape& tape, const TokenVectors& inputs,
                        std::span<const double> aligned_grad, SanGrads& grads,
                        TokenVectors& token_grads) {
    if (san.mode == SanMode::identity) {
        size_t uw = inputs.user.size(), iw = inputs.item.size(), cw = inputs.context.size();
        token_grads.user.assign(aligned_grad.begin(), aligned_grad.begin() + uw);
        token_grads.item.assign(aligned_grad.begin() + uw, aligned_grad.begin() + uw + iw);
        token_grads.context.assign(aligned_grad.begin() + uw + iw,
                                   aligned_grad.begin() + uw + iw + cw);
        token_grads.seq.assign(aligned_grad.begin() + uw + iw + cw, aligned_grad.end());
        return;
    }
    size_t off = 0;
    auto back = [&](const MlpParams& mlp, const MlpTape& t, MlpGrads& g, std::vector<double>& in_g,
                    size_t fallback_width) {
        if (mlp.layers.empty()) {
            in_g.assign(fallback_width, 0.0);
            return;
        }
        size_t w = mlp.output_width();
        std::span<const double> slice(aligned_grad.data() + off, w);
        mlp_backward_accum(mlp, t, slice, g, in_g);
        off += w;
    };
    back(san.user, tape.user, grads.user, token_grads.user, inputs.user.size());
    back(san.item, tape.item, grads.item, token_grads.item, inputs.item.size());
    back(san.context, tape.context, grads.context, token_grads.context, inputs.context.size());
    back(san.seq, tape.seq, grads.seq, token_grads.seq, inputs.seq.size());
}

void adam_update_san(AdamState& state, SanParams& san, const SanGrads& grads) {
    if (san.mode == SanMode::identity) {
        return;
    }
    state.begin_step();
    if (!san.user.layers.empty()) adam_update_mlp(state, "san.user", san.user, grads.user);
    if (!san.item.layers.empty()) adam_update_mlp(state, "san.item", san.item, grads.item);
    if (!san.context.layers.empty())
        adam_update_mlp(state, "san.context", san.context, grads.context);
    if (!san.seq.layers.empty()) adam_update_mlp(state, "san.seq", san.seq, grads.seq);
}

// ---------------- selector ----------------

SelectorParams make_selector(size_t input_width, const std::vector<size_t>& hidden, Rng rng) {
    std::vector<size_t> widths = hidden;
    widths.push_back(1);
    SelectorParams sel;
    sel.mlp = make_mlp(input_width, widths, Activation::relu, Activation::sigmoid,
                       rng.split("selector"));
    return sel;
}

SelectorResult selector_weight(const SelectorParams& sel, std::span<const double> aligned) {
    SelectorResult res;
    std::vector<double> out = mlp_forward(sel.mlp, aligned, &res.tape);
    double p = out[0];
    res.p = p < kSelectorClamp ? kSelectorClamp
            : p > 1.0 - kSelectorClamp ? 1.0 - kSelectorClamp
                                       : p;
    return res;
}

void selector_logp_grad_accum(const SelectorParams& sel, const MlpTape& tape, double p, int action,
                              double scale, MlpGrads& grads) {
    // d log p / d p = 1/p, d log(1-p) / d p = -1/(1-p); zero where the clamp binds
    double raw = tape.post.back()[0];
    double dp;
    if (raw < kSelectorClamp || raw > 1.0 - kSelectorClamp) {
        dp = 0.0;
    } else {
        dp = action == 1 ? 1.0 / p : -1.0 / (1.0 - p);
    }
    std::vector<double> out_grad = {scale * dp};
    std::vector<double> unused;
    mlp_backward_accum(sel.mlp, tape, out_grad, grads, unused);
}

// ---------------- REINFORCE ----------------

std::vector<double> accumulate_rewards(std::span<const double> rewards, double gamma) {
    std::vector<double> out(rewards.size(), 0.0);
    double tail = 0.0;
    for (size_t i = rewards.size(); i-- > 0;) {
        tail = rewards[i] + gamma * tail;
        out[i] = tail;
    }
    return out;
}

ReinforceReport reinforce_update(RewardBuffer& buffer, SelectorParams& sel,
                                 RewardBaseline baseline) {
    ReinforceReport report;
    size_t total = 0;
    for (const RewardWindowStep& e : buffer.entries) {
        total += e.samples.size();
    }
    if (buffer.entries.empty() || total == 0) {
        report.skipped = "empty window";
        buffer.entries.clear();
        buffer.revision_recorded = false;
        return report;
    }
    if (buffer.revision_recorded && buffer.selector_revision != sel.mlp.revision) {
        throw std::runtime_error(
            "reinforce_update: selector changed since logging (exclusivity violated)");
    }

    std::vector<double> rewards;
    rewards.reserve(buffer.entries.size());
    for (const RewardWindowStep& e : buffer.entries) {
        rewards.push_back(e.r);
    }
    if (baseline == RewardBaseline::mean) {
        double mean = 0.0;
        for (double r : rewards) mean += r;
        mean /= static_cast<double>(rewards.size());
        for (double& r : rewards) r -= mean;
    }
    std::vector<double> r_accu = accumulate_rewards(rewards, buffer.gamma);
    for (double r : r_accu) {
        if (!std::isfinite(r)) {
            report.skipped = "non-finite accumulated reward";
            buffer.entries.clear();
            buffer.revision_recorded = false;
            return report;
        }
    }

    report.r_accu_min = r_accu[0];
    report.r_accu_max = r_accu[0];
    double r_sum = 0.0;
    for (double r : r_accu) {
        r_sum += r;
        report.r_accu_min = std::min(report.r_accu_min, r);
        report.r_accu_max = std::max(report.r_accu_max, r);
    }
    report.r_accu_mean = r_sum / static_cast<double>(r_accu.size());

    MlpGrads ascent = make_zero_grads(sel.mlp);
    double inv_n = 1.0 / static_cast<double>(total);
    double p_sum = 0.0;
    for (size_t k = 0; k < buffer.entries.size(); ++k) {
        const RewardWindowStep& e = buffer.entries[k];
        for (const SelectorLogEntry& s : e.samples) {
            SelectorResult res = selector_weight(sel, s.aligned);
            selector_logp_grad_accum(sel, res.tape, res.p, s.action, r_accu[k] * inv_n, ascent);
            p_sum += s.p;
        }
    }
    report.p_mean = p_sum * inv_n;
    report.n_samples = total;

    // plain gradient ascent: theta += alpha * mean(grad log pi * r_accu)
    for (size_t l = 0; l < sel.mlp.layers.size(); ++l) {
        MlpLayer& layer = sel.mlp.layers[l];
        for (size_t i = 0; i < layer.weight.values.size(); ++i) {
            layer.weight.values[i] += buffer.alpha * ascent.dw[l].values[i];
        }
        for (size_t i = 0; i < layer.bias.size(); ++i) {
            layer.bias[i] += buffer.alpha * ascent.db[l][i];
        }
    }
    sel.mlp.bump_revision();
    buffer.entries.clear();
    buffer.revision_recorded = false;
    report.applied = true;
    return report;
}

IfnState make_ifn(const FeatureSchema& source, const FeatureSchema& target,
                  const IfnOptions& opts, const AdamHyper& hyper, Rng run_rng) {
    IfnState ifn;
    ifn.opts = opts;
    ifn.san = make_san(source, target, opts.san_hidden, opts.san_mode, run_rng.split("init.san"));
    ifn.selector =
        make_selector(target.tower_input_width(), opts.selector_hidden, run_rng.split("init.sel"));
    ifn.san_opt = AdamState(hyper);
    ifn.buffer.gamma = opts.gamma;
    ifn.buffer.update_interval = opts.update_interval;
    ifn.buffer.alpha = opts.alpha;
    ifn.action_rng = run_rng.split("selector.actions");
    return ifn;
}

} // namespace cctl
