#include "cctl/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace cctl {

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::identity: return z;
    }
    return z;
}

// derivative expressed through the post-activation value
double activate_deriv(Activation a, double z, double post) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return post * (1.0 - post);
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

} // namespace

MlpParams make_mlp(size_t input_width, const std::vector<size_t>& widths, Activation hidden,
                   Activation head, Rng rng) {
    if (widths.empty()) {
        throw std::runtime_error("make_mlp: widths must not be empty");
    }
    MlpParams params;
    size_t in = input_width;
    for (size_t i = 0; i < widths.size(); ++i) {
        MlpLayer layer;
        layer.weight = DenseMatrix(widths[i], in);
        Rng layer_rng = rng.split("layer" + std::to_string(i));
        glorot_init(layer.weight, layer_rng);
        layer.bias.assign(widths[i], 0.0);
        layer.activation = (i + 1 == widths.size()) ? head : hidden;
        params.layers.push_back(std::move(layer));
        in = widths[i];
    }
    return params;
}

MlpParams make_identity_mlp(size_t width) {
    MlpParams params;
    MlpLayer layer;
    layer.weight = DenseMatrix(width, width);
    for (size_t i = 0; i < width; ++i) {
        layer.weight.at(i, i) = 1.0;
    }
    layer.bias.assign(width, 0.0);
    layer.activation = Activation::identity;
    params.layers.push_back(std::move(layer));
    return params;
}

void glorot_init(DenseMatrix& w, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double& x : w.values) {
        x = rng.uniform(-bound, bound);
    }
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input,
                                MlpTape* tape) {
    if (params.layers.empty()) {
        throw std::runtime_error("mlp_forward: empty network");
    }
    if (input.size() != params.input_width()) {
        throw std::runtime_error("mlp_forward: input width mismatch: expected " +
                                 std::to_string(params.input_width()) + ", got " +
                                 std::to_string(input.size()));
    }
    if (tape) {
        tape->revision = params.revision;
        tape->input.assign(input.begin(), input.end());
        tape->pre.assign(params.layers.size(), {});
        tape->post.assign(params.layers.size(), {});
    }
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const MlpLayer& layer = params.layers[l];
        next.assign(layer.weight.rows, 0.0);
        for (size_t r = 0; r < layer.weight.rows; ++r) {
            double z = layer.bias[r];
            std::span<const double> wrow = layer.weight.row(r);
            for (size_t c = 0; c < layer.weight.cols; ++c) {
                z += wrow[c] * cur[c];
            }
            next[r] = z;
        }
        if (tape) {
            tape->pre[l] = next;
        }
        for (size_t r = 0; r < next.size(); ++r) {
            next[r] = activate(layer.activation, next[r]);
        }
        if (tape) {
            tape->post[l] = next;
        }
        cur.swap(next);
    }
    return cur;
}

MlpGrads make_zero_grads(const MlpParams& params) {
    MlpGrads grads;
    grads.dw.reserve(params.layers.size());
    grads.db.reserve(params.layers.size());
    for (const MlpLayer& layer : params.layers) {
        grads.dw.emplace_back(layer.weight.rows, layer.weight.cols);
        grads.db.emplace_back(layer.bias.size(), 0.0);
    }
    return grads;
}

void accumulate(MlpGrads& into, const MlpGrads& from, double scale) {
    for (size_t l = 0; l < into.dw.size(); ++l) {
        for (size_t i = 0; i < into.dw[l].values.size(); ++i) {
            into.dw[l].values[i] += scale * from.dw[l].values[i];
        }
        for (size_t i = 0; i < into.db[l].size(); ++i) {
            into.db[l][i] += scale * from.db[l][i];
        }
    }
}

void mlp_backward_accum(const MlpParams& params, const MlpTape& tape,
                        std::span<const double> output_grad, MlpGrads& grads,
                        std::vector<double>& input_grad) {
    if (tape.revision != params.revision) {
        throw std::runtime_error("mlp_backward: stale tape (params mutated since forward)");
    }
    if (output_grad.size() != params.output_width()) {
        throw std::runtime_error("mlp_backward: output grad width mismatch: expected " +
                                 std::to_string(params.output_width()) + ", got " +
                                 std::to_string(output_grad.size()));
    }
    size_t n_layers = params.layers.size();
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::vector<double> prev_delta;
    for (size_t li = n_layers; li-- > 0;) {
        const MlpLayer& layer = params.layers[li];
        // delta currently holds d loss / d post; fold in the activation
        for (size_t r = 0; r < delta.size(); ++r) {
            delta[r] *= activate_deriv(layer.activation, tape.pre[li][r], tape.post[li][r]);
        }
        const std::vector<double>& below = (li == 0) ? tape.input : tape.post[li - 1];
        DenseMatrix& dw = grads.dw[li];
        for (size_t r = 0; r < layer.weight.rows; ++r) {
            double d = delta[r];
            grads.db[li][r] += d;
            std::span<double> dwrow = dw.row(r);
            for (size_t c = 0; c < layer.weight.cols; ++c) {
                dwrow[c] += d * below[c];
            }
        }
        prev_delta.assign(layer.weight.cols, 0.0);
        for (size_t r = 0; r < layer.weight.rows; ++r) {
            double d = delta[r];
            std::span<const double> wrow = layer.weight.row(r);
            for (size_t c = 0; c < layer.weight.cols; ++c) {
                prev_delta[c] += wrow[c] * d;
            }
        }
        delta.swap(prev_delta);
    }
    input_grad = std::move(delta);
}

std::pair<MlpGrads, std::vector<double>> mlp_backward(const MlpParams& params, const MlpTape& tape,
                                                      std::span<const double> output_grad) {
    MlpGrads grads = make_zero_grads(params);
    std::vector<double> input_grad;
    mlp_backward_accum(params, tape, output_grad, grads, input_grad);
    return {std::move(grads), std::move(input_grad)};
}

double bce_loss(double p, int label, double weight) {
    return bce_loss_grad(p, label, weight).first;
}

std::pair<double, double> bce_loss_grad(double p, int label, double weight) {
    if (weight < 0.0) {
        throw std::runtime_error("bce_loss: negative weight " + std::to_string(weight));
    }
    if (label != 0 && label != 1) {
        throw std::runtime_error("bce_loss: label must be 0 or 1");
    }
    bool clamped = p < kProbEps || p > 1.0 - kProbEps;
    double pc = p < kProbEps ? kProbEps : (p > 1.0 - kProbEps ? 1.0 - kProbEps : p);
    double loss = -weight * (label == 1 ? std::log(pc) : std::log(1.0 - pc));
    double dp = clamped ? 0.0 : weight * (pc - static_cast<double>(label)) / (pc * (1.0 - pc));
    return {loss, dp};
}

// ---------------- Adam ----------------

AdamState::Moments& AdamState::moments_for(const std::string& name, size_t len) {
    Moments& m = moments_[name];
    if (m.m.empty()) {
        m.m.assign(len, 0.0);
        m.v.assign(len, 0.0);
    } else if (m.m.size() != len) {
        throw std::runtime_error("adam_step: shape mismatch for '" + name + "': tracked " +
                                 std::to_string(m.m.size()) + ", got " + std::to_string(len));
    }
    return m;
}

void AdamState::apply(double& param, double g, double& m, double& v, double corr1, double corr2) {
    m = hp_.beta1 * m + (1.0 - hp_.beta1) * g;
    v = hp_.beta2 * v + (1.0 - hp_.beta2) * g * g;
    double m_hat = m / corr1;
    double v_hat = v / corr2;
    param -= hp_.lr * m_hat / (std::sqrt(v_hat) + hp_.eps);
}

void AdamState::update_dense(const std::string& name, std::span<double> param,
                             std::span<const double> grad) {
    if (step_ == 0) {
        throw std::runtime_error("adam_step: begin_step not called");
    }
    if (param.size() != grad.size()) {
        throw std::runtime_error("adam_step: grad shape mismatch for '" + name + "'");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) {
            throw std::runtime_error("adam_step: non-finite gradient for '" + name + "'");
        }
    }
    Moments& mo = moments_for(name, param.size());
    double corr1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_));
    double corr2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < param.size(); ++i) {
        apply(param[i], grad[i], mo.m[i], mo.v[i], corr1, corr2);
    }
}

void AdamState::update_rows(const std::string& name, DenseMatrix& table, const RowGrads& grads) {
    if (step_ == 0) {
        throw std::runtime_error("adam_step: begin_step not called");
    }
    for (const auto& [row, g] : grads) {
        if (row < 0 || static_cast<size_t>(row) >= table.rows || g.size() != table.cols) {
            throw std::runtime_error("adam_step: row grad shape mismatch for '" + name + "'");
        }
        for (double x : g) {
            if (!std::isfinite(x)) {
                throw std::runtime_error("adam_step: non-finite gradient for '" + name + "' row " +
                                         std::to_string(row));
            }
        }
    }
    Moments& mo = moments_for(name, table.values.size());
    double corr1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_));
    double corr2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_));
    for (const auto& [row, g] : grads) {
        size_t base = static_cast<size_t>(row) * table.cols;
        for (size_t c = 0; c < table.cols; ++c) {
            apply(table.values[base + c], g[c], mo.m[base + c], mo.v[base + c], corr1, corr2);
        }
    }
}

void AdamState::reset() {
    step_ = 0;
    moments_.clear();
}

void AdamState::copy_from(const AdamState& other) {
    step_ = other.step_;
    moments_ = other.moments_;
}

bool all_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

bool all_finite(const MlpGrads& grads) {
    for (const DenseMatrix& dw : grads.dw) {
        if (!all_finite(dw.values)) return false;
    }
    for (const std::vector<double>& db : grads.db) {
        if (!all_finite(db)) return false;
    }
    return true;
}

void adam_update_mlp(AdamState& state, const std::string& prefix, MlpParams& params,
                     const MlpGrads& grads) {
    if (grads.dw.size() != params.layers.size()) {
        throw std::runtime_error("adam_step: layer count mismatch for '" + prefix + "'");
    }
    for (size_t l = 0; l < params.layers.size(); ++l) {
        std::string tag = prefix + ".L" + std::to_string(l);
        state.update_dense(tag + ".w", params.layers[l].weight.values, grads.dw[l].values);
        state.update_dense(tag + ".b", params.layers[l].bias, grads.db[l]);
    }
    params.bump_revision();
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               const std::string& name_prefix) {
    if (!all_finite(grads)) {
        throw std::runtime_error("adam_step: non-finite gradient for '" + name_prefix + "'");
    }
    state.begin_step();
    adam_update_mlp(state, name_prefix, params, grads);
}

// ---------------- gradient checking ----------------

double grad_check(const std::function<double()>& loss_fn, const std::vector<ParamBlock>& params,
                  const std::vector<std::vector<double>>& analytic, double fd_step) {
    if (params.size() != analytic.size()) {
        throw std::runtime_error("grad_check: analytic block count mismatch");
    }
    double worst = 0.0;
    for (size_t b = 0; b < params.size(); ++b) {
        const ParamBlock& block = params[b];
        if (analytic[b].size() != block.len) {
            throw std::runtime_error("grad_check: analytic length mismatch for '" + block.name +
                                     "'");
        }
        for (size_t i = 0; i < block.len; ++i) {
            double saved = block.data[i];
            block.data[i] = saved + fd_step;
            double up = loss_fn();
            block.data[i] = saved - fd_step;
            double down = loss_fn();
            block.data[i] = saved;
            double numeric = (up - down) / (2.0 * fd_step);
            double a = analytic[b][i];
            double err = std::fabs(a - numeric) /
                         std::max({1.0, std::fabs(a), std::fabs(numeric)});
            if (err > worst) {
                worst = err;
            }
        }
    }
    return worst;
}

} // namespace cctl
