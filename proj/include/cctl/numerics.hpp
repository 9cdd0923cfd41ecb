#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cctl/rng.hpp"

namespace cctl {

// All training math is 64-bit and single-threaded; determinism is a contract.

struct DenseMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values; // row-major

    DenseMatrix() = default;
    DenseMatrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& at(size_t r, size_t c) { return values[r * cols + c]; }
    double at(size_t r, size_t c) const { return values[r * cols + c]; }
    std::span<double> row(size_t r) { return {values.data() + r * cols, cols}; }
    std::span<const double> row(size_t r) const { return {values.data() + r * cols, cols}; }
};

enum class Activation { relu, sigmoid, identity };

struct MlpLayer {
    DenseMatrix weight;        // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::identity;
};

struct MlpParams {
    std::vector<MlpLayer> layers;
    // bumped by every optimizer update; forward tapes record it so a backward
    // pass against mutated parameters is rejected instead of silently wrong
    uint64_t revision = 0;

    size_t input_width() const { return layers.empty() ? 0 : layers.front().weight.cols; }
    size_t output_width() const { return layers.empty() ? 0 : layers.back().weight.rows; }
    void bump_revision() { ++revision; }
};

// widths lists every layer output including the head, e.g. {256, 128, 32, 1}
MlpParams make_mlp(size_t input_width, const std::vector<size_t>& widths,
                   Activation hidden, Activation head, Rng rng);
// single layer, W = I, b = 0, identity activation
MlpParams make_identity_mlp(size_t width);

// uniform in ±sqrt(6 / (fan_in + fan_out))
void glorot_init(DenseMatrix& w, Rng& rng);

struct MlpTape {
    uint64_t revision = 0;
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> post;  // post-activation per layer
};

// tape is optional; when given it suffices for an exact backward pass
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input,
                                MlpTape* tape = nullptr);

struct MlpGrads {
    std::vector<DenseMatrix> dw;
    std::vector<std::vector<double>> db;
};

MlpGrads make_zero_grads(const MlpParams& params);
void accumulate(MlpGrads& into, const MlpGrads& from, double scale = 1.0);

// accumulating form used by the batch loops; input_grad is overwritten
void mlp_backward_accum(const MlpParams& params, const MlpTape& tape,
                        std::span<const double> output_grad, MlpGrads& grads,
                        std::vector<double>& input_grad);

std::pair<MlpGrads, std::vector<double>> mlp_backward(const MlpParams& params, const MlpTape& tape,
                                                      std::span<const double> output_grad);

// probability clamp applied before every log
constexpr double kProbEps = 1e-7;

double bce_loss(double p, int label, double weight);
// (loss, d loss / d p); the derivative is zero where the clamp binds
std::pair<double, double> bce_loss_grad(double p, int label, double weight);

// ---------------- Adam ----------------

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// sparse embedding-row gradients: row index -> accumulated gradient
using RowGrads = std::map<int64_t, std::vector<double>>;

// Tracks first/second moments for a named set of parameter arrays. One
// begin_step() per optimization step; every update in that step shares the
// bias-correction count. Rows absent from a RowGrads map are left untouched.
class AdamState {
public:
    explicit AdamState(AdamHyper hp = {}) : hp_(hp) {}

    int64_t step() const { return step_; }
    const AdamHyper& hyper() const { return hp_; }

    void begin_step() { ++step_; }

    void update_dense(const std::string& name, std::span<double> param,
                      std::span<const double> grad);
    void update_rows(const std::string& name, DenseMatrix& table, const RowGrads& grads);

    // moments and step back to zero (fresh optimizer)
    void reset();
    // bitwise copy of the other state's step and moment buffers
    void copy_from(const AdamState& other);

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    Moments& moments_for(const std::string& name, size_t len);
    void apply(double& param, double g, double& m, double& v, double corr1, double corr2);

    AdamHyper hp_;
    int64_t step_ = 0;
    std::map<std::string, Moments> moments_;
};

// convenience for a lone MLP: validates, begins a step, updates, bumps revision
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               const std::string& name_prefix = "mlp");

void adam_update_mlp(AdamState& state, const std::string& prefix, MlpParams& params,
                     const MlpGrads& grads);

bool all_finite(const MlpGrads& grads);
bool all_finite(std::span<const double> xs);

// ---------------- gradient checking ----------------

struct ParamBlock {
    std::string name;
    double* data;
    size_t len;
};

// Central finite differences over every scalar in `params`. `analytic` holds
// one gradient array per block, in the same order. Returns
// max |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<double()>& loss_fn, const std::vector<ParamBlock>& params,
                  const std::vector<std::vector<double>>& analytic, double fd_step);

} // namespace cctl
