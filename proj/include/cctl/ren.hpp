#pragma once

#include <span>
#include <vector>

namespace cctl {

// below this norm a vector is treated as degenerate and similarity is 0
constexpr double kCosineNormFloor = 1e-12;

double cosine_sim(std::span<const double> a, std::span<const double> b);

// d cosine / d a and d cosine / d b; zero for degenerate inputs
void cosine_sim_grad(std::span<const double> a, std::span<const double> b,
                     std::vector<double>& da, std::vector<double>& db);

// Cross-domain pair for one shared entity: id embeddings are pushed apart,
// pooled behavior-sequence embeddings are pulled together.
struct RenPair {
    int64_t entity_key = 0;
    std::vector<double> v_id_s;
    std::vector<double> v_id_t;
    std::vector<double> v_seq_s;
    std::vector<double> v_seq_t;
};

// mean over pairs of [cos(id_s, id_t) - cos(seq_s, seq_t)]; empty -> 0
double ren_loss(const std::vector<RenPair>& pairs);

struct RenPairGrads {
    std::vector<double> d_id_s;
    std::vector<double> d_id_t;
    std::vector<double> d_seq_s;
    std::vector<double> d_seq_t;
};

// loss plus per-pair gradients of the mean
double ren_loss_grad(const std::vector<RenPair>& pairs, std::vector<RenPairGrads>& grads);

} // namespace cctl
