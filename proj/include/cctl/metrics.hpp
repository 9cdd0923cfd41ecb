#pragma once

#include <cstdint>
#include <span>

namespace cctl {

// Rank-based AUC with 0.5 credit per tied pair; equals the probability that a
// random positive outranks a random negative. Returns quiet NaN when only one
// class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

// mean clamped binary cross-entropy
double logloss(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
    double auc = 0.0;
    bool auc_valid = false; // false when the input was single-class
    double logloss = 0.0;
    size_t n_pos = 0;
    size_t n_neg = 0;
};

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels);

} // namespace cctl
