#include "cctl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cctl/numerics.hpp"

namespace cctl {

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw std::runtime_error("auc: scores and labels differ in length");
    }
    if (scores.empty()) {
        throw std::runtime_error("auc: empty input");
    }
    size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw std::runtime_error("auc: labels must be 0 or 1");
        }
        n_pos += static_cast<size_t>(y);
    }
    size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    // average rank within each tie group, ranks are 1-based
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1 .. j
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    double np = static_cast<double>(n_pos);
    double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw std::runtime_error("logloss: scores and labels differ in length");
    }
    if (scores.empty()) {
        throw std::runtime_error("logloss: empty input");
    }
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        sum += bce_loss(scores[i], labels[i], 1.0);
    }
    return sum / static_cast<double>(scores.size());
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
    EvalReport report;
    for (int y : labels) {
        if (y == 1) {
            ++report.n_pos;
        } else {
            ++report.n_neg;
        }
    }
    report.auc = auc(scores, labels);
    report.auc_valid = !std::isnan(report.auc);
    report.logloss = logloss(scores, labels);
    return report;
}

} // namespace cctl
