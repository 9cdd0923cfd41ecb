#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cctl/metrics.hpp"
#include "cctl/rng.hpp"

using namespace cctl;

namespace {

// O(n^2) pair-count oracle with half credit for ties
double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("auc: perfect separation, mixed case, and all ties") {
    std::vector<double> s1 = {0.9, 0.2, 0.7};
    std::vector<int> l1 = {1, 0, 1};
    CHECK(auc(s1, l1) == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> s2 = {0.9, 0.8, 0.2};
    std::vector<int> l2 = {1, 0, 1};
    CHECK(auc(s2, l2) == doctest::Approx(auc_bruteforce(s2, l2)).epsilon(1e-15));
    CHECK(auc(s2, l2) == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<double> s3 = {0.4, 0.4, 0.4, 0.4};
    std::vector<int> l3 = {1, 0, 1, 0};
    CHECK(auc(s3, l3) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("auc agrees with the brute-force oracle on random instances") {
    Rng rng(101);
    for (int trial = 0; trial < 60; ++trial) {
        size_t n = 2 + rng.below(300);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool ties = trial % 3 == 0;
        for (size_t i = 0; i < n; ++i) {
            scores[i] = ties ? std::floor(rng.uniform01() * 8.0) / 8.0 : rng.uniform01();
            labels[i] = rng.uniform01() < 0.4 ? 1 : 0;
        }
        labels[0] = 1;
        labels[n - 1] = 0;
        double fast = auc(scores, labels);
        double slow = auc_bruteforce(scores, labels);
        CHECK(std::fabs(fast - slow) < 1e-12);
    }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
    Rng rng(103);
    std::vector<double> scores(200);
    std::vector<int> labels(200);
    for (size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.uniform(-3, 3);
        labels[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    double base = auc(scores, labels);
    std::vector<double> warped = scores;
    for (double& x : warped) x = std::exp(0.5 * x) + 7.0;
    CHECK(auc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("auc: single-class input reports NaN and a flag") {
    std::vector<double> scores = {0.1, 0.9};
    std::vector<int> ones = {1, 1};
    CHECK(std::isnan(auc(scores, ones)));
    EvalReport r = evaluate_scores(scores, ones);
    CHECK_FALSE(r.auc_valid);
    CHECK(r.n_pos == 2);
    CHECK(r.n_neg == 0);
}

TEST_CASE("logloss: midpoint, confident predictions, duplication invariance") {
    std::vector<double> half = {0.5, 0.5, 0.5};
    std::vector<int> labels = {1, 0, 1};
    CHECK(logloss(half, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::vector<double> confident = {1.0, 0.0};
    std::vector<int> l2 = {1, 0};
    CHECK(logloss(confident, l2) < 1e-6); // clamp floor scale

    Rng rng(105);
    std::vector<double> s(50);
    std::vector<int> l(50);
    for (size_t i = 0; i < 50; ++i) {
        s[i] = rng.uniform01();
        l[i] = rng.uniform01() < 0.5;
    }
    double base = logloss(s, l);
    std::vector<double> s2 = s;
    std::vector<int> l3 = l;
    s2.insert(s2.end(), s.begin(), s.end());
    l3.insert(l3.end(), l.begin(), l.end());
    CHECK(logloss(s2, l3) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("logloss decreases when a correct prediction grows more confident") {
    std::vector<double> s = {0.6, 0.3};
    std::vector<int> l = {1, 0};
    double before = logloss(s, l);
    s[0] = 0.8;
    CHECK(logloss(s, l) < before);
}

TEST_CASE("metrics reject degenerate input shapes") {
    std::vector<double> s = {0.5};
    std::vector<int> l = {1, 0};
    CHECK_THROWS_AS(auc(s, l), std::runtime_error);
    CHECK_THROWS_AS(logloss({}, {}), std::runtime_error);
}
