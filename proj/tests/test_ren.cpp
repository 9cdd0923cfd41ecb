#include "doctest.h"

#include <limits>
#include <stdexcept>

#include <cmath>

#include "cctl/numerics.hpp"
#include "cctl/ren.hpp"
#include "cctl/rng.hpp"

using namespace cctl;

TEST_CASE("cosine_sim: identity, orthogonality, antipodal") {
    std::vector<double> v = {0.5, -1.5, 2.0};
    CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> e1 = {1, 0}, e2 = {0, 1};
    CHECK(cosine_sim(e1, e2) == 0.0);
    std::vector<double> neg = {-0.5, 1.5, -2.0};
    CHECK(cosine_sim(v, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cosine_sim: degenerate norms give 0, length mismatch rejected") {
    std::vector<double> z = {0, 0, 0};
    std::vector<double> v = {1, 2, 3};
    CHECK(cosine_sim(z, v) == 0.0);
    std::vector<double> w = {1, 2};
    CHECK_THROWS_AS(cosine_sim(v, w), std::runtime_error);
}

TEST_CASE("ren_loss: identity cancellation, minimum, and range") {
    RenPair same;
    same.v_id_s = same.v_id_t = same.v_seq_s = same.v_seq_t = {1.0, 2.0};
    CHECK(ren_loss({same}) == doctest::Approx(0.0).epsilon(1e-12));

    RenPair extreme;
    extreme.v_id_s = {1.0, 0.0};
    extreme.v_id_t = {-1.0, 0.0};
    extreme.v_seq_s = {0.5, 0.5};
    extreme.v_seq_t = {0.5, 0.5};
    CHECK(ren_loss({extreme}) == doctest::Approx(-2.0).epsilon(1e-12));

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        RenPair p;
        auto draw = [&]() {
            std::vector<double> v(4);
            for (double& x : v) x = rng.uniform(-2, 2);
            return v;
        };
        p.v_id_s = draw();
        p.v_id_t = draw();
        p.v_seq_s = draw();
        p.v_seq_t = draw();
        double l = ren_loss({p});
        CHECK(l >= -2.0 - 1e-12);
        CHECK(l <= 2.0 + 1e-12);
    }
}

TEST_CASE("ren_loss: empty pair list is 0") {
    CHECK(ren_loss({}) == 0.0);
}

TEST_CASE("ren_loss is invariant under positive rescaling of any vector") {
    Rng rng(5);
    RenPair p;
    auto draw = [&]() {
        std::vector<double> v(6);
        for (double& x : v) x = rng.uniform(-1, 1);
        return v;
    };
    p.v_id_s = draw();
    p.v_id_t = draw();
    p.v_seq_s = draw();
    p.v_seq_t = draw();
    double base = ren_loss({p});
    RenPair q = p;
    for (double& x : q.v_id_s) x *= 7.5;
    for (double& x : q.v_seq_t) x *= 0.03;
    CHECK(ren_loss({q}) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ren_loss_grad matches finite differences") {
    Rng rng(7);
    std::vector<RenPair> pairs(3);
    auto draw = [&]() {
        std::vector<double> v(4);
        for (double& x : v) x = rng.uniform(-1, 1);
        return v;
    };
    for (RenPair& p : pairs) {
        p.v_id_s = draw();
        p.v_id_t = draw();
        p.v_seq_s = draw();
        p.v_seq_t = draw();
    }
    std::vector<RenPairGrads> grads;
    ren_loss_grad(pairs, grads);

    auto loss_fn = [&]() { return ren_loss(pairs); };
    std::vector<ParamBlock> blocks;
    std::vector<std::vector<double>> analytic;
    for (size_t k = 0; k < pairs.size(); ++k) {
        blocks.push_back({"id_s", pairs[k].v_id_s.data(), 4});
        analytic.push_back(grads[k].d_id_s);
        blocks.push_back({"id_t", pairs[k].v_id_t.data(), 4});
        analytic.push_back(grads[k].d_id_t);
        blocks.push_back({"seq_s", pairs[k].v_seq_s.data(), 4});
        analytic.push_back(grads[k].d_seq_s);
        blocks.push_back({"seq_t", pairs[k].v_seq_t.data(), 4});
        analytic.push_back(grads[k].d_seq_t);
    }
    CHECK(grad_check(loss_fn, blocks, analytic, 1e-4) < 1e-4);
}

TEST_CASE("gradient descent on ren_loss approaches the minimum") {
    Rng rng(11);
    RenPair p;
    auto draw = [&]() {
        std::vector<double> v(4);
        for (double& x : v) x = rng.uniform(-1, 1);
        return v;
    };
    p.v_id_s = draw();
    p.v_id_t = draw();
    p.v_seq_s = draw();
    p.v_seq_t = draw();
    std::vector<RenPair> pairs = {p};
    double prev = ren_loss(pairs);
    double lr = 0.05;
    double last = prev;
    for (int step = 0; step < 5000; ++step) {
        std::vector<RenPairGrads> grads;
        last = ren_loss_grad(pairs, grads);
        auto apply = [&](std::vector<double>& v, const std::vector<double>& g) {
            for (size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        };
        apply(pairs[0].v_id_s, grads[0].d_id_s);
        apply(pairs[0].v_id_t, grads[0].d_id_t);
        apply(pairs[0].v_seq_s, grads[0].d_seq_s);
        apply(pairs[0].v_seq_t, grads[0].d_seq_t);
        double now = ren_loss(pairs);
        CHECK(now <= last + 1e-9); // monotone descent at this step size
        if (now < -2.0 + 1e-6) break;
    }
    CHECK(ren_loss(pairs) < -2.0 + 1e-3);
}
