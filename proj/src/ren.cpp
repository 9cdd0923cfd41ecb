#include "cctl/ren.hpp"

#include <cmath>
#include <stdexcept>

namespace cctl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::runtime_error("cosine_sim: length mismatch: " + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()));
    }
    double na = std::sqrt(dot(a, a));
    double nb = std::sqrt(dot(b, b));
    if (na < kCosineNormFloor || nb < kCosineNormFloor) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

void cosine_sim_grad(std::span<const double> a, std::span<const double> b,
                     std::vector<double>& da, std::vector<double>& db) {
    if (a.size() != b.size()) {
        throw std::runtime_error("cosine_sim_grad: length mismatch");
    }
    da.assign(a.size(), 0.0);
    db.assign(b.size(), 0.0);
    double na = std::sqrt(dot(a, a));
    double nb = std::sqrt(dot(b, b));
    if (na < kCosineNormFloor || nb < kCosineNormFloor) {
        return;
    }
    double ab = dot(a, b);
    double inv = 1.0 / (na * nb);
    double cos = ab * inv;
    for (size_t i = 0; i < a.size(); ++i) {
        da[i] = b[i] * inv - cos * a[i] / (na * na);
        db[i] = a[i] * inv - cos * b[i] / (nb * nb);
    }
}

double ren_loss(const std::vector<RenPair>& pairs) {
    if (pairs.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const RenPair& p : pairs) {
        sum += cosine_sim(p.v_id_s, p.v_id_t) - cosine_sim(p.v_seq_s, p.v_seq_t);
    }
    return sum / static_cast<double>(pairs.size());
}

double ren_loss_grad(const std::vector<RenPair>& pairs, std::vector<RenPairGrads>& grads) {
    grads.assign(pairs.size(), {});
    if (pairs.empty()) {
        return 0.0;
    }
    double inv_n = 1.0 / static_cast<double>(pairs.size());
    double sum = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const RenPair& p = pairs[i];
        sum += cosine_sim(p.v_id_s, p.v_id_t) - cosine_sim(p.v_seq_s, p.v_seq_t);
        cosine_sim_grad(p.v_id_s, p.v_id_t, grads[i].d_id_s, grads[i].d_id_t);
        std::vector<double> ds, dt;
        cosine_sim_grad(p.v_seq_s, p.v_seq_t, ds, dt);
        grads[i].d_seq_s.assign(ds.size(), 0.0);
        grads[i].d_seq_t.assign(dt.size(), 0.0);
        for (size_t c = 0; c < ds.size(); ++c) {
            grads[i].d_seq_s[c] = -ds[c];
            grads[i].d_seq_t[c] = -dt[c];
        }
        for (double& x : grads[i].d_id_s) x *= inv_n;
        for (double& x : grads[i].d_id_t) x *= inv_n;
        for (double& x : grads[i].d_seq_s) x *= inv_n;
        for (double& x : grads[i].d_seq_t) x *= inv_n;
    }
    return sum * inv_n;
}

} // namespace cctl
