#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cctl/json_io.hpp"
#include "fixtures.hpp"

using namespace cctl;
using fixtures::micro_batch;
using fixtures::micro_world;
using fixtures::MicroWorld;
using fixtures::towers_equal_target_side;

namespace {

void zero_head(MlpParams& mlp) {
    MlpLayer& head = mlp.layers.back();
    for (double& x : head.weight.values) x = 0.0;
    for (double& x : head.bias) x = 0.0;
    mlp.bump_revision();
}

} // namespace

TEST_CASE("pure_forward_loss: zero head predicts 0.5, loss is ln 2") {
    MicroWorld w = micro_world(1);
    zero_head(w.scn.pure.mlp);
    Batch batch = micro_batch(w.target_schema, 5, 2);
    PureForward pf = pure_forward_loss(w.scn.pure, w.target_schema, batch);
    CHECK(pf.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("pure_forward_loss: singleton batch equals bce of the prediction") {
    MicroWorld w = micro_world(3);
    Batch batch = micro_batch(w.target_schema, 1, 4);
    PureForward pf = pure_forward_loss(w.scn.pure, w.target_schema, batch);
    double p = tower_predict(w.scn.pure, w.target_schema, Domain::target, batch[0]);
    CHECK(pf.loss == bce_loss(p, batch[0].label, 1.0));
}

TEST_CASE("pure_forward_loss: duplicated batch leaves the mean unchanged") {
    MicroWorld w = micro_world(5);
    Batch batch = micro_batch(w.target_schema, 4, 6);
    double base = pure_forward_loss(w.scn.pure, w.target_schema, batch).loss;
    Batch doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    double dup = pure_forward_loss(w.scn.pure, w.target_schema, doubled).loss;
    CHECK(dup == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("pure_forward_loss rejects empty and cross-domain batches") {
    MicroWorld w = micro_world(7);
    CHECK_THROWS_AS(pure_forward_loss(w.scn.pure, w.target_schema, {}), std::runtime_error);
    Batch bad = micro_batch(w.source_schema, 1, 8);
    CHECK_THROWS_AS(pure_forward_loss(w.scn.pure, w.target_schema, bad), std::runtime_error);
}

TEST_CASE("mixed_forward_loss: weight handling") {
    MicroWorld w = micro_world(9);
    Batch target = micro_batch(w.target_schema, 3, 10);
    Batch source = micro_batch(w.source_schema, 4, 11);

    auto aligned_with = [&](double weight) {
        std::vector<AlignedSource> out;
        for (const Sample& s : source) {
            TokenVectors tokens =
                embed_sample(w.scn.mixed.tables.at(Domain::source), w.source_schema, s);
            out.push_back({align_source(w.ifn.san, tokens), weight, s.label});
        }
        return out;
    };

    MixedForward zero = mixed_forward_loss(w.scn.mixed, w.target_schema, target, aligned_with(0.0));
    CHECK(zero.loss_src == 0.0);

    MixedForward full = mixed_forward_loss(w.scn.mixed, w.target_schema, target, aligned_with(1.0));
    double unweighted = 0.0;
    for (size_t j = 0; j < source.size(); ++j) {
        unweighted += bce_loss(full.src_probs[j], source[j].label, 1.0);
    }
    unweighted /= static_cast<double>(source.size());
    CHECK(full.loss_src == doctest::Approx(unweighted).epsilon(1e-12));

    // half weight on a single source sample halves its loss
    std::vector<AlignedSource> one = aligned_with(1.0);
    one.resize(1);
    std::vector<AlignedSource> half = one;
    half[0].weight = 0.5;
    double l1 = mixed_forward_loss(w.scn.mixed, w.target_schema, target, one).loss_src;
    double l05 = mixed_forward_loss(w.scn.mixed, w.target_schema, target, half).loss_src;
    CHECK(l05 == doctest::Approx(0.5 * l1).epsilon(1e-12));
}

TEST_CASE("mixed_forward_loss rejects a wrong aligned width") {
    MicroWorld w = micro_world(13);
    Batch target = micro_batch(w.target_schema, 2, 14);
    std::vector<AlignedSource> bad = {{std::vector<double>(3, 0.0), 1.0, 1}};
    CHECK_THROWS_WITH_AS(mixed_forward_loss(w.scn.mixed, w.target_schema, target, bad),
                         doctest::Contains("align"), std::runtime_error);
}

TEST_CASE("information_gain: sign semantics") {
    CHECK(information_gain(0.7, 0.5) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(information_gain(0.5, 0.7) == doctest::Approx(-0.2).epsilon(1e-15));
    MicroWorld w = micro_world(15);
    Batch batch = micro_batch(w.target_schema, 4, 16);
    // identical towers at init: gain is exactly zero
    double lp = pure_forward_loss(w.scn.pure, w.target_schema, batch).loss;
    std::vector<AlignedSource> none;
    double lt = mixed_forward_loss(w.scn.mixed, w.target_schema, batch, none).loss_tgt;
    CHECK(information_gain(lp, lt) == 0.0);
}

TEST_CASE("sync_params: bitwise copy, idempotence, source side untouched") {
    MicroWorld w = micro_world(17);
    Batch target = micro_batch(w.target_schema, 6, 18);
    Batch source = micro_batch(w.source_schema, 6, 19);
    for (int step = 0; step < 5; ++step) {
        train_step(w.scn, w.ifn, w.linkage, target, source);
    }
    CHECK_FALSE(towers_equal_target_side(w.scn.mixed, w.scn.pure));
    EmbeddingTables source_before = w.scn.mixed.tables.at(Domain::source);

    sync_params(w.scn);
    CHECK(towers_equal_target_side(w.scn.mixed, w.scn.pure));
    CHECK(w.scn.last_sync_step == w.scn.step);
    // pure tower never grows a source-domain table
    CHECK(w.scn.pure.tables.count(Domain::source) == 0);
    for (const auto& [name, m] : source_before.fields) {
        CHECK(w.scn.mixed.tables.at(Domain::source).table(name).values == m.values);
    }

    // double sync is idempotent
    ScnState snapshot = w.scn;
    sync_params(w.scn);
    CHECK(towers_equal_target_side(w.scn.pure, snapshot.pure));

    // after sync both towers price the same batch identically
    double lp = pure_forward_loss(w.scn.pure, w.target_schema, target).loss;
    std::vector<AlignedSource> none;
    double lt = mixed_forward_loss(w.scn.mixed, w.target_schema, target, none).loss_tgt;
    CHECK(lp == lt);
}

TEST_CASE("train_step: selector is stop-gradient, updates only via reinforce") {
    IfnOptions iopts;
    iopts.update_interval = 1000; // never fires in this test
    MicroWorld w = micro_world(21, {}, iopts);
    MlpParams selector_before = w.ifn.selector.mlp;
    for (int step = 0; step < 10; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 100 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 200 + static_cast<uint64_t>(step));
        train_step(w.scn, w.ifn, w.linkage, target, source);
    }
    for (size_t l = 0; l < selector_before.layers.size(); ++l) {
        CHECK(w.ifn.selector.mlp.layers[l].weight.values ==
              selector_before.layers[l].weight.values);
        CHECK(w.ifn.selector.mlp.layers[l].bias == selector_before.layers[l].bias);
    }
}

TEST_CASE("train_step: mlp-mode align network trains from the mixed gradient only") {
    IfnOptions iopts;
    iopts.san_mode = SanMode::mlp;
    iopts.update_interval = 1000;
    MicroWorld w = micro_world(23, {}, iopts);
    MlpParams san_user_before = w.ifn.san.user;
    for (int step = 0; step < 5; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 300 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 400 + static_cast<uint64_t>(step));
        train_step(w.scn, w.ifn, w.linkage, target, source);
    }
    bool changed = false;
    for (size_t l = 0; l < san_user_before.layers.size(); ++l) {
        changed = changed ||
                  w.ifn.san.user.layers[l].weight.values != san_user_before.layers[l].weight.values;
    }
    CHECK(changed);
}

TEST_CASE("train_step: bitwise-identical traces across reruns") {
    auto run = []() {
        MicroWorld w = micro_world(25);
        std::vector<StepLosses> trace;
        for (int step = 0; step < 20; ++step) {
            Batch target = micro_batch(w.target_schema, 4, 500 + static_cast<uint64_t>(step));
            Batch source = micro_batch(w.source_schema, 4, 600 + static_cast<uint64_t>(step));
            trace.push_back(train_step(w.scn, w.ifn, w.linkage, target, source).losses);
        }
        return trace;
    };
    std::vector<StepLosses> a = run();
    std::vector<StepLosses> b = run();
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].loss_src == b[i].loss_src);
        CHECK(a[i].loss_tgt == b[i].loss_tgt);
        CHECK(a[i].loss_pure == b[i].loss_pure);
        CHECK(a[i].r == b[i].r);
    }
}

TEST_CASE("train_step: reward identity r == loss_pure - loss_tgt") {
    MicroWorld w = micro_world(27);
    for (int step = 0; step < 15; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 700 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 800 + static_cast<uint64_t>(step));
        StepResult res = train_step(w.scn, w.ifn, w.linkage, target, source);
        CHECK(res.losses.r == res.losses.loss_pure - res.losses.loss_tgt);
    }
}

TEST_CASE("train_step: p forced to 0 keeps towers bitwise identical between syncs") {
    ScnOptions sopts;
    sopts.sync_interval = 1000;
    sopts.disable_ren = true;
    IfnOptions iopts;
    iopts.force_p = 0.0;
    MicroWorld w = micro_world(29, sopts, iopts);
    for (int step = 0; step < 25; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 900 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 950 + static_cast<uint64_t>(step));
        StepResult res = train_step(w.scn, w.ifn, w.linkage, target, source);
        CHECK(res.losses.loss_src == 0.0);
        CHECK(towers_equal_target_side(w.scn.mixed, w.scn.pure));
    }
}

TEST_CASE("train_step: full-objective gradients pass a finite-difference check") {
    ScnOptions sopts;
    sopts.ren_beta = 0.1;
    MicroWorld w = micro_world(31, sopts);
    fixtures::inflate_tables(w.scn.mixed, 310);
    // two samples sharing user 2 across domains so the contrastive term is live
    Batch target = micro_batch(w.target_schema, 2, 32);
    Batch source = micro_batch(w.source_schema, 2, 33);
    target[0].feature_ids[0] = 2;
    source[0].feature_ids[0] = 2;
    std::vector<double> weights = {0.7, 0.3};

    MixedEval ev =
        eval_mixed_objective(w.scn, w.ifn.san, target, source, weights, w.linkage, true);
    CHECK(ev.ren_pairs > 0);

    auto loss_fn = [&]() {
        return eval_mixed_objective(w.scn, w.ifn.san, target, source, weights, w.linkage, false)
            .objective;
    };
    std::vector<ParamBlock> blocks = fixtures::tower_blocks(w.scn.mixed, "mixed");
    std::vector<std::vector<double>> analytic =
        fixtures::bundle_grad_arrays(w.scn.mixed, ev.bundle);
    CHECK(grad_check(loss_fn, blocks, analytic, 1e-4) < 1e-4);
}

TEST_CASE("export/import: bitwise round trip and structural exclusions") {
    MicroWorld w = micro_world(35);
    for (int step = 0; step < 8; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 1000 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 1100 + static_cast<uint64_t>(step));
        train_step(w.scn, w.ifn, w.linkage, target, source);
    }
    sync_params(w.scn);
    std::string path = "/tmp/cctl_test_model.json";
    export_pure_tower(w.scn, path, "deadbeef");
    PureModel model = load_pure_tower(path);
    CHECK(model.warning.empty());
    CHECK(model.config_hash == "deadbeef");

    for (int i = 0; i < 100; ++i) {
        Batch probe = micro_batch(w.target_schema, 1, 5000 + static_cast<uint64_t>(i));
        double live = tower_predict(w.scn.pure, w.target_schema, Domain::target, probe[0]);
        CHECK(predict(model, probe[0]) == live);
    }

    // artifact carries target tables and the trunk only
    json j = read_json_file(path);
    for (const json& block : j.at("params")) {
        std::string name = block.at("name").get<std::string>();
        CHECK(name.find("source") == std::string::npos);
        CHECK(name.find("san") == std::string::npos);
        CHECK(name.find("selector") == std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("export without a final sync records a warning") {
    MicroWorld w = micro_world(37);
    Batch target = micro_batch(w.target_schema, 4, 1200);
    Batch source = micro_batch(w.source_schema, 4, 1300);
    train_step(w.scn, w.ifn, w.linkage, target, source);
    std::string path = "/tmp/cctl_test_unsynced.json";
    export_pure_tower(w.scn, path, "");
    PureModel model = load_pure_tower(path);
    CHECK_FALSE(model.warning.empty());
    std::remove(path.c_str());
}

TEST_CASE("sync with moment copy keeps towers identical across sync boundaries at p=0") {
    ScnOptions sopts;
    sopts.sync_interval = 5;
    sopts.disable_ren = true;
    sopts.sync_moments = SyncMoments::copy;
    IfnOptions iopts;
    iopts.force_p = 0.0;
    MicroWorld w = micro_world(39, sopts, iopts);
    for (int step = 0; step < 17; ++step) {
        Batch target = micro_batch(w.target_schema, 4, 1400 + static_cast<uint64_t>(step));
        Batch source = micro_batch(w.source_schema, 4, 1500 + static_cast<uint64_t>(step));
        train_step(w.scn, w.ifn, w.linkage, target, source);
        CHECK(towers_equal_target_side(w.scn.mixed, w.scn.pure));
    }
}
