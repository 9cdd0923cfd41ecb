#include "cctl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace cctl {

MetricsLogger::MetricsLogger(const std::string& path) {
    out_ = std::make_shared<std::ofstream>(path);
    if (!*out_) {
        throw std::runtime_error("metrics log: cannot open '" + path + "'");
    }
}

void MetricsLogger::log(const json& record) {
    if (out_) {
        *out_ << record.dump() << "\n";
    }
}

namespace {

AdamHyper hyper_from(const ExperimentConfig& cfg) {
    AdamHyper h;
    h.lr = cfg.lr;
    return h;
}

uint64_t dataset_seed(uint64_t synth_seed, uint64_t run_seed) {
    return Rng(synth_seed).split("dataset").split(std::to_string(run_seed)).next_u64();
}

// standalone single-domain trainer; shares the tower-step helpers (and the
// init stream names) with the pure tower inside the companion network
struct SingleTower {
    FeatureSchema schema;
    TowerParams tower;
    AdamState opt;
};

SingleTower make_single_tower(const FeatureSchema& schema, const std::vector<size_t>& widths,
                              const AdamHyper& hyper, Rng run_rng) {
    SingleTower t;
    t.schema = schema;
    t.tower.mlp = make_mlp(schema.tower_input_width(), widths, Activation::relu,
                           Activation::sigmoid, run_rng.split("init.tower_mlp"));
    t.tower.tables[Domain::target] = make_embedding_tables(schema, run_rng.split("init.embed.target"));
    t.opt = AdamState(hyper);
    return t;
}

double single_tower_step(SingleTower& t, const Batch& batch) {
    GradientBundle bundle = make_zero_bundle(t.tower);
    PureForward pf = target_tower_grads(t.tower, t.schema, batch, bundle);
    if (!bundle_all_finite(bundle)) {
        throw std::runtime_error("train_step: non-finite gradient in tower");
    }
    apply_tower_update(t.opt, t.tower, bundle);
    return pf.loss;
}

EvalReport eval_tower(const TowerParams& tower, const FeatureSchema& schema, const Dataset& ds,
                      Split split) {
    const std::vector<size_t>& idx = split == Split::train ? ds.target_train : ds.target_test;
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(idx.size());
    labels.reserve(idx.size());
    for (size_t i : idx) {
        const Sample& s = ds.target_samples[i];
        scores.push_back(tower_predict(tower, schema, Domain::target, s));
        labels.push_back(s.label);
    }
    return evaluate_scores(scores, labels);
}

json eval_to_json(const EvalReport& e) {
    json j;
    j["auc"] = e.auc_valid ? json(e.auc) : json(nullptr);
    j["auc_valid"] = e.auc_valid;
    j["logloss"] = e.logloss;
    j["n_pos"] = e.n_pos;
    j["n_neg"] = e.n_neg;
    return j;
}

std::vector<size_t> histogram20(const std::vector<double>& xs) {
    std::vector<size_t> bins(20, 0);
    for (double x : xs) {
        int b = static_cast<int>(x * 20.0);
        if (b < 0) b = 0;
        if (b > 19) b = 19;
        bins[static_cast<size_t>(b)] += 1;
    }
    return bins;
}

PureModel model_from_tower(const TowerParams& tower, const FeatureSchema& schema, size_t steps,
                           const std::string& hash) {
    PureModel m;
    m.schema = schema;
    m.tables = tower.tables.at(Domain::target);
    m.mlp = tower.mlp;
    m.step = static_cast<int64_t>(steps);
    m.sync_step = static_cast<int64_t>(steps);
    m.config_hash = hash;
    return m;
}

// selector-weight bookkeeping for the trailing update window
struct PWindow {
    std::vector<double> sums;
    std::vector<size_t> counts;
    std::vector<double> window_values;

    void record_step(const std::vector<double>& ps) {
        double s = 0.0;
        for (double p : ps) s += p;
        sums.push_back(s);
        counts.push_back(ps.size());
        window_values.insert(window_values.end(), ps.begin(), ps.end());
    }
    double trailing_mean(size_t window) const {
        double s = 0.0;
        size_t n = 0;
        size_t start = sums.size() > window ? sums.size() - window : 0;
        for (size_t i = start; i < sums.size(); ++i) {
            s += sums[i];
            n += counts[i];
        }
        return n == 0 ? 1.0 : s / static_cast<double>(n);
    }
};

struct EarlyStop {
    size_t patience = 0;
    double best = -1.0;
    size_t since_best = 0;

    bool update(const EvalReport& e) {
        if (patience == 0) return false;
        double score = e.auc_valid ? e.auc : -e.logloss;
        if (score > best) {
            best = score;
            since_best = 0;
            return false;
        }
        return ++since_best >= patience;
    }
};

SeedRunData run_cctl_family(const ExperimentConfig& cfg, const Dataset& ds, uint64_t seed,
                            MetricsLogger& logger) {
    CctlKnobs knobs = cfg.cctl;
    if (cfg.method == "naive_mixed") {
        // plain multi-domain mixing: every source sample flows at weight 1
        // and the selector never learns
        knobs.force_p = 1.0;
        knobs.alpha = 0.0;
    }
    if (knobs.disable_ifn) {
        knobs.force_p = 1.0;
    }

    Rng run_rng(seed);
    AdamHyper hyper = hyper_from(cfg);

    ScnOptions sopts;
    sopts.sync_interval = knobs.sync_interval;
    sopts.ren_beta = knobs.beta;
    sopts.disable_ren = knobs.disable_ren;
    sopts.include_item_pairs = knobs.include_item_pairs;
    sopts.sync_moments = knobs.sync_moments == "copy" ? SyncMoments::copy : SyncMoments::reset;
    ScnState scn = make_scn(ds.source_schema, ds.target_schema, cfg.tower_widths, hyper, sopts,
                            run_rng);

    IfnOptions iopts;
    iopts.gamma = knobs.gamma;
    iopts.update_interval = knobs.update_interval;
    iopts.alpha = knobs.alpha;
    iopts.selector_mode =
        knobs.selector_mode == "sample" ? SelectorMode::sample : SelectorMode::weight;
    iopts.baseline = knobs.reward_baseline == "mean" ? RewardBaseline::mean : RewardBaseline::none;
    iopts.force_p = knobs.force_p;
    iopts.selector_hidden = knobs.selector_hidden;
    iopts.san_hidden = knobs.san_hidden;
    if (knobs.san_mode == "identity") {
        iopts.san_mode = SanMode::identity;
    } else if (knobs.san_mode == "mlp") {
        iopts.san_mode = SanMode::mlp;
    } else {
        iopts.san_mode = ds.source_schema.same_token_widths(ds.target_schema) ? SanMode::identity
                                                                              : SanMode::mlp;
    }
    IfnState ifn = make_ifn(ds.source_schema, ds.target_schema, iopts, hyper, run_rng);
    EntityLinkage linkage = make_linkage(ds);

    BatchStream tstream = make_batches(ds, Domain::target, Split::train, cfg.batch_size,
                                       run_rng.split("batches.target"));
    BatchStream sstream = make_batches(ds, Domain::source, Split::train, cfg.source_batch_size,
                                       run_rng.split("batches.source"));

    SeedRunData out;
    out.result.seed = seed;
    PWindow pwindow;
    EarlyStop stopper{cfg.early_stop_patience};
    size_t steps_per_epoch = tstream.batches_per_epoch();

    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t b = 0; b < steps_per_epoch; ++b) {
            Batch target = tstream.next();
            Batch source = sstream.next();
            StepResult res = train_step(scn, ifn, linkage, target, source);
            out.trace.push_back({res.losses.loss_src, res.losses.loss_tgt, res.losses.loss_pure,
                                 res.losses.r, res.ren});
            pwindow.record_step(res.selector_p);
            if (logger.enabled()) {
                double psum = 0.0;
                for (double p : res.selector_p) psum += p;
                json rec;
                rec["type"] = "step";
                rec["step"] = scn.step;
                rec["loss_src"] = res.losses.loss_src;
                rec["loss_tgt"] = res.losses.loss_tgt;
                rec["loss_pure"] = res.losses.loss_pure;
                rec["r"] = res.losses.r;
                rec["ren"] = res.ren;
                rec["ren_pairs"] = res.ren_pairs;
                if (!res.selector_p.empty()) {
                    rec["p_mean"] = psum / static_cast<double>(res.selector_p.size());
                }
                if (res.synced) rec["synced"] = true;
                logger.log(rec);
            }
            if (scn.step % ifn.buffer.update_interval == 0 && !knobs.force_p) {
                if (logger.enabled()) {
                    json rec;
                    rec["type"] = "reinforce";
                    rec["step"] = scn.step;
                    rec["applied"] = res.reinforce.applied;
                    rec["n_samples"] = res.reinforce.n_samples;
                    rec["r_accu_mean"] = res.reinforce.r_accu_mean;
                    rec["r_accu_min"] = res.reinforce.r_accu_min;
                    rec["r_accu_max"] = res.reinforce.r_accu_max;
                    rec["p_hist"] = histogram20(pwindow.window_values);
                    if (!res.reinforce.skipped.empty()) rec["skipped"] = res.reinforce.skipped;
                    logger.log(rec);
                }
                pwindow.window_values.clear();
            }
        }
        EvalReport eval = eval_tower(scn.pure, ds.target_schema, ds, Split::test);
        out.result.epochs.push_back({epoch, eval});
        if (logger.enabled()) {
            json rec = eval_to_json(eval);
            rec["type"] = "epoch";
            rec["epoch"] = epoch;
            logger.log(rec);
        }
        if (stopper.update(eval)) {
            break;
        }
    }

    // deployment reads the pure tower, so finish on a synchronized state
    sync_params(scn);
    out.result.final_eval = eval_tower(scn.pure, ds.target_schema, ds, Split::test);
    out.result.final_p_mean =
        pwindow.trailing_mean(static_cast<size_t>(ifn.buffer.update_interval));
    out.result.steps = static_cast<size_t>(scn.step);
    out.model = snapshot_pure_tower(scn, "");
    return out;
}

SeedRunData run_single_domain(const ExperimentConfig& cfg, const Dataset& ds, uint64_t seed,
                              MetricsLogger& logger) {
    if (!ds.source_samples.empty()) {
        std::cerr << "warning: method '" << cfg.method
                  << "' ignores the configured source-domain data\n";
    }
    Rng run_rng(seed);
    FeatureSchema schema = ds.target_schema;
    std::vector<size_t> widths = cfg.tower_widths;
    if (cfg.method == "lr") {
        // logistic regression: scalar embeddings feeding one sigmoid layer
        schema.embed_dim = 1;
        widths = {1};
    }
    SingleTower t = make_single_tower(schema, widths, hyper_from(cfg), run_rng);
    BatchStream tstream = make_batches(ds, Domain::target, Split::train, cfg.batch_size,
                                       run_rng.split("batches.target"));
    SeedRunData out;
    out.result.seed = seed;
    EarlyStop stopper{cfg.early_stop_patience};
    size_t steps_per_epoch = tstream.batches_per_epoch();
    size_t steps = 0;
    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t b = 0; b < steps_per_epoch; ++b) {
            double loss = single_tower_step(t, tstream.next());
            ++steps;
            out.trace.push_back({0.0, loss, loss, 0.0, 0.0});
            if (logger.enabled()) {
                logger.log({{"type", "step"}, {"step", steps}, {"loss_pure", loss}});
            }
        }
        EvalReport eval = eval_tower(t.tower, schema, ds, Split::test);
        out.result.epochs.push_back({epoch, eval});
        if (logger.enabled()) {
            json rec = eval_to_json(eval);
            rec["type"] = "epoch";
            rec["epoch"] = epoch;
            logger.log(rec);
        }
        if (stopper.update(eval)) {
            break;
        }
    }
    out.result.final_eval = eval_tower(t.tower, schema, ds, Split::test);
    out.result.steps = steps;
    out.model = model_from_tower(t.tower, schema, steps, "");
    return out;
}

SeedRunData run_finetune(const ExperimentConfig& cfg, const Dataset& ds, uint64_t seed,
                         MetricsLogger& logger) {
    Rng run_rng(seed);
    AdamHyper hyper = hyper_from(cfg);
    FeatureSchema target = ds.target_schema;
    FeatureSchema source = ds.source_schema;

    MlpParams trunk = make_mlp(target.tower_input_width(), cfg.tower_widths, Activation::relu,
                               Activation::sigmoid, run_rng.split("init.tower_mlp"));

    SeedRunData out;
    out.result.seed = seed;
    size_t steps = 0;

    if (cfg.pretrain_epochs > 0) {
        EmbeddingTables src_tables =
            make_embedding_tables(source, run_rng.split("init.embed.source"));
        SanMode mode = source.same_token_widths(target) ? SanMode::identity : SanMode::mlp;
        SanParams san = make_san(source, target, cfg.cctl.san_hidden, mode, run_rng.split("init.san"));
        AdamState opt(hyper);
        AdamState san_opt(hyper);
        BatchStream sstream = make_batches(ds, Domain::source, Split::train, cfg.source_batch_size,
                                           run_rng.split("batches.source"));
        size_t per_epoch = sstream.batches_per_epoch();
        std::vector<double> input_grad;
        for (size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
            for (size_t b = 0; b < per_epoch; ++b) {
                Batch batch = sstream.next();
                if (batch.empty()) continue;
                MlpGrads trunk_grads = make_zero_grads(trunk);
                SanGrads san_grads = make_zero_san_grads(san);
                TableRowGrads table_grads;
                double inv_n = 1.0 / static_cast<double>(batch.size());
                double loss = 0.0;
                TokenVectors token_grads;
                for (const Sample& s : batch) {
                    TokenVectors tokens = embed_sample(src_tables, source, s);
                    SanTape san_tape;
                    std::vector<double> x = align_source(san, tokens, &san_tape);
                    MlpTape tape;
                    double p = mlp_forward(trunk, x, &tape)[0];
                    auto [l, dldp] = bce_loss_grad(p, s.label, 1.0);
                    loss += l * inv_n;
                    double out_grad[1] = {dldp * inv_n};
                    mlp_backward_accum(trunk, tape, out_grad, trunk_grads, input_grad);
                    san_backward_accum(san, san_tape, tokens, input_grad, san_grads, token_grads);
                    scatter_token_grads(source, s, token_grads, 1.0, table_grads);
                }
                opt.begin_step();
                adam_update_mlp(opt, "mlp", trunk, trunk_grads);
                for (const auto& [field, rows] : table_grads) {
                    opt.update_rows("table.source." + field, src_tables.table(field), rows);
                }
                if (mode == SanMode::mlp) {
                    adam_update_san(san_opt, san, san_grads);
                }
                ++steps;
                if (logger.enabled()) {
                    logger.log({{"type", "pretrain_step"}, {"step", steps}, {"loss_src", loss}});
                }
            }
        }
    }

    // finetune phase: fresh target tables and a fresh optimizer on the
    // pretrained trunk; with 0 pretrain epochs this is exactly the single
    // domain trainer
    SingleTower t;
    t.schema = target;
    t.tower.mlp = std::move(trunk);
    t.tower.tables[Domain::target] = make_embedding_tables(target, run_rng.split("init.embed.target"));
    t.opt = AdamState(hyper);
    BatchStream tstream = make_batches(ds, Domain::target, Split::train, cfg.batch_size,
                                       run_rng.split("batches.target"));
    EarlyStop stopper{cfg.early_stop_patience};
    size_t steps_per_epoch = tstream.batches_per_epoch();
    size_t tuned_steps = 0;
    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t b = 0; b < steps_per_epoch; ++b) {
            double loss = single_tower_step(t, tstream.next());
            ++tuned_steps;
            out.trace.push_back({0.0, loss, loss, 0.0, 0.0});
            if (logger.enabled()) {
                logger.log({{"type", "step"}, {"step", tuned_steps}, {"loss_pure", loss}});
            }
        }
        EvalReport eval = eval_tower(t.tower, target, ds, Split::test);
        out.result.epochs.push_back({epoch, eval});
        if (logger.enabled()) {
            json rec = eval_to_json(eval);
            rec["type"] = "epoch";
            rec["epoch"] = epoch;
            logger.log(rec);
        }
        if (stopper.update(eval)) {
            break;
        }
    }
    out.result.final_eval = eval_tower(t.tower, target, ds, Split::test);
    out.result.steps = tuned_steps;
    out.model = model_from_tower(t.tower, target, tuned_steps, "");
    return out;
}

} // namespace

Dataset build_dataset(const ExperimentConfig& cfg, uint64_t run_seed) {
    if (cfg.data.kind == "csv") {
        return load_dataset(cfg.data.csv_dir);
    }
    SynthConfig synth = cfg.data.synth;
    synth.seed = dataset_seed(cfg.data.synth.seed, run_seed);
    synth.embed_dim = cfg.data.synth.embed_dim;
    return generate_synthetic(synth);
}

SeedRunData run_seed(const ExperimentConfig& cfg, const Dataset& data, uint64_t seed,
                     MetricsLogger logger) {
    if (cfg.method == "cctl" || cfg.method == "naive_mixed") {
        return run_cctl_family(cfg, data, seed, logger);
    }
    if (cfg.method == "pure_dnn" || cfg.method == "lr") {
        return run_single_domain(cfg, data, seed, logger);
    }
    if (cfg.method == "finetune") {
        return run_finetune(cfg, data, seed, logger);
    }
    throw std::runtime_error("run_seed: unknown method '" + cfg.method + "'");
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& std) {
    mean = 0.0;
    std = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string timestamp_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
    return buf;
}

} // namespace

RunReport run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.method = cfg.method;
    report.hash = config_hash(cfg);

    std::string run_dir;
    if (write_outputs) {
        run_dir = cfg.out_dir + "/" + report.hash + "-" + timestamp_now();
        std::filesystem::create_directories(run_dir);
        write_json_file(run_dir + "/config.json", config_to_json(cfg));
    }

    Dataset csv_data;
    bool have_csv = cfg.data.kind == "csv";
    if (have_csv) {
        csv_data = load_dataset(cfg.data.csv_dir);
    }

    for (uint64_t seed : cfg.seeds) {
        std::string seed_dir;
        MetricsLogger logger;
        if (write_outputs) {
            seed_dir = run_dir + "/seed" + std::to_string(seed);
            std::filesystem::create_directories(seed_dir);
            logger = MetricsLogger(seed_dir + "/metrics.jsonl");
        }
        SeedResult result;
        result.seed = seed;
        try {
            Dataset generated;
            const Dataset* data = &csv_data;
            if (!have_csv) {
                generated = build_dataset(cfg, seed);
                data = &generated;
            }
            SeedRunData sd = run_seed(cfg, *data, seed, logger);
            sd.model.config_hash = report.hash;
            result = sd.result;
            if (write_outputs) {
                save_pure_model(sd.model, seed_dir + "/model.json");
            }
        } catch (const std::exception& e) {
            result.failed = true;
            result.failure = e.what();
            std::cerr << "seed " << seed << " failed: " << e.what() << "\n";
        }
        report.per_seed.push_back(std::move(result));
    }

    std::vector<double> aucs, losses;
    for (const SeedResult& r : report.per_seed) {
        if (r.failed) {
            ++report.n_failed;
            continue;
        }
        if (r.final_eval.auc_valid) {
            aucs.push_back(r.final_eval.auc);
        }
        losses.push_back(r.final_eval.logloss);
    }
    mean_std(aucs, report.auc_mean, report.auc_std);
    mean_std(losses, report.logloss_mean, report.logloss_std);
    report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (write_outputs) {
        write_json_file(run_dir + "/report.json", run_report_to_json(report, true));
    }
    return report;
}

json run_report_to_json(const RunReport& report, bool include_timing) {
    json j;
    j["method"] = report.method;
    j["config_hash"] = report.hash;
    j["n_failed"] = report.n_failed;
    j["aggregate"] = {{"auc_mean", report.auc_mean},
                      {"auc_std", report.auc_std},
                      {"logloss_mean", report.logloss_mean},
                      {"logloss_std", report.logloss_std}};
    json seeds = json::array();
    for (const SeedResult& r : report.per_seed) {
        json s;
        s["seed"] = r.seed;
        s["steps"] = r.steps;
        s["failed"] = r.failed;
        if (r.failed) {
            s["failure"] = r.failure;
        }
        s["final"] = eval_to_json(r.final_eval);
        s["final_p_mean"] = r.final_p_mean;
        json epochs = json::array();
        for (const EpochEval& e : r.epochs) {
            json ej = eval_to_json(e.eval);
            ej["epoch"] = e.epoch;
            epochs.push_back(std::move(ej));
        }
        s["epochs"] = std::move(epochs);
        seeds.push_back(std::move(s));
    }
    j["per_seed"] = std::move(seeds);
    if (include_timing) {
        j["timing"] = {{"wall_clock_sec", report.wall_clock_sec}};
    }
    return j;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& param,
                            const std::vector<double>& values, bool write_outputs) {
    if (values.empty()) {
        throw std::runtime_error("sweep: no values given");
    }
    std::vector<SweepRow> rows;
    for (double v : values) {
        json j = config_to_json(base);
        json* node = &j;
        std::string rest = param;
        while (true) {
            size_t dot = rest.find('.');
            std::string head = rest.substr(0, dot);
            if (!node->contains(head)) {
                throw std::runtime_error("sweep: unknown parameter '" + param + "'");
            }
            node = &(*node)[head];
            if (dot == std::string::npos) break;
            rest = rest.substr(dot + 1);
        }
        if (node->is_number_integer() || node->is_number_unsigned()) {
            *node = static_cast<int64_t>(std::llround(v));
        } else if (node->is_number_float() || node->is_null()) {
            *node = v;
        } else {
            throw std::runtime_error("sweep: parameter '" + param + "' is not numeric");
        }
        ExperimentConfig cfg = config_from_json(j);
        rows.push_back({v, run_experiment(cfg, write_outputs)});
    }
    return rows;
}

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "param,value,auc_mean,auc_std,logloss_mean,logloss_std\n";
    out.precision(17);
    for (const SweepRow& r : rows) {
        out << param << ',' << r.value << ',' << r.report.auc_mean << ',' << r.report.auc_std
            << ',' << r.report.logloss_mean << ',' << r.report.logloss_std << "\n";
    }
    return out.str();
}

EvalReport evaluate_model(const PureModel& model, const Dataset& ds, Domain domain, Split split) {
    const std::vector<size_t>& idx =
        domain == Domain::source ? (split == Split::train ? ds.source_train : ds.source_test)
                                 : (split == Split::train ? ds.target_train : ds.target_test);
    const std::vector<Sample>& samples = ds.samples(domain);
    std::vector<double> scores;
    std::vector<int> labels;
    for (size_t i : idx) {
        scores.push_back(predict(model, samples[i]));
        labels.push_back(samples[i].label);
    }
    return evaluate_scores(scores, labels);
}

} // namespace cctl
