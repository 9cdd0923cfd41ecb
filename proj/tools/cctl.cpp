#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cctl/experiment.hpp"

namespace {

using cctl::json;

cctl::ExperimentConfig load_config_with_overrides(const std::string& path,
                                                  const std::vector<uint64_t>& seeds,
                                                  const std::string& out_dir) {
    cctl::ExperimentConfig cfg = cctl::load_config(path);
    if (!seeds.empty()) {
        cfg.seeds = seeds;
    }
    if (!out_dir.empty()) {
        cfg.out_dir = out_dir;
    }
    return cfg;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        out.push_back(std::stod(cur));
    }
    return out;
}

void print_report(const cctl::RunReport& report) {
    std::cout << "method: " << report.method << "\n";
    std::cout << "config: " << report.hash << "\n";
    std::cout.precision(6);
    std::cout << std::fixed;
    for (const cctl::SeedResult& r : report.per_seed) {
        std::cout << "  seed " << r.seed;
        if (r.failed) {
            std::cout << "  FAILED: " << r.failure << "\n";
            continue;
        }
        std::cout << "  auc " << (r.final_eval.auc_valid ? r.final_eval.auc : 0.0) << "  logloss "
                  << r.final_eval.logloss << "  steps " << r.steps << "\n";
    }
    std::cout << "mean auc " << report.auc_mean << " +- " << report.auc_std << ", mean logloss "
              << report.logloss_mean << " +- " << report.logloss_std << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cctl: cross-domain CTR training experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, model_path, data_dir, run_dir, param, values_csv;
    std::vector<uint64_t> seeds;
    std::string domain_name = "target", split_name = "test";

    CLI::App* gen = app.add_subcommand("generate-data", "generate a synthetic two-domain dataset");
    gen->add_option("--config", config_path, "experiment config JSON")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seeds, "run seed override");

    CLI::App* train = app.add_subcommand("train", "train the configured method");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--seed", seeds, "seed list override");
    train->add_option("--out", out_dir, "output directory override");

    CLI::App* eval = app.add_subcommand("evaluate", "evaluate an exported model on a dataset");
    eval->add_option("--model", model_path, "exported pure-tower JSON")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--domain", domain_name, "source|target");
    eval->add_option("--split", split_name, "train|test");

    CLI::App* sw = app.add_subcommand("sweep", "run one experiment per parameter value");
    sw->add_option("--config", config_path, "experiment config JSON")->required();
    sw->add_option("--param", param, "dotted config key, e.g. cctl.alpha")->required();
    sw->add_option("--values", values_csv, "comma-separated values")->required();
    sw->add_option("--seed", seeds, "seed list override");
    sw->add_option("--out", out_dir, "output directory override");

    CLI::App* rep = app.add_subcommand("report", "print the summary of a finished run");
    rep->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            cctl::ExperimentConfig cfg = load_config_with_overrides(config_path, seeds, "");
            uint64_t seed = cfg.seeds.front();
            cctl::Dataset ds = cctl::build_dataset(cfg, seed);
            cctl::save_dataset(ds, out_dir);
            std::cout << "wrote " << ds.source_samples.size() << " source / "
                      << ds.target_samples.size() << " target samples to " << out_dir << "\n";
        } else if (train->parsed()) {
            cctl::ExperimentConfig cfg = load_config_with_overrides(config_path, seeds, out_dir);
            cctl::RunReport report = cctl::run_experiment(cfg, true);
            print_report(report);
            if (report.n_failed > 0) {
                return 2;
            }
        } else if (eval->parsed()) {
            cctl::PureModel model = cctl::load_pure_tower(model_path);
            cctl::Dataset ds = cctl::load_dataset(data_dir);
            cctl::Domain domain =
                domain_name == "source" ? cctl::Domain::source : cctl::Domain::target;
            cctl::Split split = split_name == "train" ? cctl::Split::train : cctl::Split::test;
            cctl::EvalReport r = cctl::evaluate_model(model, ds, domain, split);
            json j;
            j["auc"] = r.auc_valid ? json(r.auc) : json(nullptr);
            j["auc_valid"] = r.auc_valid;
            j["logloss"] = r.logloss;
            j["n_pos"] = r.n_pos;
            j["n_neg"] = r.n_neg;
            if (!model.warning.empty()) {
                j["model_warning"] = model.warning;
            }
            std::cout << j.dump(2) << "\n";
        } else if (sw->parsed()) {
            cctl::ExperimentConfig cfg = load_config_with_overrides(config_path, seeds, out_dir);
            std::vector<cctl::SweepRow> rows = cctl::sweep(cfg, param, parse_values(values_csv));
            std::string csv = cctl::sweep_csv(param, rows);
            std::cout << csv;
            std::string csv_path = cfg.out_dir + "/sweep-" + param + ".csv";
            std::ofstream out(csv_path);
            out << csv;
            std::cerr << "sweep table written to " << csv_path << "\n";
        } else if (rep->parsed()) {
            json j = cctl::read_json_file(run_dir + "/report.json");
            std::cout << j.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
