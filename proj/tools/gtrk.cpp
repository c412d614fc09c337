// gtrk: batch front end for the grouped-target tracking toolkit.
//
// Subcommands: simulate, run, train, eval, report.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gtrk/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, int scenario,
                 bool all, double duration, std::uint64_t seed, const std::string& fidelity) {
    gtrk::RunConfig rcfg;
    std::vector<gtrk::ScenarioConfig> scenarios;
    if (!config_path.empty()) {
        scenarios.push_back(gtrk::parse_scenario_config(load_json(config_path)));
    } else if (all) {
        for (int id = 1; id <= 6; ++id) {
            gtrk::ScenarioConfig c = gtrk::ScenarioConfig::scenario(id);
            c.duration_s = duration;
            c.seed = seed + static_cast<std::uint64_t>(id);
            c.fidelity = (fidelity == "signal") ? gtrk::Fidelity::signal
                                                : gtrk::Fidelity::point_cloud;
            scenarios.push_back(c);
        }
    } else {
        gtrk::ScenarioConfig c = gtrk::ScenarioConfig::scenario(scenario);
        c.duration_s = duration;
        c.seed = seed;
        c.fidelity = (fidelity == "signal") ? gtrk::Fidelity::signal
                                            : gtrk::Fidelity::point_cloud;
        scenarios.push_back(c);
    }

    for (const gtrk::ScenarioConfig& scfg : scenarios) {
        const std::string dir =
            (scenarios.size() == 1)
                ? out_dir
                : (gtrk::fs::path(out_dir) / ("scenario_" + std::to_string(scfg.scenario_id)))
                      .string();
        const gtrk::SimulateSummary s = gtrk::simulate_scenario(scfg, rcfg, dir);
        std::cout << "scenario " << scfg.scenario_id << ": " << s.frames << " frames ("
                  << (s.fidelity == gtrk::Fidelity::signal ? "signal" : "point_cloud")
                  << ") -> " << s.dir.string() << "\n";
    }
    return 0;
}

int cmd_run(gtrk::RunConfig cfg) {
    const gtrk::RunSummary s = gtrk::run_scenario(cfg);
    std::cout << "scenario " << s.scenario_id << ": " << s.frames << " frames, mean OSPA "
              << s.mean_ospa;
    if (!std::isnan(s.acc_bm))
        std::cout << ", counting acc " << 100.0 * s.acc_bm << "% BM / " << 100.0 * s.acc_am
                  << "% AM over " << s.n_predictions << " predictions";
    std::cout << "\n  outputs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& features, const std::vector<std::string>& cvd,
              const std::string& out_dir, const std::vector<std::string>& methods,
              std::uint64_t seed) {
    gtrk::TrainOptions opt;
    if (!methods.empty()) opt.methods = methods;
    opt.seed = seed;
    gtrk::train_models(features, out_dir, opt);
    if (!cvd.empty()) gtrk::train_cvd_models(cvd, out_dir, opt);
    std::cout << "models written to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& features, const std::string& out_dir,
             const std::string& method, std::uint64_t seed) {
    gtrk::TrainOptions opt;
    opt.seed = seed;
    gtrk::fs::create_directories(out_dir);
    const auto methods = gtrk::eval_method_grid(features, opt);
    gtrk::write_grid_csv((gtrk::fs::path(out_dir) / "eval_methods.csv").string(), methods);
    const auto sets = gtrk::eval_feature_grid(features, method, opt);
    gtrk::write_grid_csv((gtrk::fs::path(out_dir) / "eval_features.csv").string(), sets);
    const auto levels = gtrk::eval_level_grid(features, method, opt);
    gtrk::write_grid_csv((gtrk::fs::path(out_dir) / "eval_levels.csv").string(), levels);

    std::cout << "method grid (spatial+frequency):\n";
    for (const auto& r : methods)
        std::cout << "  " << r.method << ": " << 100.0 * r.accuracy_bm << "%\n";
    std::cout << "grids written to " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
    std::vector<gtrk::RunSummary> rows;
    for (const std::string& dir : run_dirs) {
        const auto j = load_json((gtrk::fs::path(dir) / "summary.json").string());
        gtrk::RunSummary s;
        s.scenario_id = j.at("scenario").get<int>();
        s.frames = j.at("frames").get<int>();
        s.acc_bm = j.at("acc_bm").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : j.at("acc_bm").get<double>();
        s.acc_am = j.at("acc_am").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : j.at("acc_am").get<double>();
        s.mean_ospa = j.at("mean_ospa").get<double>();
        s.mean_dloc = j.at("mean_dloc").get<double>();
        s.mean_dcard = j.at("mean_dcard").get<double>();
        rows.push_back(s);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.scenario_id < b.scenario_id; });
    gtrk::write_report_csv(out_csv, rows);
    std::cout << "report written to " << out_csv << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grouped-target tracking and people counting toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario dataset");
    std::string sim_config, sim_out = "dataset", sim_fidelity = "signal";
    int sim_scenario = 1;
    bool sim_all = false;
    double sim_duration = 60.0;
    std::uint64_t sim_seed = 0;
    sim->add_option("--config", sim_config, "scenario config JSON file");
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--scenario", sim_scenario, "scenario id 1..6")->check(CLI::Range(1, 6));
    sim->add_flag("--all", sim_all, "generate all six scenarios");
    sim->add_option("--duration", sim_duration, "duration in seconds");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--fidelity", sim_fidelity, "signal | point_cloud")
        ->check(CLI::IsMember({"signal", "point_cloud"}));

    // run
    auto* run = app.add_subcommand("run", "run the tracking + counting pipeline on a dataset");
    std::string run_config;
    gtrk::RunConfig rcfg;
    bool no_mti = false, no_feedback = false, no_classify = false, cvd_baseline = false;
    run->add_option("--config", run_config, "run config JSON file");
    run->add_option("--dataset", rcfg.dataset_dir, "dataset directory");
    run->add_option("--out", rcfg.out_dir, "output directory");
    run->add_option("--models", rcfg.model_dir, "model directory");
    run->add_option("--classifier", rcfg.classifier, "knn | naive_bayes | svm | random_forest");
    run->add_option("--features", rcfg.features, "spatial | frequency | both | pca");
    run->add_flag("--no-mti", no_mti, "disable static-clutter suppression");
    run->add_flag("--no-count-feedback", no_feedback, "disable classifier-to-tracker feedback");
    run->add_flag("--no-classify", no_classify, "conventional tracking only");
    run->add_flag("--cvd-baseline", cvd_baseline, "also run the CVD-feature baseline");
    run->add_option("--seed", rcfg.seed, "random seed");

    // train
    auto* train = app.add_subcommand("train", "train counting classifiers from feature CSVs");
    std::vector<std::string> train_features, train_cvd, train_methods;
    std::string train_out = "models";
    std::uint64_t train_seed = 0;
    train->add_option("--features", train_features, "feature CSV file(s)")->required();
    train->add_option("--cvd", train_cvd, "CVD feature CSV file(s)");
    train->add_option("--out", train_out, "model output directory");
    train->add_option("--method", train_methods,
                      "subset of {knn, naive_bayes, svm, random_forest}");
    train->add_option("--seed", train_seed, "split seed");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate classifier/feature/level grids");
    std::vector<std::string> eval_features;
    std::string eval_out = "eval", eval_method = "svm";
    std::uint64_t eval_seed = 0;
    eval->add_option("--features", eval_features, "feature CSV file(s)")->required();
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--method", eval_method, "method for the ablation grids");
    eval->add_option("--seed", eval_seed, "split seed");

    // report
    auto* report = app.add_subcommand("report", "aggregate run summaries into a report CSV");
    std::vector<std::string> report_runs;
    std::string report_out = "report.csv";
    report->add_option("--runs", report_runs, "run output directories")->required();
    report->add_option("--out", report_out, "report CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sim)
            return cmd_simulate(sim_config, sim_out, sim_scenario, sim_all, sim_duration,
                                sim_seed, sim_fidelity);
        if (*run) {
            if (!run_config.empty()) {
                gtrk::RunConfig from_file = gtrk::parse_run_config(load_json(run_config));
                // Explicit flags override file values.
                if (!rcfg.dataset_dir.empty()) from_file.dataset_dir = rcfg.dataset_dir;
                if (!rcfg.out_dir.empty()) from_file.out_dir = rcfg.out_dir;
                if (!rcfg.model_dir.empty()) from_file.model_dir = rcfg.model_dir;
                rcfg = from_file;
            }
            if (no_mti) rcfg.mti = false;
            if (no_feedback) rcfg.count_feedback = false;
            if (no_classify) rcfg.classify = false;
            if (cvd_baseline) rcfg.cvd_baseline = true;
            if (rcfg.dataset_dir.empty() || rcfg.out_dir.empty())
                throw std::invalid_argument("run: --dataset and --out are required");
            rcfg.validate();
            return cmd_run(rcfg);
        }
        if (*train) return cmd_train(train_features, train_cvd, train_out, train_methods,
                                     train_seed);
        if (*eval) return cmd_eval(eval_features, eval_out, eval_method, eval_seed);
        if (*report) return cmd_report(report_runs, report_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
