#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gtrk/pipeline.hpp"

using namespace gtrk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "gtrk_pipeline" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("point-cloud dataset: simulate, track, and reproduce byte-identically") {
    const fs::path base = fresh_dir("pc");
    ScenarioConfig scfg = ScenarioConfig::scenario(3);
    scfg.duration_s = 25.0;
    scfg.seed = 404;
    scfg.fidelity = Fidelity::point_cloud;

    RunConfig cfg;
    cfg.dataset_dir = (base / "data").string();
    cfg.out_dir = (base / "run1").string();
    cfg.classify = false;
    cfg.point_noise.miss_prob = 0.05;
    cfg.point_noise.clutter_rate = 0.5;

    const SimulateSummary sim = simulate_scenario(scfg, cfg, cfg.dataset_dir);
    REQUIRE(sim.frames == 250);
    REQUIRE(fs::exists(fs::path(cfg.dataset_dir) / "detections.jsonl"));

    const RunSummary run1 = run_scenario(cfg);
    REQUIRE(run1.frames == 250);
    // Merged 2-person group: localization decent, cardinality saturated
    // without a classifier.
    REQUIRE(run1.mean_dloc < 0.5);
    REQUIRE(run1.mean_dcard > 0.5);
    REQUIRE(std::isnan(run1.acc_bm));  // no counting on point clouds

    cfg.out_dir = (base / "run2").string();
    const RunSummary run2 = run_scenario(cfg);
    REQUIRE(run2.mean_ospa == run1.mean_ospa);
    REQUIRE(slurp(base / "run1" / "ospa.csv") == slurp(base / "run2" / "ospa.csv"));
    REQUIRE(slurp(base / "run1" / "tracks.jsonl") == slurp(base / "run2" / "tracks.jsonl"));
}

TEST_CASE("identical seeds give identical dataset files") {
    const fs::path base = fresh_dir("det");
    ScenarioConfig scfg = ScenarioConfig::scenario(2);
    scfg.duration_s = 8.0;
    scfg.seed = 7;
    scfg.fidelity = Fidelity::signal;
    RunConfig cfg;
    simulate_scenario(scfg, cfg, (base / "a").string());
    simulate_scenario(scfg, cfg, (base / "b").string());
    REQUIRE(slurp(base / "a" / "truth.jsonl") == slurp(base / "b" / "truth.jsonl"));
    REQUIRE(slurp(base / "a" / "cubes.bin") == slurp(base / "b" / "cubes.bin"));
}

TEST_CASE("signal pipeline end to end: detections near truth, seamless features") {
    const fs::path base = fresh_dir("sig");
    ScenarioConfig scfg = ScenarioConfig::scenario(1);
    scfg.duration_s = 20.0;
    scfg.seed = 11;
    scfg.fidelity = Fidelity::signal;

    RunConfig cfg;
    cfg.dataset_dir = (base / "data").string();
    cfg.out_dir = (base / "harvest").string();
    cfg.classify = false;
    simulate_scenario(scfg, cfg, cfg.dataset_dir);

    // Physical consistency: CFAR clusters sit within (0.6 m, 4 deg) RMS of
    // the walker through the datacube pipeline.
    {
        CubeReader reader((fs::path(cfg.dataset_dir) / "cubes.bin").string());
        std::ifstream tin(fs::path(cfg.dataset_dir) / "truth.jsonl");
        const GroundTruth gt = read_truth_jsonl(tin);
        double se_r = 0.0, se_az = 0.0;
        int n = 0;
        for (int f = 20; f < 120; f += 7) {
            const RadarCube cube = mti_suppress(reader.read_frame(f));
            const RDMap rd = range_doppler_transform(cube);
            auto dets = cfar_detect(rd, cfg.cfar);
            for (Detection& d : dets) d.azimuth_deg = estimate_azimuth(rd, d);
            const ClusterResult cl = cluster_detections(dets, cfg.cluster_eps, cfg.cluster_min_pts);
            if (cl.clusters.empty()) continue;  // dwell frames are allowed to miss
            const auto& p = gt.frames[static_cast<size_t>(f)].persons[0];
            const double tr = std::hypot(p.x, p.y);
            const double taz = rad_to_deg(std::atan2(p.x, p.y));
            double best = 1e9, br = 0, baz = 0;
            for (const auto& c : cl.clusters) {
                const double r = std::hypot(c.centroid_x, c.centroid_y);
                const double az = rad_to_deg(std::atan2(c.centroid_x, c.centroid_y));
                const double d = std::abs(r - tr);
                if (d < best) {
                    best = d;
                    br = r;
                    baz = az;
                }
            }
            se_r += (br - tr) * (br - tr);
            se_az += (baz - taz) * (baz - taz);
            ++n;
        }
        REQUIRE(n > 5);
        REQUIRE(std::sqrt(se_r / n) < 0.6);
        REQUIRE(std::sqrt(se_az / n) < 4.0);
    }

    const RunSummary harvest = run_scenario(cfg);
    REQUIRE(harvest.frames == 200);
    REQUIRE(harvest.mean_dloc < 0.6);

    // Feature log: every confirmed track emits one row per frame, modes switch
    // spatial_only -> full exactly once.
    {
        std::ifstream fin(fs::path(cfg.out_dir) / "features.csv");
        const FeatureTable t = read_feature_csv(fin);
        REQUIRE(t.rows.size() > 50);
        std::map<int, std::vector<size_t>> by_track;
        for (size_t i = 0; i < t.rows.size(); ++i) by_track[t.track_ids[i]].push_back(i);
        for (auto& [tid, idx] : by_track) {
            std::sort(idx.begin(), idx.end(),
                      [&](size_t a, size_t b) { return t.frames[a] < t.frames[b]; });
            int switches = 0;
            for (size_t k = 1; k < idx.size(); ++k) {
                REQUIRE(t.frames[idx[k]] == t.frames[idx[k - 1]] + 1);  // no gaps
                if (t.modes[idx[k]] != t.modes[idx[k - 1]]) {
                    ++switches;
                    REQUIRE(t.modes[idx[k]] == FeatureVector::Mode::full);
                }
            }
            REQUIRE(switches <= 1);
            REQUIRE(t.labels[idx[0]] == 1);  // single walker
        }
    }

    // Harvest a two-person scenario as well so training sees both classes,
    // then rerun scenario 1 with counting enabled.
    RunConfig cfg2 = cfg;
    ScenarioConfig scfg2 = ScenarioConfig::scenario(3);
    scfg2.duration_s = 20.0;
    scfg2.seed = 12;
    scfg2.fidelity = Fidelity::signal;
    cfg2.dataset_dir = (base / "data2").string();
    cfg2.out_dir = (base / "harvest2").string();
    simulate_scenario(scfg2, cfg2, cfg2.dataset_dir);
    run_scenario(cfg2);

    TrainOptions topt;
    topt.methods = {"knn"};
    topt.seed = 5;
    train_models({(fs::path(cfg.out_dir) / "features.csv").string(),
                  (fs::path(cfg2.out_dir) / "features.csv").string()},
                 (base / "models").string(), topt);
    REQUIRE(fs::exists(base / "models" / "knn_spatial.json"));
    REQUIRE(fs::exists(base / "models" / "knn_full.json"));

    RunConfig counted = cfg;
    counted.out_dir = (base / "counted").string();
    counted.classify = true;
    counted.classifier = "knn";
    counted.model_dir = (base / "models").string();
    const RunSummary cs = run_scenario(counted);
    REQUIRE(cs.n_predictions > 50);
    REQUIRE(cs.acc_am >= 0.9);  // single walker counted as 1 almost always

    // Seamless contract on the prediction log: a prediction for every frame
    // from confirmation to the last live frame of each track.
    std::map<int, std::pair<int, int>> confirmed_span;  // id -> [first confirmed, last]
    {
        std::ifstream tin(fs::path(counted.out_dir) / "tracks.jsonl");
        std::string line;
        while (std::getline(tin, line)) {
            const auto j = nlohmann::json::parse(line);
            if (j.at("status").get<std::string>() != "confirmed") continue;
            const int id = j.at("id").get<int>();
            const int frame = j.at("frame").get<int>();
            auto it = confirmed_span.find(id);
            if (it == confirmed_span.end()) confirmed_span[id] = {frame, frame};
            else it->second.second = frame;
        }
    }
    std::map<int, std::set<int>> pred_frames;
    {
        std::ifstream pin(fs::path(counted.out_dir) / "predictions.jsonl");
        std::string line;
        while (std::getline(pin, line)) {
            const auto j = nlohmann::json::parse(line);
            pred_frames[j.at("track_id").get<int>()].insert(j.at("frame").get<int>());
            REQUIRE(j.at("label_am").get<int>() >= 1);
        }
    }
    REQUIRE_FALSE(confirmed_span.empty());
    for (const auto& [id, span] : confirmed_span) {
        for (int f = span.first; f <= span.second; ++f)
            REQUIRE(pred_frames[id].count(f) == 1);
    }
}

TEST_CASE("run config parsing defaults and rejects unknown values") {
    const auto j = nlohmann::json::parse(
        R"({"dataset_dir":"d","out_dir":"o","classifier":"svm","features":"pca","mti":false})");
    const RunConfig c = parse_run_config(j);
    REQUIRE(c.features == "pca");
    REQUIRE_FALSE(c.mti);
    REQUIRE(c.cluster_eps == 0.9);
    REQUIRE(c.tracker.sigma_accel == 1.5);

    const auto bad = nlohmann::json::parse(R"({"classifier":"perceptron"})");
    REQUIRE_THROWS_AS(parse_run_config(bad), std::invalid_argument);
}

TEST_CASE("missing models produce a clear error for counted runs") {
    const fs::path base = fresh_dir("nomodel");
    ScenarioConfig scfg = ScenarioConfig::scenario(1);
    scfg.duration_s = 3.0;
    scfg.seed = 2;
    scfg.fidelity = Fidelity::signal;
    RunConfig cfg;
    cfg.dataset_dir = (base / "data").string();
    cfg.out_dir = (base / "out").string();
    cfg.model_dir = (base / "absent").string();
    cfg.classify = true;
    simulate_scenario(scfg, cfg, cfg.dataset_dir);
    REQUIRE_THROWS_AS(run_scenario(cfg), std::runtime_error);
}
