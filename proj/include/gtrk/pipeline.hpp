#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtrk/classify.hpp"
#include "gtrk/cluster.hpp"
#include "gtrk/cube_io.hpp"
#include "gtrk/datacube.hpp"
#include "gtrk/features.hpp"
#include "gtrk/metrics.hpp"
#include "gtrk/sim.hpp"
#include "gtrk/track.hpp"

namespace gtrk {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string dataset_dir;
    std::string out_dir;
    std::string model_dir;

    bool mti = true;
    bool count_feedback = true;
    bool classify = true;          // false: conventional tracking only
    std::string classifier = "svm";
    std::string features = "both"; // spatial | frequency | both | pca
    bool cvd_baseline = false;
    std::uint64_t seed = 0;

    RadarParams radar;
    CfarConfig cfar;
    TrackerConfig tracker;
    FeatureConfig feat;
    OspaConfig ospa;
    double cluster_eps = 0.9;
    int cluster_min_pts = 3;
    double noise_std = 0.5;        // signal synthesis noise
    PointNoise point_noise;
    MultipathConfig multipath;
    int static_clutter = 6;

    void validate() const {
        if (classifier != "knn" && classifier != "naive_bayes" && classifier != "svm" &&
            classifier != "random_forest")
            throw std::invalid_argument("RunConfig: unknown classifier " + classifier);
        if (features != "spatial" && features != "frequency" && features != "both" &&
            features != "pca")
            throw std::invalid_argument("RunConfig: unknown feature set " + features);
    }
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dataset_dir", c.dataset_dir);
    get("out_dir", c.out_dir);
    get("model_dir", c.model_dir);
    get("mti", c.mti);
    get("count_feedback", c.count_feedback);
    get("classify", c.classify);
    get("classifier", c.classifier);
    get("features", c.features);
    get("cvd_baseline", c.cvd_baseline);
    get("seed", c.seed);
    get("cluster_eps", c.cluster_eps);
    get("cluster_min_pts", c.cluster_min_pts);
    get("noise_std", c.noise_std);
    get("static_clutter", c.static_clutter);
    if (j.contains("ospa")) {
        c.ospa.p = j.at("ospa").value("p", c.ospa.p);
        c.ospa.c = j.at("ospa").value("c", c.ospa.c);
    }
    if (j.contains("cfar")) {
        const auto& cj = j.at("cfar");
        c.cfar.pfa = cj.value("pfa", c.cfar.pfa);
        c.cfar.train_range = cj.value("train_range", c.cfar.train_range);
        c.cfar.train_doppler = cj.value("train_doppler", c.cfar.train_doppler);
        c.cfar.guard_range = cj.value("guard_range", c.cfar.guard_range);
        c.cfar.guard_doppler = cj.value("guard_doppler", c.cfar.guard_doppler);
        c.cfar.notch_doppler_bins = cj.value("notch_doppler_bins", c.cfar.notch_doppler_bins);
    }
    if (j.contains("tracker")) {
        const auto& tj = j.at("tracker");
        c.tracker.sigma_accel = tj.value("sigma_accel", c.tracker.sigma_accel);
        c.tracker.gate_chi2 = tj.value("gate_chi2", c.tracker.gate_chi2);
        c.tracker.delete_misses = tj.value("delete_misses", c.tracker.delete_misses);
        c.tracker.ownership_radius_m = tj.value("ownership_radius_m", c.tracker.ownership_radius_m);
    }
    if (j.contains("window_frames")) c.feat.window_frames = j.at("window_frames").get<int>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Counting models (seamless pair + optional PCA front end)
// ---------------------------------------------------------------------------

// A classifier plus the feature columns it consumes (indices into the
// 50-value vector) and an optional standardize+PCA front end.
struct CountModel {
    std::vector<int> columns;
    std::optional<Standardizer> pre_scaler;
    std::optional<PcaTransform> pca;
    std::unique_ptr<Classifier> clf;

    Eigen::VectorXd assemble(const FeatureVector& fv) const {
        Eigen::VectorXd x(static_cast<int>(columns.size()));
        for (size_t i = 0; i < columns.size(); ++i) {
            const int c = columns[i];
            if (c >= 10 && fv.mode != FeatureVector::Mode::full)
                throw std::invalid_argument(
                    "CountModel: frequency feature requested from a spatial-only vector");
            x(static_cast<int>(i)) = (c < 10) ? fv.spatial[static_cast<size_t>(c)]
                                              : fv.frequency[static_cast<size_t>(c - 10)];
        }
        if (pre_scaler && pca) {
            const Eigen::VectorXd z = pre_scaler->transform_one(x);
            return (pca->components.transpose() * (z - pca->mean)).eval();
        }
        return x;
    }

    Prediction predict(const FeatureVector& fv) const { return clf->predict_one(assemble(fv)); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["columns"] = columns;
        j["classifier"] = clf->to_json();
        if (pre_scaler && pca) {
            j["pre_scaler"] = pre_scaler->to_json();
            j["pca"] = pca->to_json();
        }
        return j;
    }
    static CountModel from_json(const nlohmann::json& j) {
        CountModel m;
        m.columns = j.at("columns").get<std::vector<int>>();
        m.clf = classifier_from_json(j.at("classifier"));
        if (j.contains("pca")) {
            m.pre_scaler = Standardizer::from_json(j.at("pre_scaler"));
            m.pca = PcaTransform::from_json(j.at("pca"));
        }
        return m;
    }
};

inline std::vector<int> feature_columns(const std::string& set) {
    std::vector<int> cols;
    if (set == "spatial" || set == "both" || set == "pca") {
        for (int i = 0; i < 10; ++i) cols.push_back(i);
    }
    if (set == "frequency" || set == "both" || set == "pca") {
        for (int i = 10; i < 50; ++i) cols.push_back(i);
    }
    return cols;
}

// Seamless pair: a mode-matched model for the filling interval and one for
// the full observation window.
struct SeamlessCounter {
    CountModel spatial;
    CountModel full;

    Prediction predict(const FeatureVector& fv) const {
        return (fv.mode == FeatureVector::Mode::full) ? full.predict(fv) : spatial.predict(fv);
    }
};

inline std::string model_path(const std::string& model_dir, const std::string& method,
                              const std::string& feature_set) {
    return (fs::path(model_dir) / (method + "_" + feature_set + ".json")).string();
}

inline void save_count_model(const CountModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path);
    out << m.to_json().dump(2) << '\n';
}

inline CountModel load_count_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing model file " + path);
    nlohmann::json j;
    in >> j;
    return CountModel::from_json(j);
}

inline SeamlessCounter load_seamless(const std::string& model_dir, const std::string& method,
                                     const std::string& feature_set) {
    SeamlessCounter sc;
    sc.spatial = load_count_model(model_path(model_dir, method, "spatial"));
    std::string full_set = feature_set;
    if (feature_set == "both") full_set = "full";
    if (feature_set == "spatial") full_set = "spatial";
    sc.full = load_count_model(model_path(model_dir, method, full_set));
    return sc;
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

struct DatasetPaths {
    fs::path dir;
    fs::path scenario_json() const { return dir / "scenario.json"; }
    fs::path truth() const { return dir / "truth.jsonl"; }
    fs::path cubes() const { return dir / "cubes.bin"; }
    fs::path detections() const { return dir / "detections.jsonl"; }
};

struct SimulateSummary {
    int frames = 0;
    Fidelity fidelity = Fidelity::point_cloud;
    fs::path dir;
};

// Writes scenario.json, truth.jsonl and either cubes.bin or detections.jsonl.
inline SimulateSummary simulate_scenario(const ScenarioConfig& scfg, const RunConfig& rcfg,
                                         const std::string& out_dir) {
    DatasetPaths paths{fs::path(out_dir)};
    fs::create_directories(paths.dir);

    const GroundTruth gt = gen_trajectories(scfg, rcfg.radar);
    {
        std::ofstream out(paths.scenario_json());
        if (!out) throw std::runtime_error("cannot write " + paths.scenario_json().string());
        out << scenario_config_json(scfg).dump(2) << '\n';
    }
    {
        std::ofstream out(paths.truth());
        if (!out) throw std::runtime_error("cannot write " + paths.truth().string());
        write_truth_jsonl(out, gt);
    }

    if (scfg.fidelity == Fidelity::signal) {
        const std::vector<GaitModel> gaits = sample_gaits(scfg);
        CubeWriter writer(paths.cubes().string(), rcfg.radar);
        for (const TruthFrame& tf : gt.frames)
            writer.append(synthesize_frame(tf, gaits, rcfg.radar, rcfg.multipath, rcfg.noise_std,
                                           scfg.seed, scfg.room_w, scfg.room_h,
                                           rcfg.static_clutter));
        writer.finish();
    } else {
        std::ofstream out(paths.detections());
        if (!out) throw std::runtime_error("cannot write " + paths.detections().string());
        for (const TruthFrame& tf : gt.frames) {
            const auto dets = gen_point_cloud(tf, rcfg.point_noise, scfg.seed, rcfg.radar);
            write_detections_jsonl(out, dets);
        }
    }
    return {static_cast<int>(gt.frames.size()), scfg.fidelity, paths.dir};
}

// ---------------------------------------------------------------------------
// Streaming run
// ---------------------------------------------------------------------------

struct RunSummary {
    int scenario_id = 0;
    int frames = 0;
    double acc_bm = std::numeric_limits<double>::quiet_NaN();
    double acc_am = std::numeric_limits<double>::quiet_NaN();
    double mean_ospa = 0.0;
    double mean_dloc = 0.0;
    double mean_dcard = 0.0;
    int n_predictions = 0;
    double acc_bm_cvd = std::numeric_limits<double>::quiet_NaN();
    double acc_am_cvd = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct TruthGroup {
    double cx, cy;
    int count;
};

inline std::vector<TruthGroup> truth_groups(const TruthFrame& tf, double radius) {
    std::vector<TruthGroup> out;
    std::vector<int> owner(tf.persons.size());
    std::iota(owner.begin(), owner.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (owner[static_cast<size_t>(a)] != a) a = owner[static_cast<size_t>(a)] = owner[static_cast<size_t>(owner[static_cast<size_t>(a)])];
        return a;
    };
    for (size_t i = 0; i < tf.persons.size(); ++i)
        for (size_t j = i + 1; j < tf.persons.size(); ++j) {
            const double d = std::hypot(tf.persons[i].x - tf.persons[j].x,
                                        tf.persons[i].y - tf.persons[j].y);
            if (d <= radius) owner[static_cast<size_t>(find(static_cast<int>(i)))] = find(static_cast<int>(j));
        }
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < tf.persons.size(); ++i)
        groups[find(static_cast<int>(i))].push_back(static_cast<int>(i));
    for (auto& [root, members] : groups) {
        TruthGroup g{0.0, 0.0, static_cast<int>(members.size())};
        for (int i : members) {
            g.cx += tf.persons[static_cast<size_t>(i)].x;
            g.cy += tf.persons[static_cast<size_t>(i)].y;
        }
        g.cx /= g.count;
        g.cy /= g.count;
        out.push_back(g);
    }
    return out;
}

inline int true_count_at(const std::vector<TruthGroup>& groups, double x, double y) {
    if (groups.empty()) return 0;
    const TruthGroup* best = &groups.front();
    double bd = std::numeric_limits<double>::max();
    for (const TruthGroup& g : groups) {
        const double d = std::hypot(g.cx - x, g.cy - y);
        if (d < bd) {
            bd = d;
            best = &g;
        }
    }
    return best->count;
}

// Channel-summed range-FFT series at one range bin, one value per chirp.
// Only one DFT coefficient is needed, so it is evaluated directly.
inline std::vector<cplx> slow_time_at_bin(const RadarCube& cube, int range_bin) {
    const auto& p = cube.params;
    const int n_s = p.samples_per_chirp;
    std::vector<cplx> twiddle(static_cast<size_t>(n_s));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_s));
    for (int s = 0; s < n_s; ++s) {
        const double phi = -2.0 * kPi * range_bin * s / n_s;
        twiddle[static_cast<size_t>(s)] = scale * cplx(std::cos(phi), std::sin(phi));
    }
    std::vector<cplx> out(static_cast<size_t>(p.chirps_per_frame), cplx{0.0, 0.0});
    for (int c = 0; c < p.chirps_per_frame; ++c) {
        cplx acc{0.0, 0.0};
        for (int ch = 0; ch < p.n_virtual_channels; ++ch)
            for (int s = 0; s < n_s; ++s) acc += cube.at(s, c, ch) * twiddle[static_cast<size_t>(s)];
        out[static_cast<size_t>(c)] = acc;
    }
    return out;
}

// Doppler-integrated azimuth power for a subset of range rows; rows outside
// stay at the dB floor. Same math as range_azimuth_map, restricted to where
// track patches will be read.
inline RAMap ra_map_for_rows(const RadarCube& cube, const std::vector<char>& row_needed) {
    const auto& p = cube.params;
    const int n_fft = 64;
    const double max_az = p.max_azimuth_deg();
    std::vector<int> keep;
    std::vector<double> axis;
    for (int k = 0; k < n_fft; ++k) {
        const double u = (k - n_fft / 2) / static_cast<double>(n_fft);
        const double s = std::clamp(u / p.element_spacing, -1.0, 1.0);
        const double az = rad_to_deg(std::asin(s));
        if (std::abs(az) <= max_az) {
            keep.push_back(k);
            axis.push_back(az);
        }
    }
    RAMap out;
    out.params = p;
    out.frame_index = cube.frame_index;
    out.azimuth_axis_deg = axis;
    Eigen::MatrixXd power = Eigen::MatrixXd::Zero(p.samples_per_chirp,
                                                  static_cast<int>(keep.size()));
    const std::vector<double> w = make_window(WindowKind::hann, p.n_virtual_channels);
    std::vector<cplx> twiddle(static_cast<size_t>(p.samples_per_chirp));
    std::vector<cplx> padded(static_cast<size_t>(n_fft));
    std::vector<cplx> ch(static_cast<size_t>(p.n_virtual_channels));
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.samples_per_chirp));
    for (int r = 0; r < p.samples_per_chirp; ++r) {
        if (!row_needed[static_cast<size_t>(r)]) continue;
        for (int s = 0; s < p.samples_per_chirp; ++s) {
            const double phi = -2.0 * kPi * r * s / p.samples_per_chirp;
            twiddle[static_cast<size_t>(s)] = scale * cplx(std::cos(phi), std::sin(phi));
        }
        for (int c = 0; c < p.chirps_per_frame; ++c) {
            for (int v = 0; v < p.n_virtual_channels; ++v) {
                cplx acc{0.0, 0.0};
                for (int s = 0; s < p.samples_per_chirp; ++s)
                    acc += cube.at(s, c, v) * twiddle[static_cast<size_t>(s)];
                ch[static_cast<size_t>(v)] = acc * w[static_cast<size_t>(v)];
            }
            std::fill(padded.begin(), padded.end(), cplx{0.0, 0.0});
            for (int v = 0; v < p.n_virtual_channels; ++v) padded[static_cast<size_t>(v)] = ch[static_cast<size_t>(v)];
            const std::vector<cplx> spec = fftshift(fft(padded));
            for (size_t i = 0; i < keep.size(); ++i)
                power(r, static_cast<int>(i)) += std::norm(spec[static_cast<size_t>(keep[i])]);
        }
    }
    out.power_db = power.unaryExpr([&](double v) { return to_db(v); });
    return out;
}

struct PredRow {
    int frame;
    int track_id;
    int label_bm;
    int label_am = -1;
    std::vector<std::pair<int, double>> scores;
    int truth_count;
    FeatureVector::Mode mode;
};

inline void write_prediction_jsonl(std::ostream& out, const std::vector<PredRow>& rows) {
    for (const PredRow& r : rows) {
        nlohmann::ordered_json j;
        j["frame"] = r.frame;
        j["track_id"] = r.track_id;
        j["label_bm"] = r.label_bm;
        j["label_am"] = r.label_am;
        nlohmann::ordered_json scores = nlohmann::ordered_json::object();
        for (const auto& [c, s] : r.scores) scores[std::to_string(c)] = s;
        j["scores"] = scores;
        out << j.dump() << '\n';
    }
}

inline void apply_median_and_score(std::vector<PredRow>& rows, int window, double& acc_bm,
                                   double& acc_am, int& n_rows) {
    std::map<int, std::vector<size_t>> by_track;
    for (size_t i = 0; i < rows.size(); ++i) by_track[rows[i].track_id].push_back(i);
    int ok_bm = 0, ok_am = 0;
    for (auto& [tid, idx] : by_track) {
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return rows[a].frame < rows[b].frame; });
        std::vector<int> seq;
        for (size_t i : idx) seq.push_back(rows[i].label_bm);
        const std::vector<int> sm = median_smooth(seq, window);
        for (size_t k = 0; k < idx.size(); ++k) {
            rows[idx[k]].label_am = sm[k];
            if (rows[idx[k]].label_bm == rows[idx[k]].truth_count) ++ok_bm;
            if (rows[idx[k]].label_am == rows[idx[k]].truth_count) ++ok_am;
        }
    }
    n_rows = static_cast<int>(rows.size());
    acc_bm = rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : static_cast<double>(ok_bm) / rows.size();
    acc_am = rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : static_cast<double>(ok_am) / rows.size();
}

}  // namespace detail

// Full streaming pipeline over one simulated dataset. Emits the track log,
// prediction log, per-frame OSPA CSV, the labeled feature CSV (and the CVD
// variants when enabled), plus a summary JSON.
inline RunSummary run_scenario(const RunConfig& cfg) {
    cfg.validate();
    DatasetPaths paths{fs::path(cfg.dataset_dir)};
    std::ifstream scen_in(paths.scenario_json());
    if (!scen_in) throw std::runtime_error("missing " + paths.scenario_json().string());
    nlohmann::json scen_j;
    scen_in >> scen_j;
    const ScenarioConfig scfg = parse_scenario_config(scen_j);

    std::ifstream truth_in(paths.truth());
    if (!truth_in) throw std::runtime_error("missing " + paths.truth().string());
    const GroundTruth gt = read_truth_jsonl(truth_in, cfg.radar.frame_rate);
    const int n_frames = static_cast<int>(gt.frames.size());

    const bool signal = scfg.fidelity == Fidelity::signal;
    std::optional<CubeReader> cubes;
    std::vector<std::vector<Detection>> point_dets;
    if (signal) {
        cubes.emplace(paths.cubes().string());
        if (cubes->n_frames() != n_frames)
            throw std::runtime_error("cube file frame count does not match ground truth");
    } else {
        std::ifstream det_in(paths.detections());
        if (!det_in) throw std::runtime_error("missing " + paths.detections().string());
        const auto all = read_detections_jsonl(det_in, cfg.radar);
        point_dets.assign(static_cast<size_t>(n_frames), {});
        for (const Detection& d : all)
            if (d.frame_index >= 0 && d.frame_index < n_frames)
                point_dets[static_cast<size_t>(d.frame_index)].push_back(d);
    }

    const bool counting = cfg.classify && signal;
    std::optional<SeamlessCounter> counter;
    std::optional<SeamlessCounter> cvd_counter;
    if (counting) {
        counter = load_seamless(cfg.model_dir, cfg.classifier, cfg.features);
        if (cfg.cvd_baseline) {
            SeamlessCounter sc;
            sc.spatial = load_count_model(model_path(cfg.model_dir, cfg.classifier, "spatial"));
            sc.full = load_count_model(model_path(cfg.model_dir, cfg.classifier, "cvd"));
            cvd_counter = std::move(sc);
        }
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream track_log(fs::path(cfg.out_dir) / "tracks.jsonl");
    std::ofstream ospa_csv(fs::path(cfg.out_dir) / "ospa.csv");
    std::ofstream feat_csv(fs::path(cfg.out_dir) / "features.csv");
    std::ofstream cvd_csv;
    ospa_csv << "frame,ospa,d_loc,d_card\n";
    const auto feature_names = FeatureVector::names();
    write_feature_csv_header(feat_csv, feature_names);
    if (signal && cfg.cvd_baseline) {
        cvd_csv.open(fs::path(cfg.out_dir) / "cvd_features.csv");
        const auto cvd_names = CvdFeatureVector::names();
        cvd_csv << "track_id,frame,mode,label";
        for (const auto& n : cvd_names) cvd_csv << ',' << n;
        cvd_csv << '\n';
    }

    TrackerConfig tcfg = cfg.tracker;
    tcfg.count_feedback = cfg.count_feedback;
    Tracker tracker(tcfg);
    std::map<int, TrackBuffer> buffers;
    std::vector<detail::PredRow> pred_rows, cvd_rows;
    const double dt = 1.0 / cfg.radar.frame_rate;

    double sum_ospa = 0.0, sum_dloc = 0.0, sum_dcard = 0.0;
    char numbuf[32];
    auto fmt = [&](double v) {
        std::snprintf(numbuf, sizeof(numbuf), "%.17g", v);
        return std::string(numbuf);
    };

    for (int f = 0; f < n_frames; ++f) {
        std::vector<Detection> dets;
        std::optional<RAMap> ra;
        std::optional<RadarCube> cube;
        if (signal) {
            RadarCube raw = cubes->read_frame(f);
            cube = cfg.mti ? mti_suppress(raw) : std::move(raw);
            const RDMap rd = range_doppler_transform(*cube);
            dets = cfar_detect(rd, cfg.cfar);
            for (Detection& d : dets) d.azimuth_deg = estimate_azimuth(rd, d);
        } else {
            dets = point_dets[static_cast<size_t>(f)];
        }

        const ClusterResult clusters = cluster_detections(dets, cfg.cluster_eps, cfg.cluster_min_pts);
        const std::vector<TrackState> snapshot = tracker.step(clusters.clusters, dt);

        if (signal && !snapshot.empty()) {
            // RA power is only read around live tracks; restrict the rows.
            std::vector<char> rows(static_cast<size_t>(cfg.radar.samples_per_chirp), false);
            for (const TrackState& t : snapshot) {
                const int bin = static_cast<int>(std::lround(std::hypot(t.px(), t.py()) /
                                                             cfg.radar.range_resolution()));
                for (int r = bin - cfg.feat.patch_half_range; r <= bin + cfg.feat.patch_half_range;
                     ++r)
                    if (r >= 0 && r < cfg.radar.samples_per_chirp) rows[static_cast<size_t>(r)] = true;
            }
            ra = detail::ra_map_for_rows(*cube, rows);
        }

        const auto groups = detail::truth_groups(gt.frames[static_cast<size_t>(f)], scfg.grouping_radius_m);

        // Buffers and counting per live track.
        std::set<int> live;
        for (const TrackState& t : snapshot) {
            live.insert(t.id);
            if (signal) {
                auto [it, created] = buffers.try_emplace(t.id, t.id, cfg.feat.window_frames);
                TrackBuffer& buf = it->second;
                const bool matched = (t.misses == 0);
                if (matched) {
                    TrackBufferEntry e = extract_patch(
                        *ra, std::hypot(t.px(), t.py()),
                        rad_to_deg(std::atan2(t.px(), t.py())), cfg.feat);
                    e.present = true;
                    e.frame = f;
                    const int bin = std::clamp(
                        static_cast<int>(std::lround(std::hypot(t.px(), t.py()) /
                                                     cfg.radar.range_resolution())),
                        0, cfg.radar.samples_per_chirp - 1);
                    e.slow_time = detail::slow_time_at_bin(*cube, bin);
                    buf.push(std::move(e));
                } else {
                    buf.push_missing(f);
                }
                if (t.status == TrackStatus::confirmed) {
                    buf.confirmed = true;
                    const FeatureVector fv = build_feature_vector(buf, cfg.feat);
                    const int truth_count = detail::true_count_at(groups, t.px(), t.py());
                    write_feature_csv_row(feat_csv, fv, f, truth_count);
                    if (counting) {
                        const Prediction pr = counter->predict(fv);
                        if (cfg.count_feedback) tracker.set_count_estimate(t.id, pr.label);
                        pred_rows.push_back({f, t.id, pr.label, -1, pr.scores, truth_count, fv.mode});
                    }
                    if (signal && cfg.cvd_baseline && buf.full()) {
                        const CvdFeatureVector cf = build_cvd_features(buf, cfg.feat);
                        cvd_csv << t.id << ',' << f << ",full," << truth_count;
                        for (double v : cf.spatial) cvd_csv << ',' << fmt(v);
                        for (double v : cf.cadence) cvd_csv << ',' << fmt(v);
                        cvd_csv << '\n';
                        if (cvd_counter) {
                            FeatureVector as_fv;  // reuse the seamless plumbing
                            as_fv.mode = FeatureVector::Mode::full;
                            as_fv.track_id = t.id;
                            as_fv.spatial = cf.spatial;
                            for (size_t k = 0; k < 8; ++k) as_fv.frequency[k] = cf.cadence[k];
                            const Prediction pr = cvd_counter->full.predict(as_fv);
                            cvd_rows.push_back(
                                {f, t.id, pr.label, -1, pr.scores, detail::true_count_at(groups, t.px(), t.py()), as_fv.mode});
                        }
                    } else if (signal && cfg.cvd_baseline && cvd_counter) {
                        const Prediction pr = cvd_counter->spatial.predict(fv);
                        cvd_rows.push_back({f, t.id, pr.label, -1, pr.scores,
                                            detail::true_count_at(groups, t.px(), t.py()), fv.mode});
                    }
                }
            }
        }
        for (auto it = buffers.begin(); it != buffers.end();)
            it = live.count(it->first) ? std::next(it) : buffers.erase(it);

        // Track log.
        for (const TrackState& t : snapshot) {
            nlohmann::ordered_json j;
            j["frame"] = f;
            j["id"] = t.id;
            j["x"] = t.px();
            j["y"] = t.py();
            j["vx"] = t.x(2);
            j["vy"] = t.x(3);
            j["status"] = (t.status == TrackStatus::confirmed) ? "confirmed" : "tentative";
            j["count"] = t.count_estimate;
            track_log << j.dump() << '\n';
        }

        // OSPA: confirmed tracks vs ground-truth persons; classifier counts
        // enter through q = (sum of per-track counts) - n.
        std::vector<XY> truth_xy, track_xy;
        for (const TruthPerson& p : gt.frames[static_cast<size_t>(f)].persons)
            truth_xy.push_back({p.x, p.y});
        int n_conf = 0, count_sum = 0;
        for (const TrackState& t : tracker.tracks()) {
            if (t.status != TrackStatus::confirmed) continue;
            track_xy.push_back({t.px(), t.py()});
            ++n_conf;
            count_sum += t.count_estimate;
        }
        const OspaFrame of = ospa_frame(truth_xy, track_xy, n_conf, count_sum - n_conf, cfg.ospa);
        sum_ospa += of.ospa;
        sum_dloc += of.d_loc;
        sum_dcard += of.d_card;
        ospa_csv << f << ',' << fmt(of.ospa) << ',' << fmt(of.d_loc) << ',' << fmt(of.d_card)
                 << '\n';
    }

    RunSummary sum;
    sum.scenario_id = scfg.scenario_id;
    sum.frames = n_frames;
    sum.mean_ospa = sum_ospa / std::max(1, n_frames);
    sum.mean_dloc = sum_dloc / std::max(1, n_frames);
    sum.mean_dcard = sum_dcard / std::max(1, n_frames);

    if (counting) {
        detail::apply_median_and_score(pred_rows, 25, sum.acc_bm, sum.acc_am, sum.n_predictions);
        std::ofstream pred_log(fs::path(cfg.out_dir) / "predictions.jsonl");
        detail::write_prediction_jsonl(pred_log, pred_rows);
        if (cfg.cvd_baseline) {
            int n_cvd = 0;
            detail::apply_median_and_score(cvd_rows, 25, sum.acc_bm_cvd, sum.acc_am_cvd, n_cvd);
            std::ofstream cvd_log(fs::path(cfg.out_dir) / "cvd_predictions.jsonl");
            detail::write_prediction_jsonl(cvd_log, cvd_rows);
        }
    }

    nlohmann::ordered_json sj;
    sj["scenario"] = sum.scenario_id;
    sj["frames"] = sum.frames;
    sj["acc_bm"] = sum.acc_bm;
    sj["acc_am"] = sum.acc_am;
    sj["mean_ospa"] = sum.mean_ospa;
    sj["mean_dloc"] = sum.mean_dloc;
    sj["mean_dcard"] = sum.mean_dcard;
    sj["n_predictions"] = sum.n_predictions;
    if (cfg.cvd_baseline) {
        sj["acc_bm_cvd"] = sum.acc_bm_cvd;
        sj["acc_am_cvd"] = sum.acc_am_cvd;
    }
    std::ofstream summary(fs::path(cfg.out_dir) / "summary.json");
    summary << sj.dump(2) << '\n';
    return sum;
}

// ---------------------------------------------------------------------------
// Training and evaluation grids
// ---------------------------------------------------------------------------

namespace detail {

inline Dataset table_to_dataset(const FeatureTable& t, const std::vector<int>& columns,
                                bool full_rows_only) {
    std::vector<int> rows;
    for (size_t i = 0; i < t.rows.size(); ++i) {
        if (full_rows_only && t.modes[i] != FeatureVector::Mode::full) continue;
        bool ok = true;
        for (int c : columns)
            if (std::isnan(t.rows[i][static_cast<size_t>(c)])) ok = false;
        if (ok) rows.push_back(static_cast<int>(i));
    }
    Dataset ds;
    ds.X.resize(static_cast<int>(rows.size()), static_cast<int>(columns.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
        const auto& src = t.rows[static_cast<size_t>(rows[r])];
        for (size_t c = 0; c < columns.size(); ++c)
            ds.X(static_cast<int>(r), static_cast<int>(c)) = src[static_cast<size_t>(columns[c])];
        ds.y.push_back(t.labels[static_cast<size_t>(rows[r])]);
        ds.track_id.push_back(t.track_ids[static_cast<size_t>(rows[r])]);
        ds.frame.push_back(t.frames[static_cast<size_t>(rows[r])]);
    }
    return ds;
}

inline FeatureTable load_feature_tables(const std::vector<std::string>& csv_paths) {
    FeatureTable all;
    for (const std::string& p : csv_paths) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("missing feature csv " + p);
        FeatureTable t = read_feature_csv(in);
        if (all.feature_names.empty()) all.feature_names = t.feature_names;
        else if (all.feature_names != t.feature_names)
            throw std::runtime_error("feature csv headers disagree: " + p);
        // Track ids from different runs must not collide.
        const int offset = all.track_ids.empty()
                               ? 0
                               : *std::max_element(all.track_ids.begin(), all.track_ids.end()) + 1000;
        for (size_t i = 0; i < t.rows.size(); ++i) {
            all.rows.push_back(t.rows[i]);
            all.labels.push_back(t.labels[i]);
            all.track_ids.push_back(t.track_ids[i] + offset);
            all.frames.push_back(t.frames[i]);
            all.modes.push_back(t.modes[i]);
        }
    }
    if (all.rows.empty()) throw std::runtime_error("feature csv set is empty");
    return all;
}

}  // namespace detail

struct TrainOptions {
    std::vector<std::string> methods{"knn", "naive_bayes", "svm", "random_forest"};
    std::vector<std::string> sets{"spatial", "full", "frequency", "pca"};
    double train_fraction = 0.7;
    double pca_retained = 0.80;
    std::uint64_t seed = 0;
    TrainParams params;
};

// Trains the per-feature-set models used by the streaming run and the
// evaluation grids. Feature sets: spatial (all rows), full/frequency/pca
// (full-mode rows). A model file per (method, set).
inline void train_models(const std::vector<std::string>& feature_csvs,
                         const std::string& model_dir, const TrainOptions& opt) {
    const FeatureTable table = detail::load_feature_tables(feature_csvs);
    fs::create_directories(model_dir);

    struct SetSpec {
        std::string name;
        std::vector<int> columns;
        bool full_only;
        bool with_pca;
    };
    std::vector<SetSpec> sets;
    auto wanted = [&](const char* name) {
        return std::find(opt.sets.begin(), opt.sets.end(), name) != opt.sets.end();
    };
    if (wanted("spatial")) sets.push_back({"spatial", feature_columns("spatial"), false, false});
    if (wanted("full")) sets.push_back({"full", feature_columns("both"), true, false});
    if (wanted("frequency"))
        sets.push_back({"frequency", feature_columns("frequency"), true, false});
    if (wanted("pca")) sets.push_back({"pca", feature_columns("both"), true, true});

    for (const SetSpec& set : sets) {
        Dataset ds = detail::table_to_dataset(table, set.columns, set.full_only);
        if (ds.rows() < 10) throw std::runtime_error("too few rows to train set " + set.name);
        auto [train, test] = split_stratified(ds, opt.train_fraction, opt.seed);

        std::optional<Standardizer> pre;
        std::optional<PcaTransform> pca;
        if (set.with_pca) {
            Standardizer sc;
            sc.fit(train.X);
            PcaTransform pt = pca_fit(sc.transform(train.X), opt.pca_retained);
            train.X = pt.transform(sc.transform(train.X));
            pre = std::move(sc);
            pca = std::move(pt);
        }
        for (const std::string& method : opt.methods) {
            TrainParams p = opt.params;
            p.seed = mix_seed(opt.seed, std::hash<std::string>{}(method + set.name));
            CountModel m;
            m.columns = set.columns;
            m.pre_scaler = pre;
            m.pca = pca;
            m.clf = train_classifier(method, train, p);
            save_count_model(m, model_path(model_dir, method, set.name));
        }
    }
}

// CVD-baseline models from the 18-column CVD feature CSV.
inline void train_cvd_models(const std::vector<std::string>& cvd_csvs,
                             const std::string& model_dir, const TrainOptions& opt) {
    const FeatureTable table = detail::load_feature_tables(cvd_csvs);
    fs::create_directories(model_dir);
    std::vector<int> cols(18);
    std::iota(cols.begin(), cols.end(), 0);
    Dataset ds = detail::table_to_dataset(table, cols, false);
    auto [train, test] = split_stratified(ds, opt.train_fraction, opt.seed);
    for (const std::string& method : opt.methods) {
        TrainParams p = opt.params;
        p.seed = mix_seed(opt.seed, std::hash<std::string>{}(method + std::string("cvd")));
        CountModel m;
        // Columns refer to the assembled (spatial, cadence) 18-vector.
        m.columns = cols;
        m.clf = train_classifier(method, train, p);
        save_count_model(m, model_path(model_dir, method, "cvd"));
    }
}

struct GridRow {
    std::string axis;     // row label
    std::string method;
    double accuracy_bm = 0.0;
    double accuracy_am = 0.0;
    int n_test = 0;
};

// Method comparison on the full feature set (Table-II-shaped axis).
inline std::vector<GridRow> eval_method_grid(const std::vector<std::string>& feature_csvs,
                                             const TrainOptions& opt) {
    const FeatureTable table = detail::load_feature_tables(feature_csvs);
    const Dataset ds = detail::table_to_dataset(table, feature_columns("both"), true);
    const auto [train, test] = split_stratified(ds, opt.train_fraction, opt.seed);
    std::vector<GridRow> rows;
    for (const std::string& method : opt.methods) {
        TrainParams p = opt.params;
        p.seed = mix_seed(opt.seed, std::hash<std::string>{}(method));
        const auto m = train_classifier(method, train, p);
        const EvalResult r = evaluate(*m, test);
        rows.push_back({"spatial+frequency", method, r.accuracy_bm, r.accuracy_am, r.n_rows});
    }
    return rows;
}

// Feature-set ablation (Table-IV-shaped axis) for one method.
inline std::vector<GridRow> eval_feature_grid(const std::vector<std::string>& feature_csvs,
                                              const std::string& method,
                                              const TrainOptions& opt) {
    const FeatureTable table = detail::load_feature_tables(feature_csvs);
    std::vector<GridRow> rows;
    struct Axis {
        std::string name;
        std::vector<int> cols;
        bool pca;
    };
    const std::vector<Axis> axes = {{"spatial+frequency", feature_columns("both"), false},
                                    {"spatial", feature_columns("spatial"), false},
                                    {"frequency", feature_columns("frequency"), false},
                                    {"pca80", feature_columns("both"), true}};
    for (const Axis& ax : axes) {
        Dataset ds = detail::table_to_dataset(table, ax.cols, true);
        auto [train, test] = split_stratified(ds, opt.train_fraction, opt.seed);
        if (ax.pca) {
            Standardizer sc;
            sc.fit(train.X);
            const PcaTransform pt = pca_fit(sc.transform(train.X), opt.pca_retained);
            train.X = pt.transform(sc.transform(train.X));
            test.X = pt.transform(sc.transform(test.X));
        }
        TrainParams p = opt.params;
        p.seed = mix_seed(opt.seed, std::hash<std::string>{}(method + ax.name));
        const auto m = train_classifier(method, train, p);
        const EvalResult r = evaluate(*m, test);
        rows.push_back({ax.name, method, r.accuracy_bm, r.accuracy_am, r.n_rows});
    }
    return rows;
}

// Per-MODWT-level ablation (Table-III-shaped axis): frequency-only and
// spatial+level columns per level.
inline std::vector<GridRow> eval_level_grid(const std::vector<std::string>& feature_csvs,
                                            const std::string& method, const TrainOptions& opt) {
    const FeatureTable table = detail::load_feature_tables(feature_csvs);
    std::vector<GridRow> rows;
    const std::array<const char*, 5> level_names = {"approx", "level4", "level3", "level2",
                                                    "level1"};
    const std::array<int, 5> level_index = {4, 3, 2, 1, 0};  // into the 5x8 frequency block
    for (size_t i = 0; i < level_names.size(); ++i) {
        std::vector<int> freq_cols;
        for (int k = 0; k < 8; ++k) freq_cols.push_back(10 + level_index[i] * 8 + k);

        for (const bool with_spatial : {false, true}) {
            std::vector<int> cols;
            if (with_spatial)
                for (int c = 0; c < 10; ++c) cols.push_back(c);
            cols.insert(cols.end(), freq_cols.begin(), freq_cols.end());
            Dataset ds = detail::table_to_dataset(table, cols, true);
            auto [train, test] = split_stratified(ds, opt.train_fraction, opt.seed);
            TrainParams p = opt.params;
            p.seed = mix_seed(opt.seed, std::hash<std::string>{}(method + level_names[i] +
                                                                 (with_spatial ? "s" : "f")));
            const auto m = train_classifier(method, train, p);
            const EvalResult r = evaluate(*m, test);
            rows.push_back({std::string(level_names[i]) + (with_spatial ? "+spatial" : ""),
                            method, r.accuracy_bm, r.accuracy_am, r.n_rows});
        }
    }
    return rows;
}

inline void write_grid_csv(const std::string& path, std::span<const GridRow> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "axis,method,acc_bm,acc_am,n_test\n";
    char buf[32];
    for (const GridRow& r : rows) {
        out << r.axis << ',' << r.method << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy_bm);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy_am);
        out << buf << ',' << r.n_test << '\n';
    }
}

// Scenario-level summary CSV (Table-VI shape).
inline void write_report_csv(const std::string& path, std::span<const RunSummary> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "scenario,acc_bm,acc_am,mean_ospa,mean_dloc,mean_dcard\n";
    char buf[32];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    for (const RunSummary& r : rows)
        out << r.scenario_id << ',' << fmt(r.acc_bm) << ',' << fmt(r.acc_am) << ','
            << fmt(r.mean_ospa) << ',' << fmt(r.mean_dloc) << ',' << fmt(r.mean_dcard) << '\n';
}

}  // namespace gtrk
