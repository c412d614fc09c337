#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gtrk/features.hpp"
#include "gtrk/sim.hpp"

using namespace gtrk;

namespace {

Eigen::MatrixXd floor_patch(int rows, int cols) {
    return Eigen::MatrixXd::Constant(rows, cols, kDbFloor);
}

TrackBufferEntry make_entry(int frame, double tone_hz, double fs = 900.0, int n = 90,
                            double amp = 1.0) {
    TrackBufferEntry e;
    e.present = true;
    e.frame = frame;
    e.slow_time.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t = (frame * n + k) / fs;
        e.slow_time[static_cast<size_t>(k)] =
            amp * cplx(std::cos(2.0 * kPi * tone_hz * t), std::sin(2.0 * kPi * tone_hz * t));
    }
    e.patch_db = floor_patch(7, 17);
    e.patch_db(3, 8) = 0.0;
    e.az_profile.assign(17, 0.1);
    e.az_profile[8] = 1.0;
    return e;
}

}  // namespace

TEST_CASE("single-pixel footprint") {
    Eigen::MatrixXd patch = floor_patch(7, 17);
    patch(3, 8) = -10.0;
    std::vector<double> prof(17, 0.0);
    prof[8] = 1.0;
    const SpatialFeatures sf = spatial_features(patch, prof);
    REQUIRE_FALSE(sf.empty_footprint);
    REQUIRE(sf.values[0] == 1.0);   // azimuth width
    REQUIRE(sf.values[1] == 1.0);   // range length
    REQUIRE(sf.values[2] == 8.0);   // mean az index
    REQUIRE(sf.values[3] == 8.0);   // median az index
    REQUIRE(sf.values[4] == 0.0);   // az index variance
    REQUIRE(sf.values[5] == 1.0);   // distinct az bins
    REQUIRE(sf.values[9] == 1.0);   // pixel count
}

TEST_CASE("footprint shifted by one azimuth bin moves only the index stats") {
    Eigen::MatrixXd patch = floor_patch(9, 21);
    std::vector<double> prof(21, 0.0);
    for (int r = 3; r <= 5; ++r)
        for (int c = 7; c <= 10; ++c) patch(r, c) = -2.0 - 0.1 * (c - 7);
    for (int c = 7; c <= 10; ++c) prof[static_cast<size_t>(c)] = 0.8;

    Eigen::MatrixXd shifted = floor_patch(9, 21);
    std::vector<double> prof_s(21, 0.0);
    for (int r = 3; r <= 5; ++r)
        for (int c = 7; c <= 10; ++c) shifted(r, c + 1) = patch(r, c);
    for (int c = 7; c <= 10; ++c) prof_s[static_cast<size_t>(c + 1)] = 0.8;

    const auto a = spatial_features(patch, prof).values;
    const auto b = spatial_features(shifted, prof_s).values;
    REQUIRE(b[2] == Catch::Approx(a[2] + 1.0));
    REQUIRE(b[3] == Catch::Approx(a[3] + 1.0));
    for (size_t i : {0u, 1u, 4u, 5u, 6u, 7u, 8u, 9u})
        REQUIRE(b[i] == Catch::Approx(a[i]).margin(1e-12));
}

TEST_CASE("spatial features ignore a uniform power scaling") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-30.0, 0.0);
    Eigen::MatrixXd patch(7, 17);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 17; ++c) patch(r, c) = u(rng);
    std::vector<double> prof(17);
    for (auto& v : prof) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

    const auto base = spatial_features(patch, prof).values;
    const Eigen::MatrixXd scaled = patch.array() + 12.0;  // 12 dB gain everywhere
    const auto gained = spatial_features(scaled, prof).values;
    for (size_t i = 0; i < 10; ++i) REQUIRE(gained[i] == Catch::Approx(base[i]).margin(1e-12));
}

TEST_CASE("empty footprint flags and zeroes") {
    const Eigen::MatrixXd patch = floor_patch(5, 9);
    std::vector<double> prof(9, 0.0);
    const SpatialFeatures sf = spatial_features(patch, prof);
    REQUIRE(sf.empty_footprint);
    for (double v : sf.values) REQUIRE(v == 0.0);
}

TEST_CASE("merged multi-person footprint is wider in azimuth") {
    RadarParams params;
    FeatureConfig fcfg;
    MultipathConfig mp;
    mp.enabled = false;
    auto width_of = [&](int n_people) {
        TruthFrame tf;
        tf.frame = 0;
        // Abreast formation at 4 m on boresight, 0.8 m spacing.
        for (int p = 0; p < n_people; ++p) {
            const double off = (p - (n_people - 1) / 2.0) * 0.8;
            tf.persons.push_back({p, off, 4.0, 0.0, 0.4});
        }
        std::vector<GaitModel> gaits(static_cast<size_t>(n_people));
        const RadarCube cube = synthesize_frame(tf, gaits, params, mp, 0.0);
        const RAMap ra = range_azimuth_map(cube);
        const TrackBufferEntry e = extract_patch(ra, 4.0, 0.0, fcfg);
        return spatial_features(e.patch_db, e.az_profile).values[0];
    };
    const double w1 = width_of(1);
    const double w3 = width_of(3);
    REQUIRE(w3 > w1);
}

TEST_CASE("level stats on hand-computed series") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const auto s = level_stats(x);
    REQUIRE(s[0] == Catch::Approx(1.25));             // variance
    REQUIRE(s[1] == Catch::Approx(std::sqrt(1.25)));  // std
    REQUIRE(s[2] == Catch::Approx(2.5));              // mean
    REQUIRE(s[3] == Catch::Approx(2.5));              // median
    REQUIRE(s[4] == Catch::Approx(std::sqrt(7.5)));   // rms
    REQUIRE(s[5] == Catch::Approx(0.0).margin(1e-12));  // skew (symmetric)
    REQUIRE(s[6] == Catch::Approx(-1.36));            // excess kurtosis
    REQUIRE(s[7] == Catch::Approx(1.07845).margin(1e-4));  // entropy
}

TEST_CASE("level stats guards: zeros, impulse, uniform") {
    const std::vector<double> zeros(16, 0.0);
    const auto sz = level_stats(zeros);
    for (double v : sz) REQUIRE(v == 0.0);

    std::vector<double> impulse(32, 0.0);
    impulse[7] = 5.0;
    REQUIRE(level_stats(impulse)[7] == Catch::Approx(0.0).margin(1e-9));

    const std::vector<double> uniform(64, 0.7);
    REQUIRE(level_stats(uniform)[7] == Catch::Approx(std::log(64.0)).epsilon(1e-9));
}

TEST_CASE("CVD of a time-constant spectrogram is pure DC") {
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Constant(32, 16, cplx(0.4, -0.2));
    const Eigen::MatrixXcd C = cvd(S, make_window(WindowKind::rectangular, 32));
    for (int k = 0; k < C.cols(); ++k) {
        REQUIRE(std::abs(C(0, k)) > 1.0);
        for (int e = 1; e < C.rows(); ++e) REQUIRE(std::abs(C(e, k)) < 1e-9);
    }
}

TEST_CASE("CVD finds a 2 Hz amplitude modulation") {
    // Rows 0.1 s apart -> cadence resolution 1/(50*0.1) = 0.2 Hz; 2 Hz = bin 10.
    const int n_w = 50, n_k = 24;
    Eigen::MatrixXcd S(n_w, n_k);
    for (int l = 0; l < n_w; ++l)
        for (int k = 0; k < n_k; ++k) {
            const double env = 1.0 + 0.5 * std::cos(2.0 * kPi * 2.0 * l * 0.1);
            S(l, k) = cplx(env * std::exp(-0.05 * std::abs(k - 12)), 0.0);
        }
    const Eigen::MatrixXcd C = cvd(S, make_window(WindowKind::rectangular, n_w));
    int best = 1;
    double bp = -1.0;
    for (int e = 1; e <= n_w / 2; ++e) {
        double p = 0.0;
        for (int k = 0; k < n_k; ++k) p += std::norm(C(e, k));
        if (p > bp) {
            bp = p;
            best = e;
        }
    }
    REQUIRE(best == 10);
}

TEST_CASE("CVD equals the direct DFT summation") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 5; ++rep) {
        const int n_w = std::uniform_int_distribution<int>(8, 64)(rng);
        const int n_k = std::uniform_int_distribution<int>(4, 64)(rng);
        Eigen::MatrixXcd S(n_w, n_k);
        for (int l = 0; l < n_w; ++l)
            for (int k = 0; k < n_k; ++k) S(l, k) = cplx(g(rng), g(rng));
        const std::vector<double> w = make_window(WindowKind::hann, n_w);
        const Eigen::MatrixXcd C = cvd(S, w);

        double err = 0.0, scale = 0.0;
        for (int e = 0; e < n_w; ++e)
            for (int k = 0; k < n_k; ++k) {
                cplx acc{0.0, 0.0};
                for (int l = 0; l < n_w; ++l)
                    acc += std::abs(S(l, k)) * w[static_cast<size_t>(l)] *
                           std::exp(cplx(0.0, -2.0 * kPi * e * l / n_w));
                err += std::norm(C(e, k) - acc);
                scale += std::norm(acc);
            }
        REQUIRE(std::sqrt(err / std::max(scale, 1e-30)) < 1e-9);
    }
    Eigen::MatrixXcd tiny(1, 4);
    REQUIRE_THROWS_AS(cvd(tiny, make_window(WindowKind::hann, 1)), std::invalid_argument);
}

TEST_CASE("fill_missing: identity, mean fill, and the all-missing error") {
    TrackBuffer buf(3, 20);
    buf.confirmed = true;
    for (int f = 0; f < 20; ++f) {
        if (f == 7) {
            buf.push_missing(f);
        } else {
            buf.push(make_entry(f, 100.0));
        }
    }
    REQUIRE(buf.present_count() == 19);
    const TrackBuffer filled = fill_missing(buf);
    REQUIRE(filled[7].slow_time.size() == 90);
    // Filled frame equals the elementwise mean of the present ones.
    for (size_t k = 0; k < 90; ++k) {
        cplx mean{0.0, 0.0};
        for (size_t i = 0; i < 20; ++i)
            if (i != 7) mean += buf[i].slow_time[k];
        mean /= 19.0;
        REQUIRE(std::abs(filled[7].slow_time[k] - mean) < 1e-12);
    }
    // Present frames are untouched.
    for (size_t k = 0; k < 90; ++k)
        REQUIRE(filled[3].slow_time[k] == buf[3].slow_time[k]);

    TrackBuffer empty(4, 20);
    empty.push_missing(0);
    REQUIRE_THROWS_AS(fill_missing(empty), std::invalid_argument);
}

TEST_CASE("filling one missing frame perturbs the MODWT energy boundedly") {
    FeatureConfig cfg;
    TrackBuffer complete(1, 20), gapped(1, 20);
    complete.confirmed = gapped.confirmed = true;
    for (int f = 0; f < 20; ++f) {
        complete.push(make_entry(f, 85.0));
        if (f == 11) gapped.push_missing(f);
        else gapped.push(make_entry(f, 85.0));
    }
    auto concat = [](const TrackBuffer& b) {
        std::vector<double> re;
        for (size_t i = 0; i < b.size(); ++i)
            for (const cplx& v : b[i].slow_time) re.push_back(v.real());
        return re;
    };
    const auto full_series = concat(complete);
    const auto filled_series = concat(fill_missing(gapped));
    const auto d_full = modwt(full_series, 4, cfg.wavelet);
    const auto d_fill = modwt(filled_series, 4, cfg.wavelet);
    double diff = 0.0;
    for (int j = 1; j <= 4; ++j)
        for (size_t t = 0; t < full_series.size(); ++t) {
            const double dd = d_full.details[static_cast<size_t>(j - 1)][t] -
                              d_fill.details[static_cast<size_t>(j - 1)][t];
            diff += dd * dd;
        }
    for (size_t t = 0; t < full_series.size(); ++t) {
        const double dd = d_full.approx[t] - d_fill.approx[t];
        diff += dd * dd;
    }
    // MODWT is an energy isometry, so the perturbation is the energy of the
    // replaced frame: about 1/20 of the total for a stationary tone.
    REQUIRE(diff <= 1.5 * (1.0 / 20.0) * d_full.total_energy());
}

TEST_CASE("seamless mode switch: spatial-only below T, full at T") {
    FeatureConfig cfg;
    TrackBuffer buf(9, cfg.window_frames);
    buf.confirmed = true;
    for (int f = 0; f < 5; ++f) buf.push(make_entry(f, 120.0));
    const FeatureVector partial = build_feature_vector(buf, cfg);
    REQUIRE(partial.mode == FeatureVector::Mode::spatial_only);
    REQUIRE(partial.track_id == 9);
    REQUIRE(partial.spatial[0] == 1.0);

    for (int f = 5; f < cfg.window_frames; ++f) buf.push(make_entry(f, 120.0));
    REQUIRE(buf.full());
    const FeatureVector full = build_feature_vector(buf, cfg);
    REQUIRE(full.mode == FeatureVector::Mode::full);
    // A 120 Hz tone on the 900 Hz axis lives in level 2 (112.5 - 225 Hz).
    const double e_l2 = full.frequency[8 + 4];  // level-2 rms slot
    const double e_l4 = full.frequency[24 + 4];
    REQUIRE(e_l2 > e_l4);

    TrackBuffer unconfirmed(1, cfg.window_frames);
    unconfirmed.push(make_entry(0, 50.0));
    REQUIRE_THROWS_AS(build_feature_vector(unconfirmed, cfg), std::invalid_argument);
}

TEST_CASE("feature names and CSV round trip") {
    const auto names = FeatureVector::names();
    REQUIRE(names.size() == 50);
    REQUIRE(names[0] == "spa_az_width_bins");
    REQUIRE(names[10] == "freq_l1_var");
    REQUIRE(names[49] == "freq_approx_entropy");

    FeatureConfig cfg;
    TrackBuffer buf(2, cfg.window_frames);
    buf.confirmed = true;
    for (int f = 0; f < cfg.window_frames; ++f) buf.push(make_entry(f, 60.0));
    const FeatureVector fv = build_feature_vector(buf, cfg);

    std::stringstream ss;
    write_feature_csv_header(ss, names);
    write_feature_csv_row(ss, fv, 19, 2);
    TrackBuffer part(2, cfg.window_frames);
    part.confirmed = true;
    part.push(make_entry(0, 60.0));
    write_feature_csv_row(ss, build_feature_vector(part, cfg), 20, 2);

    const FeatureTable t = read_feature_csv(ss);
    REQUIRE(t.feature_names == names);
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.labels == std::vector<int>{2, 2});
    REQUIRE(t.modes[0] == FeatureVector::Mode::full);
    REQUIRE(t.modes[1] == FeatureVector::Mode::spatial_only);
    for (size_t i = 0; i < 10; ++i)
        REQUIRE(t.rows[0][i] == Catch::Approx(fv.spatial[i]).margin(1e-14));
    for (size_t i = 0; i < 40; ++i) {
        REQUIRE(t.rows[0][10 + i] == Catch::Approx(fv.frequency[i]).margin(1e-14));
        REQUIRE(std::isnan(t.rows[1][10 + i]));  // masked, not silently zeroed
    }
}

TEST_CASE("CVD baseline features need a full buffer") {
    FeatureConfig cfg;
    TrackBuffer buf(5, cfg.window_frames);
    buf.confirmed = true;
    buf.push(make_entry(0, 70.0));
    REQUIRE_THROWS_AS(build_cvd_features(buf, cfg), std::invalid_argument);
    for (int f = 1; f < cfg.window_frames; ++f) buf.push(make_entry(f, 70.0));
    const CvdFeatureVector cf = build_cvd_features(buf, cfg);
    REQUIRE(cf.track_id == 5);
    REQUIRE(std::isfinite(cf.cadence[0]));
    REQUIRE(CvdFeatureVector::names().size() == 18);
}
