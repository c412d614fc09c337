#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtrk/common.hpp"
#include "gtrk/datacube.hpp"
#include "gtrk/dsp.hpp"
#include "gtrk/modwt.hpp"

namespace gtrk {

struct FeatureConfig {
    int window_frames = 20;          // observation window T
    int modwt_levels = 4;
    WaveletFamily wavelet = WaveletFamily::d4;
    double footprint_threshold_db = -6.0;  // relative to the patch peak
    int patch_half_range = 3;        // range bins each side of the track
    int patch_half_azimuth = 8;      // azimuth bins each side
    int stft_window = 128;           // CVD spectrogram parameters
    int stft_hop = 45;
    double slow_time_fs = 900.0;
};

// Per-frame payload buffered for one track: channel-summed slow-time series at
// the track's range bin, the RA-map footprint patch, and the azimuth profile.
struct TrackBufferEntry {
    bool present = false;  // false: missed detection, payload empty until filled
    int frame = -1;
    std::vector<cplx> slow_time;
    Eigen::MatrixXd patch_db;
    std::vector<double> az_profile;  // peak-normalized linear amplitudes
};

class TrackBuffer {
  public:
    TrackBuffer() = default;
    TrackBuffer(int track_id, int capacity) : track_id_(track_id), capacity_(capacity) {}

    int track_id() const { return track_id_; }
    int capacity() const { return capacity_; }
    bool confirmed = false;

    void push(TrackBufferEntry entry) {
        if (!entries_.empty() && entry.frame <= entries_.back().frame)
            throw std::invalid_argument("TrackBuffer: frames must be strictly increasing");
        entries_.push_back(std::move(entry));
        while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
    }
    void push_missing(int frame) {
        TrackBufferEntry e;
        e.frame = frame;
        push(std::move(e));
    }

    size_t size() const { return entries_.size(); }
    bool full() const { return static_cast<int>(entries_.size()) == capacity_; }
    size_t present_count() const {
        size_t n = 0;
        for (const auto& e : entries_) n += e.present ? 1 : 0;
        return n;
    }
    const TrackBufferEntry& operator[](size_t i) const { return entries_[i]; }
    TrackBufferEntry& operator[](size_t i) { return entries_[i]; }
    int first_frame() const { return entries_.empty() ? -1 : entries_.front().frame; }
    int last_frame() const { return entries_.empty() ? -1 : entries_.back().frame; }

  private:
    int track_id_ = -1;
    int capacity_ = 20;
    std::deque<TrackBufferEntry> entries_;
};

// ---------------------------------------------------------------------------
// Spatial features (range-azimuth footprint)
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 10> kSpatialFeatureNames = {
    "az_width_bins",  "range_len_bins", "az_idx_mean",    "az_idx_median", "az_idx_var",
    "az_bins_occupied", "az_prof_mean", "az_prof_median", "az_prof_var",   "pixels_occupied"};

inline constexpr std::array<const char*, 8> kLevelStatNames = {
    "var", "std", "mean", "median", "rms", "skew", "kurt", "entropy"};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size());
}

}  // namespace detail

struct SpatialFeatures {
    std::array<double, 10> values{};
    bool empty_footprint = false;
};

// Footprint statistics of one RA-map patch at a -6 dB relative threshold:
// azimuth width, range length, occupied angle-bin index stats, angle-profile
// amplitude stats, occupied pixel count.
inline SpatialFeatures spatial_features(const Eigen::MatrixXd& patch_db,
                                        std::span<const double> az_profile,
                                        double threshold_db = -6.0) {
    SpatialFeatures out;
    if (patch_db.size() == 0) {
        out.empty_footprint = true;
        return out;
    }
    const double peak = patch_db.maxCoeff();
    if (peak <= kDbFloor) {
        out.empty_footprint = true;
        return out;
    }
    const double thr = peak + threshold_db;

    int min_r = patch_db.rows(), max_r = -1, min_c = patch_db.cols(), max_c = -1;
    int n_pix = 0;
    std::vector<double> az_indices;
    std::vector<char> col_occupied(static_cast<size_t>(patch_db.cols()), false);
    for (int r = 0; r < patch_db.rows(); ++r) {
        for (int c = 0; c < patch_db.cols(); ++c) {
            if (patch_db(r, c) < thr) continue;
            ++n_pix;
            min_r = std::min(min_r, r);
            max_r = std::max(max_r, r);
            min_c = std::min(min_c, c);
            max_c = std::max(max_c, c);
            col_occupied[static_cast<size_t>(c)] = true;
            az_indices.push_back(static_cast<double>(c));
        }
    }
    if (n_pix == 0) {
        out.empty_footprint = true;
        return out;
    }
    int distinct_cols = 0;
    for (char b : col_occupied) distinct_cols += b ? 1 : 0;

    std::vector<double> prof(az_profile.begin(), az_profile.end());
    out.values = {static_cast<double>(max_c - min_c + 1),
                  static_cast<double>(max_r - min_r + 1),
                  detail::mean_of(az_indices),
                  detail::median_of(az_indices),
                  detail::variance_of(az_indices),
                  static_cast<double>(distinct_cols),
                  detail::mean_of(prof),
                  detail::median_of(prof),
                  detail::variance_of(prof),
                  static_cast<double>(n_pix)};
    return out;
}

// Patch + azimuth profile around a track position on the RA map.
inline TrackBufferEntry extract_patch(const RAMap& ra, double range_m, double azimuth_deg,
                                      const FeatureConfig& cfg) {
    TrackBufferEntry e;
    const int n_r = static_cast<int>(ra.power_db.rows());
    const int n_a = static_cast<int>(ra.power_db.cols());
    int r0 = static_cast<int>(std::lround(range_m / ra.params.range_resolution()));
    int a0 = 0;
    double best = std::numeric_limits<double>::max();
    for (int a = 0; a < n_a; ++a) {
        const double d = std::abs(ra.azimuth_axis_deg[static_cast<size_t>(a)] - azimuth_deg);
        if (d < best) {
            best = d;
            a0 = a;
        }
    }
    const int rlo = std::clamp(r0 - cfg.patch_half_range, 0, n_r - 1);
    const int rhi = std::clamp(r0 + cfg.patch_half_range, 0, n_r - 1);
    const int alo = std::clamp(a0 - cfg.patch_half_azimuth, 0, n_a - 1);
    const int ahi = std::clamp(a0 + cfg.patch_half_azimuth, 0, n_a - 1);
    e.patch_db = ra.power_db.block(rlo, alo, rhi - rlo + 1, ahi - alo + 1);

    // Per-azimuth peak amplitude across the patch rows, normalized to 1.
    e.az_profile.assign(static_cast<size_t>(e.patch_db.cols()), 0.0);
    double peak = 0.0;
    for (int c = 0; c < e.patch_db.cols(); ++c) {
        double m = 0.0;
        for (int r = 0; r < e.patch_db.rows(); ++r)
            m = std::max(m, std::sqrt(db_to_power(e.patch_db(r, c))));
        e.az_profile[static_cast<size_t>(c)] = m;
        peak = std::max(peak, m);
    }
    if (peak > 0.0)
        for (double& v : e.az_profile) v /= peak;
    return e;
}

// ---------------------------------------------------------------------------
// Frequency features
// ---------------------------------------------------------------------------

// Eight statistics of a coefficient-magnitude series: variance, standard
// deviation, mean, median, RMS, skewness, kurtosis (excess), Shannon entropy
// of the normalized squared-magnitude distribution. Skew/kurtosis of a
// constant series are defined as 0.
inline std::array<double, 8> level_stats(std::span<const double> magnitudes) {
    if (magnitudes.empty()) throw std::invalid_argument("level_stats: empty series");
    const size_t n = magnitudes.size();
    const double mu = detail::mean_of(magnitudes);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, sumsq = 0.0;
    for (double x : magnitudes) {
        const double d = x - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        sumsq += x * x;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    const double var = m2;
    const double sd = std::sqrt(var);
    const double med = detail::median_of({magnitudes.begin(), magnitudes.end()});
    const double rms = std::sqrt(sumsq / static_cast<double>(n));
    double skew = 0.0, kurt = 0.0;
    if (m2 > 1e-24) {
        skew = m3 / std::pow(m2, 1.5);
        kurt = m4 / (m2 * m2) - 3.0;
    }
    double entropy = 0.0;
    if (sumsq > 1e-12) {
        for (double x : magnitudes) {
            const double p = (x * x) / sumsq;
            if (p > 1e-12) entropy -= p * std::log(p);
        }
    }
    return {var, sd, mu, med, rms, skew, kurt, entropy};
}

// STFT of a complex series: rows are time windows, columns the shifted
// Doppler bins.
inline Eigen::MatrixXcd spectrogram(std::span<const cplx> series, int window_len, int hop,
                                    WindowKind window = WindowKind::hann) {
    if (window_len < 2 || hop < 1) throw std::invalid_argument("spectrogram: bad window/hop");
    if (static_cast<int>(series.size()) < window_len)
        throw std::invalid_argument("spectrogram: series shorter than the window");
    const int n_win = 1 + (static_cast<int>(series.size()) - window_len) / hop;
    const std::vector<double> w = make_window(window, window_len);
    Eigen::MatrixXcd S(n_win, window_len);
    std::vector<cplx> buf(static_cast<size_t>(window_len));
    for (int i = 0; i < n_win; ++i) {
        for (int k = 0; k < window_len; ++k)
            buf[static_cast<size_t>(k)] = series[static_cast<size_t>(i * hop + k)] * w[static_cast<size_t>(k)];
        const std::vector<cplx> spec = fftshift(fft_unitary(buf));
        for (int k = 0; k < window_len; ++k) S(i, k) = spec[static_cast<size_t>(k)];
    }
    return S;
}

// Cadence velocity diagram: windowed DFT of the spectrogram magnitude along
// the time axis, S_C(eps, k) = sum_l |S(l,k)| w(l) exp(-j 2 pi eps l / N_w).
inline Eigen::MatrixXcd cvd(const Eigen::MatrixXcd& S, std::span<const double> w) {
    const int n_w = static_cast<int>(S.rows());
    if (n_w < 2) throw std::invalid_argument("cvd: need at least two time windows");
    if (static_cast<int>(w.size()) != n_w)
        throw std::invalid_argument("cvd: window length must equal the number of time windows");
    const int n_k = static_cast<int>(S.cols());
    Eigen::MatrixXcd out(n_w, n_k);
    std::vector<cplx> col(static_cast<size_t>(n_w));
    for (int k = 0; k < n_k; ++k) {
        for (int l = 0; l < n_w; ++l) col[static_cast<size_t>(l)] = std::abs(S(l, k)) * w[static_cast<size_t>(l)];
        const std::vector<cplx> spec = fft(col);
        for (int e = 0; e < n_w; ++e) out(e, k) = spec[static_cast<size_t>(e)];
    }
    return out;
}

inline Eigen::MatrixXcd cvd(const Eigen::MatrixXcd& S, WindowKind window = WindowKind::hann) {
    const std::vector<double> w = make_window(window, static_cast<int>(S.rows()));
    return cvd(S, w);
}

// ---------------------------------------------------------------------------
// Buffer fill and feature vectors
// ---------------------------------------------------------------------------

// Missing frames get the elementwise mean of the present frames' slow-time
// series; the presence mask is left untouched.
inline TrackBuffer fill_missing(const TrackBuffer& buffer) {
    const size_t present = buffer.present_count();
    if (present == 0) throw std::invalid_argument("fill_missing: no present frames");
    TrackBuffer out = buffer;
    size_t len = 0;
    for (size_t i = 0; i < out.size(); ++i)
        if (out[i].present) len = std::max(len, out[i].slow_time.size());
    std::vector<cplx> mean(len, cplx{0.0, 0.0});
    for (size_t i = 0; i < out.size(); ++i) {
        if (!out[i].present) continue;
        for (size_t k = 0; k < out[i].slow_time.size(); ++k) mean[k] += out[i].slow_time[k];
    }
    for (cplx& v : mean) v /= static_cast<double>(present);
    for (size_t i = 0; i < out.size(); ++i)
        if (!out[i].present) out[i].slow_time = mean;
    return out;
}

struct FeatureVector {
    enum class Mode { spatial_only, full };
    std::array<double, 10> spatial{};
    std::array<double, 40> frequency{};  // (level1..level4, approx) x 8 stats
    Mode mode = Mode::spatial_only;
    int track_id = -1;
    int frame_begin = -1;
    int frame_end = -1;
    bool empty_footprint = false;

    static std::vector<std::string> names() {
        std::vector<std::string> n;
        for (const char* s : kSpatialFeatureNames) n.emplace_back(std::string("spa_") + s);
        const std::array<const char*, 5> levels = {"l1", "l2", "l3", "l4", "approx"};
        for (const char* lv : levels)
            for (const char* st : kLevelStatNames)
                n.emplace_back(std::string("freq_") + lv + "_" + st);
        return n;
    }
};

namespace detail {

// Concatenate the buffered slow-time series and run MODWT on I and Q
// independently; statistics are taken on combined coefficient magnitudes.
inline std::array<double, 40> modwt_stats(const TrackBuffer& filled, const FeatureConfig& cfg) {
    std::vector<double> re, im;
    for (size_t i = 0; i < filled.size(); ++i) {
        for (const cplx& v : filled[i].slow_time) {
            re.push_back(v.real());
            im.push_back(v.imag());
        }
    }
    const ModwtDecomposition dr = modwt(re, cfg.modwt_levels, cfg.wavelet);
    const ModwtDecomposition di = modwt(im, cfg.modwt_levels, cfg.wavelet);

    std::array<double, 40> out{};
    std::vector<double> mag(re.size());
    int slot = 0;
    auto emit = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (size_t t = 0; t < a.size(); ++t) mag[t] = std::hypot(a[t], b[t]);
        const std::array<double, 8> st = level_stats(mag);
        for (double v : st) out[static_cast<size_t>(slot++)] = v;
    };
    for (int j = 0; j < cfg.modwt_levels; ++j)
        emit(dr.details[static_cast<size_t>(j)], di.details[static_cast<size_t>(j)]);
    emit(dr.approx, di.approx);
    return out;
}

}  // namespace detail

// Seamless contract: spatial-only vector while the buffer is filling, the
// full 50-value vector once the observation window is complete.
inline FeatureVector build_feature_vector(const TrackBuffer& buffer, const FeatureConfig& cfg) {
    if (!buffer.confirmed)
        throw std::invalid_argument("build_feature_vector: track not confirmed");
    if (buffer.size() == 0 || buffer.present_count() == 0)
        throw std::invalid_argument("build_feature_vector: empty buffer");

    FeatureVector fv;
    fv.track_id = buffer.track_id();
    fv.frame_begin = buffer.first_frame();
    fv.frame_end = buffer.last_frame();

    // Spatial features averaged across present frames.
    std::array<double, 10> acc{};
    int n_ok = 0;
    for (size_t i = 0; i < buffer.size(); ++i) {
        if (!buffer[i].present) continue;
        const SpatialFeatures sf =
            spatial_features(buffer[i].patch_db, buffer[i].az_profile, cfg.footprint_threshold_db);
        if (sf.empty_footprint) continue;
        for (size_t k = 0; k < 10; ++k) acc[k] += sf.values[k];
        ++n_ok;
    }
    if (n_ok == 0) {
        fv.empty_footprint = true;
    } else {
        for (size_t k = 0; k < 10; ++k) fv.spatial[k] = acc[k] / n_ok;
    }

    if (buffer.full()) {
        fv.mode = FeatureVector::Mode::full;
        fv.frequency = detail::modwt_stats(fill_missing(buffer), cfg);
    }
    return fv;
}

// CVD-baseline features: the same spatial block plus the eight statistics on
// the dominant-cadence slice of the CVD map.
struct CvdFeatureVector {
    std::array<double, 10> spatial{};
    std::array<double, 8> cadence{};
    int track_id = -1;
    int frame_end = -1;

    static std::vector<std::string> names() {
        std::vector<std::string> n;
        for (const char* s : kSpatialFeatureNames) n.emplace_back(std::string("spa_") + s);
        for (const char* st : kLevelStatNames) n.emplace_back(std::string("cvd_") + st);
        return n;
    }
};

inline CvdFeatureVector build_cvd_features(const TrackBuffer& buffer, const FeatureConfig& cfg) {
    if (!buffer.full()) throw std::invalid_argument("build_cvd_features: buffer not full");
    const FeatureVector base = build_feature_vector(buffer, cfg);

    const TrackBuffer filled = fill_missing(buffer);
    std::vector<cplx> series;
    for (size_t i = 0; i < filled.size(); ++i)
        series.insert(series.end(), filled[i].slow_time.begin(), filled[i].slow_time.end());

    const Eigen::MatrixXcd S = spectrogram(series, cfg.stft_window, cfg.stft_hop);
    const Eigen::MatrixXcd C = cvd(S);
    // Dominant cadence: strongest non-DC cadence bin over the lower half.
    const int n_eps = static_cast<int>(C.rows());
    int best = 1;
    double best_e = -1.0;
    for (int e = 1; e <= n_eps / 2; ++e) {
        double s = 0.0;
        for (int k = 0; k < C.cols(); ++k) s += std::abs(C(e, k));
        if (s > best_e) {
            best_e = s;
            best = e;
        }
    }
    std::vector<double> slice(static_cast<size_t>(C.cols()));
    for (int k = 0; k < C.cols(); ++k) slice[static_cast<size_t>(k)] = std::abs(C(best, k));

    CvdFeatureVector out;
    out.spatial = base.spatial;
    out.cadence = level_stats(slice);
    out.track_id = buffer.track_id();
    out.frame_end = buffer.last_frame();
    return out;
}

// ---------------------------------------------------------------------------
// Feature CSV (one row per track per frame)
// ---------------------------------------------------------------------------

inline void write_feature_csv_header(std::ostream& out, std::span<const std::string> names) {
    out << "track_id,frame,mode,label";
    for (const std::string& n : names) out << ',' << n;
    out << '\n';
}

inline void write_feature_csv_row(std::ostream& out, const FeatureVector& fv, int frame,
                                  int label) {
    out << fv.track_id << ',' << frame << ','
        << (fv.mode == FeatureVector::Mode::full ? "full" : "spatial_only") << ',' << label;
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (double v : fv.spatial) put(v);
    if (fv.mode == FeatureVector::Mode::full) {
        for (double v : fv.frequency) put(v);
    } else {
        for (int i = 0; i < 40; ++i) out << ',';  // masked slots stay empty
    }
    out << '\n';
}

struct FeatureTable {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;  // NaN marks masked slots
    std::vector<int> labels;
    std::vector<int> track_ids;
    std::vector<int> frames;
    std::vector<FeatureVector::Mode> modes;
};

inline FeatureTable read_feature_csv(std::istream& in) {
    FeatureTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_feature_csv: empty file");
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> header;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    if (header.size() < 5 || header[0] != "track_id")
        throw std::runtime_error("read_feature_csv: unexpected header");
    t.feature_names.assign(header.begin() + 4, header.end());

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        cells.resize(header.size());
        t.track_ids.push_back(std::stoi(cells[0]));
        t.frames.push_back(std::stoi(cells[1]));
        t.modes.push_back(cells[2] == "full" ? FeatureVector::Mode::full
                                             : FeatureVector::Mode::spatial_only);
        t.labels.push_back(std::stoi(cells[3]));
        std::vector<double> row;
        for (size_t i = 4; i < cells.size(); ++i)
            row.push_back(cells[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : std::stod(cells[i]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace gtrk
