#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gtrk/common.hpp"
#include "gtrk/dsp.hpp"

namespace gtrk {

// ---------------------------------------------------------------------------
// Radar data model
// ---------------------------------------------------------------------------

struct RadarParams {
    double carrier_frequency = 24.0e9;            // Hz
    double sweep_bandwidth = 250.0e6;              // Hz
    int samples_per_chirp = 56;
    int chirps_per_frame = 90;
    double chirp_repetition_interval = 483.0e-6;   // s
    double frame_rate = 10.0;                      // Hz
    int n_virtual_channels = 15;                   // 2x8 MIMO, one overlapping element
    double element_spacing = 0.5;                  // wavelengths
    double beamwidth_deg = 76.5;                   // horizontal 3 dB beamwidth

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    double range_resolution() const { return kSpeedOfLight / (2.0 * sweep_bandwidth); }
    double slow_time_fs() const { return chirps_per_frame * frame_rate; }
    double doppler_bin_hz() const {
        return 1.0 / (chirps_per_frame * chirp_repetition_interval);
    }
    double velocity_resolution() const { return wavelength() * doppler_bin_hz() / 2.0; }
    double max_azimuth_deg() const { return beamwidth_deg / 2.0; }

    void validate() const {
        if (samples_per_chirp < 1 || chirps_per_frame < 1 || n_virtual_channels < 1)
            throw std::invalid_argument("RadarParams: counts must be >= 1");
        if (!(sweep_bandwidth > 0.0) || !(chirp_repetition_interval > 0.0) ||
            !(frame_rate > 0.0) || !(carrier_frequency > 0.0) || !(element_spacing > 0.0))
            throw std::invalid_argument("RadarParams: rates and spacings must be positive");
        if (!std::isfinite(range_resolution()) || !(range_resolution() > 0.0))
            throw std::invalid_argument("RadarParams: invalid range resolution");
    }
};

// Complex baseband samples of one frame, (sample, chirp, channel), channel fastest.
struct RadarCube {
    std::vector<cplx> data;
    int frame_index = 0;
    RadarParams params;

    static RadarCube zeros(const RadarParams& p, int frame_index = 0) {
        p.validate();
        RadarCube c;
        c.params = p;
        c.frame_index = frame_index;
        c.data.assign(static_cast<size_t>(p.samples_per_chirp) * p.chirps_per_frame *
                          p.n_virtual_channels,
                      cplx{0.0, 0.0});
        return c;
    }

    size_t index(int sample, int chirp, int channel) const {
        return (static_cast<size_t>(sample) * params.chirps_per_frame + chirp) *
                   params.n_virtual_channels +
               channel;
    }
    cplx& at(int sample, int chirp, int channel) { return data[index(sample, chirp, channel)]; }
    const cplx& at(int sample, int chirp, int channel) const {
        return data[index(sample, chirp, channel)];
    }

    bool shape_consistent() const {
        return data.size() == static_cast<size_t>(params.samples_per_chirp) *
                                  params.chirps_per_frame * params.n_virtual_channels;
    }
};

// Range-Doppler map: per-cell dB power plus the per-channel complex spectra
// needed later for azimuth estimation.
struct RDMap {
    Eigen::MatrixXd power_db;                   // range_bins x doppler_bins, shifted
    std::vector<Eigen::MatrixXcd> channel_spectra;  // one (range x doppler) per channel
    RadarParams params;
    int frame_index = 0;

    int range_bins() const { return static_cast<int>(power_db.rows()); }
    int doppler_bins() const { return static_cast<int>(power_db.cols()); }
    int zero_doppler_bin() const { return center_bin(doppler_bins()); }
    double range_of_bin(int r) const { return r * params.range_resolution(); }
    double velocity_of_bin(int d) const {
        return (d - zero_doppler_bin()) * params.velocity_resolution();
    }
};

struct RAMap {
    Eigen::MatrixXd power_db;           // range_bins x azimuth_bins
    std::vector<double> azimuth_axis_deg;
    RadarParams params;
    int frame_index = 0;
};

struct Detection {
    int range_bin = 0;
    int doppler_bin = 0;
    double range_m = 0.0;
    double radial_velocity = 0.0;  // m/s, positive receding
    double azimuth_deg = 0.0;
    double snr_db = 0.0;
    int frame_index = 0;
};

struct CfarConfig {
    int train_range = 8;     // training cells per side, range axis
    int train_doppler = 4;
    int guard_range = 4;     // guard cells per side
    int guard_doppler = 2;
    double pfa = 1e-4;
    int notch_doppler_bins = 2;  // +/- bins around zero Doppler excluded from detection
};

// ---------------------------------------------------------------------------
// DSP chain
// ---------------------------------------------------------------------------

namespace detail {

// Fast-time FFT per (chirp, channel): cube -> range profiles, unitary scaling.
// Result indexed [channel](range_bin, chirp).
inline std::vector<Eigen::MatrixXcd> range_fft(const RadarCube& cube) {
    const auto& p = cube.params;
    std::vector<Eigen::MatrixXcd> out(
        static_cast<size_t>(p.n_virtual_channels),
        Eigen::MatrixXcd(p.samples_per_chirp, p.chirps_per_frame));
    std::vector<cplx> buf(static_cast<size_t>(p.samples_per_chirp));
    for (int ch = 0; ch < p.n_virtual_channels; ++ch) {
        for (int c = 0; c < p.chirps_per_frame; ++c) {
            for (int s = 0; s < p.samples_per_chirp; ++s) buf[static_cast<size_t>(s)] = cube.at(s, c, ch);
            const std::vector<cplx> spec = fft_unitary(buf);
            for (int r = 0; r < p.samples_per_chirp; ++r)
                out[static_cast<size_t>(ch)](r, c) = spec[static_cast<size_t>(r)];
        }
    }
    return out;
}

}  // namespace detail

// 2-D FFT (fast-time then windowed slow-time) per channel; channel powers are
// summed non-coherently, per-cell channel vectors kept for azimuth estimation.
inline RDMap range_doppler_transform(const RadarCube& cube,
                                     WindowKind slow_time_window = WindowKind::hann) {
    cube.params.validate();
    if (!cube.shape_consistent())
        throw std::invalid_argument("range_doppler_transform: cube shape mismatch");
    if (!all_finite(std::span<const cplx>(cube.data)))
        throw std::invalid_argument("range_doppler_transform: non-finite samples in cube");

    const auto& p = cube.params;
    const int n_r = p.samples_per_chirp;
    const int n_d = p.chirps_per_frame;

    RDMap map;
    map.params = p;
    map.frame_index = cube.frame_index;
    map.channel_spectra.assign(static_cast<size_t>(p.n_virtual_channels),
                               Eigen::MatrixXcd(n_r, n_d));
    Eigen::MatrixXd power = Eigen::MatrixXd::Zero(n_r, n_d);

    const std::vector<double> w = make_window(slow_time_window, n_d);
    const std::vector<Eigen::MatrixXcd> rp = detail::range_fft(cube);
    std::vector<cplx> slow(static_cast<size_t>(n_d));
    for (int ch = 0; ch < p.n_virtual_channels; ++ch) {
        for (int r = 0; r < n_r; ++r) {
            for (int c = 0; c < n_d; ++c)
                slow[static_cast<size_t>(c)] = rp[static_cast<size_t>(ch)](r, c) * w[static_cast<size_t>(c)];
            const std::vector<cplx> spec = fftshift(fft_unitary(slow));
            for (int d = 0; d < n_d; ++d) {
                map.channel_spectra[static_cast<size_t>(ch)](r, d) = spec[static_cast<size_t>(d)];
                power(r, d) += std::norm(spec[static_cast<size_t>(d)]);
            }
        }
    }

    map.power_db = power.unaryExpr([](double v) { return to_db(v); });
    return map;
}

// Slow-time mean subtraction per (fast-time sample, channel); removes strictly
// static returns exactly.
inline RadarCube mti_suppress(const RadarCube& cube) {
    cube.params.validate();
    if (!cube.shape_consistent()) throw std::invalid_argument("mti_suppress: cube shape mismatch");
    const auto& p = cube.params;
    RadarCube out = cube;
    const double inv_n = 1.0 / p.chirps_per_frame;
    for (int s = 0; s < p.samples_per_chirp; ++s) {
        for (int ch = 0; ch < p.n_virtual_channels; ++ch) {
            cplx mean{0.0, 0.0};
            for (int c = 0; c < p.chirps_per_frame; ++c) mean += cube.at(s, c, ch);
            mean *= inv_n;
            for (int c = 0; c < p.chirps_per_frame; ++c) out.at(s, c, ch) -= mean;
        }
    }
    return out;
}

// 2-D cell-averaging CFAR on linear power with truncated windows at map edges.
// Threshold factor alpha = N (pfa^(-1/N) - 1) for N local training cells.
inline std::vector<Detection> cfar_detect(const RDMap& map, const CfarConfig& cfg) {
    if (cfg.train_range <= 0 && cfg.train_doppler <= 0)
        throw std::invalid_argument("cfar_detect: no training cells configured");
    if (cfg.guard_range < 0 || cfg.guard_doppler < 0 || cfg.train_range < 0 ||
        cfg.train_doppler < 0)
        throw std::invalid_argument("cfar_detect: negative window extents");
    if (!(cfg.pfa > 0.0 && cfg.pfa < 1.0))
        throw std::invalid_argument("cfar_detect: pfa must lie in (0,1)");
    if (!map.power_db.allFinite())
        throw std::invalid_argument("cfar_detect: non-finite map");

    const int n_r = map.range_bins();
    const int n_d = map.doppler_bins();
    const int ext_r = cfg.train_range + cfg.guard_range;
    const int ext_d = cfg.train_doppler + cfg.guard_doppler;

    Eigen::MatrixXd lin(n_r, n_d);
    for (int r = 0; r < n_r; ++r)
        for (int d = 0; d < n_d; ++d) lin(r, d) = db_to_power(map.power_db(r, d));

    // Summed-area table for O(1) window sums.
    Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(n_r + 1, n_d + 1);
    for (int r = 0; r < n_r; ++r)
        for (int d = 0; d < n_d; ++d)
            sat(r + 1, d + 1) = lin(r, d) + sat(r, d + 1) + sat(r + 1, d) - sat(r, d);
    auto window_sum = [&](int r0, int r1, int d0, int d1) {  // inclusive, clipped
        r0 = std::max(r0, 0); d0 = std::max(d0, 0);
        r1 = std::min(r1, n_r - 1); d1 = std::min(d1, n_d - 1);
        if (r0 > r1 || d0 > d1) return std::pair<double, int>{0.0, 0};
        const double s = sat(r1 + 1, d1 + 1) - sat(r0, d1 + 1) - sat(r1 + 1, d0) + sat(r0, d0);
        return std::pair<double, int>{s, (r1 - r0 + 1) * (d1 - d0 + 1)};
    };

    const int zd = map.zero_doppler_bin();
    std::vector<Detection> dets;
    for (int r = 0; r < n_r; ++r) {
        for (int d = 0; d < n_d; ++d) {
            if (cfg.notch_doppler_bins >= 0 && std::abs(d - zd) <= cfg.notch_doppler_bins)
                continue;
            const auto [outer_sum, outer_n] = window_sum(r - ext_r, r + ext_r, d - ext_d, d + ext_d);
            const auto [inner_sum, inner_n] =
                window_sum(r - cfg.guard_range, r + cfg.guard_range, d - cfg.guard_doppler,
                           d + cfg.guard_doppler);
            const int n_train = outer_n - inner_n;
            if (n_train <= 0) continue;
            const double noise = (outer_sum - inner_sum) / n_train;
            if (!(noise > 0.0)) continue;
            const double alpha = n_train * (std::pow(cfg.pfa, -1.0 / n_train) - 1.0);
            const double cell = lin(r, d);
            if (cell > alpha * noise) {
                Detection det;
                det.range_bin = r;
                det.doppler_bin = d;
                det.range_m = map.range_of_bin(r);
                det.radial_velocity = map.velocity_of_bin(d);
                det.snr_db = 10.0 * std::log10(cell / noise);
                det.frame_index = map.frame_index;
                dets.push_back(det);
            }
        }
    }
    return dets;
}

namespace detail {

inline constexpr int kAzimuthFftSize = 64;

// Windowed, zero-padded FFT across the virtual array; returns shifted power
// spectrum (kAzimuthFftSize bins).
inline std::vector<double> azimuth_spectrum(std::span<const cplx> channels) {
    const int n_ch = static_cast<int>(channels.size());
    const std::vector<double> w = make_window(WindowKind::hann, n_ch);
    std::vector<cplx> padded(static_cast<size_t>(kAzimuthFftSize), cplx{0.0, 0.0});
    for (int i = 0; i < n_ch; ++i) padded[static_cast<size_t>(i)] = channels[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
    const std::vector<cplx> spec = fftshift(fft(padded));
    std::vector<double> power(spec.size());
    for (size_t i = 0; i < spec.size(); ++i) power[i] = std::norm(spec[i]);
    return power;
}

inline double azimuth_of_bin(double bin, int n_fft, double element_spacing) {
    const double u = (bin - center_bin(n_fft)) / static_cast<double>(n_fft);
    const double s = std::clamp(u / element_spacing, -1.0, 1.0);
    return rad_to_deg(std::asin(s));
}

}  // namespace detail

// Azimuth of one detection from its per-channel spectrum: FFT across the
// array, dB-domain parabolic interpolation around the peak.
inline double estimate_azimuth(const RDMap& map, const Detection& det) {
    if (det.range_bin < 0 || det.range_bin >= map.range_bins() || det.doppler_bin < 0 ||
        det.doppler_bin >= map.doppler_bins())
        throw std::out_of_range("estimate_azimuth: detection outside map");
    const int n_ch = static_cast<int>(map.channel_spectra.size());
    std::vector<cplx> ch(static_cast<size_t>(n_ch));
    for (int i = 0; i < n_ch; ++i)
        ch[static_cast<size_t>(i)] = map.channel_spectra[static_cast<size_t>(i)](det.range_bin, det.doppler_bin);

    const std::vector<double> power = detail::azimuth_spectrum(ch);
    const int n = static_cast<int>(power.size());
    int k = 0;
    for (int i = 1; i < n; ++i)
        if (power[static_cast<size_t>(i)] > power[static_cast<size_t>(k)]) k = i;
    double delta = 0.0;
    if (k > 0 && k < n - 1) {
        const double y0 = to_db(power[static_cast<size_t>(k - 1)]);
        const double y1 = to_db(power[static_cast<size_t>(k)]);
        const double y2 = to_db(power[static_cast<size_t>(k + 1)]);
        delta = parabolic_peak_offset(y0, y1, y2);
    }
    return detail::azimuth_of_bin(k + delta, n, map.params.element_spacing);
}

// Fast-time FFT then spatial FFT, Doppler-integrated power per (range, azimuth)
// cell; azimuth axis restricted to the 3 dB beamwidth.
inline RAMap range_azimuth_map(const RadarCube& cube) {
    cube.params.validate();
    if (!cube.shape_consistent())
        throw std::invalid_argument("range_azimuth_map: cube shape mismatch");
    const auto& p = cube.params;
    const int n_fft = detail::kAzimuthFftSize;

    // Bins within the +/- beamwidth/2 span.
    const double max_az = p.max_azimuth_deg();
    std::vector<int> keep;
    std::vector<double> axis;
    for (int k = 0; k < n_fft; ++k) {
        const double az = detail::azimuth_of_bin(k, n_fft, p.element_spacing);
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

    const std::vector<Eigen::MatrixXcd> rp = detail::range_fft(cube);
    std::vector<cplx> ch(static_cast<size_t>(p.n_virtual_channels));
    for (int r = 0; r < p.samples_per_chirp; ++r) {
        for (int c = 0; c < p.chirps_per_frame; ++c) {
            for (int v = 0; v < p.n_virtual_channels; ++v) ch[static_cast<size_t>(v)] = rp[static_cast<size_t>(v)](r, c);
            const std::vector<double> spec = detail::azimuth_spectrum(ch);
            for (size_t i = 0; i < keep.size(); ++i)
                power(r, static_cast<int>(i)) += spec[static_cast<size_t>(keep[i])];
        }
    }

    out.power_db = power.unaryExpr([](double v) { return to_db(v); });
    return out;
}

}  // namespace gtrk
