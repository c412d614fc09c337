#pragma once

#include <algorithm>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "gtrk/common.hpp"

namespace gtrk {

enum class WindowKind { rectangular, hann, hamming, blackman };

inline std::vector<double> make_window(WindowKind kind, int n) {
    if (n <= 0) throw std::invalid_argument("make_window: n must be positive");
    std::vector<double> w(static_cast<size_t>(n), 1.0);
    if (n == 1 || kind == WindowKind::rectangular) return w;
    const double den = static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * kPi * i / den;
        switch (kind) {
            case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(t); break;
            case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(t); break;
            case WindowKind::blackman:
                w[i] = 0.42 - 0.5 * std::cos(t) + 0.08 * std::cos(2.0 * t);
                break;
            case WindowKind::rectangular: break;
        }
    }
    return w;
}

namespace detail {
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;  // caches plans per length
    return engine;
}
}  // namespace detail

// Unnormalized forward DFT, X_k = sum_n x_n exp(-2*pi*i*k*n/N).
inline std::vector<cplx> fft(const std::vector<cplx>& x) {
    if (x.empty()) throw std::invalid_argument("fft: empty input");
    std::vector<cplx> out(x.size());
    detail::fft_engine().fwd(out, x);
    return out;
}

// Unitary forward DFT (scaled by 1/sqrt(N)); preserves signal energy.
inline std::vector<cplx> fft_unitary(const std::vector<cplx>& x) {
    std::vector<cplx> out = fft(x);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (cplx& v : out) v *= s;
    return out;
}

// Swap halves so bin N/2 becomes the zero-frequency bin.
template <typename T>
std::vector<T> fftshift(const std::vector<T>& x) {
    const size_t n = x.size();
    std::vector<T> out(n);
    const size_t h = n / 2;
    for (size_t i = 0; i < n; ++i) out[i] = x[(i + h + n % 2) % n];
    return out;
}

// Shifted-bin index of frequency zero.
inline int center_bin(int n) { return n / 2; }

// Quadratic interpolation around a sampled peak; returns sub-bin offset in [-0.5, 0.5].
inline double parabolic_peak_offset(double y_left, double y_peak, double y_right) {
    const double denom = y_left - 2.0 * y_peak + y_right;
    if (std::abs(denom) < 1e-300) return 0.0;
    double d = 0.5 * (y_left - y_right) / denom;
    return std::clamp(d, -0.5, 0.5);
}

inline double signal_energy(std::span<const cplx> x) {
    double e = 0.0;
    for (const cplx& v : x) e += std::norm(v);
    return e;
}

}  // namespace gtrk
