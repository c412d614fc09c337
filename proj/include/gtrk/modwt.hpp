#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gtrk/common.hpp"

namespace gtrk {

enum class WaveletFamily { haar, d4, la8 };

// Scaling (g) and wavelet (h) filters in DWT normalization, sum(g^2) = 1.
struct WaveletFilter {
    std::vector<double> g;
    std::vector<double> h;
};

inline WaveletFilter wavelet_filter(WaveletFamily family) {
    WaveletFilter f;
    switch (family) {
        case WaveletFamily::haar: {
            const double s = 1.0 / std::sqrt(2.0);
            f.g = {s, s};
            break;
        }
        case WaveletFamily::d4: {
            const double r3 = std::sqrt(3.0);
            const double d = 4.0 * std::sqrt(2.0);
            f.g = {(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d};
            break;
        }
        case WaveletFamily::la8: {
            // Least-asymmetric LA(8) scaling filter (Percival & Walden).
            f.g = {-0.0757657147893407, -0.0296355276459541, 0.4976186676324578,
                   0.8037387518052163,  0.2978577956055422,  -0.0992195435769354,
                   -0.0126039672622612, 0.0322231006040713};
            break;
        }
    }
    // Quadrature mirror: h_l = (-1)^l g_{L-1-l}.
    const size_t L = f.g.size();
    f.h.resize(L);
    for (size_t l = 0; l < L; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        f.h[l] = sign * f.g[L - 1 - l];
    }
    return f;
}

// Non-decimated wavelet decomposition; every level keeps the input length.
struct ModwtDecomposition {
    std::vector<std::vector<double>> details;  // W~_1 .. W~_J
    std::vector<double> approx;                // V~_J
    int levels = 0;
    WaveletFamily family = WaveletFamily::d4;

    // Nominal dyadic band of detail level j (1-based) at sampling rate fs.
    static std::pair<double, double> detail_band(int j, double fs) {
        return {fs / std::pow(2.0, j + 1), fs / std::pow(2.0, j)};
    }
    static std::pair<double, double> approx_band(int levels, double fs) {
        return {0.0, fs / std::pow(2.0, levels + 1)};
    }

    double detail_energy(int j) const {  // j 1-based
        double e = 0.0;
        for (double v : details.at(static_cast<size_t>(j - 1))) e += v * v;
        return e;
    }
    double approx_energy() const {
        double e = 0.0;
        for (double v : approx) e += v * v;
        return e;
    }
    double total_energy() const {
        double e = approx_energy();
        for (int j = 1; j <= levels; ++j) e += detail_energy(j);
        return e;
    }
};

// Filter support width at level j for base length L.
inline size_t modwt_support(int level, size_t filter_len) {
    return ((size_t{1} << level) - 1) * (filter_len - 1) + 1;
}

// Circular-convolution MODWT pyramid: coefficients at index (t - 2^{j-1} l) mod N.
inline ModwtDecomposition modwt(std::span<const double> x, int levels = 4,
                                WaveletFamily family = WaveletFamily::d4) {
    if (levels < 1) throw std::invalid_argument("modwt: levels must be >= 1");
    const WaveletFilter f = wavelet_filter(family);
    const size_t N = x.size();
    const size_t L = f.g.size();
    if (N < modwt_support(levels, L))
        throw std::invalid_argument("modwt: series shorter than filter support at level " +
                                    std::to_string(levels));

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<double> gt(L), ht(L);
    for (size_t l = 0; l < L; ++l) {
        gt[l] = f.g[l] * inv_sqrt2;
        ht[l] = f.h[l] * inv_sqrt2;
    }

    ModwtDecomposition out;
    out.levels = levels;
    out.family = family;
    out.details.resize(static_cast<size_t>(levels));

    std::vector<double> v(x.begin(), x.end());
    std::vector<double> v_next(N), w(N);
    for (int j = 1; j <= levels; ++j) {
        const size_t stride = size_t{1} << (j - 1);
        for (size_t t = 0; t < N; ++t) {
            double acc_w = 0.0, acc_v = 0.0;
            size_t k = t;
            for (size_t l = 0; l < L; ++l) {
                acc_w += ht[l] * v[k];
                acc_v += gt[l] * v[k];
                k = (k + N - (stride % N)) % N;
            }
            w[t] = acc_w;
            v_next[t] = acc_v;
        }
        out.details[static_cast<size_t>(j - 1)] = w;
        v.swap(v_next);
    }
    out.approx = std::move(v);
    return out;
}

}  // namespace gtrk
