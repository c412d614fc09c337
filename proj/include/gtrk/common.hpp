#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtrk {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// dB floor for zero/denormal power; keeps -inf out of the maps.
inline constexpr double kDbFloor = -120.0;

inline double to_db(double power) {
    if (!(power > 1e-12)) return kDbFloor;
    return 10.0 * std::log10(power);
}

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// Wrap angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

template <typename T>
bool all_finite(std::span<const T> v) {
    for (const T& x : v) {
        if constexpr (std::is_same_v<T, cplx>) {
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
        } else {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

// splitmix64; used to derive independent per-stream seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace gtrk
