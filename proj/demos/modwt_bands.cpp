// Decompose a two-tone series with the MODWT and print per-level band edges
// and energy shares.

#include <cmath>
#include <cstdio>
#include <vector>

#include "gtrk/modwt.hpp"

int main() {
    using namespace gtrk;

    const double fs = 900.0;
    const size_t n = 1800;
    std::vector<double> x(n);
    for (size_t t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t) / fs;
        x[t] = std::sin(2.0 * kPi * 85.0 * tt) + 0.5 * std::sin(2.0 * kPi * 300.0 * tt);
    }

    const ModwtDecomposition d = modwt(x, 4, WaveletFamily::d4);
    const double total = d.total_energy();
    for (int j = 1; j <= d.levels; ++j) {
        const auto [lo, hi] = ModwtDecomposition::detail_band(j, fs);
        std::printf("level %d  %6.1f - %6.1f Hz  energy %5.1f%%\n", j, lo, hi,
                    100.0 * d.detail_energy(j) / total);
    }
    const auto [alo, ahi] = ModwtDecomposition::approx_band(d.levels, fs);
    std::printf("approx   %6.1f - %6.1f Hz  energy %5.1f%%\n", alo, ahi,
                100.0 * d.approx_energy() / total);
    return 0;
}
