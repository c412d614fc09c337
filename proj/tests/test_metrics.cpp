#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "gtrk/metrics.hpp"

using namespace gtrk;

namespace {

// Brute-force minimal assignment of the smaller set into the larger.
double brute_force_dloc(const std::vector<XY>& truth, const std::vector<XY>& tracks, double p,
                        double c) {
    const size_t m = truth.size(), n = tracks.size();
    const size_t small = std::min(m, n), big = std::max(m, n);
    if (big == 0) return 0.0;
    if (small == 0) return 0.0;
    std::vector<int> idx(big);
    std::iota(idx.begin(), idx.end(), 0);
    double best = 1e300;
    do {
        double acc = 0.0;
        for (size_t i = 0; i < small; ++i) {
            const XY& a = (m <= n) ? truth[i] : tracks[i];
            const XY& b = (m <= n) ? tracks[static_cast<size_t>(idx[i])] : truth[static_cast<size_t>(idx[i])];
            acc += std::pow(std::min(std::hypot(a.first - b.first, a.second - b.second), c), p);
        }
        best = std::min(best, acc);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return std::pow(best / static_cast<double>(big), 1.0 / p);
}

}  // namespace

TEST_CASE("perfect tracks with q = 0 give zero OSPA") {
    std::vector<XY> truth{{1.0, 2.0}, {3.0, 4.0}};
    const auto f = ospa_frame(truth, truth, 2, 0, {});
    REQUIRE(f.d_loc == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(f.d_card == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(f.ospa == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("cardinality-only error: two tracks on one truth") {
    // n=2 tracks, m=1, q=0, matched pair exact: d_card = sqrt(1/2), ospa same.
    std::vector<XY> truth{{2.0, 2.0}};
    std::vector<XY> tracks{{2.0, 2.0}, {4.0, 5.0}};
    const auto f = ospa_frame(truth, tracks, 2, 0, {});
    REQUIRE(f.d_loc == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(f.d_card == Catch::Approx(0.70710678118654752).epsilon(1e-12));
    REQUIRE(f.ospa == Catch::Approx(0.70710678118654752).epsilon(1e-12));
}

TEST_CASE("localization-only error: single track offset half a meter") {
    std::vector<XY> truth{{1.0, 3.0}};
    std::vector<XY> tracks{{1.5, 3.0}};
    const auto f = ospa_frame(truth, tracks, 1, 0, {});
    REQUIRE(f.d_loc == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(f.d_card == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(f.ospa == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("no tracks saturates at the cutoff") {
    std::vector<XY> truth{{1.0, 1.0}, {2.0, 2.0}};
    std::vector<XY> tracks;
    const auto f = ospa_frame(truth, tracks, 0, 0, {});
    REQUIRE(f.ospa == Catch::Approx(1.0));
    REQUIRE(f.d_card == Catch::Approx(1.0));
}

TEST_CASE("classifier count repairs the group cardinality") {
    // One merged track over two true people: conventional q=0 saturates the
    // cardinality term, count feedback with q=1 zeroes it.
    std::vector<XY> truth{{1.0, 2.0}, {1.5, 2.0}};
    std::vector<XY> tracks{{1.25, 2.0}};
    const auto conventional = ospa_frame(truth, tracks, 1, 0, {});
    const auto counted = ospa_frame(truth, tracks, 1, 1, {});
    REQUIRE(conventional.d_card == Catch::Approx(1.0));
    REQUIRE(counted.d_card == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(counted.ospa < conventional.ospa);
}

TEST_CASE("boundedness on random frames") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    OspaConfig cfg;
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<XY> truth(static_cast<size_t>(std::uniform_int_distribution<int>(0, 4)(rng)));
        std::vector<XY> tracks(static_cast<size_t>(std::uniform_int_distribution<int>(0, 4)(rng)));
        for (auto& t : truth) t = {u(rng), u(rng)};
        for (auto& t : tracks) t = {u(rng), u(rng)};
        const int q = std::uniform_int_distribution<int>(-2, 3)(rng);
        const auto f =
            ospa_frame(truth, tracks, static_cast<int>(tracks.size()), q, cfg);
        REQUIRE(f.ospa >= 0.0);
        REQUIRE(f.ospa <= cfg.c + 1e-12);
        REQUIRE(f.d_card >= 0.0);
        REQUIRE(f.d_card <= cfg.c + 1e-12);
    }
}

TEST_CASE("growing |q| never lowers the cardinality error") {
    std::vector<XY> truth{{0.0, 1.0}, {1.0, 1.0}};
    std::vector<XY> tracks{{0.0, 1.0}, {1.0, 1.0}};
    OspaConfig cfg;
    double prev_pos = -1.0;
    for (int q = 0; q <= 5; ++q) {
        const auto f = ospa_frame(truth, tracks, 2, q, cfg);
        REQUIRE(f.d_card >= prev_pos - 1e-15);
        prev_pos = f.d_card;
    }
    double prev_neg = -1.0;
    for (int q = 0; q >= -4; --q) {
        const auto f = ospa_frame(truth, tracks, 2, q, cfg);
        REQUIRE(f.d_card >= prev_neg - 1e-15);
        prev_neg = f.d_card;
    }
}

TEST_CASE("localization component is symmetric for equal balanced sets") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        const size_t n = static_cast<size_t>(std::uniform_int_distribution<int>(1, 4)(rng));
        std::vector<XY> a(n), b(n);
        for (auto& t : a) t = {u(rng), u(rng)};
        for (auto& t : b) t = {u(rng), u(rng)};
        const auto f1 = ospa_frame(a, b, static_cast<int>(n), 0, {});
        const auto f2 = ospa_frame(b, a, static_cast<int>(n), 0, {});
        REQUIRE(f1.d_loc == Catch::Approx(f2.d_loc).margin(1e-12));
    }
}

TEST_CASE("localization matches brute-force assignment enumeration") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    OspaConfig cfg;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<XY> truth(static_cast<size_t>(std::uniform_int_distribution<int>(1, 5)(rng)));
        std::vector<XY> tracks(static_cast<size_t>(std::uniform_int_distribution<int>(1, 5)(rng)));
        for (auto& t : truth) t = {u(rng), u(rng)};
        for (auto& t : tracks) t = {u(rng), u(rng)};
        const auto f = ospa_frame(truth, tracks, static_cast<int>(tracks.size()), 0, cfg);
        const double want = brute_force_dloc(truth, tracks, cfg.p, cfg.c);
        REQUIRE(f.d_loc == Catch::Approx(want).margin(1e-10));
    }
}

TEST_CASE("standard OSPA cross-check: symmetric metric, zero on equal sets") {
    std::vector<XY> a{{1.0, 1.0}, {2.0, 5.0}};
    std::vector<XY> b{{1.2, 1.0}};
    REQUIRE(ospa_standard(a, a, {}) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(ospa_standard(a, b, {}) == Catch::Approx(ospa_standard(b, a, {})).margin(1e-12));
    // One matched pair at distance 0.2, one unmatched: ((0.2^2 + 1)/2)^(1/2).
    REQUIRE(ospa_standard(a, b, {}) ==
            Catch::Approx(std::sqrt((0.04 + 1.0) / 2.0)).epsilon(1e-12));
}

TEST_CASE("bad config is rejected") {
    std::vector<XY> a{{0, 0}};
    OspaConfig bad_p{0.5, 1.0};
    REQUIRE_THROWS_AS(ospa_frame(a, a, 1, 0, bad_p), std::invalid_argument);
    OspaConfig bad_c{2.0, 0.0};
    REQUIRE_THROWS_AS(ospa_frame(a, a, 1, 0, bad_c), std::invalid_argument);
}
