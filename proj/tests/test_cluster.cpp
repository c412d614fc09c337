#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "gtrk/cluster.hpp"

using namespace gtrk;
using Pt = std::pair<double, double>;

namespace {

// Independent O(n^2) reference with the same semantics: core points by
// neighbor count (self included), clusters as core components, borders to the
// nearest core. Written as plain index loops, no shared code with the library.
struct RefResult {
    std::vector<int> labels;
};

RefResult dbscan_reference(const std::vector<Pt>& pts, double eps, int min_pts) {
    const int n = static_cast<int>(pts.size());
    auto d2 = [&](int a, int b) {
        const double dx = pts[a].first - pts[b].first;
        const double dy = pts[a].second - pts[b].second;
        return dx * dx + dy * dy;
    };
    std::vector<char> core(n, false);
    for (int i = 0; i < n; ++i) {
        int cnt = 0;
        for (int j = 0; j < n; ++j)
            if (d2(i, j) <= eps * eps) ++cnt;
        core[i] = cnt >= min_pts;
    }
    std::vector<int> comp(n, -1);
    int nc = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || comp[i] >= 0) continue;
        // BFS over cores
        std::vector<int> q{i};
        comp[i] = nc;
        while (!q.empty()) {
            const int u = q.back();
            q.pop_back();
            for (int v = 0; v < n; ++v) {
                if (core[v] && comp[v] < 0 && d2(u, v) <= eps * eps) {
                    comp[v] = nc;
                    q.push_back(v);
                }
            }
        }
        ++nc;
    }
    for (int i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = -1;
        double bd = 1e300;
        for (int v = 0; v < n; ++v) {
            if (!core[v]) continue;
            const double d = d2(i, v);
            if (d <= eps * eps && d < bd) {
                bd = d;
                best = v;
            }
        }
        if (best >= 0) comp[i] = comp[best];
    }
    return {comp};
}

// Partition as a canonical set of member sets, ignoring label numbering.
std::set<std::set<int>> partition_of(const std::vector<int>& labels) {
    std::map<int, std::set<int>> groups;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) groups[labels[i]].insert(static_cast<int>(i));
    std::set<std::set<int>> out;
    for (auto& [l, s] : groups) out.insert(s);
    return out;
}

std::set<int> noise_of(const std::vector<int>& labels) {
    std::set<int> out;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0) out.insert(static_cast<int>(i));
    return out;
}

}  // namespace

TEST_CASE("to_cartesian basics") {
    auto [x0, y0] = to_cartesian(5.0, 0.0);
    REQUIRE(x0 == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(y0 == Catch::Approx(5.0));
    auto [x1, y1] = to_cartesian(5.0, 90.0);
    REQUIRE(x1 == Catch::Approx(5.0));
    REQUIRE(y1 == Catch::Approx(0.0).margin(1e-12));
    auto [x2, y2] = to_cartesian(3.0, 30.0);
    REQUIRE(x2 == Catch::Approx(1.5).epsilon(1e-9));
    REQUIRE(y2 == Catch::Approx(2.598076211).epsilon(1e-6));
}

TEST_CASE("coincident points form one cluster at the point") {
    std::vector<Pt> pts(5, Pt{2.0, -1.0});
    const auto res = dbscan(pts, 0.5, 3);
    REQUIRE(res.clusters.size() == 1);
    REQUIRE(res.clusters[0].members.size() == 5);
    REQUIRE(res.clusters[0].centroid_x == Catch::Approx(2.0));
    REQUIRE(res.clusters[0].centroid_y == Catch::Approx(-1.0));
    REQUIRE(res.noise.empty());
}

TEST_CASE("well separated blobs give two clusters") {
    std::vector<Pt> pts;
    for (int i = 0; i < 5; ++i) pts.push_back({0.0 + 0.01 * i, 0.0});
    for (int i = 0; i < 5; ++i) pts.push_back({10.0 + 0.01 * i, 0.0});
    const auto res = dbscan(pts, 0.5, 3);
    REQUIRE(res.clusters.size() == 2);
    REQUIRE(res.noise.empty());
}

TEST_CASE("agrees with the O(n^2) reference on random instances") {
    std::mt19937_64 rng(123);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = std::uniform_int_distribution<int>(1, 200)(rng);
        std::vector<Pt> pts;
        // Mixture of blobs and uniform scatter.
        const int n_blobs = std::uniform_int_distribution<int>(1, 4)(rng);
        std::normal_distribution<double> g(0.0, 0.3);
        for (int i = 0; i < n; ++i) {
            if (i % 4 == 3) {
                pts.push_back({std::uniform_real_distribution<double>(-5, 5)(rng),
                               std::uniform_real_distribution<double>(-5, 5)(rng)});
            } else {
                const int b = i % n_blobs;
                pts.push_back({b * 2.5 + g(rng), -b * 1.5 + g(rng)});
            }
        }
        const double eps = std::uniform_real_distribution<double>(0.2, 1.2)(rng);
        const int min_pts = std::uniform_int_distribution<int>(1, 6)(rng);
        const auto got = dbscan(pts, eps, min_pts);
        const auto ref = dbscan_reference(pts, eps, min_pts);
        REQUIRE(partition_of(got.labels) == partition_of(ref.labels));
        REQUIRE(noise_of(got.labels) == noise_of(ref.labels));
    }
}

TEST_CASE("memberships are invariant to input order") {
    std::mt19937_64 rng(99);
    std::vector<Pt> pts;
    std::normal_distribution<double> g(0.0, 0.4);
    for (int i = 0; i < 40; ++i) pts.push_back({g(rng), g(rng)});
    for (int i = 0; i < 40; ++i) pts.push_back({3.0 + g(rng), g(rng)});
    for (int i = 0; i < 10; ++i)
        pts.push_back({std::uniform_real_distribution<double>(-8, 8)(rng), 6.0});

    const auto base = dbscan(pts, 0.8, 4);
    std::vector<int> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int rep = 0; rep < 10; ++rep) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Pt> shuffled;
        for (int i : perm) shuffled.push_back(pts[static_cast<size_t>(i)]);
        const auto res = dbscan(shuffled, 0.8, 4);
        // Map the shuffled partition back to original indices.
        std::map<int, std::set<int>> groups;
        for (size_t k = 0; k < perm.size(); ++k)
            if (res.labels[k] >= 0) groups[res.labels[k]].insert(perm[k]);
        std::set<std::set<int>> back;
        for (auto& [l, s] : groups) back.insert(s);
        REQUIRE(back == partition_of(base.labels));
    }
}

TEST_CASE("shrinking eps never creates new core points") {
    std::mt19937_64 rng(5);
    std::vector<Pt> pts;
    for (int i = 0; i < 120; ++i)
        pts.push_back({std::uniform_real_distribution<double>(0, 6)(rng),
                       std::uniform_real_distribution<double>(0, 6)(rng)});
    auto core_set = [&](double eps, int min_pts) {
        std::set<int> cores;
        for (size_t i = 0; i < pts.size(); ++i) {
            int cnt = 0;
            for (size_t j = 0; j < pts.size(); ++j) {
                const double dx = pts[i].first - pts[j].first;
                const double dy = pts[i].second - pts[j].second;
                if (dx * dx + dy * dy <= eps * eps) ++cnt;
            }
            if (cnt >= min_pts) cores.insert(static_cast<int>(i));
        }
        return cores;
    };
    const auto big = core_set(1.0, 4);
    const auto small = core_set(0.5, 4);
    for (int i : small) REQUIRE(big.count(i) == 1);
    // And no point that dbscan marks noise at the larger eps becomes clustered
    // at the smaller one while staying non-core.
    const auto res_big = dbscan(pts, 1.0, 4);
    const auto res_small = dbscan(pts, 0.5, 4);
    for (int i : res_big.noise) {
        const bool was_core_small = small.count(i) == 1;
        REQUIRE_FALSE(was_core_small);
    }
    (void)res_small;
}

TEST_CASE("degenerate parameters are rejected") {
    std::vector<Pt> pts{{0, 0}};
    REQUIRE_THROWS_AS(dbscan(pts, 0.0, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(dbscan(pts, 1.0, 0), std::invalid_argument);
}

TEST_CASE("empty input yields empty result") {
    std::vector<Pt> pts;
    const auto res = dbscan(pts, 1.0, 3);
    REQUIRE(res.clusters.empty());
    REQUIRE(res.noise.empty());
}
