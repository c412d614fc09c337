#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gtrk/common.hpp"
#include "gtrk/datacube.hpp"

namespace gtrk {

// Radar at origin, boresight +y: x = r sin(az), y = r cos(az).
inline std::pair<double, double> to_cartesian(double range_m, double azimuth_deg) {
    const double az = deg_to_rad(azimuth_deg);
    return {range_m * std::sin(az), range_m * std::cos(az)};
}

inline std::pair<double, double> to_cartesian(const Detection& d) {
    return to_cartesian(d.range_m, d.azimuth_deg);
}

struct ClusterResult {
    struct Cluster {
        std::vector<int> members;  // indices into the input point list
        double centroid_x = 0.0;
        double centroid_y = 0.0;
        double mean_doppler = 0.0;
    };
    std::vector<Cluster> clusters;
    std::vector<int> noise;    // indices of unclustered points
    std::vector<int> labels;   // per point: cluster index, or -1 for noise
};

// DBSCAN with order-independent semantics: core points are those with at
// least min_pts neighbors within eps (self included); clusters are connected
// components of the core graph; border points join the cluster of their
// nearest core point. Cluster numbering follows the lowest member index, so
// the partition is invariant to input permutation up to label renaming.
inline ClusterResult dbscan(std::span<const std::pair<double, double>> points, double eps,
                            int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");

    const int n = static_cast<int>(points.size());
    ClusterResult res;
    res.labels.assign(static_cast<size_t>(n), -1);
    if (n == 0) return res;

    const double eps2 = eps * eps;
    auto dist2 = [&](int a, int b) {
        const double dx = points[static_cast<size_t>(a)].first - points[static_cast<size_t>(b)].first;
        const double dy = points[static_cast<size_t>(a)].second - points[static_cast<size_t>(b)].second;
        return dx * dx + dy * dy;
    };

    std::vector<std::vector<int>> neighbors(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (dist2(i, j) <= eps2) neighbors[static_cast<size_t>(i)].push_back(j);
    }
    std::vector<char> core(static_cast<size_t>(n), false);
    for (int i = 0; i < n; ++i)
        core[static_cast<size_t>(i)] = neighbors[static_cast<size_t>(i)].size() >= static_cast<size_t>(min_pts);

    // Connected components over core points.
    std::vector<int> comp(static_cast<size_t>(n), -1);
    int n_comp = 0;
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
        if (!core[static_cast<size_t>(i)] || comp[static_cast<size_t>(i)] >= 0) continue;
        comp[static_cast<size_t>(i)] = n_comp;
        stack.assign(1, i);
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : neighbors[static_cast<size_t>(u)]) {
                if (core[static_cast<size_t>(v)] && comp[static_cast<size_t>(v)] < 0) {
                    comp[static_cast<size_t>(v)] = n_comp;
                    stack.push_back(v);
                }
            }
        }
        ++n_comp;
    }

    // Border points: non-core within eps of a core; take the nearest core's component.
    for (int i = 0; i < n; ++i) {
        if (core[static_cast<size_t>(i)]) continue;
        int best = -1;
        double best_d = 0.0;
        for (int v : neighbors[static_cast<size_t>(i)]) {
            if (!core[static_cast<size_t>(v)]) continue;
            const double d = dist2(i, v);
            if (best < 0 || d < best_d) {
                best = v;
                best_d = d;
            }
        }
        if (best >= 0) comp[static_cast<size_t>(i)] = comp[static_cast<size_t>(best)];
    }

    // Renumber components by lowest member index for a stable labeling.
    std::vector<int> order;  // component id -> rank
    {
        std::vector<int> first_member(static_cast<size_t>(n_comp), n);
        for (int i = 0; i < n; ++i) {
            const int c = comp[static_cast<size_t>(i)];
            if (c >= 0 && i < first_member[static_cast<size_t>(c)]) first_member[static_cast<size_t>(c)] = i;
        }
        std::vector<int> ids(static_cast<size_t>(n_comp));
        std::iota(ids.begin(), ids.end(), 0);
        std::sort(ids.begin(), ids.end(), [&](int a, int b) {
            return first_member[static_cast<size_t>(a)] < first_member[static_cast<size_t>(b)];
        });
        order.assign(static_cast<size_t>(n_comp), 0);
        for (int rank = 0; rank < n_comp; ++rank) order[static_cast<size_t>(ids[static_cast<size_t>(rank)])] = rank;
    }

    res.clusters.resize(static_cast<size_t>(n_comp));
    for (int i = 0; i < n; ++i) {
        const int c = comp[static_cast<size_t>(i)];
        if (c < 0) {
            res.noise.push_back(i);
            continue;
        }
        const int label = order[static_cast<size_t>(c)];
        res.labels[static_cast<size_t>(i)] = label;
        res.clusters[static_cast<size_t>(label)].members.push_back(i);
    }
    for (auto& cl : res.clusters) {
        double sx = 0.0, sy = 0.0;
        for (int i : cl.members) {
            sx += points[static_cast<size_t>(i)].first;
            sy += points[static_cast<size_t>(i)].second;
        }
        cl.centroid_x = sx / static_cast<double>(cl.members.size());
        cl.centroid_y = sy / static_cast<double>(cl.members.size());
    }
    return res;
}

// Clustering of detections in Cartesian coordinates; fills per-cluster mean
// Doppler alongside the spatial centroid.
inline ClusterResult cluster_detections(std::span<const Detection> dets, double eps,
                                        int min_pts) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(dets.size());
    for (const Detection& d : dets) pts.push_back(to_cartesian(d));
    ClusterResult res = dbscan(pts, eps, min_pts);
    for (auto& cl : res.clusters) {
        double sv = 0.0;
        for (int i : cl.members) sv += dets[static_cast<size_t>(i)].radial_velocity;
        cl.mean_doppler = sv / static_cast<double>(cl.members.size());
    }
    return res;
}

}  // namespace gtrk
