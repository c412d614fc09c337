#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gtrk/assignment.hpp"
#include "gtrk/cluster.hpp"
#include "gtrk/common.hpp"

namespace gtrk {

enum class TrackStatus { tentative, confirmed, deleted };

struct TrackerConfig {
    double sigma_accel = 1.5;        // m/s^2, white-acceleration process noise
    double gate_chi2 = 9.21;         // chi-square, 2 dof, 99%
    int confirm_hits = 3;            // M of N confirmation
    int confirm_window = 5;
    int delete_misses = 5;           // consecutive misses
    double sigma_range = 0.15;       // m, cluster-centroid measurement noise
    double sigma_azimuth_deg = 2.0;
    double init_vel_sigma = 1.5;     // m/s, velocity prior for new tracks
    bool count_feedback = true;
    double ownership_radius_m = 1.2; // group gate for spawn inhibition
};

// Polar measurement of a cluster centroid. R is expressed in (meters,
// radians); helpers below build it from the usual (m, deg) sigmas.
struct Measurement {
    double range_m = 0.0;
    double azimuth_deg = 0.0;
    std::optional<double> doppler_mps;
    Eigen::Matrix2d R = Eigen::Matrix2d::Identity();

    static Measurement from_polar(double range_m, double azimuth_deg, double sigma_range,
                                  double sigma_azimuth_deg) {
        Measurement z;
        z.range_m = range_m;
        z.azimuth_deg = azimuth_deg;
        z.R = Eigen::Vector2d(sigma_range * sigma_range,
                              deg_to_rad(sigma_azimuth_deg) * deg_to_rad(sigma_azimuth_deg))
                  .asDiagonal();
        return z;
    }
    static Measurement from_xy(double x, double y, double sigma_range, double sigma_azimuth_deg) {
        return from_polar(std::hypot(x, y), rad_to_deg(std::atan2(x, y)), sigma_range,
                          sigma_azimuth_deg);
    }
};

struct TrackState {
    int id = -1;
    Eigen::Vector4d x = Eigen::Vector4d::Zero();  // (x, y, vx, vy)
    Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
    TrackStatus status = TrackStatus::tentative;
    int hits = 0;
    int misses = 0;               // consecutive
    int age = 0;                  // frames since spawn
    std::uint32_t hit_history = 0;  // newest frame in bit 0
    int count_estimate = 1;       // classifier feedback; 1 until told otherwise
    int confirmed_at_frame = -1;
    double last_nis = 0.0;

    double px() const { return x(0); }
    double py() const { return x(1); }
};

namespace detail {

inline void condition_covariance(Eigen::Matrix4d& P) {
    P = 0.5 * (P + P.transpose()).eval();
    Eigen::LLT<Eigen::Matrix4d> llt(P);
    if (llt.info() == Eigen::Success) return;
    // Eigenvalue floor for a non-PD covariance.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(P);
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-9);
    P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    P = 0.5 * (P + P.transpose()).eval();
}

// h(x) = (range, azimuth) with azimuth = atan2(x, y), boresight +y.
inline Eigen::Vector2d measure(const Eigen::Vector4d& x) {
    return {std::hypot(x(0), x(1)), std::atan2(x(0), x(1))};
}

inline Eigen::Matrix<double, 2, 4> measure_jacobian(const Eigen::Vector4d& x) {
    const double r2 = x(0) * x(0) + x(1) * x(1);
    const double r = std::sqrt(std::max(r2, 1e-12));
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = x(0) / r;
    H(0, 1) = x(1) / r;
    H(1, 0) = x(1) / std::max(r2, 1e-12);
    H(1, 1) = -x(0) / std::max(r2, 1e-12);
    return H;
}

}  // namespace detail

// Constant-velocity prediction, white-acceleration process noise.
inline TrackState predict(const TrackState& track, double dt, const TrackerConfig& cfg) {
    if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
    TrackState out = track;
    Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
    F(0, 2) = dt;
    F(1, 3) = dt;
    const double q = cfg.sigma_accel * cfg.sigma_accel;
    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    Q(0, 0) = Q(1, 1) = q * dt4 / 4.0;
    Q(2, 2) = Q(3, 3) = q * dt2;
    Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = q * dt3 / 2.0;
    out.x = F * track.x;
    out.P = F * track.P * F.transpose() + Q;
    detail::condition_covariance(out.P);
    return out;
}

struct UpdateResult {
    TrackState track;
    Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
    Eigen::Matrix2d S = Eigen::Matrix2d::Identity();
    double nis = 0.0;
    bool skipped = false;  // singular innovation covariance
};

inline UpdateResult update(const TrackState& track, const Measurement& z) {
    UpdateResult res;
    res.track = track;

    const Eigen::Vector2d h = detail::measure(track.x);
    const Eigen::Matrix<double, 2, 4> H = detail::measure_jacobian(track.x);
    res.S = H * track.P * H.transpose() + z.R;
    Eigen::LLT<Eigen::Matrix2d> llt(res.S);
    if (llt.info() != Eigen::Success || !(res.S.determinant() > 1e-18)) {
        res.skipped = true;
        return res;
    }
    res.innovation = {z.range_m - h(0), wrap_angle(deg_to_rad(z.azimuth_deg) - h(1))};
    const Eigen::Matrix2d S_inv = llt.solve(Eigen::Matrix2d::Identity());
    res.nis = res.innovation.transpose() * S_inv * res.innovation;

    const Eigen::Matrix<double, 4, 2> K = track.P * H.transpose() * S_inv;
    res.track.x = track.x + K * res.innovation;
    const Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity() - K * H;
    res.track.P = I_KH * track.P * I_KH.transpose() + K * z.R * K.transpose();  // Joseph form
    detail::condition_covariance(res.track.P);
    res.track.last_nis = res.nis;
    return res;
}

// Squared Mahalanobis distance of a centroid measurement to a track's
// predicted measurement; the association/gating cost.
inline double gating_cost(const TrackState& track, const Measurement& z) {
    const Eigen::Vector2d h = detail::measure(track.x);
    const Eigen::Matrix<double, 2, 4> H = detail::measure_jacobian(track.x);
    const Eigen::Matrix2d S = H * track.P * H.transpose() + z.R;
    Eigen::LLT<Eigen::Matrix2d> llt(S);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::Vector2d nu(z.range_m - h(0), wrap_angle(deg_to_rad(z.azimuth_deg) - h(1)));
    return nu.transpose() * llt.solve(nu);
}

struct Association {
    std::vector<std::pair<int, int>> pairs;  // (track index, cluster index)
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_clusters;
};

// Global nearest neighbor: hard one-to-one assignment minimizing the total
// gated Mahalanobis cost (max-cardinality among gated pairs).
inline Association associate_gnn(std::span<const TrackState> tracks,
                                 std::span<const Measurement> measurements,
                                 const TrackerConfig& cfg) {
    Association out;
    const int n_t = static_cast<int>(tracks.size());
    const int n_c = static_cast<int>(measurements.size());
    if (n_t == 0 || n_c == 0) {
        for (int i = 0; i < n_t; ++i) out.unmatched_tracks.push_back(i);
        for (int j = 0; j < n_c; ++j) out.unmatched_clusters.push_back(j);
        return out;
    }
    Eigen::MatrixXd cost(n_t, n_c);
    for (int i = 0; i < n_t; ++i)
        for (int j = 0; j < n_c; ++j) cost(i, j) = gating_cost(tracks[static_cast<size_t>(i)], measurements[static_cast<size_t>(j)]);
    MatchResult m = match_gated(cost, cfg.gate_chi2);
    out.pairs = std::move(m.pairs);
    out.unmatched_tracks = std::move(m.unmatched_rows);
    out.unmatched_clusters = std::move(m.unmatched_cols);
    return out;
}

// Multi-target tracker: per-frame predict -> gate/associate -> update ->
// lifecycle. Owns track state; snapshots are value copies.
class Tracker {
  public:
    explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

    const TrackerConfig& config() const { return cfg_; }
    int frame() const { return frame_; }

    // Classifier feedback: the group behind `track_id` holds `count` people.
    void set_count_estimate(int track_id, int count) {
        for (TrackState& t : tracks_)
            if (t.id == track_id) t.count_estimate = std::max(1, count);
    }

    std::vector<TrackState> step(std::span<const ClusterResult::Cluster> clusters, double dt) {
        ++frame_;
        for (TrackState& t : tracks_) t = predict(t, dt, cfg_);

        std::vector<Measurement> zs;
        zs.reserve(clusters.size());
        for (const auto& cl : clusters)
            zs.push_back(Measurement::from_xy(cl.centroid_x, cl.centroid_y, cfg_.sigma_range,
                                              cfg_.sigma_azimuth_deg));

        const Association asg = associate_gnn(tracks_, zs, cfg_);
        manage_lifecycle(asg, clusters, zs);

        std::vector<TrackState> snapshot;
        snapshot.reserve(tracks_.size());
        for (const TrackState& t : tracks_) snapshot.push_back(t);
        return snapshot;
    }

    const std::vector<TrackState>& tracks() const { return tracks_; }

  private:
    void manage_lifecycle(const Association& asg,
                          std::span<const ClusterResult::Cluster> clusters,
                          std::span<const Measurement> zs) {
        for (TrackState& t : tracks_) ++t.age;

        for (const auto& [ti, ci] : asg.pairs) {
            TrackState& t = tracks_[static_cast<size_t>(ti)];
            const UpdateResult res = update(t, zs[static_cast<size_t>(ci)]);
            if (res.skipped) {
                register_miss(t);
                continue;
            }
            t = res.track;
            ++t.hits;
            t.misses = 0;
            t.hit_history = (t.hit_history << 1) | 1u;
            maybe_confirm(t);
        }
        for (int ti : asg.unmatched_tracks) register_miss(tracks_[static_cast<size_t>(ti)]);

        for (int ci : asg.unmatched_clusters) {
            if (spawn_inhibited(clusters[static_cast<size_t>(ci)])) continue;
            spawn(clusters[static_cast<size_t>(ci)]);
        }

        tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                                     [](const TrackState& t) {
                                         return t.status == TrackStatus::deleted;
                                     }),
                      tracks_.end());
    }

    void register_miss(TrackState& t) {
        ++t.misses;
        t.hit_history <<= 1;
        if (t.misses >= cfg_.delete_misses) t.status = TrackStatus::deleted;
    }

    void maybe_confirm(TrackState& t) {
        if (t.status != TrackStatus::tentative) return;
        const std::uint32_t window = t.hit_history & ((1u << cfg_.confirm_window) - 1u);
        if (std::popcount(window) >= cfg_.confirm_hits) {
            t.status = TrackStatus::confirmed;
            t.confirmed_at_frame = frame_;
        }
    }

    // A confirmed group track (count >= 2) owns any cluster inside its gate;
    // transient splits of the group must not seed new tracks.
    bool spawn_inhibited(const ClusterResult::Cluster& cl) const {
        if (!cfg_.count_feedback) return false;
        const Measurement z =
            Measurement::from_xy(cl.centroid_x, cl.centroid_y, cfg_.sigma_range,
                                 cfg_.sigma_azimuth_deg);
        for (const TrackState& t : tracks_) {
            if (t.status != TrackStatus::confirmed || t.count_estimate < 2) continue;
            if (gating_cost(t, z) <= cfg_.gate_chi2) return true;
            const double d = std::hypot(t.px() - cl.centroid_x, t.py() - cl.centroid_y);
            if (d <= cfg_.ownership_radius_m) return true;
        }
        return false;
    }

    void spawn(const ClusterResult::Cluster& cl) {
        TrackState t;
        t.id = next_id_++;
        t.x = {cl.centroid_x, cl.centroid_y, 0.0, 0.0};
        const double r = std::hypot(cl.centroid_x, cl.centroid_y);
        const double sp = std::max(cfg_.sigma_range, r * deg_to_rad(cfg_.sigma_azimuth_deg));
        Eigen::Vector4d d(sp * sp, sp * sp, cfg_.init_vel_sigma * cfg_.init_vel_sigma,
                          cfg_.init_vel_sigma * cfg_.init_vel_sigma);
        t.P = d.asDiagonal();
        t.status = TrackStatus::tentative;
        t.hits = 1;
        t.hit_history = 1u;
        tracks_.push_back(t);
    }

    TrackerConfig cfg_;
    std::vector<TrackState> tracks_;
    int next_id_ = 1;
    int frame_ = -1;
};

}  // namespace gtrk
