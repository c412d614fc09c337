#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtrk/common.hpp"
#include "gtrk/datacube.hpp"

namespace gtrk {

enum class MotionKind { forward_backward, random_walk, following };
enum class Fidelity { point_cloud, signal };

inline std::string to_string(MotionKind m) {
    switch (m) {
        case MotionKind::forward_backward: return "forward_backward";
        case MotionKind::random_walk: return "random_walk";
        case MotionKind::following: return "following";
    }
    return "?";
}

inline MotionKind motion_kind_from_string(const std::string& s) {
    if (s == "forward_backward") return MotionKind::forward_backward;
    if (s == "random_walk") return MotionKind::random_walk;
    if (s == "following") return MotionKind::following;
    throw std::invalid_argument("unknown motion kind: " + s);
}

struct ScenarioConfig {
    int scenario_id = 1;
    int n_people = 1;
    MotionKind motion_kind = MotionKind::forward_backward;
    double duration_s = 60.0;
    double room_w = 6.0;  // meters; radar in the (0,0) corner, boresight along the diagonal
    double room_h = 6.0;
    double group_spacing_m = 0.8;
    double grouping_radius_m = 1.0;  // radius used to form true groups
    std::uint64_t seed = 0;
    Fidelity fidelity = Fidelity::point_cloud;

    // Table of the six measured scenarios: people count and movement pattern.
    static ScenarioConfig scenario(int id) {
        ScenarioConfig c;
        c.scenario_id = id;
        switch (id) {
            case 1: c.n_people = 1; c.motion_kind = MotionKind::forward_backward; break;
            case 2: c.n_people = 1; c.motion_kind = MotionKind::random_walk; break;
            case 3: c.n_people = 2; c.motion_kind = MotionKind::forward_backward; break;
            case 4: c.n_people = 2; c.motion_kind = MotionKind::following; break;
            case 5: c.n_people = 2; c.motion_kind = MotionKind::random_walk; break;
            case 6: c.n_people = 3; c.motion_kind = MotionKind::forward_backward; break;
            default: throw std::invalid_argument("scenario id must be 1..6");
        }
        return c;
    }

    void validate() const {
        if (n_people < 1 || n_people > 3)
            throw std::invalid_argument("ScenarioConfig: n_people must be 1..3");
        if (!(duration_s > 0.0)) throw std::invalid_argument("ScenarioConfig: duration_s <= 0");
        // Enough floor space for the formation plus wall margins.
        const double need = 2.0 * (0.8 + group_spacing_m) + 1.0;
        if (room_w < need || room_h < need)
            throw std::invalid_argument("ScenarioConfig: room too small for n_people");
    }
};

struct GaitModel {
    double torso_speed = 1.1;            // m/s
    double step_cadence = 1.8;           // Hz
    double limb_doppler_amplitude = 1.1; // m/s
    double rcs_torso = 1.0;
    double rcs_limbs = 0.25;
    double phase = 0.0;

    void validate() const {
        if (torso_speed < 0.5 || torso_speed > 1.5)
            throw std::invalid_argument("GaitModel: torso_speed outside [0.5, 1.5]");
        if (step_cadence < 1.4 || step_cadence > 2.2)
            throw std::invalid_argument("GaitModel: step_cadence outside [1.4, 2.2]");
    }
};

struct MultipathConfig {
    bool enabled = true;
    double amplitude_db = -12.0;  // ghost relative to direct return
};

struct PointNoise {
    double sigma_range = 0.3;    // m
    double sigma_azimuth_deg = 2.0;
    double sigma_doppler = 0.1;  // m/s
    double miss_prob = 0.0;      // per person per frame
    double clutter_rate = 0.0;   // mean clutter points per frame
    int det_min = 3;
    int det_max = 8;
};

struct TruthPerson {
    int id = 0;
    double x = 0.0, y = 0.0;    // radar frame, boresight +y
    double vx = 0.0, vy = 0.0;
};

struct TruthFrame {
    int frame = 0;
    std::vector<TruthPerson> persons;
    std::vector<int> group_counts;  // people per spatial group
};

struct GroundTruth {
    std::vector<TruthFrame> frames;
    double frame_rate = 10.0;
};

namespace detail {

// Room coordinates (u, v) in [0,W]x[0,H] -> radar frame with the radar at the
// (0,0) corner and boresight along the room diagonal.
inline std::pair<double, double> room_to_radar(double u, double v, double W, double H) {
    const double dn = std::hypot(W, H);
    const double by_x = W / dn, by_y = H / dn;       // boresight direction in room coords
    const double bx_x = by_y, bx_y = -by_x;          // right of boresight
    return {u * bx_x + v * bx_y, u * by_x + v * by_y};
}

struct WalkState {
    double s = 0.0;        // arc position along current leg
    double v = 0.0;        // speed
    int dir = 1;
    double dwell_left = 0.0;
    std::pair<double, double> from, to;
    double leg_len = 0.0;
};

inline std::vector<int> group_counts_of(const std::vector<TruthPerson>& ps, double radius) {
    const int n = static_cast<int>(ps.size());
    std::vector<int> parent(static_cast<size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<size_t>(a)] != a) a = parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
        return a;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = std::hypot(ps[static_cast<size_t>(i)].x - ps[static_cast<size_t>(j)].x, ps[static_cast<size_t>(i)].y - ps[static_cast<size_t>(j)].y);
            if (d <= radius) parent[static_cast<size_t>(find(i))] = find(j);
        }
    std::vector<int> count(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) ++count[static_cast<size_t>(find(i))];
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        if (find(i) == i) out.push_back(count[static_cast<size_t>(i)]);
    std::sort(out.begin(), out.end(), std::greater<int>());
    return out;
}

}  // namespace detail

// Deterministic per-person gait parameters for a scenario.
inline std::vector<GaitModel> sample_gaits(const ScenarioConfig& cfg) {
    std::mt19937_64 rng = make_rng(cfg.seed, 17);
    std::vector<GaitModel> gaits;
    for (int i = 0; i < cfg.n_people; ++i) {
        GaitModel g;
        g.torso_speed = std::uniform_real_distribution<double>(0.9, 1.3)(rng);
        g.step_cadence = std::uniform_real_distribution<double>(1.6, 2.1)(rng);
        g.limb_doppler_amplitude = std::uniform_real_distribution<double>(0.8, 1.4)(rng);
        g.phase = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
        g.validate();
        gaits.push_back(g);
    }
    return gaits;
}

// Piecewise trajectories at the frame rate. Motion kinds: straight legs with
// dwell-and-turn, waypoint random walk with stops, or leader/follower at the
// configured spacing. Multi-person scenarios move as one formation.
inline GroundTruth gen_trajectories(const ScenarioConfig& cfg,
                                    const RadarParams& params = RadarParams{}) {
    cfg.validate();
    const double dt = 1.0 / params.frame_rate;
    const int n_frames = static_cast<int>(std::lround(cfg.duration_s * params.frame_rate));
    std::mt19937_64 rng = make_rng(cfg.seed, 1);

    const double margin = 0.8;
    const double W = cfg.room_w, H = cfg.room_h;
    auto rand_point = [&]() {
        return std::pair<double, double>{
            std::uniform_real_distribution<double>(margin, W - margin)(rng),
            std::uniform_real_distribution<double>(margin, H - margin)(rng)};
    };

    const double cruise = std::uniform_real_distribution<double>(0.9, 1.3)(rng);
    const double accel = 1.2;

    detail::WalkState w;
    if (cfg.motion_kind == MotionKind::forward_backward ||
        cfg.motion_kind == MotionKind::following) {
        // A long near-diagonal corridor leg, slightly perturbed per seed.
        const double j1 = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
        const double j2 = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
        w.from = {margin + 0.2, margin + 0.2 + j1};
        w.to = {W - margin - 0.2, H - margin - 0.2 + j2};
    } else {
        w.from = rand_point();
        w.to = rand_point();
    }
    w.leg_len = std::hypot(w.to.first - w.from.first, w.to.second - w.from.second);

    auto dwell_time = [&]() {
        if (cfg.motion_kind == MotionKind::random_walk)
            return std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        return std::uniform_real_distribution<double>(0.3, 0.7)(rng);
    };

    // Formation offsets (local frame: +x right of heading, +y along heading):
    // abreast for 2, triangle for 3, nothing for the follower scenario.
    std::vector<std::pair<double, double>> offsets(static_cast<size_t>(cfg.n_people), {0.0, 0.0});
    const double s2 = cfg.group_spacing_m / 2.0;
    if (cfg.motion_kind != MotionKind::following) {
        if (cfg.n_people == 2) offsets = {{-s2, 0.0}, {s2, 0.0}};
        if (cfg.n_people == 3)
            offsets = {{-s2, 0.0}, {s2, 0.0}, {0.0, -cfg.group_spacing_m * 0.8660254037844386}};
    }

    // Smooth per-person jitter (Ornstein-Uhlenbeck, ~5 cm).
    std::vector<std::pair<double, double>> jitter(static_cast<size_t>(cfg.n_people), {0.0, 0.0});
    std::normal_distribution<double> gauss(0.0, 1.0);

    GroundTruth gt;
    gt.frame_rate = params.frame_rate;
    gt.frames.resize(static_cast<size_t>(n_frames));

    double heading = std::atan2(w.to.second - w.from.second, w.to.first - w.from.first);
    std::vector<std::pair<double, double>> trail;  // anchor history, for the follower
    std::vector<std::vector<std::pair<double, double>>> prev_pos;

    for (int f = 0; f < n_frames; ++f) {
        // Advance the anchor along its current leg.
        if (w.dwell_left > 0.0) {
            w.dwell_left -= dt;
            w.v = 0.0;
        } else {
            const double remaining = (w.dir > 0) ? (w.leg_len - w.s) : w.s;
            const double brake = std::sqrt(std::max(0.0, 2.0 * accel * remaining));
            w.v = std::min({w.v + accel * dt, cruise, std::max(brake, 0.12)});
            w.s += w.dir * w.v * dt;
            if (w.s >= w.leg_len || w.s <= 0.0) {
                w.s = std::clamp(w.s, 0.0, w.leg_len);
                w.v = 0.0;
                w.dwell_left = dwell_time();
                if (cfg.motion_kind == MotionKind::random_walk) {
                    const auto cur = (w.dir > 0) ? w.to : w.from;
                    w.from = cur;
                    w.to = rand_point();
                    w.leg_len = std::max(0.5, std::hypot(w.to.first - w.from.first,
                                                         w.to.second - w.from.second));
                    w.s = 0.0;
                    w.dir = 1;
                } else {
                    w.dir = -w.dir;  // turn and walk back
                }
            }
        }
        const double fx = w.from.first + (w.to.first - w.from.first) * (w.s / w.leg_len);
        const double fy = w.from.second + (w.to.second - w.from.second) * (w.s / w.leg_len);

        // Heading slews toward the direction of motion while walking; it is
        // frozen during dwells so formation members do not orbit in place.
        if (w.v > 0.05) {
            const double leg_heading = std::atan2(w.to.second - w.from.second,
                                                  w.to.first - w.from.first);
            const double target = (w.dir > 0) ? leg_heading : leg_heading + kPi;
            const double dh = wrap_angle(target - heading);
            const double max_turn = kPi * dt;
            heading += std::clamp(dh, -max_turn, max_turn);
        }

        trail.push_back({fx, fy});

        TruthFrame& tf = gt.frames[static_cast<size_t>(f)];
        tf.frame = f;
        const double ch = std::cos(heading), sh = std::sin(heading);
        for (int p = 0; p < cfg.n_people; ++p) {
            double ux, uy;
            if (cfg.motion_kind == MotionKind::following && p == 1) {
                // Walk back along the anchor trail by the group spacing. When
                // the leader turns, the trail folds onto itself and the raw
                // delayed point can coincide with the leader, so the follower
                // is held at least 0.35 m away.
                double need = cfg.group_spacing_m;
                size_t k = trail.size() - 1;
                while (k > 0 && need > 0.0) {
                    const double seg = std::hypot(trail[k].first - trail[k - 1].first,
                                                  trail[k].second - trail[k - 1].second);
                    if (seg >= need && seg > 0.0) break;
                    need -= seg;
                    --k;
                }
                std::pair<double, double> behind = trail[k];
                if (k > 0) {
                    const double seg = std::hypot(trail[k].first - trail[k - 1].first,
                                                  trail[k].second - trail[k - 1].second);
                    const double t = (seg > 0.0) ? need / seg : 0.0;
                    behind = {trail[k].first + (trail[k - 1].first - trail[k].first) * t,
                              trail[k].second + (trail[k - 1].second - trail[k].second) * t};
                }
                double bx = behind.first - fx, by = behind.second - fy;
                const double bd = std::hypot(bx, by);
                const double min_gap = 0.35;
                if (bd < min_gap) {
                    if (bd < 1e-9) {
                        bx = -std::cos(heading);
                        by = -std::sin(heading);
                    } else {
                        bx /= bd;
                        by /= bd;
                    }
                    behind = {fx + bx * min_gap, fy + by * min_gap};
                }
                ux = behind.first;
                uy = behind.second;
            } else {
                const auto [ox, oy] = offsets[static_cast<size_t>(p)];
                ux = fx + ch * oy - sh * ox + jitter[static_cast<size_t>(p)].first;
                uy = fy + sh * oy + ch * ox + jitter[static_cast<size_t>(p)].second;
            }
            // OU jitter update (~1 cm stationary, well under walking speeds).
            jitter[static_cast<size_t>(p)].first += -0.8 * jitter[static_cast<size_t>(p)].first * dt + 0.004 * gauss(rng);
            jitter[static_cast<size_t>(p)].second += -0.8 * jitter[static_cast<size_t>(p)].second * dt + 0.004 * gauss(rng);

            ux = std::clamp(ux, 0.4, W - 0.4);
            uy = std::clamp(uy, 0.4, H - 0.4);
            const auto [rx, ry] = detail::room_to_radar(ux, uy, W, H);
            TruthPerson tp;
            tp.id = p;
            tp.x = rx;
            tp.y = ry;
            tf.persons.push_back(tp);
        }
        tf.group_counts = detail::group_counts_of(tf.persons, cfg.grouping_radius_m);
    }

    // Velocities by backward difference.
    for (int f = 0; f < n_frames; ++f) {
        for (size_t p = 0; p < gt.frames[static_cast<size_t>(f)].persons.size(); ++p) {
            TruthPerson& tp = gt.frames[static_cast<size_t>(f)].persons[p];
            if (f == 0) continue;
            const TruthPerson& prev = gt.frames[static_cast<size_t>(f - 1)].persons[p];
            tp.vx = (tp.x - prev.x) / dt;
            tp.vy = (tp.y - prev.y) / dt;
        }
    }
    if (n_frames > 1)
        for (size_t p = 0; p < gt.frames[0].persons.size(); ++p) {
            gt.frames[0].persons[p].vx = gt.frames[1].persons[p].vx;
            gt.frames[0].persons[p].vy = gt.frames[1].persons[p].vy;
        }
    return gt;
}

// Signal-level synthesis of one frame: per person a torso scatterer plus two
// counter-phased limb scatterers with sinusoidal radial-velocity modulation,
// a -12 dB wall-mirrored ghost when multipath is on, and white complex noise.
// Chirps sit at the true repetition interval inside the frame, so per-frame
// Doppler bins follow the radar timing; the idle time between frames is what
// the feature chain later ignores when it treats concatenated frames as one
// 900 Hz series.
inline RadarCube synthesize_frame(const TruthFrame& truth, std::span<const GaitModel> gaits,
                                  const RadarParams& params, const MultipathConfig& multipath,
                                  double noise_std = 0.5, std::uint64_t seed = 0,
                                  double room_w = 6.0, double room_h = 6.0,
                                  int n_static_clutter = 6) {
    params.validate();
    if (truth.persons.size() > gaits.size())
        throw std::invalid_argument("synthesize_frame: gait model missing for some person");

    RadarCube cube = RadarCube::zeros(params, truth.frame);
    const double lambda = params.wavelength();
    const double rres = params.range_resolution();
    const double cri = params.chirp_repetition_interval;
    const int n_s = params.samples_per_chirp;
    const int n_c = params.chirps_per_frame;
    const int n_ch = params.n_virtual_channels;
    const double t_frame = truth.frame / params.frame_rate;

    struct Scatterer {
        double x, y, vx, vy;   // position/velocity at frame start
        double amp;            // linear amplitude
        double mod_amp;        // sinusoidal radial-velocity amplitude, m/s
        double mod_phase;
        double cadence;
    };
    std::vector<Scatterer> scatterers;
    const double ghost_amp = db_to_power(multipath.amplitude_db / 2.0);  // field ratio

    for (size_t p = 0; p < truth.persons.size(); ++p) {
        const TruthPerson& tp = truth.persons[p];
        const GaitModel& g = gaits[p];
        const double speed = std::hypot(tp.vx, tp.vy);
        // Limb modulation shrinks toward a small sway when standing.
        const double mod = g.limb_doppler_amplitude *
                           std::clamp(speed / g.torso_speed, 0.12, 1.0);
        auto add_person = [&](double x, double y, double vx, double vy, double scale) {
            const double r = std::max(std::hypot(x, y), 0.5);
            const double falloff = 1.0 / std::max(r / 2.0, 1.0);
            scatterers.push_back({x, y, vx, vy, scale * falloff * std::sqrt(g.rcs_torso), 0.0,
                                  0.0, g.step_cadence});
            // Legs and arms swing in counter-phase with unequal depth.
            scatterers.push_back({x, y, vx, vy, scale * falloff * std::sqrt(g.rcs_limbs), mod,
                                  g.phase, g.step_cadence});
            scatterers.push_back({x, y, vx, vy, scale * falloff * std::sqrt(g.rcs_limbs),
                                  0.6 * mod, g.phase + kPi, g.step_cadence});
        };
        add_person(tp.x, tp.y, tp.vx, tp.vy, 1.0);
        if (multipath.enabled) {
            // First-order specular ghost: mirror across the far u = room_w
            // wall, which does not pass through the radar corner, so the
            // image shows up at a longer range.
            const double dn = std::hypot(room_w, room_h);
            const double by_x = room_w / dn, by_y = room_h / dn;
            const double bx_x = by_y, bx_y = -by_x;
            const double u = tp.x * bx_x + tp.y * by_x;   // back to room coords
            const double v = tp.x * bx_y + tp.y * by_y;
            const double uu = 2.0 * room_w - u;
            const double gx = uu * bx_x + v * bx_y;
            const double gy = uu * by_x + v * by_y;
            const double uvx = tp.vx * bx_x + tp.vy * by_x;
            const double uvy = tp.vx * bx_y + tp.vy * by_y;
            const double gvx = -uvx * bx_x + uvy * bx_y;
            const double gvy = -uvx * by_x + uvy * by_y;
            add_person(gx, gy, gvx, gvy, ghost_amp);
        }
    }

    // Static clutter (walls, furniture): fixed positions per seed, zero
    // velocity, removed exactly by slow-time mean subtraction.
    if (n_static_clutter > 0) {
        std::mt19937_64 crng = make_rng(seed, 999);
        std::uniform_real_distribution<double> upos(0.8, 0.92);
        std::uniform_real_distribution<double> uamp(0.5, 2.0);
        std::uniform_real_distribution<double> ufrac(0.1, 0.9);
        for (int i = 0; i < n_static_clutter; ++i) {
            // Along the walls of the room, mapped into the radar frame.
            const bool far_wall = (i % 2 == 0);
            const double a = upos(crng) * (far_wall ? room_w : room_h);
            const double b = ufrac(crng) * (far_wall ? room_h : room_w);
            const double u = far_wall ? a : b;
            const double v = far_wall ? b : a;
            const auto [cx, cy] = detail::room_to_radar(u, v, room_w, room_h);
            scatterers.push_back({cx, cy, 0.0, 0.0, uamp(crng), 0.0, 0.0, 1.0});
        }
    }

    for (const Scatterer& sc : scatterers) {
        for (int c = 0; c < n_c; ++c) {
            const double tau = c * cri;
            const double t = t_frame + tau;
            const double x = sc.x + sc.vx * tau;
            const double y = sc.y + sc.vy * tau;
            const double r0 = std::hypot(x, y);
            // Radial micro-motion: integral of mod_amp * sin(2*pi*fc*t + phase).
            double r = r0;
            if (sc.mod_amp > 0.0) {
                const double wm = 2.0 * kPi * sc.cadence;
                r += -(sc.mod_amp / wm) * std::cos(wm * t + sc.mod_phase);
            }
            const double az = std::atan2(x, y);
            const double phi_dop = 4.0 * kPi / lambda * r;
            const double dphi_rng = 2.0 * kPi * (r / rres) / n_s;
            const double dphi_az = 2.0 * kPi * params.element_spacing * std::sin(az);

            const cplx rot_n(std::cos(dphi_rng), std::sin(dphi_rng));
            const cplx rot_ch(std::cos(dphi_az), std::sin(dphi_az));
            cplx acc_n = sc.amp * cplx(std::cos(phi_dop), std::sin(phi_dop));
            for (int n = 0; n < n_s; ++n) {
                cplx acc_ch = acc_n;
                cplx* cell = &cube.data[cube.index(n, c, 0)];
                for (int ch = 0; ch < n_ch; ++ch) {
                    cell[ch] += acc_ch;
                    acc_ch *= rot_ch;
                }
                acc_n *= rot_n;
            }
        }
    }

    if (noise_std > 0.0) {
        std::mt19937_64 rng = make_rng(seed, 1000003ULL + static_cast<std::uint64_t>(truth.frame));
        std::normal_distribution<double> gauss(0.0, noise_std);
        for (cplx& v : cube.data) v += cplx(gauss(rng), gauss(rng));
    }
    return cube;
}

// Point-cloud fidelity: detections scattered around each person, skipping the
// signal chain entirely.
inline std::vector<Detection> gen_point_cloud(const TruthFrame& truth, const PointNoise& noise,
                                              std::uint64_t seed,
                                              const RadarParams& params = RadarParams{}) {
    std::mt19937_64 rng = make_rng(seed, 2000003ULL + static_cast<std::uint64_t>(truth.frame));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Detection> dets;

    for (const TruthPerson& tp : truth.persons) {
        if (noise.miss_prob > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) < noise.miss_prob)
            continue;
        const double r = std::hypot(tp.x, tp.y);
        const double az = rad_to_deg(std::atan2(tp.x, tp.y));
        const double vr = (r > 1e-9) ? (tp.x * tp.vx + tp.y * tp.vy) / r : 0.0;
        const int k = std::uniform_int_distribution<int>(noise.det_min, noise.det_max)(rng);
        for (int i = 0; i < k; ++i) {
            Detection d;
            d.frame_index = truth.frame;
            d.range_m = std::max(0.0, r + noise.sigma_range * gauss(rng));
            d.azimuth_deg = az + noise.sigma_azimuth_deg * gauss(rng);
            d.radial_velocity = vr + noise.sigma_doppler * gauss(rng);
            d.snr_db = std::uniform_real_distribution<double>(12.0, 25.0)(rng);
            d.range_bin = static_cast<int>(std::lround(d.range_m / params.range_resolution()));
            d.doppler_bin = params.chirps_per_frame / 2 +
                            static_cast<int>(std::lround(d.radial_velocity /
                                                         params.velocity_resolution()));
            dets.push_back(d);
        }
    }
    if (noise.clutter_rate > 0.0) {
        const int k = std::poisson_distribution<int>(noise.clutter_rate)(rng);
        for (int i = 0; i < k; ++i) {
            Detection d;
            d.frame_index = truth.frame;
            d.range_m = std::uniform_real_distribution<double>(0.5, 8.0)(rng);
            d.azimuth_deg = std::uniform_real_distribution<double>(-38.0, 38.0)(rng);
            d.radial_velocity = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
            d.snr_db = std::uniform_real_distribution<double>(8.0, 14.0)(rng);
            d.range_bin = static_cast<int>(std::lround(d.range_m / params.range_resolution()));
            d.doppler_bin = params.chirps_per_frame / 2 +
                            static_cast<int>(std::lround(d.radial_velocity /
                                                         params.velocity_resolution()));
            dets.push_back(d);
        }
    }
    return dets;
}

// ---------------------------------------------------------------------------
// External formats
// ---------------------------------------------------------------------------

// Ground truth JSON-lines: {"frame":..,"persons":[{"id":..,"x":..,"y":..}],
// "true_count_per_group":[..]}
inline void write_truth_jsonl(std::ostream& out, const GroundTruth& gt) {
    for (const TruthFrame& tf : gt.frames) {
        nlohmann::ordered_json j;
        j["frame"] = tf.frame;
        nlohmann::ordered_json persons = nlohmann::ordered_json::array();
        for (const TruthPerson& p : tf.persons) {
            nlohmann::ordered_json pj;
            pj["id"] = p.id;
            pj["x"] = p.x;
            pj["y"] = p.y;
            persons.push_back(pj);
        }
        j["persons"] = persons;
        j["true_count_per_group"] = tf.group_counts;
        out << j.dump() << '\n';
    }
}

inline GroundTruth read_truth_jsonl(std::istream& in, double frame_rate = 10.0) {
    GroundTruth gt;
    gt.frame_rate = frame_rate;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        TruthFrame tf;
        tf.frame = j.at("frame").get<int>();
        for (const auto& pj : j.at("persons")) {
            TruthPerson p;
            p.id = pj.at("id").get<int>();
            p.x = pj.at("x").get<double>();
            p.y = pj.at("y").get<double>();
            tf.persons.push_back(p);
        }
        tf.group_counts = j.at("true_count_per_group").get<std::vector<int>>();
        gt.frames.push_back(std::move(tf));
    }
    // Recover velocities for downstream consumers.
    const double dt = 1.0 / frame_rate;
    for (size_t f = 1; f < gt.frames.size(); ++f) {
        auto& cur = gt.frames[f].persons;
        const auto& prev = gt.frames[f - 1].persons;
        for (size_t p = 0; p < cur.size() && p < prev.size(); ++p) {
            cur[p].vx = (cur[p].x - prev[p].x) / dt;
            cur[p].vy = (cur[p].y - prev[p].y) / dt;
        }
    }
    if (gt.frames.size() > 1)
        for (size_t p = 0; p < gt.frames[0].persons.size(); ++p) {
            gt.frames[0].persons[p].vx = gt.frames[1].persons[p].vx;
            gt.frames[0].persons[p].vy = gt.frames[1].persons[p].vy;
        }
    return gt;
}

// Structured-text scenario config (JSON object, all fields optional except
// scenario_id; omitted fields take the defaults of the scenario table).
inline ScenarioConfig parse_scenario_config(const nlohmann::json& j) {
    if (!j.contains("scenario_id")) throw std::invalid_argument("scenario config: scenario_id missing");
    ScenarioConfig c = ScenarioConfig::scenario(j.at("scenario_id").get<int>());
    if (j.contains("n_people")) c.n_people = j.at("n_people").get<int>();
    if (j.contains("motion_kind"))
        c.motion_kind = motion_kind_from_string(j.at("motion_kind").get<std::string>());
    if (j.contains("duration_s")) c.duration_s = j.at("duration_s").get<double>();
    if (j.contains("room")) {
        c.room_w = j.at("room").at(0).get<double>();
        c.room_h = j.at("room").at(1).get<double>();
    }
    if (j.contains("group_spacing_m")) c.group_spacing_m = j.at("group_spacing_m").get<double>();
    if (j.contains("grouping_radius_m"))
        c.grouping_radius_m = j.at("grouping_radius_m").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fidelity"))
        c.fidelity = (j.at("fidelity").get<std::string>() == "signal") ? Fidelity::signal
                                                                       : Fidelity::point_cloud;
    c.validate();
    return c;
}

inline nlohmann::ordered_json scenario_config_json(const ScenarioConfig& c) {
    nlohmann::ordered_json j;
    j["scenario_id"] = c.scenario_id;
    j["n_people"] = c.n_people;
    j["motion_kind"] = to_string(c.motion_kind);
    j["duration_s"] = c.duration_s;
    j["room"] = {c.room_w, c.room_h};
    j["group_spacing_m"] = c.group_spacing_m;
    j["grouping_radius_m"] = c.grouping_radius_m;
    j["seed"] = c.seed;
    j["fidelity"] = (c.fidelity == Fidelity::signal) ? "signal" : "point_cloud";
    return j;
}

}  // namespace gtrk
