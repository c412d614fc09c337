// Minimal library walkthrough: simulate a two-person following scenario at
// point-cloud fidelity, cluster and track it, and print per-frame OSPA.

#include <cstdio>

#include "gtrk/cluster.hpp"
#include "gtrk/metrics.hpp"
#include "gtrk/sim.hpp"
#include "gtrk/track.hpp"

int main() {
    using namespace gtrk;

    ScenarioConfig scfg = ScenarioConfig::scenario(4);  // 2 targets following
    scfg.duration_s = 30.0;
    scfg.seed = 2024;
    const GroundTruth gt = gen_trajectories(scfg);

    PointNoise noise;
    noise.miss_prob = 0.05;
    Tracker tracker;
    OspaConfig ospa_cfg;

    double ospa_sum = 0.0;
    for (const TruthFrame& tf : gt.frames) {
        const auto dets = gen_point_cloud(tf, noise, scfg.seed);
        const ClusterResult clusters = cluster_detections(dets, 0.9, 3);
        const auto snapshot = tracker.step(clusters.clusters, 0.1);

        std::vector<XY> truth, tracks;
        int n_conf = 0;
        for (const TruthPerson& p : tf.persons) truth.push_back({p.x, p.y});
        for (const TrackState& t : snapshot)
            if (t.status == TrackStatus::confirmed) {
                tracks.push_back({t.px(), t.py()});
                ++n_conf;
            }
        const OspaFrame of = ospa_frame(truth, tracks, n_conf, 0, ospa_cfg);
        ospa_sum += of.ospa;
        if (tf.frame % 50 == 0)
            std::printf("frame %3d: %zu detections, %zu clusters, %d confirmed, ospa %.3f\n",
                        tf.frame, dets.size(), clusters.clusters.size(), n_conf, of.ospa);
    }
    std::printf("mean OSPA over %zu frames: %.3f\n", gt.frames.size(),
                ospa_sum / gt.frames.size());
    return 0;
}
