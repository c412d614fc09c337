#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtrk/datacube.hpp"

namespace gtrk {

// Binary cube file: 64-byte header (magic "GTRK", little-endian uint32/IEEE-754
// fields) followed by frames of interleaved complex32 (float32 I, float32 Q)
// samples in (sample, chirp, channel) order, channel fastest.
//
//   offset  size  field
//        0     4  magic "GTRK"
//        4     4  version (uint32, = 1)
//        8     4  samples_per_chirp
//       12     4  chirps_per_frame
//       16     4  n_virtual_channels
//       20     4  n_frames
//       24     8  carrier_frequency (float64, Hz)
//       32     8  sweep_bandwidth (float64, Hz)
//       40     8  chirp_repetition_interval (float64, s)
//       48     8  frame_rate (float64, Hz)
//       56     8  element_spacing (float64, wavelengths)

inline constexpr std::uint32_t kCubeFileVersion = 1;

class CubeWriter {
  public:
    CubeWriter(const std::string& path, const RadarParams& params) : params_(params) {
        params.validate();
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw std::runtime_error("CubeWriter: cannot open " + path);
        write_header(0);
    }

    void append(const RadarCube& cube) {
        if (!cube.shape_consistent()) throw std::invalid_argument("CubeWriter: cube shape mismatch");
        std::vector<float> buf(cube.data.size() * 2);
        for (size_t i = 0; i < cube.data.size(); ++i) {
            buf[2 * i] = static_cast<float>(cube.data[i].real());
            buf[2 * i + 1] = static_cast<float>(cube.data[i].imag());
        }
        out_.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(float)));
        ++n_frames_;
    }

    void finish() {
        out_.seekp(0);
        write_header(n_frames_);
        out_.close();
        if (!out_) throw std::runtime_error("CubeWriter: write failed");
    }

  private:
    void write_header(std::uint32_t n_frames) {
        char header[64] = {};
        std::memcpy(header, "GTRK", 4);
        auto put_u32 = [&](int off, std::uint32_t v) { std::memcpy(header + off, &v, 4); };
        auto put_f64 = [&](int off, double v) { std::memcpy(header + off, &v, 8); };
        put_u32(4, kCubeFileVersion);
        put_u32(8, static_cast<std::uint32_t>(params_.samples_per_chirp));
        put_u32(12, static_cast<std::uint32_t>(params_.chirps_per_frame));
        put_u32(16, static_cast<std::uint32_t>(params_.n_virtual_channels));
        put_u32(20, n_frames);
        put_f64(24, params_.carrier_frequency);
        put_f64(32, params_.sweep_bandwidth);
        put_f64(40, params_.chirp_repetition_interval);
        put_f64(48, params_.frame_rate);
        put_f64(56, params_.element_spacing);
        out_.write(header, sizeof(header));
    }

    std::ofstream out_;
    RadarParams params_;
    std::uint32_t n_frames_ = 0;
};

class CubeReader {
  public:
    explicit CubeReader(const std::string& path) {
        in_.open(path, std::ios::binary);
        if (!in_) throw std::runtime_error("CubeReader: cannot open " + path);
        char header[64];
        in_.read(header, sizeof(header));
        if (!in_ || std::memcmp(header, "GTRK", 4) != 0)
            throw std::runtime_error("CubeReader: bad magic in " + path);
        auto get_u32 = [&](int off) {
            std::uint32_t v;
            std::memcpy(&v, header + off, 4);
            return v;
        };
        auto get_f64 = [&](int off) {
            double v;
            std::memcpy(&v, header + off, 8);
            return v;
        };
        if (get_u32(4) != kCubeFileVersion)
            throw std::runtime_error("CubeReader: unsupported version");
        params_.samples_per_chirp = static_cast<int>(get_u32(8));
        params_.chirps_per_frame = static_cast<int>(get_u32(12));
        params_.n_virtual_channels = static_cast<int>(get_u32(16));
        n_frames_ = get_u32(20);
        params_.carrier_frequency = get_f64(24);
        params_.sweep_bandwidth = get_f64(32);
        params_.chirp_repetition_interval = get_f64(40);
        params_.frame_rate = get_f64(48);
        params_.element_spacing = get_f64(56);
        params_.validate();
    }

    const RadarParams& params() const { return params_; }
    int n_frames() const { return static_cast<int>(n_frames_); }

    RadarCube read_frame(int frame_index) {
        if (frame_index < 0 || frame_index >= n_frames())
            throw std::out_of_range("CubeReader: frame index out of range");
        RadarCube cube = RadarCube::zeros(params_, frame_index);
        const size_t n = cube.data.size();
        const std::streamoff off =
            64 + static_cast<std::streamoff>(frame_index) *
                     static_cast<std::streamoff>(n * 2 * sizeof(float));
        in_.seekg(off);
        std::vector<float> buf(n * 2);
        in_.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in_) throw std::runtime_error("CubeReader: truncated frame data");
        for (size_t i = 0; i < n; ++i) cube.data[i] = cplx(buf[2 * i], buf[2 * i + 1]);
        return cube;
    }

  private:
    std::ifstream in_;
    RadarParams params_;
    std::uint32_t n_frames_ = 0;
};

// Detections as JSON-lines, one per line:
//   {"frame":..,"range_m":..,"vel_mps":..,"az_deg":..,"snr_db":..}
inline void write_detections_jsonl(std::ostream& out, std::span<const Detection> dets) {
    for (const Detection& d : dets) {
        nlohmann::ordered_json j;
        j["frame"] = d.frame_index;
        j["range_m"] = d.range_m;
        j["vel_mps"] = d.radial_velocity;
        j["az_deg"] = d.azimuth_deg;
        j["snr_db"] = d.snr_db;
        out << j.dump() << '\n';
    }
}

inline std::vector<Detection> read_detections_jsonl(std::istream& in, const RadarParams& params) {
    std::vector<Detection> dets;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Detection d;
        d.frame_index = j.at("frame").get<int>();
        d.range_m = j.at("range_m").get<double>();
        d.radial_velocity = j.at("vel_mps").get<double>();
        d.azimuth_deg = j.at("az_deg").get<double>();
        d.snr_db = j.at("snr_db").get<double>();
        d.range_bin = static_cast<int>(std::lround(d.range_m / params.range_resolution()));
        d.doppler_bin = params.chirps_per_frame / 2 +
                        static_cast<int>(std::lround(d.radial_velocity / params.velocity_resolution()));
        dets.push_back(d);
    }
    return dets;
}

}  // namespace gtrk
