// SPDX-License-Identifier: Apache-2.0
//
// `ta` - trajectory-attention toolkit CLI.
// Subcommands: extract-image, extract-video, attend, metrics, selftest.
// Exit codes: 0 success, 1 invariant failure, 2 invalid argument,
// 3 I/O or format error.

#include "trajattn/attn.hpp"
#include "trajattn/geom.hpp"
#include "trajattn/io.hpp"
#include "trajattn/metrics.hpp"
#include "trajattn/selftest.hpp"
#include "trajattn/trajgen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct RunConfig {
    int heads = 4;
    double latent_scale = 1.0;
    int rpe_delta = 1;
    std::string precision = "f32";
    double learning_rate = 1e-5;
    uint64_t seed = 0;

    void validate() const {
        if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
        if (!(latent_scale > 0.0)) throw std::invalid_argument("config: latent_scale must be > 0");
        if (rpe_delta < 1) throw std::invalid_argument("config: rpe_delta must be >= 1");
        if (precision != "f32" && precision != "f64") {
            throw std::invalid_argument("config: precision must be f32 or f64");
        }
        if (!(learning_rate > 0.0)) {
            throw std::invalid_argument("config: learning_rate must be > 0");
        }
    }
};

// Precedence: command-line flags > config file > defaults.
RunConfig resolve_config(const CLI::App& app, const std::string& config_path,
                         const RunConfig& flag_values) {
    RunConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ta::io::io_error("cannot open config '" + config_path + "'", 0);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ta::io::io_error("'" + config_path + "': " + e.what(), e.byte);
        }
        if (j.contains("heads")) cfg.heads = j["heads"].get<int>();
        if (j.contains("latent_scale")) cfg.latent_scale = j["latent_scale"].get<double>();
        if (j.contains("rpe_delta")) cfg.rpe_delta = j["rpe_delta"].get<int>();
        if (j.contains("precision")) cfg.precision = j["precision"].get<std::string>();
        if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    }
    if (app.count("--heads")) cfg.heads = flag_values.heads;
    if (app.count("--latent-scale")) cfg.latent_scale = flag_values.latent_scale;
    if (app.count("--rpe-delta")) cfg.rpe_delta = flag_values.rpe_delta;
    if (app.count("--precision")) cfg.precision = flag_values.precision;
    if (app.count("--learning-rate")) cfg.learning_rate = flag_values.learning_rate;
    if (app.count("--seed")) cfg.seed = flag_values.seed;
    cfg.validate();
    return cfg;
}

double valid_fraction(const ta::traj::TrajectorySet& ts) {
    if (ts.mask.empty()) return 1.0;
    size_t valid = 0;
    for (uint8_t m : ts.mask) valid += m ? 1 : 0;
    return static_cast<double>(valid) / static_cast<double>(ts.mask.size());
}

void print_summary(const ta::traj::TrajectorySet& ts) {
    nlohmann::json j{{"L", ts.count}, {"F", ts.frames}, {"valid_fraction", valid_fraction(ts)}};
    std::cout << j.dump() << "\n";
}

int cmd_extract_image(const std::string& depth_path, const std::string& pose_path,
                      const std::string& out_path) {
    const ta::geom::DepthMap depth = ta::io::read_depth(depth_path);
    const ta::io::PoseFile poses = ta::io::read_poses(pose_path);
    if (poses.frames.empty()) {
        throw std::invalid_argument("pose file '" + pose_path + "' has no frames");
    }
    const auto ts = ta::traj::extract_from_image(depth, poses.intrinsics, poses.frames);
    ta::io::write_trajectories(out_path, ts);
    print_summary(ts);
    return 0;
}

int cmd_extract_video(const std::string& tracks_path, const std::string& depth_dir,
                      const std::string& pose_path, const std::string& out_path) {
    const ta::traj::PointTracks tracks = ta::io::read_tracks(tracks_path);
    const ta::io::PoseFile poses = ta::io::read_poses(pose_path);

    std::vector<std::string> depth_files;
    for (const auto& entry : std::filesystem::directory_iterator(depth_dir)) {
        if (entry.path().extension() == ".tadm") depth_files.push_back(entry.path().string());
    }
    std::sort(depth_files.begin(), depth_files.end());
    if (static_cast<int>(depth_files.size()) != tracks.frames ||
        static_cast<int>(poses.frames.size()) != tracks.frames) {
        throw std::invalid_argument(
            "frame count mismatch: tracks F=" + std::to_string(tracks.frames) + ", depth files=" +
            std::to_string(depth_files.size()) + ", poses=" + std::to_string(poses.frames.size()));
    }
    std::vector<ta::geom::DepthMap> depths;
    depths.reserve(depth_files.size());
    for (const auto& p : depth_files) depths.push_back(ta::io::read_depth(p));

    const auto ts = ta::traj::extract_from_video(tracks, depths, poses.intrinsics, poses.frames);
    ta::io::write_trajectories(out_path, ts);
    print_summary(ts);
    return 0;
}

template <typename T>
ta::Volume<float> run_attend(const ta::Volume<float>& z_in, const ta::attn::Weights<float>& w_in,
                             const ta::traj::TrajectorySet& ts, const std::string& mode) {
    const ta::Volume<T> z = ta::convert_volume<float, T>(z_in);
    const ta::attn::Weights<T> w = ta::attn::convert_weights<float, T>(w_in);
    ta::Volume<T> out;
    if (mode == "temporal") {
        out = ta::attn::temporal_attention(z, w);
    } else if (mode == "branch") {
        out = ta::attn::trajectory_branch(z, ts, w);
    } else if (mode == "fused") {
        out = ta::attn::fuse(ta::attn::temporal_attention(z, w),
                             ta::attn::trajectory_branch(z, ts, w));
    } else if (mode == "spacetime") {
        out = ta::attn::full_spacetime_attention(z, w);
    } else {
        throw std::invalid_argument("unknown attend mode '" + mode + "'");
    }
    return ta::convert_volume<T, float>(out);
}

int cmd_attend(const std::string& features_path, const std::string& traj_path,
               const std::string& weights_path, const std::string& mode,
               const std::string& out_path, const RunConfig& cfg) {
    const ta::Volume<float> z = ta::io::read_volume(features_path);
    ta::attn::Weights<float> w = ta::io::read_weights(weights_path);
    if (w.channels != z.channels) {
        throw std::invalid_argument("weights channels " + std::to_string(w.channels) +
                                    " do not match volume channels " + std::to_string(z.channels));
    }

    ta::traj::TrajectorySet ts = ta::io::read_trajectories(traj_path);
    // Trajectory files live at pixel resolution; recover the pixel bounds from
    // the latent grid and the configured scale, then rescale.
    ts.width = static_cast<int>(std::lround(z.width / cfg.latent_scale));
    ts.height = static_cast<int>(std::lround(z.height / cfg.latent_scale));
    ts = ta::traj::rescale_to_latent(ts, cfg.latent_scale);
    if (ts.frames != z.frames) {
        throw std::invalid_argument("trajectory frames " + std::to_string(ts.frames) +
                                    " do not match volume frames " + std::to_string(z.frames));
    }

    const ta::Volume<float> out = (cfg.precision == "f64")
                                      ? run_attend<double>(z, w, ts, mode)
                                      : run_attend<float>(z, w, ts, mode);
    ta::io::write_volume(out_path, out);
    nlohmann::json j{{"mode", mode},
                     {"F", out.frames},
                     {"H", out.height},
                     {"W", out.width},
                     {"C", out.channels}};
    std::cout << j.dump() << "\n";
    return 0;
}

ta::metrics::PoseTrajectory load_trajectory(const std::string& path) {
    ta::metrics::PoseTrajectory t;
    t.poses = ta::io::read_poses(path).frames;
    return t;
}

int cmd_metrics(const std::string& est_path, const std::string& gt_path, int delta) {
    const auto est = load_trajectory(est_path);
    const auto gt = load_trajectory(gt_path);
    const double ate_m = ta::metrics::ate(est, gt);
    const auto r = ta::metrics::rpe(est, gt, delta);
    nlohmann::json j{{"ate_m", ate_m}, {"rpe_trans_m", r.trans_m}, {"rpe_rot_deg", r.rot_deg}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_selftest(uint64_t seed, const std::string& weights_path) {
    const auto results = ta::selftest::run_all(seed, weights_path);
    nlohmann::json checks = nlohmann::json::array();
    int failed = 0;
    for (const auto& r : results) {
        checks.push_back({{"name", r.name}, {"pass", r.pass}});
        if (!r.pass) ++failed;
        std::cerr << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    }
    nlohmann::json j{{"seed", seed},
                     {"checks", checks},
                     {"passed", static_cast<int>(results.size()) - failed},
                     {"failed", failed}};
    std::cout << j.dump() << "\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory-attention toolkit"};
    app.require_subcommand(1);

    RunConfig flags;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--heads", flags.heads, "attention head count");
    app.add_option("--latent-scale", flags.latent_scale, "pixel-to-latent coordinate scale");
    app.add_option("--rpe-delta", flags.rpe_delta, "RPE frame step");
    app.add_option("--precision", flags.precision, "compute precision: f32 or f64");
    app.add_option("--learning-rate", flags.learning_rate, "training learning rate (carried)");
    app.add_option("--seed", flags.seed, "RNG seed");

    std::string depth_path, pose_path, out_path, tracks_path, depth_dir;
    std::string features_path, traj_path, weights_path, mode = "fused";
    std::string est_path, gt_path, selftest_weights;

    auto* ext_img = app.add_subcommand("extract-image", "trajectories from one image's depth + poses");
    ext_img->add_option("depth", depth_path, "TADM depth file")->required();
    ext_img->add_option("poses", pose_path, "pose JSON file")->required();
    ext_img->add_option("out", out_path, "output TATR file")->required();

    auto* ext_vid = app.add_subcommand("extract-video", "trajectories from tracks + per-frame depth");
    ext_vid->add_option("tracks", tracks_path, "TATK track file")->required();
    ext_vid->add_option("depth_dir", depth_dir, "directory of per-frame TADM files")->required();
    ext_vid->add_option("poses", pose_path, "pose JSON file")->required();
    ext_vid->add_option("out", out_path, "output TATR file")->required();

    auto* attend = app.add_subcommand("attend", "run an attention operator over a feature volume");
    attend->add_option("features", features_path, "TAFV feature file")->required();
    attend->add_option("trajectories", traj_path, "TATR trajectory file")->required();
    attend->add_option("weights", weights_path, "TAAW weight file")->required();
    attend->add_option("out", out_path, "output TAFV file")->required();
    attend->add_option("--mode", mode, "temporal | branch | fused | spacetime");

    auto* metrics_cmd = app.add_subcommand("metrics", "pose-trajectory metrics (ATE / RPE)");
    metrics_cmd->add_option("est", est_path, "estimated pose JSON")->required();
    metrics_cmd->add_option("gt", gt_path, "ground-truth pose JSON")->required();

    auto* selftest_cmd = app.add_subcommand("selftest", "run the full invariant suite");
    selftest_cmd->add_option("--weights", selftest_weights, "optional TAAW file to validate");

    // Let global options (--precision, --seed, ...) appear after the subcommand.
    for (auto* sub : {ext_img, ext_vid, attend, metrics_cmd, selftest_cmd}) sub->fallthrough();

    try {
        app.parse(argc, argv);
        const RunConfig cfg = resolve_config(app, config_path, flags);

        if (ext_img->parsed()) return cmd_extract_image(depth_path, pose_path, out_path);
        if (ext_vid->parsed()) return cmd_extract_video(tracks_path, depth_dir, pose_path, out_path);
        if (attend->parsed())
            return cmd_attend(features_path, traj_path, weights_path, mode, out_path, cfg);
        if (metrics_cmd->parsed()) return cmd_metrics(est_path, gt_path, cfg.rpe_delta);
        if (selftest_cmd->parsed()) return cmd_selftest(cfg.seed, selftest_weights);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ta::io::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
