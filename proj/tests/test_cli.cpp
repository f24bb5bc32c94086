// SPDX-License-Identifier: Apache-2.0

#include "trajattn/io.hpp"
#include "trajattn/selftest.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace ta;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + TA_CLI_PATH + "\" " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("ta_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string operator/(const char* name) const { return (dir / name).string(); }
};

void write_pan_poses(const std::string& path, int frames, double step) {
    io::PoseFile p;
    p.intrinsics = geom::make_default_intrinsics(8, 8, 8);
    for (int f = 0; f < frames; ++f) {
        geom::Extrinsics e;
        e.translation = Eigen::Vector3d(-step * f, 0, 0);
        p.frames.push_back(e);
    }
    io::write_poses(path, p);
}

void write_curved_poses(const std::string& path, int frames, double wobble = 0.0) {
    io::PoseFile p;
    p.intrinsics = geom::make_default_intrinsics(8, 8, 8);
    for (int f = 0; f < frames; ++f) {
        geom::Extrinsics e;
        e.rotation = Eigen::AngleAxisd(0.05 * f, Eigen::Vector3d::UnitY()).toRotationMatrix();
        e.translation = Eigen::Vector3d(0.4 * f, 0.05 * f * f + wobble * (f % 2), 0.1 * f);
        p.frames.push_back(e);
    }
    io::write_poses(path, p);
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("extract-image produces a parsable trajectory file deterministically") {
    Workspace ws;
    geom::DepthMap depth(8, 8);
    for (auto& v : depth.values) v = 2.0;
    io::write_depth(ws / "d.tadm", depth);
    write_pan_poses(ws / "poses.json", 3, 0.1);

    const auto r1 = run_cli("extract-image " + (ws / "d.tadm") + " " + (ws / "poses.json") + " " +
                            (ws / "out.tatr"));
    REQUIRE(r1.code == 0);
    const auto j = nlohmann::json::parse(r1.out);
    CHECK(j["L"] == 64);
    CHECK(j["F"] == 3);
    CHECK(j["valid_fraction"].get<double>() > 0.0);

    const auto ts = io::read_trajectories(ws / "out.tatr");
    CHECK(ts.count == 64);
    CHECK(ts.frames == 3);

    const auto bytes1 = slurp(ws / "out.tatr");
    const auto r2 = run_cli("extract-image " + (ws / "d.tadm") + " " + (ws / "poses.json") + " " +
                            (ws / "out2.tatr"));
    REQUIRE(r2.code == 0);
    CHECK(r2.out == r1.out);
    CHECK(slurp(ws / "out2.tatr") == bytes1);
}

TEST_CASE("extract-video consumes tracks plus per-frame depth") {
    Workspace ws;
    const fs::path ddir = ws.dir / "depths";
    fs::create_directories(ddir);
    for (int f = 0; f < 2; ++f) {
        geom::DepthMap depth(8, 8);
        for (auto& v : depth.values) v = 2.0;
        io::write_depth((ddir / ("f" + std::to_string(f) + ".tadm")).string(), depth);
    }
    traj::PointTracks tracks(2, 3);
    tracks.set(0, 0, 2.0f, 2.0f);
    tracks.set(1, 0, 2.5f, 2.0f);
    tracks.set(0, 1, 4.0f, 4.0f);
    tracks.set(1, 1, 4.0f, 4.5f);
    tracks.set(0, 2, 6.0f, 6.0f);
    tracks.set(1, 2, 6.0f, 6.0f);
    io::write_tracks(ws / "tracks.tatk", tracks);
    write_pan_poses(ws / "poses.json", 2, 0.05);

    const auto r = run_cli("extract-video " + (ws / "tracks.tatk") + " " + ddir.string() + " " +
                           (ws / "poses.json") + " " + (ws / "out.tatr"));
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["L"] == 3);
    CHECK(j["F"] == 2);

    // Frame-count mismatch between tracks and depth files is an argument error.
    write_pan_poses(ws / "poses3.json", 3, 0.05);
    const auto bad = run_cli("extract-video " + (ws / "tracks.tatk") + " " + ddir.string() + " " +
                             (ws / "poses3.json") + " " + (ws / "out.tatr"));
    CHECK(bad.code == 2);
}

TEST_CASE("attend runs every mode and fused equals temporal plus branch") {
    Workspace ws;
    std::mt19937 rng(4242);
    const auto z = selftest::random_volume(rng, 3, 4, 4, 4);
    io::write_volume(ws / "z.tafv", z);
    io::write_weights(ws / "w.taaw", selftest::random_weights(rng, 4, 2));
    io::write_trajectories(ws / "t.tatr", selftest::dense_identity_trajectories(3, 4, 4));

    const std::string base = (ws / "z.tafv") + " " + (ws / "t.tatr") + " " + (ws / "w.taaw") + " ";
    for (const char* mode : {"temporal", "branch", "fused", "spacetime"}) {
        const auto r = run_cli("attend " + base + (ws / (std::string(mode) + ".tafv").c_str()) +
                               " --mode " + mode);
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["mode"] == mode);
        CHECK(j["F"] == 3);
        CHECK(j["C"] == 4);
    }

    const auto temporal = io::read_volume(ws / "temporal.tafv");
    const auto branch = io::read_volume(ws / "branch.tafv");
    const auto fused = io::read_volume(ws / "fused.tafv");
    for (size_t i = 0; i < fused.data.size(); ++i) {
        CHECK(fused.data[i] == temporal.data[i] + branch.data[i]);
    }

    SUBCASE("f64 precision is accepted and bogus precision is not") {
        CHECK(run_cli("attend " + base + (ws / "o64.tafv") + " --mode temporal --precision f64")
                  .code == 0);
        CHECK(run_cli("attend " + base + (ws / "obad.tafv") + " --precision f16").code == 2);
    }
    SUBCASE("unknown mode is an argument error") {
        CHECK(run_cli("attend " + base + (ws / "o.tafv") + " --mode sideways").code == 2);
    }
    SUBCASE("channel mismatch is an argument error") {
        io::write_weights(ws / "w2.taaw", selftest::random_weights(rng, 8, 2));
        CHECK(run_cli("attend " + (ws / "z.tafv") + " " + (ws / "t.tatr") + " " +
                      (ws / "w2.taaw") + " " + (ws / "o.tafv"))
                  .code == 2);
    }
    SUBCASE("truncated feature file is an I/O error") {
        auto bytes = slurp(ws / "z.tafv");
        bytes.resize(bytes.size() - 7);
        std::ofstream(ws / "zbad.tafv", std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK(run_cli("attend " + (ws / "zbad.tafv") + " " + (ws / "t.tatr") + " " +
                      (ws / "w.taaw") + " " + (ws / "o.tafv"))
                  .code == 3);
    }
}

TEST_CASE("metrics reports zero for identical pose files") {
    Workspace ws;
    write_curved_poses(ws / "gt.json", 6);
    write_curved_poses(ws / "est.json", 6);
    const auto r = run_cli("metrics " + (ws / "est.json") + " " + (ws / "gt.json"));
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["ate_m"].get<double>() < 1e-9);
    CHECK(j["rpe_trans_m"].get<double>() < 1e-9);
    CHECK(j["rpe_rot_deg"].get<double>() < 1e-5);

    SUBCASE("length mismatch is an argument error") {
        write_curved_poses(ws / "short.json", 4);
        CHECK(run_cli("metrics " + (ws / "short.json") + " " + (ws / "gt.json")).code == 2);
    }
    SUBCASE("rpe delta beyond the trajectory is an argument error") {
        CHECK(run_cli("metrics " + (ws / "est.json") + " " + (ws / "gt.json") +
                      " --rpe-delta 10")
                  .code == 2);
    }
    SUBCASE("missing file is an I/O error") {
        CHECK(run_cli("metrics " + (ws / "missing.json") + " " + (ws / "gt.json")).code == 3);
    }
}

TEST_CASE("config file settings apply and flags take precedence") {
    Workspace ws;
    write_curved_poses(ws / "gt.json", 6);
    write_curved_poses(ws / "est.json", 6);

    std::ofstream(ws / "bad.json") << R"({"precision": "f128"})";
    CHECK(run_cli("--config " + (ws / "bad.json") + " metrics " + (ws / "est.json") + " " +
                  (ws / "gt.json"))
              .code == 2);
    // A flag overrides the broken config value.
    CHECK(run_cli("--config " + (ws / "bad.json") + " --precision f32 metrics " +
                  (ws / "est.json") + " " + (ws / "gt.json"))
              .code == 0);
    // A config-supplied rpe_delta is honored.
    std::ofstream(ws / "delta.json") << R"({"rpe_delta": 10})";
    CHECK(run_cli("--config " + (ws / "delta.json") + " metrics " + (ws / "est.json") + " " +
                  (ws / "gt.json"))
              .code == 2);
    // Unreadable config is an I/O error.
    CHECK(run_cli("--config " + (ws / "missing.json") + " metrics " + (ws / "est.json") + " " +
                  (ws / "gt.json"))
              .code == 3);
}

TEST_CASE("argument parsing errors exit with code 2 and help with 0") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("extract-image").code == 2);  // missing required positionals
    CHECK(run_cli("--help").code == 0);
}
