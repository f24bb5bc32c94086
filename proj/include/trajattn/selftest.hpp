// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/attn.hpp"
#include "trajattn/tensor.hpp"
#include "trajattn/trajgen.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ta::selftest {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Deterministic random instance generators shared by selftest and tests.
Volume<float> random_volume(std::mt19937& rng, int f, int h, int w, int c, float scale = 1.0f);
Volume<double> random_volume_f64(std::mt19937& rng, int f, int h, int w, int c,
                                 double scale = 1.0);
traj::TrajectorySet random_trajectories(std::mt19937& rng, int l, int f, int width, int height,
                                        double invalid_fraction = 0.2);
traj::TrajectorySet dense_identity_trajectories(int frames, int height, int width);
attn::Weights<float> random_weights(std::mt19937& rng, int c, int heads, float scale = 0.5f);
attn::Weights<double> random_weights_f64(std::mt19937& rng, int c, int heads,
                                         double scale = 0.5);

// Individual invariant checks. Each consumes randomness from `rng`.
CheckResult check_oracle_sample(std::mt19937& rng, int instances = 100);
CheckResult check_oracle_back_project(std::mt19937& rng, int instances = 100);
CheckResult check_oracle_frame_attention(std::mt19937& rng, int instances = 100);
CheckResult check_oracle_pixel_translation(std::mt19937& rng, int instances = 100);
CheckResult check_zero_init_identity(std::mt19937& rng, int instances = 20);
CheckResult check_adjoint_round_trip(std::mt19937& rng, int instances = 20);
CheckResult check_gradients(std::mt19937& rng);
CheckResult check_attention_contracts(std::mt19937& rng);
CheckResult check_geometry_analytics();
CheckResult check_trajectory_constancy_suite(uint32_t seed);
CheckResult check_metric_fixtures(std::mt19937& rng);
CheckResult check_format_round_trips(std::mt19937& rng);
CheckResult check_weights_file(const std::string& path);

/// Full invariant suite; weights_path, when non-empty, adds a file check.
std::vector<CheckResult> run_all(uint64_t seed, const std::string& weights_path = "");

}  // namespace ta::selftest
