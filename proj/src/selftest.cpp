// SPDX-License-Identifier: Apache-2.0

#include "trajattn/selftest.hpp"

#include "trajattn/geom.hpp"
#include "trajattn/io.hpp"
#include "trajattn/metrics.hpp"
#include "trajattn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

namespace ta::selftest {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

double mixed_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

geom::Extrinsics random_pose(std::mt19937& rng, double rot_scale = 0.3,
                             double trans_scale = 0.5) {
    std::normal_distribution<double> n(0.0, 1.0);
    const Eigen::Vector3d axis =
        Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    std::uniform_real_distribution<double> u(-rot_scale, rot_scale);
    geom::Extrinsics e;
    e.rotation = Eigen::AngleAxisd(u(rng), axis).toRotationMatrix();
    e.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * trans_scale;
    return e;
}

}  // namespace

Volume<float> random_volume(std::mt19937& rng, int f, int h, int w, int c, float scale) {
    std::normal_distribution<float> n(0.0f, scale);
    Volume<float> v(f, h, w, c);
    for (auto& x : v.data) x = n(rng);
    return v;
}

Volume<double> random_volume_f64(std::mt19937& rng, int f, int h, int w, int c, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Volume<double> v(f, h, w, c);
    for (auto& x : v.data) x = n(rng);
    return v;
}

traj::TrajectorySet random_trajectories(std::mt19937& rng, int l, int f, int width, int height,
                                        double invalid_fraction) {
    std::uniform_real_distribution<float> ux(0.0f, std::nextafter(static_cast<float>(width), 0.0f));
    std::uniform_real_distribution<float> uy(0.0f, std::nextafter(static_cast<float>(height), 0.0f));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    traj::TrajectorySet ts(l, f);
    ts.width = width;
    ts.height = height;
    for (int i = 0; i < l; ++i) {
        for (int fr = 0; fr < f; ++fr) {
            float x = ux(rng);
            float y = uy(rng);
            // keep strictly below the bound after float rounding
            if (x >= width) x = std::nextafter(x, 0.0f);
            if (y >= height) y = std::nextafter(y, 0.0f);
            ts.set(i, fr, x, y);
            ts.set_valid(fr, i, coin(rng) >= invalid_fraction);
        }
    }
    return ts;
}

traj::TrajectorySet dense_identity_trajectories(int frames, int height, int width) {
    traj::TrajectorySet ts(height * width, frames);
    ts.width = width;
    ts.height = height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int f = 0; f < frames; ++f) {
                ts.set(y * width + x, f, static_cast<float>(x), static_cast<float>(y));
            }
        }
    }
    return ts;
}

attn::Weights<float> random_weights(std::mt19937& rng, int c, int heads, float scale) {
    std::normal_distribution<float> n(0.0f, scale);
    attn::Weights<float> w(c, heads);
    for (auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        for (auto& x : *m) x = n(rng);
    }
    return w;
}

attn::Weights<double> random_weights_f64(std::mt19937& rng, int c, int heads, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    attn::Weights<double> w(c, heads);
    for (auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        for (auto& x : *m) x = n(rng);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Oracle equivalence
// ---------------------------------------------------------------------------

CheckResult check_oracle_sample(std::mt19937& rng, int instances) {
    for (int it = 0; it < instances; ++it) {
        const Volume<float> z = random_volume(rng, 3, 5, 4, 3);
        const traj::TrajectorySet ts = random_trajectories(rng, 11, 3, 4, 5);
        const TrajFeatures<float> got = attn::sample_along_trajectories(z, ts);
        const TrajFeatures<float> want = synth::oracle::sample_reference(z, ts);
        if (got.data != want.data) {
            return {"oracle_sample", false, "instance " + std::to_string(it) + " differs"};
        }
    }
    return {"oracle_sample", true, std::to_string(instances) + " instances exact"};
}

CheckResult check_oracle_back_project(std::mt19937& rng, int instances) {
    double worst32 = 0.0, worst64 = 0.0;
    for (int it = 0; it < instances; ++it) {
        const int f = 2 + it % 3, h = 4, w = 5, c = 3, l = 13;
        Volume<float> z = random_volume(rng, f, h, w, c);
        const traj::TrajectorySet ts = random_trajectories(rng, l, f, w, h);
        const TrajFeatures<float> zt = attn::sample_along_trajectories(z, ts);
        const auto got = attn::back_project(zt, ts, h, w);
        const auto want = synth::oracle::back_project_reference(zt, ts, h, w);
        if (got.counts != want.counts) {
            return {"oracle_back_project", false, "count tables differ at instance " + std::to_string(it)};
        }
        for (size_t i = 0; i < got.values.data.size(); ++i) {
            worst32 = std::max(worst32, mixed_err(got.values.data[i], want.values.data[i]));
        }
        // 64-bit route
        Volume<double> zd = convert_volume<float, double>(z);
        const TrajFeatures<double> ztd = attn::sample_along_trajectories(zd, ts);
        const auto got_d = attn::back_project(ztd, ts, h, w);
        const auto want_d = synth::oracle::back_project_reference(ztd, ts, h, w);
        for (size_t i = 0; i < got_d.values.data.size(); ++i) {
            worst64 = std::max(worst64, mixed_err(got_d.values.data[i], want_d.values.data[i]));
        }
    }
    const bool pass = worst32 <= 1e-5 && worst64 <= 1e-10;
    return {"oracle_back_project", pass, "max err f32=" + fmt(worst32) + " f64=" + fmt(worst64)};
}

CheckResult check_oracle_frame_attention(std::mt19937& rng, int instances) {
    double worst32 = 0.0, worst64 = 0.0;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int it = 0; it < instances; ++it) {
        const int f = 2 + it % 3, n_tok = 4, c = 4, heads = (it % 2) ? 2 : 1;
        auto mk = [&](std::normal_distribution<float>& d) {
            TrajFeatures<float> t(f, n_tok, c);
            for (auto& x : t.data) x = d(rng);
            return t;
        };
        std::normal_distribution<float> dist(0.0f, 1.0f);
        TrajFeatures<float> q = mk(dist), k = mk(dist), v = mk(dist);
        std::vector<uint8_t> mask(static_cast<size_t>(f) * n_tok);
        for (auto& m : mask) m = coin(rng) < 0.2 ? 0 : 1;
        const uint8_t* mask_ptr = (it % 3 == 0) ? nullptr : mask.data();

        const auto got = attn::frame_attention(q, k, v, heads, mask_ptr);
        const auto want = synth::oracle::frame_attention_reference(q, k, v, heads, mask_ptr);
        for (size_t i = 0; i < got.data.size(); ++i) {
            worst32 = std::max(worst32, mixed_err(got.data[i], want.data[i]));
        }

        auto to64 = [](const TrajFeatures<float>& t) {
            TrajFeatures<double> d(t.frames, t.count, t.channels);
            for (size_t i = 0; i < t.data.size(); ++i) d.data[i] = t.data[i];
            return d;
        };
        const auto got_d = attn::frame_attention(to64(q), to64(k), to64(v), heads, mask_ptr);
        const auto want_d =
            synth::oracle::frame_attention_reference(to64(q), to64(k), to64(v), heads, mask_ptr);
        for (size_t i = 0; i < got_d.data.size(); ++i) {
            worst64 = std::max(worst64, mixed_err(got_d.data[i], want_d.data[i]));
        }
    }
    const bool pass = worst32 <= 1e-5 && worst64 <= 1e-10;
    return {"oracle_frame_attention", pass,
            "max err f32=" + fmt(worst32) + " f64=" + fmt(worst64)};
}

CheckResult check_oracle_pixel_translation(std::mt19937& rng, int instances) {
    double worst = 0.0;
    std::uniform_real_distribution<double> ud(1.0, 3.0);
    for (int it = 0; it < instances; ++it) {
        geom::DepthMap depth(5, 6);
        for (auto& d : depth.values) d = ud(rng);
        const geom::Intrinsics k = geom::make_default_intrinsics(6, 5, 4.0);
        const geom::Extrinsics e1 = random_pose(rng, 0.2, 0.2);
        const geom::Extrinsics e2 = random_pose(rng, 0.2, 0.2);
        const auto got = geom::pixel_translation(depth, k, e1, e2);
        const auto want = synth::oracle::pixel_translation_reference(depth, k, e1, e2);
        if (got.valid != want.valid) {
            return {"oracle_pixel_translation", false,
                    "validity flags differ at instance " + std::to_string(it)};
        }
        for (size_t i = 0; i < got.vectors.size(); ++i) {
            if (got.valid[i / 2] == 0) continue;
            worst = std::max(worst, mixed_err(got.vectors[i], want.vectors[i]));
        }
    }
    const bool pass = worst <= 1e-10;
    return {"oracle_pixel_translation", pass, "max err=" + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Structural invariants
// ---------------------------------------------------------------------------

CheckResult check_zero_init_identity(std::mt19937& rng, int instances) {
    for (int it = 0; it < instances; ++it) {
        const int f = 2 + it % 3, h = 3 + it % 2, w = 4, c = 8;
        const Volume<float> z = random_volume(rng, f, h, w, c);
        const traj::TrajectorySet ts = random_trajectories(rng, 7 + it % 5, f, w, h);
        const attn::Weights<float> w_t = random_weights(rng, c, (it % 2) ? 2 : 4);
        const attn::Weights<float> w_b = attn::init_branch_from_temporal(w_t);
        const Volume<float> temporal = attn::temporal_attention(z, w_t);
        const Volume<float> branch = attn::trajectory_branch(z, ts, w_b);
        const Volume<float> fused = attn::fuse(temporal, branch);
        if (fused.data != temporal.data) {
            return {"zero_init_identity", false, "instance " + std::to_string(it) + " not bit-exact"};
        }
    }
    return {"zero_init_identity", true, std::to_string(instances) + " instances bit-exact"};
}

CheckResult check_adjoint_round_trip(std::mt19937& rng, int instances) {
    std::uniform_int_distribution<int> df(1, 4), dh(2, 8), dw(2, 8), dc(1, 8);
    for (int it = 0; it < instances; ++it) {
        const int f = df(rng), h = dh(rng), w = dw(rng), c = dc(rng);
        const Volume<float> z = random_volume(rng, f, h, w, c);
        const traj::TrajectorySet ts = dense_identity_trajectories(f, h, w);
        const auto bp = attn::back_project(attn::sample_along_trajectories(z, ts), ts, h, w);
        if (bp.values.data != z.data) {
            return {"adjoint_round_trip", false, "values not identical at instance " + std::to_string(it)};
        }
        if (std::any_of(bp.counts.begin(), bp.counts.end(), [](int u) { return u != 1; })) {
            return {"adjoint_round_trip", false, "counts not all 1 at instance " + std::to_string(it)};
        }
    }
    return {"adjoint_round_trip", true, std::to_string(instances) + " instances exact"};
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

namespace {

constexpr double kFdStep = 1e-3;
constexpr double kGradTol = 1e-6;

// Central finite differences of `loss` w.r.t. `x`, compared elementwise with
// the analytic gradient under a mixed absolute/relative error.
double fd_compare(std::vector<double>& x, const std::function<double()>& loss,
                  const std::vector<double>& analytic) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + kFdStep;
        const double up = loss();
        x[i] = orig - kFdStep;
        const double dn = loss();
        x[i] = orig;
        const double fd = (up - dn) / (2.0 * kFdStep);
        worst = std::max(worst, std::abs(analytic[i] - fd) /
                                    std::max({1.0, std::abs(analytic[i]), std::abs(fd)}));
    }
    return worst;
}

double dot_loss(const std::vector<double>& a, const std::vector<double>& g) {
    return std::inner_product(a.begin(), a.end(), g.begin(), 0.0);
}

}  // namespace

CheckResult check_gradients(std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 0.7);
    const int f = 2, h = 3, w = 3, c = 4;
    std::ostringstream detail;
    double worst = 0.0;
    auto note = [&](const char* name, double err) {
        worst = std::max(worst, err);
        detail << name << "=" << fmt(err) << " ";
    };

    // linear_project w.r.t. input and weights
    {
        const size_t rows = 6;
        std::vector<double> x(rows * c), wmat(static_cast<size_t>(c) * c), g(rows * c);
        for (auto& v : x) v = n(rng);
        for (auto& v : wmat) v = n(rng);
        for (auto& v : g) v = n(rng);
        auto loss = [&]() {
            std::vector<double> y(rows * c);
            attn::project_rows(x.data(), y.data(), rows, c, wmat);
            return dot_loss(y, g);
        };
        std::vector<double> gx(rows * c), gw;
        attn::project_rows_backward(x.data(), g.data(), gx.data(), gw, rows, c, wmat);
        note("linear_project_x", fd_compare(x, loss, gx));
        note("linear_project_w", fd_compare(wmat, loss, gw));
    }

    // frame_attention w.r.t. q, k, v (with a key mask in play)
    {
        const int n_tok = 3, heads = 2;
        TrajFeatures<double> q(f, n_tok, c), k(f, n_tok, c), v(f, n_tok, c), g(f, n_tok, c);
        for (auto* t : {&q, &k, &v, &g}) {
            for (auto& val : t->data) val = n(rng);
        }
        std::vector<uint8_t> mask(static_cast<size_t>(f) * n_tok, 1);
        mask[1] = 0;  // one masked entry
        auto loss = [&]() {
            const auto out = attn::frame_attention(q, k, v, heads, mask.data());
            return dot_loss(out.data, g.data);
        };
        attn::AttnCache<double> cache;
        attn::frame_attention(q, k, v, heads, mask.data(), &cache);
        TrajFeatures<double> gq, gk, gv;
        attn::frame_attention_backward(q, k, v, heads, mask.data(), cache, g, gq, gk, gv);
        note("frame_attention_q", fd_compare(q.data, loss, gq.data));
        note("frame_attention_k", fd_compare(k.data, loss, gk.data));
        note("frame_attention_v", fd_compare(v.data, loss, gv.data));
    }

    // sample_along_trajectories w.r.t. z (scatter-add adjoint)
    {
        Volume<double> z = random_volume_f64(rng, f, h, w, c);
        const traj::TrajectorySet ts = random_trajectories(rng, 6, f, w, h);
        TrajFeatures<double> g(f, 6, c);
        for (auto& v : g.data) v = n(rng);
        auto loss = [&]() {
            const auto out = attn::sample_along_trajectories(z, ts);
            return dot_loss(out.data, g.data);
        };
        const Volume<double> gz = attn::sample_along_trajectories_backward(g, ts, h, w);
        note("sample", fd_compare(z.data, loss, gz.data));
    }

    // back_project w.r.t. trajectory features (gather-divide adjoint)
    {
        const traj::TrajectorySet ts = random_trajectories(rng, 6, f, w, h);
        TrajFeatures<double> zt(f, 6, c);
        for (auto& v : zt.data) v = n(rng);
        Volume<double> g = random_volume_f64(rng, f, h, w, c);
        auto loss = [&]() {
            const auto out = attn::back_project(zt, ts, h, w);
            return dot_loss(out.values.data, g.data);
        };
        const auto counts = attn::back_project(zt, ts, h, w).counts;
        const TrajFeatures<double> gzt = attn::back_project_backward(g, ts, counts);
        note("back_project", fd_compare(zt.data, loss, gzt.data));
    }

    // fuse and denoising_loss
    {
        Volume<double> a = random_volume_f64(rng, f, h, w, c);
        Volume<double> b = random_volume_f64(rng, f, h, w, c);
        Volume<double> g = random_volume_f64(rng, f, h, w, c);
        auto loss_a = [&]() { return dot_loss(attn::fuse(a, b).data, g.data); };
        note("fuse", fd_compare(a.data, loss_a, g.data));

        attn::DenoisingBatch<double> batch;
        batch.x0 = random_volume_f64(rng, f, h, w, c);
        batch.noise = random_volume_f64(rng, f, h, w, c);
        Volume<double> pred = random_volume_f64(rng, f, h, w, c);
        auto loss_m = [&]() { return attn::denoising_loss(pred, batch); };
        const Volume<double> gp = attn::denoising_loss_backward(pred, batch);
        note("denoising_loss", fd_compare(pred.data, loss_m, gp.data));
    }

    return {"gradient_checks", worst <= kGradTol, detail.str() + "tol=" + fmt(kGradTol)};
}

// ---------------------------------------------------------------------------
// Attention contracts and diagnostics
// ---------------------------------------------------------------------------

CheckResult check_attention_contracts(std::mt19937& rng) {
    const int f = 4, h = 3, w = 3, c = 8, heads = 4;
    const Volume<float> z = random_volume(rng, f, h, w, c);
    const attn::Weights<float> wt = random_weights(rng, c, heads);

    // Softmax rows sum to 1 and weights lie in [0, 1].
    attn::AttnCache<float> cache;
    attn::temporal_attention(z, wt, &cache);
    for (int n = 0; n < cache.tokens; ++n) {
        for (int hh = 0; hh < cache.heads; ++hh) {
            for (int i = 0; i < cache.frames; ++i) {
                double sum = 0.0;
                for (int j = 0; j < cache.frames; ++j) {
                    const float p = cache.probs[((static_cast<size_t>(n) * heads + hh) * f + i) * f + j];
                    if (p < 0.0f || p > 1.0f) {
                        return {"attention_contracts", false, "weight outside [0,1]"};
                    }
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-5) {
                    return {"attention_contracts", false, "softmax row sum " + fmt(sum)};
                }
            }
        }
    }

    // Masked keys are non-influential: perturb a masked trajectory-frame.
    traj::TrajectorySet ts = random_trajectories(rng, 6, f, w, h, 0.0);
    ts.set_valid(2, 3, false);
    // Perturbing the masked trajectory-frame's features must not change the
    // branch output anywhere (masked keys are -inf'd, masked rows never
    // scatter back).
    const attn::Weights<float> wb = random_weights(rng, c, heads);
    const TrajFeatures<float> base = attn::sample_along_trajectories(z, ts);
    auto branch_from = [&](const TrajFeatures<float>& zt) {
        const auto q = attn::linear_project(zt, wb.wq);
        const auto k = attn::linear_project(zt, wb.wk);
        const auto v = attn::linear_project(zt, wb.wv);
        const auto o = attn::frame_attention(q, k, v, heads, ts.mask.data());
        return attn::back_project(attn::linear_project(o, wb.wo), ts, h, w).values;
    };
    const auto out_base = branch_from(base);
    TrajFeatures<float> perturbed = base;
    for (int ch = 0; ch < c; ++ch) perturbed.at(2, 3, ch) += 10.0f;
    const auto out_pert = branch_from(perturbed);
    if (out_base.data != out_pert.data) {
        return {"attention_contracts", false, "masked key influenced the output"};
    }

    // attention_stats analytic fixtures.
    const int sf = 4;
    std::vector<float> uniform(static_cast<size_t>(sf) * sf, 1.0f / sf);
    const auto stats_u = attn::attention_stats(uniform, sf, 1);
    for (double p : stats_u.offset_profile) {
        if (std::abs(p - 1.0 / sf) > 1e-12) {
            return {"attention_contracts", false, "uniform profile wrong"};
        }
    }
    std::vector<float> diag(static_cast<size_t>(sf) * sf, 0.0f);
    for (int i = 0; i < sf; ++i) diag[static_cast<size_t>(i) * sf + i] = 1.0f;
    const auto stats_d = attn::attention_stats(diag, sf, 1);
    if (std::abs(stats_d.offset_profile[0] - 1.0) > 1e-12 ||
        std::abs(stats_d.offset_profile[1]) > 1e-12) {
        return {"attention_contracts", false, "diagonal profile wrong"};
    }
    return {"attention_contracts", true, "rows normalized, masked keys inert, stats exact"};
}

// ---------------------------------------------------------------------------
// Geometry analytics
// ---------------------------------------------------------------------------

CheckResult check_geometry_analytics() {
    const int h = 16, w = 16;
    const double d = 2.0;
    geom::DepthMap depth(h, w);
    for (auto& v : depth.values) v = d;
    const geom::Intrinsics k = geom::make_default_intrinsics(w, h, 260.0);

    // Lateral: camera center moves +x by 0.5 m -> every pixel shifts
    // horizontally by fx * |tx| / d = 65 px.
    geom::Extrinsics lateral;
    lateral.translation = Eigen::Vector3d(-0.5, 0, 0);
    const auto field = geom::pixel_translation(depth, k, geom::Extrinsics::identity(), lateral);
    double worst = 0.0;
    const double expect = 260.0 * 0.5 / d;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            worst = std::max(worst, std::abs(std::abs(field.dx(y, x)) - expect));
            worst = std::max(worst, std::abs(field.dy(y, x)));
            if (field.dx(y, x) * field.dx(0, 0) < 0.0) {
                return {"geometry_analytics", false, "lateral displacement sign flips"};
            }
        }
    }

    // Forward: camera advances tz -> offset r maps to r * d / (d - tz).
    const double tz = 0.5;
    geom::Extrinsics forward;
    forward.translation = Eigen::Vector3d(0, 0, -tz);
    const auto zoom = geom::pixel_translation(depth, k, geom::Extrinsics::identity(), forward);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double rx = x - k.cx;
            const double ry = y - k.cy;
            const double gx = x + zoom.dx(y, x) - k.cx;
            const double gy = y + zoom.dy(y, x) - k.cy;
            worst = std::max(worst, std::abs(gx - rx * d / (d - tz)));
            worst = std::max(worst, std::abs(gy - ry * d / (d - tz)));
        }
    }
    return {"geometry_analytics", worst <= 1e-4, "max err=" + fmt(worst) + " px"};
}

// ---------------------------------------------------------------------------
// Trajectory constancy
// ---------------------------------------------------------------------------

CheckResult check_trajectory_constancy_suite(uint32_t seed) {
    const int size = 64, frames = 12, channels = 3;
    const struct {
        synth::PathKind kind;
        double magnitude;
        const char* name;
    } paths[] = {
        {synth::PathKind::Pan, 0.25, "pan"},
        {synth::PathKind::ZoomIn, 0.25, "zoom_in"},
        {synth::PathKind::ZoomOut, 0.25, "zoom_out"},
        {synth::PathKind::Orbit, 0.10, "orbit"},
        {synth::PathKind::Roll, 0.12, "roll"},
    };
    std::ostringstream detail;
    // A coarse knot lattice keeps the radius-2 quantization bound small
    // relative to the texture's full contrast, which the shuffled negative
    // control must exceed tenfold.
    synth::SceneParams params;
    params.texture_lattice = 64;
    for (size_t p = 0; p < std::size(paths); ++p) {
        const synth::SyntheticScene scene =
            synth::make_scene(seed + static_cast<uint32_t>(p), size, size, channels, params);
        const auto poses = synth::camera_path(paths[p].kind, frames, paths[p].magnitude);
        const Volume<float> rendered = synth::render_sequence(scene, poses);
        const traj::TrajectorySet ts =
            traj::extract_from_image(scene.depth, scene.intrinsics, poses);
        const double bound = synth::texture_quantization_bound(scene, 2);
        const double dev = synth::check_trajectory_constancy(rendered, ts);

        // Negative control: shuffle per-frame coordinates across trajectories.
        traj::TrajectorySet shuffled = ts;
        std::mt19937 rng(seed * 7919u + static_cast<uint32_t>(p));
        std::vector<int> perm(ts.count);
        for (int f = 1; f < frames; ++f) {
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            for (int l = 0; l < ts.count; ++l) {
                shuffled.set(l, f, ts.x(perm[l], f), ts.y(perm[l], f));
                shuffled.set_valid(f, l, ts.valid(f, perm[l]));
            }
        }
        const double dev_neg = synth::check_trajectory_constancy(rendered, shuffled);

        detail << paths[p].name << ": dev=" << fmt(dev) << " bound=" << fmt(bound)
               << " neg=" << fmt(dev_neg) << "; ";
        if (dev > bound) {
            return {"trajectory_constancy", false,
                    std::string(paths[p].name) + " deviation " + fmt(dev) + " exceeds bound " + fmt(bound)};
        }
        if (dev_neg < 10.0 * bound) {
            return {"trajectory_constancy", false,
                    std::string(paths[p].name) + " negative control " + fmt(dev_neg) +
                        " below 10x bound " + fmt(10.0 * bound)};
        }
    }
    return {"trajectory_constancy", true, detail.str()};
}

// ---------------------------------------------------------------------------
// Metric fixtures
// ---------------------------------------------------------------------------

CheckResult check_metric_fixtures(std::mt19937& rng) {
    metrics::PoseTrajectory gt;
    for (int i = 0; i < 10; ++i) {
        geom::Extrinsics e = random_pose(rng, 0.4, 1.0);
        e.translation += Eigen::Vector3d(0.5 * i, 0.1 * i * i, 0.0);  // non-collinear path
        gt.poses.push_back(e);
    }

    if (metrics::ate(gt, gt) > 1e-12) {
        return {"metric_fixtures", false, "ate(x,x) != 0"};
    }
    const auto self_rpe = metrics::rpe(gt, gt);
    // rot_deg tolerance: acos near 1 amplifies round-off to ~sqrt(eps) rad.
    if (self_rpe.trans_m > 1e-12 || self_rpe.rot_deg > 1e-5) {
        return {"metric_fixtures", false, "rpe(x,x) != 0"};
    }

    // Global rigid transform leaves ATE at zero after alignment.
    const geom::Extrinsics g = random_pose(rng, 0.8, 2.0);
    metrics::PoseTrajectory moved;
    for (const auto& e : gt.poses) moved.poses.push_back(geom::compose(g, e));
    const double ate_moved = metrics::ate(moved, gt);
    if (ate_moved > 1e-9) {
        return {"metric_fixtures", false, "global transform ATE " + fmt(ate_moved)};
    }

    // Constant 1 degree/step rotation drift -> RPE-rot exactly 1.
    const Eigen::Matrix3d drift =
        Eigen::AngleAxisd(M_PI / 180.0, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    metrics::PoseTrajectory est;
    est.poses.push_back(gt.poses[0]);
    for (size_t i = 1; i < gt.poses.size(); ++i) {
        const geom::Extrinsics step = geom::compose(gt.poses[i - 1].inverse(), gt.poses[i]);
        geom::Extrinsics d;
        d.rotation = drift;
        est.poses.push_back(geom::compose(est.poses.back(), geom::compose(step, d)));
    }
    const auto drift_rpe = metrics::rpe(est, gt);
    if (std::abs(drift_rpe.rot_deg - 1.0) > 1e-6) {
        return {"metric_fixtures", false, "drift RPE-rot " + fmt(drift_rpe.rot_deg)};
    }

    // rigid_align recovers a known transform.
    const auto align = metrics::rigid_align(moved, gt, false);
    double resid = 0.0;
    for (size_t i = 0; i < gt.poses.size(); ++i) {
        resid = std::max(resid, (align.transform.rotation * moved.poses[i].translation +
                                 align.transform.translation - gt.poses[i].translation)
                                    .norm());
    }
    if (resid > 1e-9) {
        return {"metric_fixtures", false, "rigid_align residual " + fmt(resid)};
    }

    // Scale recovery.
    metrics::PoseTrajectory doubled;
    for (const auto& e : gt.poses) {
        geom::Extrinsics s = e;
        s.translation *= 2.0;
        doubled.poses.push_back(s);
    }
    const auto scaled = metrics::rigid_align(doubled, gt, true);
    if (std::abs(scaled.scale - 0.5) > 1e-9) {
        return {"metric_fixtures", false, "scale recovery " + fmt(scaled.scale)};
    }

    return {"metric_fixtures", true, "ate/rpe/align fixtures within tolerance"};
}

// ---------------------------------------------------------------------------
// Formats
// ---------------------------------------------------------------------------

CheckResult check_format_round_trips(std::mt19937& rng) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ta_selftest";
    fs::create_directories(dir);
    auto path = [&](const char* name) { return (dir / name).string(); };

    try {
        geom::DepthMap d(5, 7);
        std::uniform_real_distribution<double> ud(0.5, 4.0);
        for (auto& v : d.values) v = static_cast<float>(ud(rng));
        io::write_depth(path("d.tadm"), d);
        const auto d2 = io::read_depth(path("d.tadm"));
        // depth values pass through f32 on disk
        for (size_t i = 0; i < d.values.size(); ++i) {
            if (static_cast<float>(d.values[i]) != static_cast<float>(d2.values[i])) {
                return {"format_round_trips", false, "depth mismatch"};
            }
        }

        const traj::TrajectorySet ts = random_trajectories(rng, 9, 4, 8, 8);
        io::write_trajectories(path("t.tatr"), ts);
        const auto ts2 = io::read_trajectories(path("t.tatr"));
        if (ts2.coords != ts.coords || ts2.mask != ts.mask) {
            return {"format_round_trips", false, "trajectory mismatch"};
        }

        traj::PointTracks tk(3, 5);
        std::uniform_real_distribution<float> uf(0.0f, 7.0f);
        for (auto& v : tk.positions) v = uf(rng);
        tk.visible[4] = 0;
        io::write_tracks(path("k.tatk"), tk);
        const auto tk2 = io::read_tracks(path("k.tatk"));
        if (tk2.positions != tk.positions || tk2.visible != tk.visible) {
            return {"format_round_trips", false, "track mismatch"};
        }

        const Volume<float> v = random_volume(rng, 2, 3, 4, 5);
        io::write_volume(path("v.tafv"), v);
        if (io::read_volume(path("v.tafv")).data != v.data) {
            return {"format_round_trips", false, "volume mismatch"};
        }

        const attn::Weights<float> w = random_weights(rng, 8, 2);
        io::write_weights(path("w.taaw"), w);
        const auto w2 = io::read_weights(path("w.taaw"));
        if (w2.wq != w.wq || w2.wk != w.wk || w2.wv != w.wv || w2.wo != w.wo) {
            return {"format_round_trips", false, "weights mismatch"};
        }

        io::PoseFile p;
        p.intrinsics = geom::make_default_intrinsics(640, 360, 260);
        for (int i = 0; i < 3; ++i) p.frames.push_back(random_pose(rng));
        io::write_poses(path("p.json"), p);
        const auto p2 = io::read_poses(path("p.json"));
        for (size_t i = 0; i < p.frames.size(); ++i) {
            if ((p2.frames[i].matrix() - p.frames[i].matrix()).cwiseAbs().maxCoeff() > 1e-15) {
                return {"format_round_trips", false, "pose mismatch"};
            }
        }
    } catch (const std::exception& e) {
        return {"format_round_trips", false, e.what()};
    }
    return {"format_round_trips", true, "all formats round-trip"};
}

CheckResult check_weights_file(const std::string& path) {
    try {
        const attn::Weights<float> w = io::read_weights(path);
        for (const auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
            for (float v : *m) {
                if (!std::isfinite(v)) {
                    return {"weights_file", false, "non-finite weight value in '" + path + "'"};
                }
            }
        }
        return {"weights_file", true, "weights valid (C=" + std::to_string(w.channels) +
                                          ", heads=" + std::to_string(w.heads) + ")"};
    } catch (const std::exception& e) {
        return {"weights_file", false, e.what()};
    }
}

std::vector<CheckResult> run_all(uint64_t seed, const std::string& weights_path) {
    std::mt19937 rng(static_cast<uint32_t>(seed));
    std::vector<CheckResult> results;
    results.push_back(check_oracle_sample(rng));
    results.push_back(check_oracle_back_project(rng));
    results.push_back(check_oracle_frame_attention(rng));
    results.push_back(check_oracle_pixel_translation(rng));
    results.push_back(check_zero_init_identity(rng));
    results.push_back(check_adjoint_round_trip(rng));
    results.push_back(check_gradients(rng));
    results.push_back(check_attention_contracts(rng));
    results.push_back(check_geometry_analytics());
    results.push_back(check_trajectory_constancy_suite(static_cast<uint32_t>(seed)));
    results.push_back(check_metric_fixtures(rng));
    results.push_back(check_format_round_trips(rng));
    if (!weights_path.empty()) {
        results.push_back(check_weights_file(weights_path));
    }
    return results;
}

}  // namespace ta::selftest
