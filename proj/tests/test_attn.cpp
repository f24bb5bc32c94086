// SPDX-License-Identifier: Apache-2.0

#include "trajattn/attn.hpp"
#include "trajattn/selftest.hpp"
#include "trajattn/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace ta;

TEST_CASE("linear_project with identity and zero matrices") {
    Volume<float> z(2, 2, 2, 3);
    std::mt19937 rng(5);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (auto& v : z.data) v = n(rng);

    const auto id = attn::Weights<float>::identity_matrix(3);
    CHECK(attn::linear_project(z, id).data == z.data);

    const std::vector<float> zero(9, 0.0f);
    for (float v : attn::linear_project(z, zero).data) CHECK(v == 0.0f);

    std::vector<float> wrong(4, 0.0f);
    CHECK_THROWS_AS(attn::linear_project(z, wrong), std::invalid_argument);
}

TEST_CASE("linear_project matches a hand matrix-vector product") {
    // w = [[1, 2], [3, -1]], x = [5, 7] -> y = [19, 8]
    std::vector<double> w = {1, 2, 3, -1};
    std::vector<double> x = {5, 7};
    std::vector<double> y(2);
    attn::project_rows(x.data(), y.data(), 1, 2, w);
    CHECK(y[0] == doctest::Approx(19.0));
    CHECK(y[1] == doctest::Approx(8.0));
}

TEST_CASE("frame_attention over a single frame returns v") {
    TrajFeatures<float> q(1, 3, 4), k(1, 3, 4), v(1, 3, 4);
    std::mt19937 rng(9);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (auto* t : {&q, &k, &v}) {
        for (auto& x : t->data) x = n(rng);
    }
    const auto out = attn::frame_attention(q, k, v, 2);
    for (size_t i = 0; i < v.data.size(); ++i) {
        CHECK(out.data[i] == doctest::Approx(v.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("frame_attention two-frame hand fixture") {
    // F = 2, C = 1, one head (head_dim 1 -> scale 1).
    TrajFeatures<double> q(2, 1, 1), k(2, 1, 1), v(2, 1, 1);
    q.at(0, 0, 0) = 1.0; q.at(1, 0, 0) = 0.0;
    k.at(0, 0, 0) = 1.0; k.at(1, 0, 0) = 0.0;
    v.at(0, 0, 0) = 2.0; v.at(1, 0, 0) = 4.0;
    const auto out = attn::frame_attention(q, k, v, 1);
    const double s1 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(out.at(0, 0, 0) == doctest::Approx(2.0 * s1 + 4.0 * (1.0 - s1)).epsilon(1e-12));
    CHECK(out.at(0, 0, 0) == doctest::Approx(2.5379).epsilon(1e-3));
    CHECK(out.at(1, 0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("frame_attention key masking") {
    TrajFeatures<double> q(2, 1, 1), k(2, 1, 1), v(2, 1, 1);
    q.at(0, 0, 0) = 1.0; q.at(1, 0, 0) = 0.0;
    k.at(0, 0, 0) = 1.0; k.at(1, 0, 0) = 0.0;
    v.at(0, 0, 0) = 2.0; v.at(1, 0, 0) = 4.0;

    SUBCASE("masking frame 1 collapses every query onto v[0]") {
        const std::vector<uint8_t> mask = {1, 0};
        const auto out = attn::frame_attention(q, k, v, 1, mask.data());
        CHECK(out.at(0, 0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(out.at(1, 0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("all keys masked yields zero rows") {
        const std::vector<uint8_t> mask = {0, 0};
        const auto out = attn::frame_attention(q, k, v, 1, mask.data());
        CHECK(out.at(0, 0, 0) == 0.0);
        CHECK(out.at(1, 0, 0) == 0.0);
    }
}

TEST_CASE("frame_attention rejects shape and head mismatches") {
    TrajFeatures<float> q(2, 2, 4), k(2, 2, 4), v(2, 2, 4), bad(3, 2, 4);
    CHECK_THROWS_AS(attn::frame_attention(q, k, bad, 2), std::invalid_argument);
    CHECK_THROWS_AS(attn::frame_attention(q, k, v, 3), std::invalid_argument);
}

TEST_CASE("temporal_attention is the identity on constant-in-time identity-projected input") {
    const int f = 4, h = 2, w = 3, c = 4;
    Volume<float> z(f, h, w, c);
    std::mt19937 rng(13);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                const float val = n(rng);
                for (int fr = 0; fr < f; ++fr) z.at(fr, y, x, ch) = val;
            }
        }
    }
    attn::Weights<float> wt(c, 2);
    wt.wq = wt.wk = wt.wv = wt.wo = attn::Weights<float>::identity_matrix(c);
    const auto out = attn::temporal_attention(z, wt);
    for (size_t i = 0; i < z.data.size(); ++i) {
        CHECK(out.data[i] == doctest::Approx(z.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("temporal_attention with a zero output projector is zero") {
    std::mt19937 rng(17);
    const auto z = selftest::random_volume(rng, 3, 2, 2, 4);
    attn::Weights<float> wt = selftest::random_weights(rng, 4, 2);
    wt.wo.assign(wt.wo.size(), 0.0f);
    for (float v : attn::temporal_attention(z, wt).data) CHECK(v == 0.0f);
}

TEST_CASE("temporal_attention equals the explicit project/attend/project pipeline") {
    std::mt19937 rng(19);
    const auto z = selftest::random_volume(rng, 3, 2, 3, 4);
    const auto wt = selftest::random_weights(rng, 4, 2);
    const auto got = attn::temporal_attention(z, wt);

    const auto cols = attn::volume_to_columns(z);
    const auto q = attn::linear_project(cols, wt.wq);
    const auto k = attn::linear_project(cols, wt.wk);
    const auto v = attn::linear_project(cols, wt.wv);
    const auto o = attn::frame_attention(q, k, v, wt.heads);
    const auto want = attn::columns_to_volume(attn::linear_project(o, wt.wo), 2, 3);
    CHECK(got.data == want.data);
}

TEST_CASE("rounding is half away from zero") {
    CHECK(attn::round_half_away(0.5) == 1);
    CHECK(attn::round_half_away(1.5) == 2);
    CHECK(attn::round_half_away(2.49) == 2);
    CHECK(attn::round_half_away(-0.5) == -1);
    CHECK(attn::round_half_away(-0.4) == 0);
    CHECK(attn::round_half_away(-1.5) == -2);
}

TEST_CASE("sample_along_trajectories fixtures") {
    std::mt19937 rng(23);
    const int f = 3, h = 4, w = 5, c = 2;
    const auto z = selftest::random_volume(rng, f, h, w, c);

    SUBCASE("identity trajectories reproduce the volume reshaped") {
        const auto ts = selftest::dense_identity_trajectories(f, h, w);
        const auto zt = attn::sample_along_trajectories(z, ts);
        CHECK(zt.data == z.data);
    }
    SUBCASE("single trajectory pinned at (2, 3)") {
        traj::TrajectorySet ts(1, f);
        for (int fr = 0; fr < f; ++fr) ts.set(0, fr, 2.0f, 3.0f);
        const auto zt = attn::sample_along_trajectories(z, ts);
        for (int fr = 0; fr < f; ++fr) {
            for (int ch = 0; ch < c; ++ch) {
                CHECK(zt.at(fr, 0, ch) == z.at(fr, 3, 2, ch));
            }
        }
    }
    SUBCASE("masked entries yield zero rows") {
        traj::TrajectorySet ts(2, f);
        for (int fr = 0; fr < f; ++fr) {
            ts.set(0, fr, 1.0f, 1.0f);
            ts.set(1, fr, 2.0f, 2.0f);
        }
        ts.set_valid(1, 0, false);
        const auto zt = attn::sample_along_trajectories(z, ts);
        for (int ch = 0; ch < c; ++ch) CHECK(zt.at(1, 0, ch) == 0.0f);
        for (int ch = 0; ch < c; ++ch) CHECK(zt.at(0, 0, ch) == z.at(0, 1, 1, ch));
    }
    SUBCASE("a valid out-of-bounds coordinate is rejected") {
        traj::TrajectorySet ts(1, f);
        ts.set(0, 1, -0.6f, 1.0f);
        CHECK_THROWS_AS(attn::sample_along_trajectories(z, ts), std::invalid_argument);
    }
    SUBCASE("an invalid out-of-bounds coordinate is ignored") {
        traj::TrajectorySet ts(1, f);
        ts.set(0, 1, -25.0f, 1.0f);
        ts.set_valid(1, 0, false);
        CHECK_NOTHROW(attn::sample_along_trajectories(z, ts));
    }
}

TEST_CASE("back_project fixtures") {
    const int f = 2, h = 3, w = 3, c = 2;

    SUBCASE("one trajectory deposits its value with count 1") {
        traj::TrajectorySet ts(1, f);
        for (int fr = 0; fr < f; ++fr) ts.set(0, fr, 1.0f, 2.0f);
        TrajFeatures<float> zt(f, 1, c);
        zt.at(0, 0, 0) = 5.0f;
        zt.at(0, 0, 1) = -1.0f;
        const auto bp = attn::back_project(zt, ts, h, w);
        CHECK(bp.values.at(0, 2, 1, 0) == 5.0f);
        CHECK(bp.values.at(0, 2, 1, 1) == -1.0f);
        CHECK(bp.count_at(0, 2, 1) == 1);
        CHECK(bp.count_at(0, 0, 0) == 0);
        CHECK(bp.values.at(0, 0, 0, 0) == 0.0f);
    }
    SUBCASE("two trajectories on one cell average to the mean") {
        traj::TrajectorySet ts(2, 1);
        ts.set(0, 0, 1.0f, 1.0f);
        ts.set(1, 0, 1.2f, 0.8f);  // rounds to the same cell
        TrajFeatures<float> zt(1, 2, 1);
        zt.at(0, 0, 0) = 2.0f;
        zt.at(0, 1, 0) = 4.0f;
        const auto bp = attn::back_project(zt, ts, h, w);
        CHECK(bp.values.at(0, 1, 1, 0) == 3.0f);
        CHECK(bp.count_at(0, 1, 1) == 2);
    }
    SUBCASE("masked entries contribute neither value nor count") {
        traj::TrajectorySet ts(2, 1);
        ts.set(0, 0, 1.0f, 1.0f);
        ts.set(1, 0, 1.0f, 1.0f);
        ts.set_valid(0, 1, false);
        TrajFeatures<float> zt(1, 2, 1);
        zt.at(0, 0, 0) = 2.0f;
        zt.at(0, 1, 0) = 100.0f;
        const auto bp = attn::back_project(zt, ts, h, w);
        CHECK(bp.values.at(0, 1, 1, 0) == 2.0f);
        CHECK(bp.count_at(0, 1, 1) == 1);
    }
}

TEST_CASE("adjoint round trip through dense identity trajectories") {
    std::mt19937 rng(31);
    const auto res = selftest::check_adjoint_round_trip(rng, 5);
    INFO(res.detail);
    CHECK(res.pass);
}

TEST_CASE("trajectory_branch zero output projector gives zeros") {
    std::mt19937 rng(37);
    const auto z = selftest::random_volume(rng, 3, 4, 4, 4);
    const auto ts = selftest::random_trajectories(rng, 9, 3, 4, 4);
    attn::Weights<float> wb = selftest::random_weights(rng, 4, 2);
    wb.wo.assign(wb.wo.size(), 0.0f);
    for (float v : attn::trajectory_branch(z, ts, wb).data) CHECK(v == 0.0f);
}

TEST_CASE("trajectory_branch with dense identity trajectories equals temporal_attention") {
    std::mt19937 rng(41);
    for (int it = 0; it < 5; ++it) {
        const int f = 2 + it % 3;
        const auto z = selftest::random_volume(rng, f, 3, 4, 8);
        const auto ts = selftest::dense_identity_trajectories(f, 3, 4);
        const auto wt = selftest::random_weights(rng, 8, (it % 2) ? 2 : 4);
        const auto branch = attn::trajectory_branch(z, ts, wt);
        const auto temporal = attn::temporal_attention(z, wt);
        CHECK(branch.data == temporal.data);  // bit-exact: count-1 scatter divides by 1
    }
}

TEST_CASE("trajectory_branch single-trajectory scalar pipeline") {
    // One trajectory pinned at (x=1, y=0) over F=2 frames, C=1, scalar weights.
    const int f = 2, h = 2, w = 2;
    Volume<double> z(f, h, w, 1);
    z.at(0, 0, 1, 0) = 0.7;
    z.at(1, 0, 1, 0) = -0.4;
    z.at(0, 0, 0, 0) = 9.0;  // untouched cells must stay zero in the output
    traj::TrajectorySet ts(1, f);
    for (int fr = 0; fr < f; ++fr) ts.set(0, fr, 1.0f, 0.0f);
    attn::Weights<double> wt(1, 1);
    const double a = 0.9, b = -1.1, cvw = 1.3, d = 0.5;
    wt.wq[0] = a; wt.wk[0] = b; wt.wv[0] = cvw; wt.wo[0] = d;

    const auto out = attn::trajectory_branch(z, ts, wt);

    const double z0 = 0.7, z1 = -0.4;
    auto hand = [&](double qi) {
        const double s0 = std::exp(qi * b * z0);
        const double s1 = std::exp(qi * b * z1);
        return d * (s0 * cvw * z0 + s1 * cvw * z1) / (s0 + s1);
    };
    CHECK(out.at(0, 0, 1, 0) == doctest::Approx(hand(a * z0)).epsilon(1e-12));
    CHECK(out.at(1, 0, 1, 0) == doctest::Approx(hand(a * z1)).epsilon(1e-12));
    CHECK(out.at(0, 0, 0, 0) == 0.0);
    CHECK(out.at(1, 1, 1, 0) == 0.0);
}

TEST_CASE("fuse adds elementwise and validates shapes") {
    std::mt19937 rng(43);
    const auto a = selftest::random_volume(rng, 2, 2, 2, 3);
    const auto b = selftest::random_volume(rng, 2, 2, 2, 3);
    const auto s = attn::fuse(a, b);
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(s.data[i] == a.data[i] + b.data[i]);

    Volume<float> zero(2, 2, 2, 3);
    CHECK(attn::fuse(a, zero).data == a.data);
    CHECK(attn::fuse(zero, b).data == b.data);

    Volume<float> other(2, 2, 2, 4);
    CHECK_THROWS_AS(attn::fuse(a, other), std::invalid_argument);
}

TEST_CASE("init_branch_from_temporal zeroes only the output projector") {
    std::mt19937 rng(47);
    const auto wt = selftest::random_weights(rng, 8, 4);
    const auto wb = attn::init_branch_from_temporal(wt);
    CHECK(wb.wq == wt.wq);
    CHECK(wb.wk == wt.wk);
    CHECK(wb.wv == wt.wv);
    CHECK(wb.heads == wt.heads);
    for (float v : wb.wo) CHECK(v == 0.0f);
}

TEST_CASE("zero-initialized branch fuses to the temporal output bit-exactly") {
    std::mt19937 rng(53);
    const auto res = selftest::check_zero_init_identity(rng, 5);
    INFO(res.detail);
    CHECK(res.pass);
}

TEST_CASE("full_spacetime_attention on a single token is wo*wv*z") {
    Volume<float> z(1, 1, 1, 2);
    z.data = {0.5f, -1.5f};
    attn::Weights<float> wt(2, 1);
    wt.wq = {0.3f, -0.2f, 0.1f, 0.4f};  // arbitrary: a lone token ignores q/k
    wt.wk = wt.wq;
    wt.wv = {1.0f, 2.0f, 0.0f, -1.0f};
    wt.wo = {2.0f, 0.0f, 1.0f, 1.0f};
    const auto out = attn::full_spacetime_attention(z, wt);
    // v = wv z = [0.5 - 3.0, 1.5] = [-2.5, 1.5]; out = wo v = [-5.0, -1.0]
    CHECK(out.data[0] == doctest::Approx(-5.0f).epsilon(1e-6));
    CHECK(out.data[1] == doctest::Approx(-1.0f).epsilon(1e-6));
}

TEST_CASE("full_spacetime_attention with F=1 matches a direct spatial oracle") {
    std::mt19937 rng(59);
    const auto z = selftest::random_volume(rng, 1, 3, 4, 4);
    const auto wt = selftest::random_weights(rng, 4, 2);
    const auto got = attn::full_spacetime_attention(z, wt);

    // Direct route: all H*W tokens as one sequence.
    TrajFeatures<float> seq(12, 1, 4);
    seq.data = z.data;
    const auto q = attn::linear_project(seq, wt.wq);
    const auto k = attn::linear_project(seq, wt.wk);
    const auto v = attn::linear_project(seq, wt.wv);
    const auto o = synth::oracle::frame_attention_reference(q, k, v, wt.heads);
    const auto want = attn::linear_project(o, wt.wo);
    for (size_t i = 0; i < got.data.size(); ++i) {
        CHECK(std::abs(got.data[i] - want.data[i]) /
                  std::max({1.0, std::abs(static_cast<double>(got.data[i]))}) < 1e-5);
    }
}

TEST_CASE("full_spacetime_attention enforces the token budget") {
    Volume<float> z(5, 32, 32, 1);  // 5120 tokens
    attn::Weights<float> wt(1, 1);
    wt.wq[0] = wt.wk[0] = wt.wv[0] = wt.wo[0] = 1.0f;
    CHECK_THROWS_AS(attn::full_spacetime_attention(z, wt), std::invalid_argument);
}

TEST_CASE("zero-initialized branch is also an identity on spacetime attention") {
    std::mt19937 rng(61);
    const auto z = selftest::random_volume(rng, 2, 4, 4, 4);
    const auto ts = selftest::random_trajectories(rng, 9, 2, 4, 4);
    const auto wt = selftest::random_weights(rng, 4, 2);
    const auto base = attn::full_spacetime_attention(z, wt);
    const auto branch = attn::trajectory_branch(z, ts, attn::init_branch_from_temporal(wt));
    CHECK(attn::fuse(base, branch).data == base.data);
}

TEST_CASE("attention_stats fixtures") {
    SUBCASE("uniform maps give a flat profile") {
        const int f = 4;
        std::vector<float> uniform(static_cast<size_t>(f) * f, 1.0f / f);
        const auto s = attn::attention_stats(uniform, f, 1);
        for (double p : s.offset_profile) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
        for (double m : s.normalized_map) CHECK(m == 0.0);
    }
    SUBCASE("diagonal maps concentrate at offset zero") {
        const int f = 3;
        std::vector<float> diag(static_cast<size_t>(f) * f, 0.0f);
        for (int i = 0; i < f; ++i) diag[static_cast<size_t>(i) * f + i] = 1.0f;
        const auto s = attn::attention_stats(diag, f, 1);
        CHECK(s.offset_profile[0] == doctest::Approx(1.0));
        CHECK(s.offset_profile[1] == doctest::Approx(0.0));
        CHECK(s.offset_profile[2] == doctest::Approx(0.0));
        CHECK(s.normalized_map[0] == doctest::Approx(1.0));
        CHECK(s.normalized_map[1] == doctest::Approx(0.0));
    }
    SUBCASE("hand-built 3x3 map matches direct averaging") {
        const std::vector<float> m = {0.5f, 0.25f, 0.25f,
                                      0.1f, 0.8f, 0.1f,
                                      0.3f, 0.3f, 0.4f};
        const auto s = attn::attention_stats(m, 3, 1);
        CHECK(s.offset_profile[0] == doctest::Approx((0.5 + 0.8 + 0.4) / 3.0).epsilon(1e-6));
        CHECK(s.offset_profile[1] == doctest::Approx((0.25 + 0.1 + 0.1 + 0.3) / 4.0).epsilon(1e-6));
        CHECK(s.offset_profile[2] == doctest::Approx((0.25 + 0.3) / 2.0).epsilon(1e-6));
        CHECK(s.normalized_map[4] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(s.normalized_map[3] == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("non-normalized rows are rejected") {
        std::vector<float> bad(9, 0.2f);
        CHECK_THROWS_AS(attn::attention_stats(bad, 3, 1), std::invalid_argument);
    }
}

TEST_CASE("denoising_loss fixtures") {
    std::mt19937 rng(67);
    attn::DenoisingBatch<float> batch;
    batch.x0 = selftest::random_volume(rng, 2, 3, 3, 2);
    batch.noise = selftest::random_volume(rng, 2, 3, 3, 2);
    batch.validate();

    CHECK(attn::denoising_loss(batch.x0, batch) == 0.0);

    Volume<float> shifted = batch.x0;
    for (auto& v : shifted.data) v += 1.0f;
    CHECK(attn::denoising_loss(shifted, batch) == doctest::Approx(1.0).epsilon(1e-6));

    const auto pred = selftest::random_volume(rng, 2, 3, 3, 2);
    double want = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - batch.x0.data[i];
        want += d * d;
    }
    want /= static_cast<double>(pred.data.size());
    CHECK(attn::denoising_loss(pred, batch) == doctest::Approx(want).epsilon(1e-9));

    Volume<float> other(2, 3, 3, 3);
    CHECK_THROWS_AS(attn::denoising_loss(other, batch), std::invalid_argument);
    batch.sigma = 0.0;
    CHECK_THROWS_AS(batch.validate(), std::invalid_argument);
}

TEST_CASE("permutation equivariance of sampling and back projection") {
    std::mt19937 rng(71);
    const int f = 2, h = 4, w = 4, c = 2, l = 10;
    // Integer-valued features keep the permuted scatter sums bit-exact.
    Volume<float> z(f, h, w, c);
    std::uniform_int_distribution<int> di(-4, 4);
    for (auto& v : z.data) v = static_cast<float>(di(rng));
    const auto ts = selftest::random_trajectories(rng, l, f, w, h);

    std::vector<int> perm(l);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    traj::TrajectorySet ts_p(l, f);
    for (int i = 0; i < l; ++i) {
        for (int fr = 0; fr < f; ++fr) {
            ts_p.set(i, fr, ts.x(perm[i], fr), ts.y(perm[i], fr));
            ts_p.set_valid(fr, i, ts.valid(fr, perm[i]));
        }
    }

    const auto zt = attn::sample_along_trajectories(z, ts);
    const auto zt_p = attn::sample_along_trajectories(z, ts_p);
    for (int i = 0; i < l; ++i) {
        for (int fr = 0; fr < f; ++fr) {
            for (int ch = 0; ch < c; ++ch) {
                CHECK(zt_p.at(fr, i, ch) == zt.at(fr, perm[i], ch));
            }
        }
    }

    const auto bp = attn::back_project(zt, ts, h, w);
    const auto bp_p = attn::back_project(zt_p, ts_p, h, w);
    CHECK(bp.counts == bp_p.counts);
    CHECK(bp.values.data == bp_p.values.data);
}

TEST_CASE("repeated evaluation is bit-identical") {
    std::mt19937 rng(73);
    const auto z = selftest::random_volume(rng, 3, 4, 4, 4);
    const auto ts = selftest::random_trajectories(rng, 11, 3, 4, 4);
    const auto wt = selftest::random_weights(rng, 4, 2);
    const auto a = attn::trajectory_branch(z, ts, wt);
    const auto b = attn::trajectory_branch(z, ts, wt);
    CHECK(a.data == b.data);
}
