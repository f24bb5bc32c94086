// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "trajattn/tensor.hpp"
#include "trajattn/trajgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ta::attn {

/// Projector matrices for one attention branch. Matrices are C x C row-major
/// and applied as y = W * x on channel vectors; no bias terms.
template <typename T>
struct Weights {
    int channels = 0;
    int heads = 1;
    std::vector<T> wq, wk, wv, wo;

    Weights() = default;
    Weights(int c, int h)
        : channels(c), heads(h),
          wq(static_cast<size_t>(c) * c, T(0)), wk(static_cast<size_t>(c) * c, T(0)),
          wv(static_cast<size_t>(c) * c, T(0)), wo(static_cast<size_t>(c) * c, T(0)) {
        if (c <= 0 || h <= 0 || c % h != 0) {
            throw std::invalid_argument("Weights: channels must be a positive multiple of heads");
        }
    }

    int head_dim() const { return channels / heads; }

    static std::vector<T> identity_matrix(int c) {
        std::vector<T> m(static_cast<size_t>(c) * c, T(0));
        for (int i = 0; i < c; ++i) m[static_cast<size_t>(i) * c + i] = T(1);
        return m;
    }
};

template <typename From, typename To>
Weights<To> convert_weights(const Weights<From>& w) {
    Weights<To> out(w.channels, w.heads);
    auto cvt = [](const std::vector<From>& src, std::vector<To>& dst) {
        for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
    };
    cvt(w.wq, out.wq);
    cvt(w.wk, out.wk);
    cvt(w.wv, out.wv);
    cvt(w.wo, out.wo);
    return out;
}

// ---------------------------------------------------------------------------
// Linear projection
// ---------------------------------------------------------------------------

/// y = W x for each channel vector in a flat (n_vectors x C) buffer.
template <typename T>
void project_rows(const T* in, T* out, size_t n_vectors, int c, const std::vector<T>& w) {
    if (w.size() != static_cast<size_t>(c) * c) {
        throw std::invalid_argument("linear_project: weight matrix does not match channel count");
    }
    for (size_t n = 0; n < n_vectors; ++n) {
        const T* x = in + n * c;
        T* y = out + n * c;
        for (int r = 0; r < c; ++r) {
            double acc = 0.0;
            const T* row = w.data() + static_cast<size_t>(r) * c;
            for (int j = 0; j < c; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(x[j]);
            y[r] = static_cast<T>(acc);
        }
    }
}

template <typename T>
Volume<T> linear_project(const Volume<T>& z, const std::vector<T>& w) {
    Volume<T> out(z.frames, z.height, z.width, z.channels);
    project_rows(z.data.data(), out.data.data(), z.size() / z.channels, z.channels, w);
    return out;
}

template <typename T>
TrajFeatures<T> linear_project(const TrajFeatures<T>& z, const std::vector<T>& w) {
    TrajFeatures<T> out(z.frames, z.count, z.channels);
    out.mask = z.mask;
    project_rows(z.data.data(), out.data.data(), z.data.size() / z.channels, z.channels, w);
    return out;
}

/// Backward of project_rows: g_in = W^T g_out, g_w += sum g_out x^T.
template <typename T>
void project_rows_backward(const T* in, const T* g_out, T* g_in, std::vector<T>& g_w,
                           size_t n_vectors, int c, const std::vector<T>& w) {
    if (g_w.size() != static_cast<size_t>(c) * c) g_w.assign(static_cast<size_t>(c) * c, T(0));
    for (size_t n = 0; n < n_vectors; ++n) {
        const T* x = in + n * c;
        const T* g = g_out + n * c;
        T* gx = g_in + n * c;
        for (int j = 0; j < c; ++j) {
            double acc = 0.0;
            for (int r = 0; r < c; ++r) acc += static_cast<double>(w[static_cast<size_t>(r) * c + j]) * static_cast<double>(g[r]);
            gx[j] = static_cast<T>(acc);
        }
        for (int r = 0; r < c; ++r) {
            for (int j = 0; j < c; ++j) {
                g_w[static_cast<size_t>(r) * c + j] += static_cast<T>(static_cast<double>(g[r]) * static_cast<double>(x[j]));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Frame attention
// ---------------------------------------------------------------------------

/// Saved softmax maps for the backward pass and diagnostics.
/// probs layout: ((n * heads + h) * F + i) * F + j.
template <typename T>
struct AttnCache {
    int frames = 0;
    int tokens = 0;
    int heads = 0;
    std::vector<T> probs;
};

/// Attention across the frame axis, independently per token column and head.
/// Logit scale is 1/sqrt(head_dim). key_mask (F x N layout, may be null)
/// removes keys via -inf logits; a query whose keys are all masked produces
/// a zero output row.
template <typename T>
TrajFeatures<T> frame_attention(const TrajFeatures<T>& q, const TrajFeatures<T>& k,
                                const TrajFeatures<T>& v, int heads,
                                const uint8_t* key_mask = nullptr,
                                AttnCache<T>* cache = nullptr) {
    const int frames = q.frames;
    const int n_tok = q.count;
    const int c = q.channels;
    if (k.frames != frames || v.frames != frames || k.count != n_tok || v.count != n_tok ||
        k.channels != c || v.channels != c) {
        throw std::invalid_argument("frame_attention: q/k/v shapes disagree");
    }
    if (heads <= 0 || c % heads != 0) {
        throw std::invalid_argument("frame_attention: heads must divide channels");
    }
    const int hd = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    TrajFeatures<T> out(frames, n_tok, c);
    if (cache) {
        cache->frames = frames;
        cache->tokens = n_tok;
        cache->heads = heads;
        cache->probs.assign(static_cast<size_t>(n_tok) * heads * frames * frames, T(0));
    }

    std::vector<double> logits(frames);
    std::vector<double> probs(frames);
    for (int n = 0; n < n_tok; ++n) {
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * hd;
            for (int i = 0; i < frames; ++i) {
                bool any_key = false;
                double max_logit = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < frames; ++j) {
                    if (key_mask && key_mask[static_cast<size_t>(j) * n_tok + n] == 0) {
                        logits[j] = -std::numeric_limits<double>::infinity();
                        continue;
                    }
                    double dot = 0.0;
                    for (int d = 0; d < hd; ++d) {
                        dot += static_cast<double>(q.at(i, n, c0 + d)) *
                               static_cast<double>(k.at(j, n, c0 + d));
                    }
                    logits[j] = scale * dot;
                    if (!std::isfinite(logits[j])) {
                        throw std::runtime_error("frame_attention: non-finite logit");
                    }
                    max_logit = std::max(max_logit, logits[j]);
                    any_key = true;
                }
                if (!any_key) continue;  // every key masked: zero row
                double denom = 0.0;
                for (int j = 0; j < frames; ++j) {
                    probs[j] = std::isfinite(logits[j]) ? std::exp(logits[j] - max_logit) : 0.0;
                    denom += probs[j];
                }
                for (int j = 0; j < frames; ++j) probs[j] /= denom;
                if (cache) {
                    T* row = cache->probs.data() +
                             ((static_cast<size_t>(n) * heads + h) * frames + i) * frames;
                    for (int j = 0; j < frames; ++j) row[j] = static_cast<T>(probs[j]);
                }
                for (int d = 0; d < hd; ++d) {
                    double acc = 0.0;
                    for (int j = 0; j < frames; ++j) {
                        acc += probs[j] * static_cast<double>(v.at(j, n, c0 + d));
                    }
                    out.at(i, n, c0 + d) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

/// Backward of frame_attention. The forward must have been run with a cache.
template <typename T>
void frame_attention_backward(const TrajFeatures<T>& q, const TrajFeatures<T>& k,
                              const TrajFeatures<T>& v, int heads,
                              const uint8_t* key_mask, const AttnCache<T>& cache,
                              const TrajFeatures<T>& g_out, TrajFeatures<T>& g_q,
                              TrajFeatures<T>& g_k, TrajFeatures<T>& g_v) {
    const int frames = q.frames;
    const int n_tok = q.count;
    const int c = q.channels;
    const int hd = c / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    g_q = TrajFeatures<T>(frames, n_tok, c);
    g_k = TrajFeatures<T>(frames, n_tok, c);
    g_v = TrajFeatures<T>(frames, n_tok, c);

    std::vector<double> g_p(static_cast<size_t>(frames) * frames);
    std::vector<double> g_s(static_cast<size_t>(frames) * frames);
    for (int n = 0; n < n_tok; ++n) {
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * hd;
            const T* p_base = cache.probs.data() +
                              (static_cast<size_t>(n) * heads + h) * frames * frames;
            // g_v[j] += sum_i P[i][j] g_out[i]; g_p[i][j] = <g_out[i], v[j]>
            for (int i = 0; i < frames; ++i) {
                const T* p_row = p_base + static_cast<size_t>(i) * frames;
                for (int j = 0; j < frames; ++j) {
                    double dot = 0.0;
                    for (int d = 0; d < hd; ++d) {
                        dot += static_cast<double>(g_out.at(i, n, c0 + d)) *
                               static_cast<double>(v.at(j, n, c0 + d));
                        g_v.at(j, n, c0 + d) += static_cast<T>(
                            static_cast<double>(p_row[j]) *
                            static_cast<double>(g_out.at(i, n, c0 + d)));
                    }
                    g_p[static_cast<size_t>(i) * frames + j] = dot;
                }
            }
            // Softmax backward: g_s = P o (g_p - rowsum(g_p o P)).
            for (int i = 0; i < frames; ++i) {
                const T* p_row = p_base + static_cast<size_t>(i) * frames;
                double rowsum = 0.0;
                for (int j = 0; j < frames; ++j) {
                    rowsum += g_p[static_cast<size_t>(i) * frames + j] * static_cast<double>(p_row[j]);
                }
                for (int j = 0; j < frames; ++j) {
                    g_s[static_cast<size_t>(i) * frames + j] =
                        static_cast<double>(p_row[j]) *
                        (g_p[static_cast<size_t>(i) * frames + j] - rowsum);
                }
            }
            // g_q[i] += scale * sum_j g_s[i][j] k[j]; g_k[j] += scale * sum_i g_s[i][j] q[i]
            for (int i = 0; i < frames; ++i) {
                for (int j = 0; j < frames; ++j) {
                    const double gs = g_s[static_cast<size_t>(i) * frames + j];
                    if (gs == 0.0) continue;
                    for (int d = 0; d < hd; ++d) {
                        g_q.at(i, n, c0 + d) += static_cast<T>(scale * gs * static_cast<double>(k.at(j, n, c0 + d)));
                        g_k.at(j, n, c0 + d) += static_cast<T>(scale * gs * static_cast<double>(q.at(i, n, c0 + d)));
                    }
                }
            }
        }
    }
    (void)key_mask;  // masking is already encoded in the cached probabilities
}

// ---------------------------------------------------------------------------
// Temporal attention
// ---------------------------------------------------------------------------

template <typename T>
TrajFeatures<T> volume_to_columns(const Volume<T>& z) {
    TrajFeatures<T> t(z.frames, z.height * z.width, z.channels);
    t.data = z.data;  // identical layout: (f, y*W + x, c)
    return t;
}

template <typename T>
Volume<T> columns_to_volume(const TrajFeatures<T>& t, int height, int width) {
    if (t.count != height * width) {
        throw std::invalid_argument("columns_to_volume: token count does not match grid");
    }
    Volume<T> z(t.frames, height, width, t.channels);
    z.data = t.data;
    return z;
}

/// Temporal attention: per spatial position, attend across frames.
template <typename T>
Volume<T> temporal_attention(const Volume<T>& z, const Weights<T>& w,
                             AttnCache<T>* cache = nullptr) {
    if (z.channels != w.channels) {
        throw std::invalid_argument("temporal_attention: channel mismatch");
    }
    TrajFeatures<T> cols = volume_to_columns(z);
    TrajFeatures<T> q = linear_project(cols, w.wq);
    TrajFeatures<T> k = linear_project(cols, w.wk);
    TrajFeatures<T> v = linear_project(cols, w.wv);
    TrajFeatures<T> o = frame_attention(q, k, v, w.heads, nullptr, cache);
    TrajFeatures<T> projected = linear_project(o, w.wo);
    return columns_to_volume(projected, z.height, z.width);
}

// ---------------------------------------------------------------------------
// Trajectory sampling and back projection
// ---------------------------------------------------------------------------

inline int round_half_away(double v) {
    return static_cast<int>(v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

inline int snap_to_grid(float coord, int extent, bool valid, const char* what) {
    if (valid && !(coord >= 0.0f && coord < static_cast<float>(extent))) {
        throw std::invalid_argument(std::string(what) +
                                    ": valid trajectory coordinate out of bounds");
    }
    return std::clamp(round_half_away(coord), 0, extent - 1);
}

/// Trajectory gather: Z_t[f,i] = Z[f, round(y), round(x)] for valid entries,
/// zero rows for masked ones.
template <typename T>
TrajFeatures<T> sample_along_trajectories(const Volume<T>& z, const traj::TrajectorySet& ts) {
    if (ts.frames != z.frames) {
        throw std::invalid_argument("sample_along_trajectories: frame count mismatch");
    }
    TrajFeatures<T> out(z.frames, ts.count, z.channels);
    out.mask = ts.mask;
    for (int f = 0; f < z.frames; ++f) {
        for (int l = 0; l < ts.count; ++l) {
            if (!ts.valid(f, l)) continue;
            const int gx = snap_to_grid(ts.x(l, f), z.width, true, "sample_along_trajectories");
            const int gy = snap_to_grid(ts.y(l, f), z.height, true, "sample_along_trajectories");
            for (int c = 0; c < z.channels; ++c) {
                out.at(f, l, c) = z.at(f, gy, gx, c);
            }
        }
    }
    return out;
}

/// Backward of sampling: scatter-add upstream gradients to the source cells.
template <typename T>
Volume<T> sample_along_trajectories_backward(const TrajFeatures<T>& g_out,
                                             const traj::TrajectorySet& ts,
                                             int height, int width) {
    Volume<T> g_z(g_out.frames, height, width, g_out.channels);
    for (int f = 0; f < g_out.frames; ++f) {
        for (int l = 0; l < ts.count; ++l) {
            if (!ts.valid(f, l)) continue;
            const int gx = snap_to_grid(ts.x(l, f), width, true, "sample backward");
            const int gy = snap_to_grid(ts.y(l, f), height, true, "sample backward");
            for (int c = 0; c < g_out.channels; ++c) {
                g_z.at(f, gy, gx, c) += g_out.at(f, l, c);
            }
        }
    }
    return g_z;
}

template <typename T>
struct BackProjection {
    Volume<T> values;
    std::vector<int> counts;  // F*H*W

    int count_at(int f, int y, int x) const {
        return counts[(static_cast<size_t>(f) * values.height + y) * values.width + x];
    }
};

/// Back-projection scatter: mean of valid trajectory contributions per cell.
/// Contributions are accumulated in ascending trajectory order in 64-bit.
template <typename T>
BackProjection<T> back_project(const TrajFeatures<T>& zt, const traj::TrajectorySet& ts,
                               int height, int width) {
    if (zt.frames != ts.frames || zt.count != ts.count) {
        throw std::invalid_argument("back_project: feature/trajectory shape mismatch");
    }
    const int frames = zt.frames;
    const int c = zt.channels;
    std::vector<double> acc(static_cast<size_t>(frames) * height * width * c, 0.0);
    BackProjection<T> out;
    out.values = Volume<T>(frames, height, width, c);
    out.counts.assign(static_cast<size_t>(frames) * height * width, 0);

    for (int f = 0; f < frames; ++f) {
        for (int l = 0; l < ts.count; ++l) {
            if (!ts.valid(f, l)) continue;
            const int gx = snap_to_grid(ts.x(l, f), width, true, "back_project");
            const int gy = snap_to_grid(ts.y(l, f), height, true, "back_project");
            const size_t cell = (static_cast<size_t>(f) * height + gy) * width + gx;
            for (int ch = 0; ch < c; ++ch) {
                acc[cell * c + ch] += static_cast<double>(zt.at(f, l, ch));
            }
            out.counts[cell] += 1;
        }
    }
    for (size_t cell = 0; cell < out.counts.size(); ++cell) {
        const int u = out.counts[cell];
        if (u == 0) continue;
        for (int ch = 0; ch < c; ++ch) {
            out.values.data[cell * c + ch] = static_cast<T>(acc[cell * c + ch] / u);
        }
    }
    return out;
}

/// Backward of back_project w.r.t. the trajectory features: gather-divide.
template <typename T>
TrajFeatures<T> back_project_backward(const Volume<T>& g_values, const traj::TrajectorySet& ts,
                                      const std::vector<int>& counts) {
    TrajFeatures<T> g_zt(g_values.frames, ts.count, g_values.channels);
    g_zt.mask = ts.mask;
    for (int f = 0; f < g_values.frames; ++f) {
        for (int l = 0; l < ts.count; ++l) {
            if (!ts.valid(f, l)) continue;
            const int gx = snap_to_grid(ts.x(l, f), g_values.width, true, "back_project backward");
            const int gy = snap_to_grid(ts.y(l, f), g_values.height, true, "back_project backward");
            const size_t cell = (static_cast<size_t>(f) * g_values.height + gy) * g_values.width + gx;
            const int u = counts[cell];
            if (u == 0) continue;
            for (int c = 0; c < g_values.channels; ++c) {
                g_zt.at(f, l, c) = static_cast<T>(static_cast<double>(g_values.at(f, gy, gx, c)) / u);
            }
        }
    }
    return g_zt;
}

// ---------------------------------------------------------------------------
// Trajectory branch, fusion, initialization
// ---------------------------------------------------------------------------

/// Auxiliary branch: sample along trajectories, masked frame attention with
/// branch weights, project, scatter back to the spatial grid.
template <typename T>
Volume<T> trajectory_branch(const Volume<T>& z, const traj::TrajectorySet& ts,
                            const Weights<T>& w, AttnCache<T>* cache = nullptr) {
    if (z.channels != w.channels) {
        throw std::invalid_argument("trajectory_branch: channel mismatch");
    }
    TrajFeatures<T> zt = sample_along_trajectories(z, ts);
    TrajFeatures<T> q = linear_project(zt, w.wq);
    TrajFeatures<T> k = linear_project(zt, w.wk);
    TrajFeatures<T> v = linear_project(zt, w.wv);
    TrajFeatures<T> o = frame_attention(q, k, v, w.heads, ts.mask.data(), cache);
    TrajFeatures<T> projected = linear_project(o, w.wo);
    return back_project(projected, ts, z.height, z.width).values;
}

/// Residual fusion: elementwise sum.
template <typename T>
Volume<T> fuse(const Volume<T>& temporal_out, const Volume<T>& branch_out) {
    require_same_shape(temporal_out, branch_out, "fuse");
    Volume<T> out = temporal_out;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += branch_out.data[i];
    return out;
}

/// QKV projectors inherited from temporal attention, output projector zeroed
/// so the branch is an exact no-op before training.
template <typename T>
Weights<T> init_branch_from_temporal(const Weights<T>& w_temporal) {
    Weights<T> w(w_temporal.channels, w_temporal.heads);
    w.wq = w_temporal.wq;
    w.wk = w_temporal.wk;
    w.wv = w_temporal.wv;
    // w.wo stays zero
    return w;
}

// ---------------------------------------------------------------------------
// Full spatio-temporal attention
// ---------------------------------------------------------------------------

constexpr int kSpacetimeTokenBudget = 4096;

/// Joint attention over all F*H*W tokens (3D-attention variant).
template <typename T>
Volume<T> full_spacetime_attention(const Volume<T>& z, const Weights<T>& w,
                                   AttnCache<T>* cache = nullptr) {
    const long tokens = static_cast<long>(z.frames) * z.height * z.width;
    if (tokens > kSpacetimeTokenBudget) {
        throw std::invalid_argument("full_spacetime_attention: token budget exceeded (" +
                                    std::to_string(tokens) + " > " +
                                    std::to_string(kSpacetimeTokenBudget) + ")");
    }
    if (z.channels != w.channels) {
        throw std::invalid_argument("full_spacetime_attention: channel mismatch");
    }
    // One sequence of F*H*W tokens: reuse frame_attention with N = 1.
    TrajFeatures<T> seq(static_cast<int>(tokens), 1, z.channels);
    seq.data = z.data;
    TrajFeatures<T> q = linear_project(seq, w.wq);
    TrajFeatures<T> k = linear_project(seq, w.wk);
    TrajFeatures<T> v = linear_project(seq, w.wv);
    TrajFeatures<T> o = frame_attention(q, k, v, w.heads, nullptr, cache);
    TrajFeatures<T> projected = linear_project(o, w.wo);
    Volume<T> out(z.frames, z.height, z.width, z.channels);
    out.data = projected.data;
    return out;
}

// ---------------------------------------------------------------------------
// Attention-map diagnostics
// ---------------------------------------------------------------------------

struct AttentionStats {
    std::vector<double> offset_profile;  // mean weight per frame offset |i-j|
    std::vector<double> normalized_map;  // F*F mean map, min-max scaled to [0,1]
    int frames = 0;
};

/// maps layout: (n * F + i) * F + j over `columns` softmax maps.
/// Rows must sum to 1 within 1e-5.
template <typename T>
AttentionStats attention_stats(const std::vector<T>& maps, int frames, int columns) {
    if (frames <= 0 || columns <= 0 ||
        maps.size() != static_cast<size_t>(columns) * frames * frames) {
        throw std::invalid_argument("attention_stats: bad map shape");
    }
    for (int n = 0; n < columns; ++n) {
        for (int i = 0; i < frames; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < frames; ++j) {
                row_sum += static_cast<double>(maps[(static_cast<size_t>(n) * frames + i) * frames + j]);
            }
            if (std::abs(row_sum - 1.0) > 1e-5) {
                throw std::invalid_argument("attention_stats: row is not softmax-normalized");
            }
        }
    }

    AttentionStats stats;
    stats.frames = frames;
    std::vector<double> mean_map(static_cast<size_t>(frames) * frames, 0.0);
    for (int n = 0; n < columns; ++n) {
        for (size_t i = 0; i < mean_map.size(); ++i) {
            mean_map[i] += static_cast<double>(maps[static_cast<size_t>(n) * frames * frames + i]);
        }
    }
    for (double& m : mean_map) m /= columns;

    stats.offset_profile.assign(frames, 0.0);
    std::vector<int> offset_count(frames, 0);
    for (int i = 0; i < frames; ++i) {
        for (int j = 0; j < frames; ++j) {
            const int d = std::abs(i - j);
            stats.offset_profile[d] += mean_map[static_cast<size_t>(i) * frames + j];
            offset_count[d] += 1;
        }
    }
    for (int d = 0; d < frames; ++d) stats.offset_profile[d] /= offset_count[d];

    const auto [mn_it, mx_it] = std::minmax_element(mean_map.begin(), mean_map.end());
    const double mn = *mn_it, mx = *mx_it;
    stats.normalized_map.resize(mean_map.size());
    for (size_t i = 0; i < mean_map.size(); ++i) {
        stats.normalized_map[i] = (mx > mn) ? (mean_map[i] - mn) / (mx - mn) : 0.0;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Denoising objective
// ---------------------------------------------------------------------------

template <typename T>
struct DenoisingBatch {
    Volume<T> x0;
    Volume<T> noise;
    double sigma = 1.0;
    std::string condition;

    void validate() const {
        if (!x0.same_shape(noise)) {
            throw std::invalid_argument("DenoisingBatch: x0/noise shape mismatch");
        }
        if (!(sigma > 0.0)) {
            throw std::invalid_argument("DenoisingBatch: sigma must be positive");
        }
    }
};

/// Mean squared error against the clean latents, averaged over all elements.
template <typename T>
double denoising_loss(const Volume<T>& pred, const DenoisingBatch<T>& batch) {
    require_same_shape(pred, batch.x0, "denoising_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(batch.x0.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.data.size());
}

template <typename T>
Volume<T> denoising_loss_backward(const Volume<T>& pred, const DenoisingBatch<T>& batch) {
    require_same_shape(pred, batch.x0, "denoising_loss");
    Volume<T> g(pred.frames, pred.height, pred.width, pred.channels);
    const double inv_n = 1.0 / static_cast<double>(pred.data.size());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        g.data[i] = static_cast<T>(2.0 * inv_n *
                                   (static_cast<double>(pred.data[i]) -
                                    static_cast<double>(batch.x0.data[i])));
    }
    return g;
}

}  // namespace ta::attn
