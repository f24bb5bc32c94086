// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ta {

/// Dense feature tensor over frames x height x width x channels,
/// stored frame-major (f, y, x, c).
template <typename T>
struct Volume {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Volume() = default;
    Volume(int f, int h, int w, int c)
        : frames(f), height(h), width(w), channels(c),
          data(static_cast<size_t>(f) * h * w * c, T(0)) {
        if (f <= 0 || h <= 0 || w <= 0 || c <= 0) {
            throw std::invalid_argument("Volume: all dimensions must be positive");
        }
    }

    size_t index(int f, int y, int x, int c) const {
        return ((static_cast<size_t>(f) * height + y) * width + x) * channels + c;
    }
    T& at(int f, int y, int x, int c) { return data[index(f, y, x, c)]; }
    const T& at(int f, int y, int x, int c) const { return data[index(f, y, x, c)]; }

    size_t size() const { return data.size(); }

    bool same_shape(const Volume& o) const {
        return frames == o.frames && height == o.height && width == o.width &&
               channels == o.channels;
    }
};

/// Per-trajectory feature rows, frames x count x channels, with an optional
/// validity mask (empty mask means all rows valid). Mask layout is f*count + l.
template <typename T>
struct TrajFeatures {
    int frames = 0;
    int count = 0;
    int channels = 0;
    std::vector<T> data;
    std::vector<uint8_t> mask;

    TrajFeatures() = default;
    TrajFeatures(int f, int l, int c)
        : frames(f), count(l), channels(c),
          data(static_cast<size_t>(f) * l * c, T(0)) {
        if (f <= 0 || l <= 0 || c <= 0) {
            throw std::invalid_argument("TrajFeatures: dimensions must be positive");
        }
    }

    size_t index(int f, int l, int c) const {
        return (static_cast<size_t>(f) * count + l) * channels + c;
    }
    T& at(int f, int l, int c) { return data[index(f, l, c)]; }
    const T& at(int f, int l, int c) const { return data[index(f, l, c)]; }

    bool valid(int f, int l) const {
        return mask.empty() || mask[static_cast<size_t>(f) * count + l] != 0;
    }
};

template <typename T>
void require_same_shape(const Volume<T>& a, const Volume<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }
}

template <typename From, typename To>
Volume<To> convert_volume(const Volume<From>& v) {
    Volume<To> out(v.frames, v.height, v.width, v.channels);
    for (size_t i = 0; i < v.data.size(); ++i) out.data[i] = static_cast<To>(v.data[i]);
    return out;
}

}  // namespace ta
