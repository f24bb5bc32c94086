// SPDX-License-Identifier: Apache-2.0

#include "trajattn/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <limits>

namespace ta::io {

namespace {

// Little-endian scalar I/O. Target platforms here are little-endian; the
// byte-level copy keeps the on-disk contract explicit.
class Reader {
  public:
    Reader(const std::string& path, const char magic[4]) : path_(path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw io_error("cannot open '" + path + "'", 0);
        const auto size = in.tellg();
        in.seekg(0);
        buf_.resize(static_cast<size_t>(size));
        if (!buf_.empty()) in.read(buf_.data(), size);
        if (!in) throw io_error("read failure on '" + path + "'", 0);

        char got[4];
        read_bytes(got, 4);
        if (std::memcmp(got, magic, 4) != 0) {
            throw io_error("'" + path + "': bad magic, expected '" + std::string(magic, 4) + "'", 0);
        }
    }

    uint32_t u32() {
        unsigned char b[4];
        read_bytes(reinterpret_cast<char*>(b), 4);
        return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
               static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    }

    float f32() {
        uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        return f;
    }

    uint8_t u8() {
        char b;
        read_bytes(&b, 1);
        return static_cast<uint8_t>(b);
    }

    void expect_payload(size_t expected) const {
        const size_t remaining = buf_.size() - pos_;
        if (remaining < expected) {
            throw io_error("'" + path_ + "': truncated payload, expected " +
                               std::to_string(expected) + " bytes but only " +
                               std::to_string(remaining) + " remain",
                           pos_);
        }
    }

    void expect_end() const {
        if (pos_ != buf_.size()) {
            throw io_error("'" + path_ + "': " + std::to_string(buf_.size() - pos_) +
                               " unexpected trailing bytes",
                           pos_);
        }
    }

  private:
    void read_bytes(char* dst, size_t n) {
        if (pos_ + n > buf_.size()) {
            throw io_error("'" + path_ + "': unexpected end of file, needed " +
                               std::to_string(n) + " more bytes",
                           pos_);
        }
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::string path_;
    std::vector<char> buf_;
    size_t pos_ = 0;
};

class Writer {
  public:
    Writer(const std::string& path, const char magic[4]) : out_(path, std::ios::binary) {
        if (!out_) throw io_error("cannot open '" + path + "' for writing", 0);
        out_.write(magic, 4);
    }

    void u32(uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>((v >> 8) & 0xff),
                                    static_cast<unsigned char>((v >> 16) & 0xff),
                                    static_cast<unsigned char>((v >> 24) & 0xff)};
        out_.write(reinterpret_cast<const char*>(b), 4);
    }

    void f32(float f) {
        uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        u32(bits);
    }

    void u8(uint8_t v) { out_.put(static_cast<char>(v)); }

    void finish(const std::string& path) {
        out_.flush();
        if (!out_) throw io_error("write failure on '" + path + "'", 0);
    }

  private:
    std::ofstream out_;
};

uint32_t checked_dim(uint32_t v, const char* what, size_t offset_hint) {
    if (v == 0 || v > (1u << 24)) {
        throw io_error(std::string("unreasonable ") + what + " value " + std::to_string(v),
                       offset_hint);
    }
    return v;
}

}  // namespace

geom::DepthMap read_depth(const std::string& path) {
    Reader r(path, "TADM");
    const uint32_t h = checked_dim(r.u32(), "height", 4);
    const uint32_t w = checked_dim(r.u32(), "width", 8);
    r.expect_payload(static_cast<size_t>(h) * w * 4);
    geom::DepthMap d(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < d.values.size(); ++i) d.values[i] = r.f32();
    r.expect_end();
    geom::validate(d);
    return d;
}

void write_depth(const std::string& path, const geom::DepthMap& d) {
    Writer w(path, "TADM");
    w.u32(static_cast<uint32_t>(d.height));
    w.u32(static_cast<uint32_t>(d.width));
    for (double v : d.values) w.f32(static_cast<float>(v));
    w.finish(path);
}

traj::PointTracks read_tracks(const std::string& path) {
    Reader r(path, "TATK");
    const uint32_t f = checked_dim(r.u32(), "frame count", 4);
    const uint32_t l = checked_dim(r.u32(), "track count", 8);
    r.expect_payload(static_cast<size_t>(f) * l * 9);
    traj::PointTracks t(static_cast<int>(f), static_cast<int>(l));
    for (uint32_t fi = 0; fi < f; ++fi) {
        for (uint32_t li = 0; li < l; ++li) {
            const float x = r.f32();
            const float y = r.f32();
            t.set(static_cast<int>(fi), static_cast<int>(li), x, y);
            t.visible[static_cast<size_t>(fi) * l + li] = r.u8() ? 1 : 0;
        }
    }
    r.expect_end();
    return t;
}

void write_tracks(const std::string& path, const traj::PointTracks& t) {
    Writer w(path, "TATK");
    w.u32(static_cast<uint32_t>(t.frames));
    w.u32(static_cast<uint32_t>(t.count));
    for (int f = 0; f < t.frames; ++f) {
        for (int l = 0; l < t.count; ++l) {
            w.f32(t.x(f, l));
            w.f32(t.y(f, l));
            w.u8(t.visible[static_cast<size_t>(f) * t.count + l]);
        }
    }
    w.finish(path);
}

traj::TrajectorySet read_trajectories(const std::string& path) {
    Reader r(path, "TATR");
    const uint32_t l = checked_dim(r.u32(), "trajectory count", 4);
    const uint32_t f = checked_dim(r.u32(), "frame count", 8);
    r.expect_payload(static_cast<size_t>(l) * f * 9);
    traj::TrajectorySet ts(static_cast<int>(l), static_cast<int>(f));
    for (uint32_t li = 0; li < l; ++li) {
        for (uint32_t fi = 0; fi < f; ++fi) {
            const float x = r.f32();
            const float y = r.f32();
            ts.set(static_cast<int>(li), static_cast<int>(fi), x, y);
            ts.set_valid(static_cast<int>(fi), static_cast<int>(li), r.u8() != 0);
        }
    }
    r.expect_end();
    return ts;
}

void write_trajectories(const std::string& path, const traj::TrajectorySet& ts) {
    Writer w(path, "TATR");
    w.u32(static_cast<uint32_t>(ts.count));
    w.u32(static_cast<uint32_t>(ts.frames));
    for (int l = 0; l < ts.count; ++l) {
        for (int f = 0; f < ts.frames; ++f) {
            w.f32(ts.x(l, f));
            w.f32(ts.y(l, f));
            w.u8(ts.valid(f, l) ? 1 : 0);
        }
    }
    w.finish(path);
}

Volume<float> read_volume(const std::string& path) {
    Reader r(path, "TAFV");
    const uint32_t f = checked_dim(r.u32(), "frame count", 4);
    const uint32_t h = checked_dim(r.u32(), "height", 8);
    const uint32_t w = checked_dim(r.u32(), "width", 12);
    const uint32_t c = checked_dim(r.u32(), "channel count", 16);
    r.expect_payload(static_cast<size_t>(f) * h * w * c * 4);
    Volume<float> v(static_cast<int>(f), static_cast<int>(h), static_cast<int>(w),
                    static_cast<int>(c));
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = r.f32();
    r.expect_end();
    return v;
}

void write_volume(const std::string& path, const Volume<float>& v) {
    Writer w(path, "TAFV");
    w.u32(static_cast<uint32_t>(v.frames));
    w.u32(static_cast<uint32_t>(v.height));
    w.u32(static_cast<uint32_t>(v.width));
    w.u32(static_cast<uint32_t>(v.channels));
    for (float x : v.data) w.f32(x);
    w.finish(path);
}

attn::Weights<float> read_weights(const std::string& path) {
    Reader r(path, "TAAW");
    const uint32_t c = checked_dim(r.u32(), "channel count", 4);
    const uint32_t heads = checked_dim(r.u32(), "head count", 8);
    if (c % heads != 0) {
        throw io_error("'" + path + "': channels " + std::to_string(c) +
                           " not divisible by heads " + std::to_string(heads),
                       8);
    }
    r.expect_payload(static_cast<size_t>(c) * c * 4 * 4);
    attn::Weights<float> w(static_cast<int>(c), static_cast<int>(heads));
    for (auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        for (size_t i = 0; i < m->size(); ++i) (*m)[i] = r.f32();
    }
    r.expect_end();
    return w;
}

void write_weights(const std::string& path, const attn::Weights<float>& w) {
    Writer out(path, "TAAW");
    out.u32(static_cast<uint32_t>(w.channels));
    out.u32(static_cast<uint32_t>(w.heads));
    for (const auto* m : {&w.wq, &w.wk, &w.wv, &w.wo}) {
        for (float v : *m) out.f32(v);
    }
    out.finish(path);
}

PoseFile read_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'", 0);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error("'" + path + "': " + e.what(), e.byte);
    }

    PoseFile p;
    try {
        const auto& k = j.at("intrinsics");
        p.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                        k.at("cx").get<double>(), k.at("cy").get<double>()};
        for (const auto& fr : j.at("frames")) {
            geom::Extrinsics e;
            const auto& rm = fr.at("R");
            const auto& tv = fr.at("t");
            if (rm.size() != 9 || tv.size() != 3) {
                throw std::invalid_argument("pose frame needs 9 R values and 3 t values");
            }
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) e.rotation(r, c) = rm[r * 3 + c].get<double>();
                e.translation(r) = tv[r].get<double>();
            }
            p.frames.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error("'" + path + "': malformed pose document: " + e.what(), 0);
    }
    geom::validate(p.intrinsics);
    for (const auto& e : p.frames) geom::validate(e);
    return p;
}

void write_poses(const std::string& path, const PoseFile& p) {
    nlohmann::json j;
    j["intrinsics"] = {{"fx", p.intrinsics.fx},
                       {"fy", p.intrinsics.fy},
                       {"cx", p.intrinsics.cx},
                       {"cy", p.intrinsics.cy}};
    j["frames"] = nlohmann::json::array();
    for (const auto& e : p.frames) {
        nlohmann::json fr;
        fr["R"] = nlohmann::json::array();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) fr["R"].push_back(e.rotation(r, c));
        }
        fr["t"] = {e.translation.x(), e.translation.y(), e.translation.z()};
        j["frames"].push_back(fr);
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing", 0);
    out << j.dump(2) << "\n";
    if (!out) throw io_error("write failure on '" + path + "'", 0);
}

}  // namespace ta::io
