#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "meshflow/flow.hpp"
#include "meshflow/image.hpp"
#include "meshflow/model3d.hpp"
#include "meshflow/neuralmath.hpp"
#include "meshflow/raster.hpp"
#include "meshflow/temporal.hpp"

namespace meshflow {

enum class IoErrorKind { bad_magic, truncated, dimension_overflow, malformed, file };

inline const char* to_string(IoErrorKind k) {
    switch (k) {
        case IoErrorKind::bad_magic: return "bad magic";
        case IoErrorKind::truncated: return "truncated payload";
        case IoErrorKind::dimension_overflow: return "dimension overflow";
        case IoErrorKind::malformed: return "malformed";
        case IoErrorKind::file: return "file error";
    }
    return "unknown";
}

class IoError : public Error {
public:
    IoError(IoErrorKind kind, const std::string& what)
        : Error(std::string(meshflow::to_string(kind)) + ": " + what), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

private:
    IoErrorKind kind_;
};

inline constexpr std::uint32_t kMaxSide = 1u << 16;

// ---------------------------------------------------------------------------
// Little-endian byte helpers.

namespace io {

class Writer {
public:
    void bytes(std::string_view s) { buf_.append(s); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32(double v) { f32(static_cast<float>(v)); }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, const char* format) : data_(data), format_(format) {}

    void magic(std::string_view expected) {
        if (data_.size() < expected.size() || data_.substr(0, expected.size()) != expected)
            throw IoError(IoErrorKind::bad_magic, std::string(format_) + ": expected magic \"" +
                                                      std::string(expected) + "\"");
        pos_ = expected.size();
    }
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_)
            throw IoError(IoErrorKind::truncated, std::string(format_) + ": needs " + std::to_string(n) +
                                                      " more bytes, " + std::to_string(data_.size() - pos_) +
                                                      " available");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::uint32_t side(const char* what) {
        const std::uint32_t v = u32();
        if (v > kMaxSide)
            throw IoError(IoErrorKind::dimension_overflow,
                          std::string(format_) + ": " + what + " = " + std::to_string(v) + " exceeds 65536");
        return v;
    }
    void finish() const {
        if (pos_ != data_.size())
            throw IoError(IoErrorKind::malformed, std::string(format_) + ": " +
                                                      std::to_string(data_.size() - pos_) + " trailing bytes");
    }
    std::size_t position() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    std::string_view data() const { return data_; }

private:
    std::string_view data_;
    const char* format_;
    std::size_t pos_ = 0;
};

// Netpbm-style ASCII header token, skipping whitespace and '#' comments.
inline std::string header_token(Reader& r, const char* format) {
    const std::string_view d = r.data();
    std::size_t p = r.position();
    for (;;) {
        while (p < d.size() && std::isspace(static_cast<unsigned char>(d[p]))) ++p;
        if (p < d.size() && d[p] == '#') {
            while (p < d.size() && d[p] != '\n') ++p;
            continue;
        }
        break;
    }
    const std::size_t start = p;
    while (p < d.size() && !std::isspace(static_cast<unsigned char>(d[p]))) ++p;
    if (start == p) throw IoError(IoErrorKind::truncated, std::string(format) + ": header ends early");
    r.seek(p);
    return std::string(d.substr(start, p - start));
}

inline std::uint32_t header_side(Reader& r, const char* format, const char* what) {
    const std::string tok = header_token(r, format);
    std::uint64_t v = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') throw IoError(IoErrorKind::malformed, std::string(format) + ": bad " + what);
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
        if (v > kMaxSide)
            throw IoError(IoErrorKind::dimension_overflow, std::string(format) + ": " + what + " exceeds 65536");
    }
    return static_cast<std::uint32_t>(v);
}

// Exactly one whitespace byte separates a Netpbm header from its raster.
inline void header_end(Reader& r, const char* format) {
    const std::string_view d = r.data();
    const std::size_t p = r.position();
    if (p >= d.size()) throw IoError(IoErrorKind::truncated, std::string(format) + ": missing raster");
    if (!std::isspace(static_cast<unsigned char>(d[p])))
        throw IoError(IoErrorKind::malformed, std::string(format) + ": header not terminated by whitespace");
    r.seek(p + 1);
}

}  // namespace io

// ---------------------------------------------------------------------------
// Files.

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::file, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

/// Writes to a sibling temporary and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(IoErrorKind::file, "cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError(IoErrorKind::file, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(IoErrorKind::file, "cannot rename " + tmp.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// PPM P6, 8-bit.

/// Round-half-up quantization of a [0,1] value (clamped) to 0..255.
inline std::uint8_t quantize_u8(double v) {
    const double s = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(s);
}

inline std::string encode_ppm(const Image& img) {
    if (img.channels != 3) throw ArgumentError("ppm: image must have 3 channels");
    io::Writer w;
    w.bytes("P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
    for (double v : img.data) w.u8(quantize_u8(v));
    return w.take();
}

inline Image decode_ppm(std::string_view bytes) {
    io::Reader r(bytes, "ppm");
    r.magic("P6");
    const auto w = io::header_side(r, "ppm", "width");
    const auto h = io::header_side(r, "ppm", "height");
    const std::string maxval = io::header_token(r, "ppm");
    if (maxval != "255") throw IoError(IoErrorKind::malformed, "ppm: only maxval 255 is supported");
    io::header_end(r, "ppm");
    const std::uint64_t n = std::uint64_t{w} * h * 3;
    r.need(n);
    Image img(static_cast<int>(w), static_cast<int>(h), 3);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = r.u8() / 255.0;
    r.finish();
    return img;
}

// ---------------------------------------------------------------------------
// PFM: `Pf` single channel or `PF` RGB, little-endian (negative scale),
// scanlines stored bottom to top.

inline std::string encode_pfm(const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw ArgumentError("pfm: image must have 1 or 3 channels");
    io::Writer w;
    w.bytes(std::string(img.channels == 1 ? "Pf" : "PF") + "\n" + std::to_string(img.width) + " " +
            std::to_string(img.height) + "\n-1.0\n");
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) w.f32(img.at(x, y, c));
    return w.take();
}

inline Image decode_pfm(std::string_view bytes) {
    io::Reader r(bytes, "pfm");
    int channels = 0;
    if (bytes.substr(0, 2) == "Pf") {
        channels = 1;
    } else if (bytes.substr(0, 2) == "PF") {
        channels = 3;
    } else {
        throw IoError(IoErrorKind::bad_magic, "pfm: expected magic \"Pf\" or \"PF\"");
    }
    r.seek(2);
    const auto w = io::header_side(r, "pfm", "width");
    const auto h = io::header_side(r, "pfm", "height");
    const std::string scale_tok = io::header_token(r, "pfm");
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw IoError(IoErrorKind::malformed, "pfm: bad scale `" + scale_tok + "`");
    }
    if (scale == 0.0 || !std::isfinite(scale)) throw IoError(IoErrorKind::malformed, "pfm: scale must be nonzero");
    io::header_end(r, "pfm");
    r.need(std::uint64_t{w} * h * static_cast<std::uint64_t>(channels) * 4);
    const bool big_endian = scale > 0.0;
    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < channels; ++c) {
                std::uint32_t bits = r.u32();
                if (big_endian) bits = __builtin_bswap32(bits);
                img.at(x, y, c) = std::bit_cast<float>(bits);
            }
    r.finish();
    return img;
}

/// Depth buffer as a single-channel image; empty pixels keep -inf.
inline Image depth_image(const RasterBuffers& b) {
    Image img(b.width, b.height, 1);
    img.data = b.depth;
    return img;
}

// ---------------------------------------------------------------------------
// FLW3 flow field.

inline std::string encode_flow(const FlowField& f) {
    if (static_cast<std::uint32_t>(f.width) > kMaxSide || static_cast<std::uint32_t>(f.height) > kMaxSide)
        throw IoError(IoErrorKind::dimension_overflow, "flw3: side exceeds 65536");
    io::Writer w;
    w.bytes("FLW3");
    w.u32(static_cast<std::uint32_t>(f.width));
    w.u32(static_cast<std::uint32_t>(f.height));
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
        w.f32(f.vectors[i].x);
        w.f32(f.vectors[i].y);
        w.f32(f.vectors[i].z);
        w.u8(f.valid[i] ? 1 : 0);
    }
    return w.take();
}

inline FlowField decode_flow(std::string_view bytes) {
    io::Reader r(bytes, "flw3");
    r.magic("FLW3");
    const auto w = r.side("width");
    const auto h = r.side("height");
    r.need(std::uint64_t{w} * h * 13);
    FlowField f(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
        const double x = r.f32(), y = r.f32(), z = r.f32();
        f.vectors[i] = {x, y, z};
        const std::uint8_t v = r.u8();
        if (v > 1) throw IoError(IoErrorKind::malformed, "flw3: valid byte must be 0 or 1");
        f.valid[i] = v;
    }
    r.finish();
    return f;
}

// ---------------------------------------------------------------------------
// FMAP feature map.

inline std::string encode_feature_map(const FeatureMap& f) {
    io::Writer w;
    w.bytes("FMAP");
    w.u32(static_cast<std::uint32_t>(f.height));
    w.u32(static_cast<std::uint32_t>(f.width));
    w.u32(static_cast<std::uint32_t>(f.channels));
    for (double v : f.values) w.f32(v);
    return w.take();
}

inline FeatureMap decode_feature_map(std::string_view bytes) {
    io::Reader r(bytes, "fmap");
    r.magic("FMAP");
    const auto h = r.side("height");
    const auto w = r.side("width");
    const auto c = r.side("channels");
    r.need(std::uint64_t{h} * w * c * 4);
    FeatureMap f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (auto& v : f.values) v = r.f32();
    r.finish();
    return f;
}

// ---------------------------------------------------------------------------
// MM3D morphable model and COEF coefficients.

inline std::string encode_model(const MorphableModel& m) {
    m.check();
    io::Writer w;
    w.bytes("MM3D");
    w.u32(static_cast<std::uint32_t>(m.mean_shape.size()));
    w.u32(static_cast<std::uint32_t>(m.triangles.size()));
    w.u32(static_cast<std::uint32_t>(m.id_dims));
    w.u32(static_cast<std::uint32_t>(m.exp_dims));
    for (const auto& v : m.mean_shape) {
        w.f32(v.x);
        w.f32(v.y);
        w.f32(v.z);
    }
    for (double v : m.id_basis) w.f32(v);
    for (double v : m.exp_basis) w.f32(v);
    for (const auto& t : m.triangles)
        for (auto i : t) w.u32(i);
    return w.take();
}

inline MorphableModel decode_model(std::string_view bytes) {
    io::Reader r(bytes, "mm3d");
    r.magic("MM3D");
    const std::uint64_t n = r.u32(), m = r.u32(), kid = r.u32(), kexp = r.u32();
    // 128-bit size arithmetic: 3 * N * K can exceed 64 bits for hostile headers.
    const unsigned __int128 payload =
        (static_cast<unsigned __int128>(3 * n) * (1 + kid + kexp) + static_cast<unsigned __int128>(3 * m)) * 4;
    if (payload > r.data().size()) r.need(std::numeric_limits<std::uint64_t>::max());
    r.need(static_cast<std::uint64_t>(payload));
    MorphableModel model;
    model.id_dims = kid;
    model.exp_dims = kexp;
    model.mean_shape.resize(n);
    for (auto& v : model.mean_shape) {
        const double x = r.f32(), y = r.f32(), z = r.f32();
        v = {x, y, z};
    }
    model.id_basis.resize(3 * n * kid);
    for (auto& v : model.id_basis) v = r.f32();
    model.exp_basis.resize(3 * n * kexp);
    for (auto& v : model.exp_basis) v = r.f32();
    model.triangles.resize(m);
    for (auto& t : model.triangles)
        for (auto& i : t) i = r.u32();
    r.finish();
    try {
        model.check();
    } catch (const DimensionError& e) {
        throw IoError(IoErrorKind::malformed, std::string("mm3d: ") + e.what());
    }
    return model;
}

inline std::string encode_coefficients(const Coefficients& c) {
    io::Writer w;
    w.bytes("COEF");
    w.u32(static_cast<std::uint32_t>(c.alpha_id.size()));
    w.u32(static_cast<std::uint32_t>(c.alpha_exp.size()));
    for (double v : c.alpha_id) w.f32(v);
    for (double v : c.alpha_exp) w.f32(v);
    return w.take();
}

inline Coefficients decode_coefficients(std::string_view bytes) {
    io::Reader r(bytes, "coef");
    r.magic("COEF");
    const std::uint64_t kid = r.u32(), kexp = r.u32();
    r.need((kid + kexp) * 4);
    Coefficients c;
    c.alpha_id.resize(kid);
    for (auto& v : c.alpha_id) v = r.f32();
    c.alpha_exp.resize(kexp);
    for (auto& v : c.alpha_exp) v = r.f32();
    r.finish();
    return c;
}

// ---------------------------------------------------------------------------
// Text formats: OBJ subset, per-vertex texture, camera pose.

namespace io {

inline double parse_real(const std::string& tok, const char* format, int lineno) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size() || !std::isfinite(v))
        throw IoError(IoErrorKind::malformed,
                      std::string(format) + " line " + std::to_string(lineno) + ": bad number `" + tok + "`");
    return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> toks;
        for (std::string t; ls >> t;) toks.push_back(std::move(t));
        if (toks.empty() || toks.front().front() == '#') continue;
        fn(toks, lineno);
    }
}

}  // namespace io

/// `v x y z` and `f i j k` (1-based) records only.
inline Mesh decode_obj(std::string_view text) {
    Mesh mesh;
    io::for_each_line(text, [&](const std::vector<std::string>& t, int lineno) {
        auto fail = [&](const std::string& why) {
            throw IoError(IoErrorKind::malformed, "obj line " + std::to_string(lineno) + ": " + why);
        };
        if (t[0] == "v") {
            if (t.size() != 4) fail("vertex needs 3 coordinates");
            mesh.vertices.push_back({io::parse_real(t[1], "obj", lineno), io::parse_real(t[2], "obj", lineno),
                                     io::parse_real(t[3], "obj", lineno)});
        } else if (t[0] == "f") {
            if (t.size() != 4) fail("only triangular faces are supported");
            Triangle tri{};
            for (std::size_t k = 0; k < 3; ++k) {
                const std::string& s = t[k + 1];
                if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) fail("bad index `" + s + "`");
                const unsigned long long idx = std::stoull(s);
                if (idx == 0 || idx > 0xFFFFFFFFull) fail("index out of range");
                tri[k] = static_cast<std::uint32_t>(idx - 1);
            }
            mesh.triangles.push_back(tri);
        } else {
            fail("unsupported directive `" + t[0] + "`");
        }
    });
    try {
        mesh.check();
    } catch (const DimensionError& e) {
        throw IoError(IoErrorKind::malformed, std::string("obj: ") + e.what());
    }
    return mesh;
}

inline std::string encode_obj(const Mesh& mesh) {
    std::string out;
    for (const auto& v : mesh.vertices)
        out += "v " + format_real(v.x) + " " + format_real(v.y) + " " + format_real(v.z) + "\n";
    for (const auto& t : mesh.triangles)
        out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
    return out;
}

/// One `r g b` line per vertex.
inline Texture decode_texture(std::string_view text) {
    Texture tex;
    io::for_each_line(text, [&](const std::vector<std::string>& t, int lineno) {
        if (t.size() != 3)
            throw IoError(IoErrorKind::malformed, "texture line " + std::to_string(lineno) + ": expected `r g b`");
        tex.colors.push_back({io::parse_real(t[0], "texture", lineno), io::parse_real(t[1], "texture", lineno),
                              io::parse_real(t[2], "texture", lineno)});
    });
    return tex;
}

inline std::string encode_texture(const Texture& tex) {
    std::string out;
    for (const auto& c : tex.colors) out += format_real(c[0]) + " " + format_real(c[1]) + " " + format_real(c[2]) + "\n";
    return out;
}

/// Keyed lines: `scale f`, `rotation r00 .. r22` (row-major), `translation tx ty`.
inline CameraPose decode_pose(std::string_view text) {
    CameraPose pose;
    bool have_scale = false, have_rot = false, have_trans = false;
    io::for_each_line(text, [&](const std::vector<std::string>& t, int lineno) {
        auto fail = [&](const std::string& why) {
            throw IoError(IoErrorKind::malformed, "pose line " + std::to_string(lineno) + ": " + why);
        };
        if (t[0] == "scale") {
            if (t.size() != 2) fail("expected `scale f`");
            pose.scale = io::parse_real(t[1], "pose", lineno);
            have_scale = true;
        } else if (t[0] == "rotation") {
            if (t.size() != 10) fail("rotation needs 9 values");
            for (std::size_t k = 0; k < 9; ++k) pose.rotation.m[k] = io::parse_real(t[k + 1], "pose", lineno);
            have_rot = true;
        } else if (t[0] == "translation") {
            if (t.size() != 3) fail("expected `translation tx ty`");
            pose.tx = io::parse_real(t[1], "pose", lineno);
            pose.ty = io::parse_real(t[2], "pose", lineno);
            have_trans = true;
        } else {
            fail("unknown key `" + t[0] + "`");
        }
    });
    if (!have_scale || !have_rot || !have_trans)
        throw IoError(IoErrorKind::malformed, "pose: scale, rotation and translation are all required");
    return pose;
}

inline std::string encode_pose(const CameraPose& pose) {
    std::string out = "scale " + format_real(pose.scale) + "\nrotation";
    for (double v : pose.rotation.m) out += " " + format_real(v);
    out += "\ntranslation " + format_real(pose.tx) + " " + format_real(pose.ty) + "\n";
    return out;
}

}  // namespace meshflow
