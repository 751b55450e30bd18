#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "meshflow/model3d.hpp"
#include "meshflow/raster.hpp"
#include "meshflow/sampler.hpp"

namespace meshflow {

/// Unit icosphere: 20 * 4^subdivisions triangles, counter-clockwise when seen
/// from outside.
inline Mesh icosphere(int subdivisions) {
    if (subdivisions < 0 || subdivisions > 7) throw ArgumentError("icosphere: subdivisions must be in [0,7]");
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                  {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                   {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                   {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    auto normalize = [](Vec3 v) { return (1.0 / norm(v)) * v; };
    for (auto& v : m.vertices) v = normalize(v);
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            if (auto it = mid.find(key); it != mid.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(m.vertices.size());
            m.vertices.push_back(normalize(0.5 * (m.vertices[a] + m.vertices[b])));
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(m.triangles.size() * 4);
        for (const auto& t : m.triangles) {
            const auto a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
            next.push_back({t[0], a, c});
            next.push_back({t[1], b, a});
            next.push_back({t[2], c, b});
            next.push_back({a, b, c});
        }
        m.triangles = std::move(next);
    }
    return m;
}

enum class SynthKind { static_scene, translate, rotate };

struct SynthOptions {
    SynthKind kind = SynthKind::static_scene;
    int frames = 10;
    std::uint64_t seed = 0;
    int width = 64;
    int height = 64;
    int subdivisions = 2;
    // Per-frame step: pixels along x for translate, degrees about the image
    // y axis for rotate.
    double step = 1.0;
};

/// A model-space mesh, its per-vertex texture and one camera pose per frame.
struct SynthSequence {
    Mesh mesh;
    Texture texture;
    std::vector<CameraPose> poses;
};

namespace detail {

// Snap to a 2^-20 grid so that image-plane translations by dyadic steps are
// exact in double precision.
inline double snap(double v) { return std::ldexp(std::round(std::ldexp(v, 20)), -20); }

}  // namespace detail

/// Seeded icosphere sequence. The seed picks the sphere orientation and the
/// texture gradient; colors are affine in the model x/y coordinates only, so
/// renders under an identity rotation are affine in image x/y.
inline SynthSequence make_sequence(const SynthOptions& opt) {
    if (opt.frames < 1) throw ArgumentError("synth: need at least one frame");
    if (opt.width <= 0 || opt.height <= 0) throw ArgumentError("synth: image size must be positive");
    std::mt19937_64 rng(opt.seed);
    auto unit = [&] { return 2.0 * detail::uniform_unit(rng) - 1.0; };

    SynthSequence seq;
    seq.mesh = icosphere(opt.subdivisions);
    const Mat3 orient = axis_angle(unit(), unit(), unit() + 3.0, std::numbers::pi * unit());
    for (auto& v : seq.mesh.vertices) {
        const Vec3 r = orient * v;
        v = {detail::snap(r.x), detail::snap(r.y), detail::snap(r.z)};
    }

    std::array<std::array<double, 2>, 3> grad{};
    for (auto& g : grad) {
        g = {unit(), unit()};
        const double n = std::hypot(g[0], g[1]);
        if (n > 0.0) g = {g[0] / n, g[1] / n};
    }
    seq.texture.colors.reserve(seq.mesh.vertices.size());
    for (const auto& v : seq.mesh.vertices) {
        std::array<double, 3> c{};
        for (std::size_t ch = 0; ch < 3; ++ch)
            c[ch] = std::clamp(0.5 + 0.3 * (grad[ch][0] * v.x + grad[ch][1] * v.y), 0.0, 1.0);
        seq.texture.colors.push_back(c);
    }

    // Power-of-two scale keeps scale * vertex exact.
    const double scale = std::exp2(std::floor(std::log2(0.3 * std::min(opt.width, opt.height))));
    const double cx = std::round(opt.width - 1.0) / 2.0;
    const double cy = std::round(opt.height - 1.0) / 2.0;
    for (int k = 0; k < opt.frames; ++k) {
        CameraPose pose;
        pose.scale = scale;
        pose.tx = cx;
        pose.ty = cy;
        const double offset = k - (opt.frames - 1) / 2.0;
        switch (opt.kind) {
            case SynthKind::static_scene:
                break;
            case SynthKind::translate:
                pose.tx = cx + detail::snap(offset * opt.step);
                break;
            case SynthKind::rotate:
                pose.rotation = axis_angle(0.0, 1.0, 0.0, offset * opt.step * std::numbers::pi / 180.0);
                break;
        }
        seq.poses.push_back(pose);
    }
    return seq;
}

}  // namespace meshflow
