#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "meshflow/core.hpp"
#include "meshflow/image.hpp"
#include "meshflow/model3d.hpp"
#include "meshflow/parallel.hpp"

namespace meshflow {

/// Per-vertex RGB payload in [0,1].
struct Texture {
    std::vector<std::array<double, 3>> colors;

    void check(std::size_t vertex_count) const {
        if (colors.size() != vertex_count)
            throw DimensionError("texture: " + std::to_string(colors.size()) + " colors for " +
                                 std::to_string(vertex_count) + " vertices");
        for (const auto& c : colors)
            for (double v : c)
                if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("texture: color component outside [0,1]");
    }

    static Texture uniform(std::size_t n, std::array<double, 3> rgb) { return {std::vector(n, rgb)}; }
};

using Barycentric = std::array<double, 3>;

inline constexpr double kEmptyDepth = -std::numeric_limits<double>::infinity();
inline constexpr std::int32_t kNoTriangle = -1;

struct RasterBuffers {
    int width = 0;
    int height = 0;
    Image color;
    std::vector<double> depth;
    std::vector<std::int32_t> tri_index;
    std::vector<Barycentric> bary;

    RasterBuffers() = default;
    RasterBuffers(int w, int h)
        : width(w), height(h), color(w, h, 3), depth(color.pixel_count(), kEmptyDepth),
          tri_index(color.pixel_count(), kNoTriangle), bary(color.pixel_count(), Barycentric{0, 0, 0}) {}

    std::size_t offset(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    bool covered(int x, int y) const { return tri_index[offset(x, y)] != kNoTriangle; }

    std::optional<std::size_t> triangle(int x, int y) const {
        const auto t = tri_index[offset(x, y)];
        if (t == kNoTriangle) return std::nullopt;
        return static_cast<std::size_t>(t);
    }
    double depth_at(int x, int y) const { return depth[offset(x, y)]; }
    const Barycentric& bary_at(int x, int y) const { return bary[offset(x, y)]; }

    std::size_t coverage() const {
        return static_cast<std::size_t>(std::count_if(tri_index.begin(), tri_index.end(),
                                                      [](std::int32_t t) { return t != kNoTriangle; }));
    }
};

/// Affine interpolation v2 + l0*(v0 - v2) + l1*(v1 - v2). Reproduces a
/// constant vertex attribute bit-exactly, which the flow and depth paths rely on.
inline double interpolate(const Barycentric& l, double v0, double v1, double v2) {
    return v2 + l[0] * (v0 - v2) + l[1] * (v1 - v2);
}

inline Vec3 interpolate(const Barycentric& l, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    return {interpolate(l, v0.x, v1.x, v2.x), interpolate(l, v0.y, v1.y, v2.y), interpolate(l, v0.z, v1.z, v2.z)};
}

namespace detail {

inline double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Barycentrics of (px, py) in triangle (a, b, c) using edge functions with an
// inclusive >= 0 test. Returns nullopt when outside or when the triangle is
// degenerate.
inline std::optional<Barycentric> edge_barycentric(const Vec3& a, const Vec3& b, const Vec3& c, double px,
                                                   double py) {
    double area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
    if (area == 0.0 || !std::isfinite(area)) return std::nullopt;
    double w0 = edge(b.x, b.y, c.x, c.y, px, py);
    double w1 = edge(c.x, c.y, a.x, a.y, px, py);
    double w2 = edge(a.x, a.y, b.x, b.y, px, py);
    if (area < 0.0) {
        area = -area;
        w0 = -w0;
        w1 = -w1;
        w2 = -w2;
    }
    if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) return std::nullopt;
    return Barycentric{w0 / area, w1 / area, w2 / area};
}

}  // namespace detail

/// Z-buffered rasterization of an image-space mesh. Pixel centres sit at
/// integer coordinates. The front-most (largest depth) triangle wins; equal
/// depths keep the lower triangle id; zero-area triangles are skipped.
inline RasterBuffers rasterize(const Mesh& mesh, const Texture& texture, int width, int height) {
    if (width <= 0 || height <= 0) throw ArgumentError("rasterize: image size must be positive");
    mesh.check();
    texture.check(mesh.vertex_count());

    RasterBuffers out(width, height);

    struct Setup {
        double min_x, max_x, min_y, max_y;
        bool skip;
    };
    std::vector<Setup> setup(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const double area = detail::edge(a.x, a.y, b.x, b.y, c.x, c.y);
        setup[t] = {std::min({a.x, b.x, c.x}), std::max({a.x, b.x, c.x}), std::min({a.y, b.y, c.y}),
                    std::max({a.y, b.y, c.y}), area == 0.0 || !std::isfinite(area)};
    }

    parallel_rows(height, [&](int row_begin, int row_end) {
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const Setup& s = setup[t];
            if (s.skip) continue;
            const int y0 = std::max(row_begin, static_cast<int>(std::ceil(s.min_y)));
            const int y1 = std::min(row_end - 1, static_cast<int>(std::floor(s.max_y)));
            const int x0 = std::max(0, static_cast<int>(std::ceil(s.min_x)));
            const int x1 = std::min(width - 1, static_cast<int>(std::floor(s.max_x)));
            if (y0 > y1 || x0 > x1) continue;
            const auto& tri = mesh.triangles[t];
            const Vec3& a = mesh.vertices[tri[0]];
            const Vec3& b = mesh.vertices[tri[1]];
            const Vec3& c = mesh.vertices[tri[2]];
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const auto l = detail::edge_barycentric(a, b, c, x, y);
                    if (!l) continue;
                    const double z = interpolate(*l, a.z, b.z, c.z);
                    const std::size_t o = out.offset(x, y);
                    if (!(z > out.depth[o])) continue;
                    out.depth[o] = z;
                    out.tri_index[o] = static_cast<std::int32_t>(t);
                    out.bary[o] = *l;
                }
            }
        }
        for (int y = row_begin; y < row_end; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t o = out.offset(x, y);
                if (out.tri_index[o] == kNoTriangle) continue;
                const auto& tri = mesh.triangles[static_cast<std::size_t>(out.tri_index[o])];
                for (int ch = 0; ch < 3; ++ch) {
                    const auto cc = static_cast<std::size_t>(ch);
                    const double v = interpolate(out.bary[o], texture.colors[tri[0]][cc], texture.colors[tri[1]][cc],
                                                 texture.colors[tri[2]][cc]);
                    out.color.at(x, y, ch) = std::clamp(v, 0.0, 1.0);
                }
            }
        }
    });
    return out;
}

/// Binary facial mask: 1 where a triangle was rasterized, 0 elsewhere.
inline Image facial_mask(const RasterBuffers& buffers) {
    Image mask(buffers.width, buffers.height, 1);
    for (std::size_t i = 0; i < buffers.tri_index.size(); ++i)
        mask.data[i] = buffers.tri_index[i] != kNoTriangle ? 1.0 : 0.0;
    return mask;
}

enum class HintMode {
    swap,     // caller supplies the pose frame
    reenact,  // caller supplies the identity frame
};

/// source * (1 - mask), with a single-channel mask broadcast over channels.
/// `mode` only records which frame the caller is expected to pass.
inline Image appearance_hint(const Image& source, const Image& mask, HintMode mode = HintMode::swap) {
    (void)mode;
    if (source.width != mask.width || source.height != mask.height)
        throw DimensionError("appearance_hint: source and mask sizes differ");
    if (mask.channels != 1 && mask.channels != source.channels)
        throw DimensionError("appearance_hint: mask must have 1 channel or match the source");
    Image out(source.width, source.height, source.channels);
    for (int y = 0; y < source.height; ++y)
        for (int x = 0; x < source.width; ++x)
            for (int c = 0; c < source.channels; ++c) {
                const double m = mask.at(x, y, mask.channels == 1 ? 0 : c);
                out.at(x, y, c) = source.at(x, y, c) * (1.0 - m);
            }
    return out;
}

}  // namespace meshflow
