#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "meshflow/core.hpp"
#include "meshflow/model3d.hpp"
#include "meshflow/parallel.hpp"
#include "meshflow/raster.hpp"

namespace meshflow {

/// Dense mesh-derived flow from frame t back to frame t-1. `vectors` holds
/// (dx px, dy px, dz depth) and is zero wherever `valid` is 0.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<Vec3> vectors;
    std::vector<std::uint8_t> valid;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h), vectors(static_cast<std::size_t>(w) * static_cast<std::size_t>(h)),
          valid(vectors.size(), 0) {}

    std::size_t offset(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    const Vec3& at(int x, int y) const { return vectors[offset(x, y)]; }
    bool is_valid(int x, int y) const { return valid[offset(x, y)] != 0; }
    std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
    }

    friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Non-owning view of two consecutive image-space frames sharing topology.
/// The referenced meshes and buffers must outlive the pair.
class FramePair {
public:
    FramePair(const Mesh& mesh_t, const Mesh& mesh_tm1, const RasterBuffers& buffers_t,
              const RasterBuffers& buffers_tm1)
        : mesh_t_(&mesh_t), mesh_tm1_(&mesh_tm1), buffers_t_(&buffers_t), buffers_tm1_(&buffers_tm1) {
        if (mesh_t.vertices.size() != mesh_tm1.vertices.size())
            throw CorrespondenceError("frame pair: vertex counts differ (" + std::to_string(mesh_t.vertices.size()) +
                                      " vs " + std::to_string(mesh_tm1.vertices.size()) + ")");
        if (mesh_t.triangles != mesh_tm1.triangles)
            throw CorrespondenceError("frame pair: triangle lists differ");
        if (buffers_t.width != buffers_tm1.width || buffers_t.height != buffers_tm1.height)
            throw CorrespondenceError("frame pair: raster sizes differ");
    }

    const Mesh& mesh_t() const { return *mesh_t_; }
    const Mesh& mesh_tm1() const { return *mesh_tm1_; }
    const RasterBuffers& buffers_t() const { return *buffers_t_; }
    const RasterBuffers& buffers_tm1() const { return *buffers_tm1_; }

private:
    const Mesh* mesh_t_;
    const Mesh* mesh_tm1_;
    const RasterBuffers* buffers_t_;
    const RasterBuffers* buffers_tm1_;
};

namespace detail {

inline std::size_t covered_triangle(const RasterBuffers& buffers, Pixel p, const char* what) {
    if (!buffers.in_bounds(p.x, p.y)) throw NotCoveredError(std::string(what) + ": pixel outside the image");
    const auto t = buffers.triangle(p.x, p.y);
    if (!t)
        throw NotCoveredError(std::string(what) + ": pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                              ") is not covered");
    return *t;
}

}  // namespace detail

/// Barycentric blend of per-vertex displacements V^t - V^{t-1} over the
/// triangle recorded at `p` in frame t.
inline Vec3 vertex_flow(const FramePair& pair, Pixel p) {
    const std::size_t t = detail::covered_triangle(pair.buffers_t(), p, "vertex_flow");
    const auto& tri = pair.mesh_t().triangles[t];
    const auto& vt = pair.mesh_t().vertices;
    const auto& vp = pair.mesh_tm1().vertices;
    return interpolate(pair.buffers_t().bary_at(p.x, p.y), vt[tri[0]] - vp[tri[0]], vt[tri[1]] - vp[tri[1]],
                       vt[tri[2]] - vp[tri[2]]);
}

/// Depth of the surface point seen at `p`, interpolated from the frame's own
/// triangle vertices.
inline double query_depth(const Mesh& mesh, const RasterBuffers& buffers, Pixel p) {
    const std::size_t t = detail::covered_triangle(buffers, p, "query_depth");
    const auto& tri = mesh.triangles[t];
    return interpolate(buffers.bary_at(p.x, p.y), mesh.vertices[tri[0]].z, mesh.vertices[tri[1]].z,
                       mesh.vertices[tri[2]].z);
}

/// Visibility in frame t: interpolated depth at least the stored depth minus
/// eps. Uncovered pixels are invisible.
inline bool visibility_t(const Mesh& mesh, const RasterBuffers& buffers, Pixel p, double eps) {
    if (!buffers.in_bounds(p.x, p.y) || !buffers.covered(p.x, p.y)) return false;
    return query_depth(mesh, buffers, p) >= buffers.depth_at(p.x, p.y) - eps;
}

/// Triangle ids binned by the unit pixel cell [x, x+1] x [y, y+1] their
/// bounding box touches.
class TriangleBins {
public:
    TriangleBins(const Mesh& mesh, int width, int height)
        : width_(width), height_(height), cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const auto& tri = mesh.triangles[t];
            const Vec3& a = mesh.vertices[tri[0]];
            const Vec3& b = mesh.vertices[tri[1]];
            const Vec3& c = mesh.vertices[tri[2]];
            const double lo_x = std::min({a.x, b.x, c.x}), hi_x = std::max({a.x, b.x, c.x});
            const double lo_y = std::min({a.y, b.y, c.y}), hi_y = std::max({a.y, b.y, c.y});
            if (!(hi_x >= 0.0 && hi_y >= 0.0 && lo_x <= width - 1 && lo_y <= height - 1)) continue;
            const int x0 = std::max(0, static_cast<int>(std::floor(lo_x)) - 1);
            const int x1 = std::min(width - 1, static_cast<int>(std::floor(hi_x)));
            const int y0 = std::max(0, static_cast<int>(std::floor(lo_y)) - 1);
            const int y1 = std::min(height - 1, static_cast<int>(std::floor(hi_y)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) cells_[offset(x, y)].push_back(static_cast<std::uint32_t>(t));
        }
    }

    const std::vector<std::uint32_t>& cell(int x, int y) const { return cells_[offset(x, y)]; }

private:
    std::size_t offset(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<std::vector<std::uint32_t>> cells_;
};

/// Continuous-position depth lookup for one rasterized frame.
///
/// Inside the covered region (all four neighbouring pixels covered) the depth
/// buffer is interpolated bilinearly. On a silhouette, where a pixel-centre
/// depth can sit far from the surface at the position, the front-most
/// triangle containing the position decides; if none contains it, the
/// nearest covered neighbour's stored depth is used.
class DepthLookup {
public:
    DepthLookup(const Mesh& mesh, const RasterBuffers& buffers)
        : mesh_(&mesh), buffers_(&buffers), bins_(mesh, buffers.width, buffers.height) {}

    /// nullopt outside the image or when no neighbouring pixel is covered.
    std::optional<double> sample(double x, double y) const {
        const RasterBuffers& b = *buffers_;
        if (!(x >= 0.0 && y >= 0.0 && x <= b.width - 1 && y <= b.height - 1)) return std::nullopt;
        const int x0 = static_cast<int>(std::floor(x));
        const int y0 = static_cast<int>(std::floor(y));
        const int x1 = std::min(x0 + 1, b.width - 1);
        const int y1 = std::min(y0 + 1, b.height - 1);
        const double fx = x - x0;
        const double fy = y - y0;
        const Pixel n[4] = {{x0, y0}, {x1, y0}, {x0, y1}, {x1, y1}};
        bool all = true, any = false;
        for (const auto& q : n) {
            all = all && b.covered(q.x, q.y);
            any = any || b.covered(q.x, q.y);
        }
        if (all) {
            const double top = (1.0 - fx) * b.depth_at(x0, y0) + fx * b.depth_at(x1, y0);
            const double bottom = (1.0 - fx) * b.depth_at(x0, y1) + fx * b.depth_at(x1, y1);
            return (1.0 - fy) * top + fy * bottom;
        }
        if (!any) return std::nullopt;

        std::optional<double> front;
        for (auto t : bins_.cell(x0, y0)) {
            const auto& tri = mesh_->triangles[t];
            const Vec3& a = mesh_->vertices[tri[0]];
            const Vec3& bv = mesh_->vertices[tri[1]];
            const Vec3& c = mesh_->vertices[tri[2]];
            const auto l = detail::edge_barycentric(a, bv, c, x, y);
            if (!l) continue;
            const double z = interpolate(*l, a.z, bv.z, c.z);
            if (!front || z > *front) front = z;
        }
        if (front) return front;

        const Pixel* best = nullptr;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (const auto& q : n) {
            if (!b.covered(q.x, q.y)) continue;
            const double d2 = (q.x - x) * (q.x - x) + (q.y - y) * (q.y - y);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = &q;
            }
        }
        return b.depth_at(best->x, best->y);
    }

private:
    const Mesh* mesh_;
    const RasterBuffers* buffers_;
    TriangleBins bins_;
};

/// Visibility in frame t-1 of the warped point q = Q^t - W (continuous x, y).
inline bool visibility_tm1(const DepthLookup& depth_tm1, const Vec3& q, double eps) {
    const auto z = depth_tm1.sample(q.x, q.y);
    if (!z) return false;
    return q.z >= *z - eps;
}

inline bool visibility_tm1(const Mesh& mesh_tm1, const RasterBuffers& buffers_tm1, const Vec3& q, double eps) {
    return visibility_tm1(DepthLookup(mesh_tm1, buffers_tm1), q, eps);
}

/// 1e-4 of the covered depth range of a frame. Falls back to 1e-4 * max(1,|z|)
/// for flat frames and 1e-4 for empty ones.
inline double default_depth_eps(const RasterBuffers& buffers) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < buffers.depth.size(); ++i) {
        if (buffers.tri_index[i] == kNoTriangle) continue;
        lo = std::min(lo, buffers.depth[i]);
        hi = std::max(hi, buffers.depth[i]);
    }
    if (!(hi >= lo)) return 1e-4;
    if (hi > lo) return 1e-4 * (hi - lo);
    return 1e-4 * std::max(1.0, std::abs(hi));
}

/// Per-pixel W masked by both visibility maps.
inline FlowField dense_flow(const FramePair& pair, std::optional<double> eps = std::nullopt) {
    const RasterBuffers& bt = pair.buffers_t();
    const double tol = eps.value_or(default_depth_eps(bt));
    FlowField out(bt.width, bt.height);
    const DepthLookup depth_tm1(pair.mesh_tm1(), pair.buffers_tm1());
    parallel_rows(bt.height, [&](int row_begin, int row_end) {
        for (int y = row_begin; y < row_end; ++y) {
            for (int x = 0; x < bt.width; ++x) {
                if (!bt.covered(x, y)) continue;
                const Pixel p{x, y};
                const Vec3 w = vertex_flow(pair, p);
                if (!visibility_t(pair.mesh_t(), bt, p, tol)) continue;
                const Vec3 q_t{static_cast<double>(x), static_cast<double>(y), query_depth(pair.mesh_t(), bt, p)};
                if (!visibility_tm1(depth_tm1, q_t - w, tol)) continue;
                const std::size_t o = out.offset(x, y);
                out.vectors[o] = w;
                out.valid[o] = 1;
            }
        }
    });
    return out;
}

/// Mesh flow evaluated at a continuous image position of frame t: the
/// front-most triangle of `mesh_t` containing the position, blended from its
/// vertex displacements. nullopt when no triangle contains the position.
inline std::optional<Vec3> flow_at(const Mesh& mesh_t, const Mesh& mesh_tm1, double x, double y) {
    if (mesh_t.vertices.size() != mesh_tm1.vertices.size() || mesh_t.triangles != mesh_tm1.triangles)
        throw CorrespondenceError("flow_at: meshes do not share topology");
    std::optional<Vec3> best;
    double best_z = kEmptyDepth;
    for (const auto& tri : mesh_t.triangles) {
        const Vec3& a = mesh_t.vertices[tri[0]];
        const Vec3& b = mesh_t.vertices[tri[1]];
        const Vec3& c = mesh_t.vertices[tri[2]];
        const auto l = detail::edge_barycentric(a, b, c, x, y);
        if (!l) continue;
        const double z = interpolate(*l, a.z, b.z, c.z);
        if (!(z > best_z)) continue;
        best_z = z;
        const auto& p = mesh_tm1.vertices;
        best = interpolate(*l, a - p[tri[0]], b - p[tri[1]], c - p[tri[2]]);
    }
    return best;
}

}  // namespace meshflow
