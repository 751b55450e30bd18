#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "meshflow/core.hpp"

namespace meshflow {

using Triangle = std::array<std::uint32_t, 3>;

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    /// Throws DimensionError when any triangle references a missing vertex.
    void check() const {
        for (std::size_t t = 0; t < triangles.size(); ++t)
            for (auto idx : triangles[t])
                if (idx >= vertices.size())
                    throw DimensionError("mesh: triangle " + std::to_string(t) + " references vertex " +
                                         std::to_string(idx) + " of " + std::to_string(vertices.size()));
    }
};

/// Linear face model: mean shape plus identity and expression bases.
///
/// Bases are stored vertex-major: row (3*v + axis), column k lives at
/// `basis[(3*v + axis) * K + k]`. This matches the on-disk MM3D layout.
struct MorphableModel {
    std::vector<Vec3> mean_shape;
    std::size_t id_dims = 0;
    std::size_t exp_dims = 0;
    std::vector<double> id_basis;
    std::vector<double> exp_basis;
    std::vector<Triangle> triangles;

    std::size_t vertex_count() const { return mean_shape.size(); }

    void check() const {
        const std::size_t rows = 3 * mean_shape.size();
        if (id_dims < 1 || exp_dims < 1) throw DimensionError("morphable model: basis dimensions must be >= 1");
        if (id_basis.size() != rows * id_dims)
            throw DimensionError("morphable model: identity basis has " + std::to_string(id_basis.size()) +
                                 " entries, expected " + std::to_string(rows * id_dims));
        if (exp_basis.size() != rows * exp_dims)
            throw DimensionError("morphable model: expression basis has " + std::to_string(exp_basis.size()) +
                                 " entries, expected " + std::to_string(rows * exp_dims));
        for (const auto& t : triangles)
            for (auto idx : t)
                if (idx >= mean_shape.size()) throw DimensionError("morphable model: triangle index out of range");
    }
};

struct Coefficients {
    std::vector<double> alpha_id;
    std::vector<double> alpha_exp;
};

/// Weak-perspective camera: rotate, scale uniformly, shift in the image plane.
struct CameraPose {
    double scale = 1.0;
    Mat3 rotation = Mat3::identity();
    double tx = 0.0;
    double ty = 0.0;

    static constexpr double kOrthonormalTolerance = 1e-6;

    void check() const {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("camera pose: scale must be positive");
        const Mat3 rrt = rotation * rotation.transposed();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (std::abs(rrt(i, j) - (i == j ? 1.0 : 0.0)) > kOrthonormalTolerance)
                    throw ArgumentError("camera pose: rotation is not orthonormal");
        if (std::abs(rotation.determinant() - 1.0) > kOrthonormalTolerance)
            throw ArgumentError("camera pose: rotation determinant is not +1");
    }
};

namespace detail {

inline void add_basis(std::vector<Vec3>& out, const std::vector<double>& basis, std::size_t dims,
                      const std::vector<double>& alpha) {
    for (std::size_t v = 0; v < out.size(); ++v) {
        const double* row = basis.data() + 3 * v * dims;
        double acc[3] = {0.0, 0.0, 0.0};
        for (int axis = 0; axis < 3; ++axis) {
            const double* r = row + static_cast<std::size_t>(axis) * dims;
            for (std::size_t k = 0; k < dims; ++k) acc[axis] += r[k] * alpha[k];
        }
        out[v] += Vec3{acc[0], acc[1], acc[2]};
    }
}

inline Mesh combine(const MorphableModel& model, const std::vector<double>& alpha_id,
                    const std::vector<double>& alpha_exp) {
    model.check();
    if (alpha_id.size() != model.id_dims)
        throw DimensionError("identity coefficients: got " + std::to_string(alpha_id.size()) + ", model has " +
                             std::to_string(model.id_dims));
    if (alpha_exp.size() != model.exp_dims)
        throw DimensionError("expression coefficients: got " + std::to_string(alpha_exp.size()) + ", model has " +
                             std::to_string(model.exp_dims));
    Mesh mesh{model.mean_shape, model.triangles};
    add_basis(mesh.vertices, model.id_basis, model.id_dims, alpha_id);
    add_basis(mesh.vertices, model.exp_basis, model.exp_dims, alpha_exp);
    return mesh;
}

}  // namespace detail

/// Shape = mean + id_basis * alpha_id + exp_basis * alpha_exp.
inline Mesh reconstruct(const MorphableModel& model, const Coefficients& c) {
    return detail::combine(model, c.alpha_id, c.alpha_exp);
}

/// Identity from one coefficient set, expression from another.
inline Mesh recombine(const MorphableModel& model, const Coefficients& id_from, const Coefficients& exp_from) {
    return detail::combine(model, id_from.alpha_id, exp_from.alpha_exp);
}

/// Maps a model-space mesh into image space: x is the column, y the row, and
/// z is depth with larger values closer to the camera.
inline Mesh project(const Mesh& mesh, const CameraPose& pose) {
    pose.check();
    Mesh out;
    out.triangles = mesh.triangles;
    out.vertices.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) {
        const Vec3 r = pose.rotation * v;
        out.vertices.push_back({pose.scale * r.x + pose.tx, pose.scale * r.y + pose.ty, pose.scale * r.z});
    }
    return out;
}

}  // namespace meshflow
