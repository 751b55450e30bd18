#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "meshflow/core.hpp"

namespace meshflow {

/// Dense interleaved raster, row-major, channel-minor. RGB frames use three
/// channels; masks and depth maps use one.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {
        if (w < 0 || h < 0 || c < 1) throw ArgumentError("image: invalid dimensions");
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }

    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(what) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                             std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                             std::to_string(b.channels) + ")");
}

}  // namespace meshflow
