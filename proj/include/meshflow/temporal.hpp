#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meshflow/flow.hpp"
#include "meshflow/image.hpp"

namespace meshflow {

struct WarpResult {
    Image image;
    std::vector<std::uint8_t> valid;
};

/// Bilinear sample of every channel at a continuous position. The position
/// must satisfy 0 <= x <= w-1, 0 <= y <= h-1.
inline void bilinear_sample(const Image& img, double x, double y, double* out) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out[c] = (1.0 - fy) * top + fy * bottom;
    }
}

/// Backward warp: output(x, y) samples `image_tm1` at (x - Wx, y - Wy) for
/// every valid flow pixel whose sample lands inside the image. Other pixels
/// are black and invalid.
inline WarpResult warp(const Image& image_tm1, const FlowField& flow) {
    if (image_tm1.width != flow.width || image_tm1.height != flow.height)
        throw DimensionError("warp: image and flow sizes differ");
    WarpResult r{Image(image_tm1.width, image_tm1.height, image_tm1.channels), std::vector<std::uint8_t>(flow.valid.size(), 0)};
    std::vector<double> px(static_cast<std::size_t>(image_tm1.channels));
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            if (!flow.is_valid(x, y)) continue;
            const Vec3& w = flow.at(x, y);
            const double sx = x - w.x;
            const double sy = y - w.y;
            if (!(sx >= 0.0 && sy >= 0.0 && sx <= image_tm1.width - 1 && sy <= image_tm1.height - 1)) continue;
            bilinear_sample(image_tm1, sx, sy, px.data());
            for (int c = 0; c < image_tm1.channels; ++c) r.image.at(x, y, c) = px[static_cast<std::size_t>(c)];
            r.valid[flow.offset(x, y)] = 1;
        }
    }
    return r;
}

struct TemporalLoss {
    double value = 0.0;
    std::size_t valid_count = 0;
};

/// Masked warped MSE between y_t and the flow-correspondent samples of y_tm1,
/// averaged over valid pixels and channels. No valid pixels gives 0 with
/// valid_count 0.
inline TemporalLoss temporal_loss(const Image& y_t, const Image& y_tm1, const FlowField& flow) {
    require_same_shape(y_t, y_tm1, "temporal_loss");
    const WarpResult w = warp(y_tm1, flow);
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < y_t.height; ++y)
        for (int x = 0; x < y_t.width; ++x) {
            if (!w.valid[flow.offset(x, y)]) continue;
            ++n;
            for (int c = 0; c < y_t.channels; ++c) {
                const double d = y_t.at(x, y, c) - w.image.at(x, y, c);
                sum += d * d;
            }
        }
    if (n == 0) return {};
    return {sum / (static_cast<double>(n) * y_t.channels), n};
}

struct TemporalError {
    double e_tmp = 0.0;
    std::vector<TemporalLoss> pairs;
};

/// Mean of temporal_loss over consecutive pairs; flows[k] maps frame k+1 back
/// to frame k.
inline TemporalError temporal_error(std::span<const Image> frames, std::span<const FlowField> flows) {
    if (frames.size() < 2) throw ArgumentError("temporal_error: need at least 2 frames");
    if (flows.size() + 1 != frames.size())
        throw DimensionError("temporal_error: " + std::to_string(frames.size()) + " frames need " +
                             std::to_string(frames.size() - 1) + " flows, got " + std::to_string(flows.size()));
    TemporalError r;
    double sum = 0.0;
    for (std::size_t k = 0; k < flows.size(); ++k) {
        r.pairs.push_back(temporal_loss(frames[k + 1], frames[k], flows[k]));
        sum += r.pairs.back().value;
    }
    r.e_tmp = sum / static_cast<double>(flows.size());
    return r;
}

/// Mean absolute per-pixel, per-channel difference.
inline double photometric_error(const Image& output, const Image& ground_truth) {
    require_same_shape(output, ground_truth, "photometric_error");
    if (output.data.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < output.data.size(); ++i) sum += std::abs(output.data[i] - ground_truth.data[i]);
    return sum / static_cast<double>(output.data.size());
}

/// Shortest round-trip decimal form of a double.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// `pair=<k> valid=<count> l_tmp=<float>` per pair, then `e_tmp=<float>`.
inline std::string format_report(const TemporalError& err) {
    std::string out;
    for (std::size_t k = 0; k < err.pairs.size(); ++k) {
        out += "pair=" + std::to_string(k) + " valid=" + std::to_string(err.pairs[k].valid_count) +
               " l_tmp=" + format_real(err.pairs[k].value) + "\n";
    }
    out += "e_tmp=" + format_real(err.e_tmp) + "\n";
    return out;
}

}  // namespace meshflow
