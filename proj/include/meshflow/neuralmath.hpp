#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "meshflow/core.hpp"
#include "meshflow/image.hpp"

namespace meshflow {

/// H x W x C real grid, row-major with channels innermost.
struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {
        if (h < 0 || w < 0 || c < 0) throw ArgumentError("feature map: negative dimension");
    }

    std::size_t positions() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    double& at(int y, int x, int c) { return values[index(y, x, c)]; }
    double at(int y, int x, int c) const { return values[index(y, x, c)]; }

    bool same_shape(const FeatureMap& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

/// H x W weights in [0,1].
struct SoftMask {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    SoftMask() = default;
    SoftMask(int h, int w, double fill = 0.0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

struct BsnParams {
    std::vector<double> alpha;
    std::vector<double> beta;

    static constexpr double kAlphaInit = 0.8;
    static constexpr double kBetaInit = 0.1;

    static BsnParams initial(int channels) {
        const auto n = static_cast<std::size_t>(channels);
        return {std::vector(n, kAlphaInit), std::vector(n, kBetaInit)};
    }
};

struct LossWeights {
    double w_adv = 10.0;
    double w_app = 1.0;
    double w_rec = 10.0;
    double w_tmp = 5.0;
};

inline constexpr double kAdainEps = 1e-5;

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Per-channel mean and population standard deviation over all positions.
inline ChannelStats channel_stats(const FeatureMap& f) {
    const auto C = static_cast<std::size_t>(f.channels);
    ChannelStats s{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
    const std::size_t n = f.positions();
    if (n == 0) return s;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t c = 0; c < C; ++c) s.mean[c] += f.values[p * C + c];
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t c = 0; c < C; ++c) {
            const double d = f.values[p * C + c] - s.mean[c];
            s.stddev[c] += d * d;
        }
    for (auto& v : s.stddev) v = std::sqrt(v / static_cast<double>(n));
    return s;
}

/// Adaptive instance normalization: re-standardize `a` per channel, then
/// impose the mean and standard deviation of `b`. Output has the shape of `a`.
inline FeatureMap adain(const FeatureMap& a, const FeatureMap& b, double eps = kAdainEps) {
    if (a.channels != b.channels)
        throw DimensionError("adain: channel counts differ (" + std::to_string(a.channels) + " vs " +
                             std::to_string(b.channels) + ")");
    const ChannelStats sa = channel_stats(a);
    const ChannelStats sb = channel_stats(b);
    FeatureMap out = a;
    const auto C = static_cast<std::size_t>(a.channels);
    for (std::size_t p = 0; p < a.positions(); ++p)
        for (std::size_t c = 0; c < C; ++c) {
            double& v = out.values[p * C + c];
            v = sb.stddev[c] * ((v - sa.mean[c]) / (sa.stddev[c] + eps)) + sb.mean[c];
        }
    return out;
}

namespace detail {

inline FeatureMap apply_mask(const FeatureMap& f, const SoftMask& h, bool complement) {
    FeatureMap out = f;
    const auto C = static_cast<std::size_t>(f.channels);
    for (std::size_t p = 0; p < f.positions(); ++p) {
        const double w = complement ? 1.0 - h.values[p] : h.values[p];
        for (std::size_t c = 0; c < C; ++c) out.values[p * C + c] *= w;
    }
    return out;
}

}  // namespace detail

/// Mask-partitioned AdaIN: facial features take statistics from the
/// embedding's background, background features from the embedding's face,
/// blended per channel by alpha and beta against the untouched features.
inline FeatureMap bsn(const FeatureMap& x, const FeatureMap& q, const SoftMask& h, const BsnParams& params,
                      double eps = kAdainEps) {
    if (!x.same_shape(q)) throw DimensionError("bsn: feature and embedding shapes differ");
    if (h.height != x.height || h.width != x.width) throw DimensionError("bsn: mask size differs from features");
    const auto C = static_cast<std::size_t>(x.channels);
    if (params.alpha.size() != C || params.beta.size() != C)
        throw DimensionError("bsn: alpha/beta length must equal channel count");
    for (std::size_t c = 0; c < C; ++c)
        if (!(params.alpha[c] >= 0.0 && params.alpha[c] <= 1.0 && params.beta[c] >= 0.0 && params.beta[c] <= 1.0))
            throw ArgumentError("bsn: alpha and beta must lie in [0,1]");

    const FeatureMap xh = detail::apply_mask(x, h, false);
    const FeatureMap xhb = detail::apply_mask(x, h, true);
    const FeatureMap face = adain(xh, detail::apply_mask(q, h, true), eps);
    const FeatureMap back = adain(xhb, detail::apply_mask(q, h, false), eps);

    FeatureMap out(x.height, x.width, x.channels);
    for (std::size_t p = 0; p < x.positions(); ++p)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = p * C + c;
            const double a = params.alpha[c];
            const double b = params.beta[c];
            out.values[i] = a * face.values[i] + b * back.values[i] + (1.0 - a) * xh.values[i] + (1.0 - b) * xhb.values[i];
        }
    return out;
}

/// Area-average pooling of a single-channel 0/1 mask onto a coarser grid.
/// Each output cell averages the source area it covers, including fractional
/// pixel overlap when the ratio is not an integer.
inline SoftMask downsample_mask(const Image& mask, int target_h, int target_w) {
    if (mask.channels != 1) throw ArgumentError("downsample_mask: mask must be single-channel");
    if (target_h <= 0 || target_w <= 0) throw ArgumentError("downsample_mask: target size must be positive");
    if (target_h > mask.height || target_w > mask.width)
        throw ArgumentError("downsample_mask: target is larger than the source");
    SoftMask out(target_h, target_w);
    const double sy = static_cast<double>(mask.height) / target_h;
    const double sx = static_cast<double>(mask.width) / target_w;
    for (int oy = 0; oy < target_h; ++oy) {
        const double y_lo = oy * sy, y_hi = (oy + 1) * sy;
        for (int ox = 0; ox < target_w; ++ox) {
            const double x_lo = ox * sx, x_hi = (ox + 1) * sx;
            double acc = 0.0;
            for (int y = static_cast<int>(std::floor(y_lo)); y < std::min(mask.height, static_cast<int>(std::ceil(y_hi))); ++y) {
                const double wy = std::min<double>(y + 1, y_hi) - std::max<double>(y, y_lo);
                if (wy <= 0.0) continue;
                for (int x = static_cast<int>(std::floor(x_lo)); x < std::min(mask.width, static_cast<int>(std::ceil(x_hi))); ++x) {
                    const double wx = std::min<double>(x + 1, x_hi) - std::max<double>(x, x_lo);
                    if (wx <= 0.0) continue;
                    acc += wy * wx * mask.at(x, y);
                }
            }
            out.at(oy, ox) = std::clamp(acc / (sx * sy), 0.0, 1.0);
        }
    }
    return out;
}

/// Corner-aligned bilinear upsampling.
inline FeatureMap upsample_embedding(const FeatureMap& p, int target_h, int target_w) {
    if (target_h < p.height || target_w < p.width) throw ArgumentError("upsample_embedding: target is smaller than the source");
    if (p.height == 0 || p.width == 0) throw ArgumentError("upsample_embedding: empty source");
    FeatureMap out(target_h, target_w, p.channels);
    const double ry = target_h > 1 ? static_cast<double>(p.height - 1) / (target_h - 1) : 0.0;
    const double rx = target_w > 1 ? static_cast<double>(p.width - 1) / (target_w - 1) : 0.0;
    for (int y = 0; y < target_h; ++y) {
        const double sy = y * ry;
        const int y0 = std::min(static_cast<int>(std::floor(sy)), p.height - 1);
        const int y1 = std::min(y0 + 1, p.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < target_w; ++x) {
            const double sx = x * rx;
            const int x0 = std::min(static_cast<int>(std::floor(sx)), p.width - 1);
            const int x1 = std::min(x0 + 1, p.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < p.channels; ++c) {
                const double top = (1.0 - fx) * p.at(y0, x0, c) + fx * p.at(y0, x1, c);
                const double bottom = (1.0 - fx) * p.at(y1, x0, c) + fx * p.at(y1, x1, c);
                out.at(y, x, c) = (1.0 - fy) * top + fy * bottom;
            }
        }
    }
    return out;
}

namespace detail {

inline double mean_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

inline double mean_of(std::span<const double> v, auto&& f) {
    if (v.empty()) throw ArgumentError("adversarial_loss: empty score map");
    double s = 0.0;
    for (double x : v) s += f(x);
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Mean L1 distance between two embeddings.
inline double appearance_loss(const FeatureMap& e_y, const FeatureMap& e_xp) {
    if (!e_y.same_shape(e_xp)) throw DimensionError("appearance_loss: shapes differ");
    return detail::mean_abs_diff(e_y.values, e_xp.values);
}

enum class SampleMode { video, image };

/// Mean L1 to the identity frame in video mode; 0 in image mode, where no
/// ground truth exists.
inline double reconstruction_loss(const Image& y, const Image& x_i, SampleMode mode) {
    if (mode == SampleMode::image) return 0.0;
    require_same_shape(y, x_i, "reconstruction_loss");
    return detail::mean_abs_diff(y.data, x_i.data);
}

enum class AdversarialForm { hinge, log };

struct AdversarialLoss {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

/// Multi-scale adversarial objective averaged over K scales.
///
/// hinge: d = mean(max(0, 1 - real)) + mean(max(0, 1 + fake)), g = -mean(fake).
/// log:   d = -(mean(log real) + mean(log(1 - fake))), g = mean(log(1 - fake)),
///        the minimax pair with scores read as probabilities in (0,1).
inline AdversarialLoss adversarial_loss(std::span<const FeatureMap> real_scores, std::span<const FeatureMap> fake_scores,
                                        AdversarialForm form) {
    if (real_scores.empty() || fake_scores.empty()) throw ArgumentError("adversarial_loss: empty score lists");
    if (real_scores.size() != fake_scores.size()) throw DimensionError("adversarial_loss: scale counts differ");
    AdversarialLoss total;
    for (std::size_t k = 0; k < real_scores.size(); ++k) {
        const auto& r = real_scores[k].values;
        const auto& f = fake_scores[k].values;
        if (form == AdversarialForm::hinge) {
            total.d_loss += detail::mean_of(r, [](double s) { return std::max(0.0, 1.0 - s); }) +
                            detail::mean_of(f, [](double s) { return std::max(0.0, 1.0 + s); });
            total.g_loss += -detail::mean_of(f, [](double s) { return s; });
        } else {
            auto check = [](double s) {
                if (!(s > 0.0 && s < 1.0)) throw ArgumentError("adversarial_loss: log form needs scores in (0,1)");
            };
            for (double s : r) check(s);
            for (double s : f) check(s);
            const double log_real = detail::mean_of(r, [](double s) { return std::log(s); });
            const double log_fake = detail::mean_of(f, [](double s) { return std::log1p(-s); });
            total.d_loss += -(log_real + log_fake);
            total.g_loss += log_fake;
        }
    }
    const auto K = static_cast<double>(real_scores.size());
    return {total.d_loss / K, total.g_loss / K};
}

inline double total_loss(double adv, double app, double rec, double tmp, const LossWeights& w = {}) {
    return w.w_adv * adv + w.w_app * app + w.w_rec * rec + w.w_tmp * tmp;
}

}  // namespace meshflow
