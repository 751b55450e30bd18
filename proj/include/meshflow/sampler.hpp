#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshflow/core.hpp"
#include "meshflow/neuralmath.hpp"

namespace meshflow {

struct VideoClip {
    std::string clip_id;
    std::string identity_id;
    std::uint32_t frame_count = 0;
};

struct DatasetCatalog {
    std::vector<VideoClip> video_clips;
    std::vector<std::string> image_ids;
};

class CatalogParseError : public Error {
public:
    using Error::Error;
};

/// Line format: `clip <id> <identity> <frames>` or `image <id>`. Blank lines
/// and lines starting with '#' are ignored.
inline DatasetCatalog parse_catalog(std::istream& in) {
    DatasetCatalog cat;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind) || kind.front() == '#') continue;
        auto fail = [&](const std::string& why) {
            throw CatalogParseError("catalog line " + std::to_string(lineno) + ": " + why);
        };
        std::string extra;
        if (kind == "clip") {
            VideoClip c;
            long long frames = 0;
            if (!(ls >> c.clip_id >> c.identity_id >> frames)) fail("expected `clip <id> <identity> <frames>`");
            if (frames < 2) fail("clip needs at least 2 frames");
            if (ls >> extra) fail("trailing tokens");
            c.frame_count = static_cast<std::uint32_t>(frames);
            cat.video_clips.push_back(std::move(c));
        } else if (kind == "image") {
            std::string id;
            if (!(ls >> id)) fail("expected `image <id>`");
            if (ls >> extra) fail("trailing tokens");
            cat.image_ids.push_back(std::move(id));
        } else {
            fail("unknown record kind `" + kind + "`");
        }
    }
    return cat;
}

/// One frame reference: a clip frame in video mode, an image (frame 0) in
/// image mode. `identity` is the clip identity or the image id itself.
struct FrameRef {
    std::string source;
    std::uint32_t frame = 0;
    std::string identity;

    friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

struct FramePairRef {
    FrameRef ref_t;
    FrameRef ref_tm1;

    friend bool operator==(const FramePairRef&, const FramePairRef&) = default;
};

struct SampleTuple {
    SampleMode mode = SampleMode::video;
    FramePairRef identity_pair;
    FramePairRef pose_pair;
    FramePairRef expression_pair;

    friend bool operator==(const SampleTuple&, const SampleTuple&) = default;
};

namespace detail {

// Uniform integer in [0, n) by rejection on raw 64-bit draws, so sequences do
// not depend on the standard library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Hybrid image/video sample selection. Each draw picks image mode with
/// probability sigma and video mode otherwise.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    SampleTuple draw(const DatasetCatalog& catalog, double sigma) {
        if (!(sigma >= 0.0 && sigma <= 1.0)) throw ArgumentError("sampler: sigma must lie in [0,1]");
        const bool image_mode = sigma >= 1.0 || (sigma > 0.0 && detail::uniform_unit(rng_) < sigma);
        return image_mode ? draw_image(catalog) : draw_video(catalog);
    }

private:
    SampleTuple draw_image(const DatasetCatalog& catalog) {
        const std::size_t n = catalog.image_ids.size();
        if (n < 3) throw ArgumentError("sampler: image mode needs at least 3 images");
        // Partial Fisher-Yates over indices: three distinct picks.
        std::array<std::size_t, 3> pick{};
        std::unordered_map<std::size_t, std::size_t> swapped;
        auto slot = [&](std::size_t i) {
            auto it = swapped.find(i);
            return it == swapped.end() ? i : it->second;
        };
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t j = k + detail::uniform_below(rng_, n - k);
            const std::size_t vj = slot(j), vk = slot(k);
            swapped[j] = vk;
            swapped[k] = vj;
            pick[k] = vj;
        }
        auto pair = [&](std::size_t idx) {
            const std::string& id = catalog.image_ids[idx];
            FrameRef r{id, 0, id};
            return FramePairRef{r, r};
        };
        return {SampleMode::image, pair(pick[0]), pair(pick[1]), pair(pick[2])};
    }

    SampleTuple draw_video(const DatasetCatalog& catalog) {
        if (catalog.video_clips.empty()) throw ArgumentError("sampler: video mode needs at least one clip");
        const VideoClip& clip = catalog.video_clips[detail::uniform_below(rng_, catalog.video_clips.size())];
        if (clip.frame_count < 2) throw ArgumentError("sampler: clip " + clip.clip_id + " has fewer than 2 frames");
        auto pair = [&] {
            const auto t = static_cast<std::uint32_t>(1 + detail::uniform_below(rng_, clip.frame_count - 1));
            return FramePairRef{{clip.clip_id, t, clip.identity_id}, {clip.clip_id, t - 1, clip.identity_id}};
        };
        SampleTuple s;
        s.mode = SampleMode::video;
        s.identity_pair = pair();
        s.pose_pair = pair();
        s.expression_pair = pair();
        return s;
    }

    std::mt19937_64 rng_;
};

/// Returns one message per broken tuple rule; empty when the tuple is valid
/// against `catalog`.
inline std::vector<std::string> validate(const SampleTuple& tuple, const DatasetCatalog& catalog) {
    std::vector<std::string> out;
    const std::array<std::pair<const char*, const FramePairRef*>, 3> pairs{
        {{"identity", &tuple.identity_pair}, {"pose", &tuple.pose_pair}, {"expression", &tuple.expression_pair}}};

    if (tuple.mode == SampleMode::video) {
        const std::string& clip_id = tuple.identity_pair.ref_t.source;
        const auto clip = std::find_if(catalog.video_clips.begin(), catalog.video_clips.end(),
                                       [&](const VideoClip& c) { return c.clip_id == clip_id; });
        if (clip == catalog.video_clips.end()) {
            out.push_back("video: unknown clip `" + clip_id + "`");
            return out;
        }
        for (const auto& [name, p] : pairs) {
            const std::string n(name);
            if (p->ref_t.source != clip_id || p->ref_tm1.source != clip_id)
                out.push_back("video: " + n + " pair is not drawn from clip `" + clip_id + "`");
            if (p->ref_t.frame == 0 || p->ref_tm1.frame + 1 != p->ref_t.frame)
                out.push_back("video: " + n + " pair frames are not consecutive");
            if (p->ref_t.frame >= clip->frame_count)
                out.push_back("video: " + n + " pair frame out of range");
            if (p->ref_t.identity != clip->identity_id || p->ref_tm1.identity != clip->identity_id)
                out.push_back("video: " + n + " pair identity differs from the clip identity");
        }
        return out;
    }

    std::set<std::string> identities;
    for (const auto& [name, p] : pairs) {
        const std::string n(name);
        if (!(p->ref_t == p->ref_tm1)) out.push_back("image: " + n + " pair does not repeat the same frame");
        if (std::find(catalog.image_ids.begin(), catalog.image_ids.end(), p->ref_t.source) == catalog.image_ids.end())
            out.push_back("image: unknown image `" + p->ref_t.source + "`");
        else if (p->ref_t.identity != p->ref_t.source)
            out.push_back("image: " + n + " identity must be the image id");
        identities.insert(p->ref_t.identity);
    }
    if (identities.size() != 3) out.push_back("image: the three pairs do not carry distinct identities");
    return out;
}

/// One-line record, e.g.
/// `mode=video identity=c1:5,c1:4 pose=c1:2,c1:1 expression=c1:9,c1:8 id=alice`.
inline std::string format_tuple(const SampleTuple& s) {
    auto ref = [](const FrameRef& r) { return r.source + ":" + std::to_string(r.frame); };
    auto pair = [&](const FramePairRef& p) { return ref(p.ref_t) + "," + ref(p.ref_tm1); };
    std::string out = s.mode == SampleMode::video ? "mode=video" : "mode=image";
    out += " identity=" + pair(s.identity_pair) + " pose=" + pair(s.pose_pair) +
           " expression=" + pair(s.expression_pair);
    if (s.mode == SampleMode::video) out += " id=" + s.identity_pair.ref_t.identity;
    return out;
}

}  // namespace meshflow
