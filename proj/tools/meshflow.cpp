// meshflow: batch driver for rendering, mesh flow, temporal metrics, BSN,
// sample selection and synthetic scene generation.
//
// Exit codes: 0 success, 2 usage, 3 parse, 4 semantic mismatch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meshflow/meshflow.hpp"

namespace fs = std::filesystem;
using namespace meshflow;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitMismatch = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Size {
    int width = 0;
    int height = 0;
};

Size parse_size(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw UsageError("--size must look like WxH, got `" + s + "`");
    try {
        std::size_t a = 0, b = 0;
        const int w = std::stoi(s.substr(0, x), &a);
        const int h = std::stoi(s.substr(x + 1), &b);
        if (a != x || b != s.size() - x - 1 || w <= 0 || h <= 0 || w > 65536 || h > 65536) throw std::invalid_argument(s);
        return {w, h};
    } catch (const std::logic_error&) {
        throw UsageError("--size must look like WxH with positive sides, got `" + s + "`");
    }
}

Mesh load_mesh(const std::string& path, const std::string& pose_path) {
    Mesh mesh = decode_obj(read_file(path));
    if (!pose_path.empty()) mesh = project(mesh, decode_pose(read_file(pose_path)));
    return mesh;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
    std::string model, coef_id, coef_exp, mesh, pose, texture, size;
    std::string out_color, out_depth, out_mask, out_hint, hint_source, hint_mode = "swap";
};

int run_render(const RenderArgs& a) {
    const bool use_model = !a.model.empty();
    const bool use_mesh = !a.mesh.empty();
    if (use_model == use_mesh) throw UsageError("render: give exactly one of --model or --mesh");
    if (use_model && (a.coef_id.empty() || a.coef_exp.empty()))
        throw UsageError("render: --model needs --coef-id and --coef-exp");
    if (!a.out_hint.empty() && a.hint_source.empty()) throw UsageError("render: --out-hint needs --hint-source");
    if (a.hint_mode != "swap" && a.hint_mode != "reenact") throw UsageError("render: --hint-mode is swap or reenact");
    const Size size = parse_size(a.size);

    Mesh mesh;
    if (use_model) {
        const MorphableModel model = decode_model(read_file(a.model));
        mesh = recombine(model, decode_coefficients(read_file(a.coef_id)), decode_coefficients(read_file(a.coef_exp)));
    } else {
        mesh = decode_obj(read_file(a.mesh));
    }
    if (!a.pose.empty()) mesh = project(mesh, decode_pose(read_file(a.pose)));
    const Texture tex = a.texture.empty() ? Texture::uniform(mesh.vertex_count(), {0.8, 0.8, 0.8})
                                          : decode_texture(read_file(a.texture));

    const RasterBuffers buf = rasterize(mesh, tex, size.width, size.height);
    const Image mask = facial_mask(buf);
    if (!a.out_color.empty()) write_file_atomic(a.out_color, encode_ppm(buf.color));
    if (!a.out_depth.empty()) write_file_atomic(a.out_depth, encode_pfm(depth_image(buf)));
    if (!a.out_mask.empty()) write_file_atomic(a.out_mask, encode_pfm(mask));
    if (!a.out_hint.empty()) {
        const Image src = decode_ppm(read_file(a.hint_source));
        const HintMode mode = a.hint_mode == "swap" ? HintMode::swap : HintMode::reenact;
        write_file_atomic(a.out_hint, encode_ppm(appearance_hint(src, mask, mode)));
    }
    std::cout << "covered=" << buf.coverage() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct FlowArgs {
    std::string mesh_t, mesh_tm1, pose_t, pose_tm1, size, out;
    std::optional<double> eps;
};

int run_flow(const FlowArgs& a) {
    if (a.pose_t.empty() != a.pose_tm1.empty()) throw UsageError("flow: give both --pose-t and --pose-tm1 or neither");
    const Size size = parse_size(a.size);
    const Mesh mt = load_mesh(a.mesh_t, a.pose_t);
    const Mesh mp = load_mesh(a.mesh_tm1, a.pose_tm1);
    if (mt.vertex_count() != mp.vertex_count() || mt.triangles != mp.triangles)
        throw CorrespondenceError("flow: meshes do not share topology");
    const RasterBuffers bt = rasterize(mt, Texture::uniform(mt.vertex_count(), {1, 1, 1}), size.width, size.height);
    const RasterBuffers bp = rasterize(mp, Texture::uniform(mp.vertex_count(), {1, 1, 1}), size.width, size.height);
    const FlowField f = dense_flow(FramePair(mt, mp, bt, bp), a.eps);
    write_file_atomic(a.out, encode_flow(f));
    std::cout << "valid=" << f.valid_count() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TmplossArgs {
    std::vector<std::string> frames, flows;
    std::string report;
};

int run_tmploss(const TmplossArgs& a) {
    if (a.frames.size() < 2) throw UsageError("tmploss: need at least 2 frames");
    if (a.flows.size() + 1 != a.frames.size())
        throw UsageError("tmploss: " + std::to_string(a.frames.size()) + " frames need " +
                         std::to_string(a.frames.size() - 1) + " flows, got " + std::to_string(a.flows.size()));
    std::vector<Image> frames;
    for (const auto& p : a.frames) frames.push_back(decode_ppm(read_file(p)));
    std::vector<FlowField> flows;
    for (const auto& p : a.flows) flows.push_back(decode_flow(read_file(p)));
    for (std::size_t k = 1; k < frames.size(); ++k)
        if (!frames[k].same_shape(frames[0])) throw DimensionError("tmploss: frame sizes differ");
    for (const auto& f : flows)
        if (f.width != frames[0].width || f.height != frames[0].height)
            throw DimensionError("tmploss: flow size differs from frame size");
    const std::string report = format_report(temporal_error(frames, flows));
    if (a.report.empty())
        std::cout << report;
    else
        write_file_atomic(a.report, report);
    return 0;
}

// ---------------------------------------------------------------------------

struct BsnArgs {
    std::string x, q, mask, out;
    double alpha = BsnParams::kAlphaInit;
    double beta = BsnParams::kBetaInit;
    double eps = kAdainEps;
};

int run_bsn(const BsnArgs& a) {
    const FeatureMap x = decode_feature_map(read_file(a.x));
    FeatureMap q = decode_feature_map(read_file(a.q));
    const Image mask = decode_pfm(read_file(a.mask));
    if (mask.channels != 1) throw DimensionError("bsn: mask must be single-channel");
    if (q.height != x.height || q.width != x.width) q = upsample_embedding(q, x.height, x.width);
    const SoftMask h = downsample_mask(mask, x.height, x.width);
    const auto C = static_cast<std::size_t>(x.channels);
    const BsnParams params{std::vector(C, a.alpha), std::vector(C, a.beta)};
    write_file_atomic(a.out, encode_feature_map(bsn(x, q, h, params, a.eps)));
    return 0;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string catalog, out;
    double sigma = 0.5;
    std::uint64_t seed = 0;
    int count = 1;
};

int run_sample(const SampleArgs& a) {
    if (!(a.sigma >= 0.0 && a.sigma <= 1.0)) throw UsageError("sample: --sigma must lie in [0,1]");
    if (a.count < 0) throw UsageError("sample: --count must be nonnegative");
    std::istringstream in(read_file(a.catalog));
    DatasetCatalog catalog;
    try {
        catalog = parse_catalog(in);
    } catch (const CatalogParseError& e) {
        throw IoError(IoErrorKind::malformed, e.what());
    }
    Sampler sampler(a.seed);
    std::string out;
    for (int i = 0; i < a.count; ++i) {
        SampleTuple s;
        try {
            s = sampler.draw(catalog, a.sigma);
        } catch (const ArgumentError& e) {
            throw CorrespondenceError(e.what());
        }
        out += format_tuple(s) + "\n";
    }
    if (a.out.empty())
        std::cout << out;
    else
        write_file_atomic(a.out, out);
    return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind = "static", out_dir = ".", size = "64x64";
    int frames = 10;
    std::uint64_t seed = 0;
    int subdiv = 2;
    std::optional<double> step;
};

std::string frame_name(const char* stem, int k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d.%s", stem, k, ext);
    return buf;
}

int run_synth(const SynthArgs& a) {
    SynthOptions opt;
    if (a.kind == "static") {
        opt.kind = SynthKind::static_scene;
    } else if (a.kind == "translate") {
        opt.kind = SynthKind::translate;
        opt.step = a.step.value_or(1.0);
    } else if (a.kind == "rotate") {
        opt.kind = SynthKind::rotate;
        opt.step = a.step.value_or(10.0);
    } else {
        throw UsageError("synth: --kind must be static, translate or rotate");
    }
    if (a.frames < 1) throw UsageError("synth: --frames must be positive");
    const Size size = parse_size(a.size);
    opt.frames = a.frames;
    opt.seed = a.seed;
    opt.width = size.width;
    opt.height = size.height;
    opt.subdivisions = a.subdiv;

    const SynthSequence seq = make_sequence(opt);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    write_file_atomic(dir / "mesh.obj", encode_obj(seq.mesh));
    write_file_atomic(dir / "texture.txt", encode_texture(seq.texture));
    for (int k = 0; k < opt.frames; ++k) {
        const auto& pose = seq.poses[static_cast<std::size_t>(k)];
        write_file_atomic(dir / frame_name("pose", k, "txt"), encode_pose(pose));
        const RasterBuffers buf = rasterize(project(seq.mesh, pose), seq.texture, size.width, size.height);
        write_file_atomic(dir / frame_name("frame", k, "ppm"), encode_ppm(buf.color));
    }
    std::cout << "frames=" << opt.frames << " vertices=" << seq.mesh.vertex_count()
              << " triangles=" << seq.mesh.triangle_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshflow: mesh-derived flow and temporal consistency tooling"};
    app.require_subcommand(1);

    RenderArgs render;
    auto* r = app.add_subcommand("render", "rasterize a mesh or recombined morphable model");
    r->add_option("--model", render.model, "MM3D morphable model");
    r->add_option("--coef-id", render.coef_id, "COEF file supplying identity coefficients");
    r->add_option("--coef-exp", render.coef_exp, "COEF file supplying expression coefficients");
    r->add_option("--mesh", render.mesh, "OBJ mesh");
    r->add_option("--pose", render.pose, "camera pose text file (omit for image-space meshes)");
    r->add_option("--texture", render.texture, "per-vertex `r g b` lines");
    r->add_option("--size", render.size, "WxH")->required();
    r->add_option("--out-color", render.out_color, "rendered color (PPM)");
    r->add_option("--out-depth", render.out_depth, "depth buffer (PFM)");
    r->add_option("--out-mask", render.out_mask, "facial mask (PFM)");
    r->add_option("--out-hint", render.out_hint, "appearance hint (PPM)");
    r->add_option("--hint-source", render.hint_source, "source frame for the hint (PPM)");
    r->add_option("--hint-mode", render.hint_mode, "swap or reenact");

    FlowArgs flow;
    auto* f = app.add_subcommand("flow", "dense mesh flow from frame t back to t-1");
    f->add_option("--mesh-t", flow.mesh_t, "OBJ mesh at t")->required();
    f->add_option("--mesh-tm1", flow.mesh_tm1, "OBJ mesh at t-1")->required();
    f->add_option("--pose-t", flow.pose_t, "camera pose at t");
    f->add_option("--pose-tm1", flow.pose_tm1, "camera pose at t-1");
    f->add_option("--size", flow.size, "WxH")->required();
    f->add_option("--eps", flow.eps, "depth tolerance (default 1e-4 of the frame depth range)");
    f->add_option("--out", flow.out, "FLW3 output")->required();

    TmplossArgs tmp;
    auto* t = app.add_subcommand("tmploss", "per-pair temporal loss and sequence temporal error");
    t->add_option("--frames", tmp.frames, "frames (PPM), in order")->required()->delimiter(',');
    t->add_option("--flows", tmp.flows, "flows (FLW3); flow k maps frame k+1 to frame k")->required()->delimiter(',');
    t->add_option("--report", tmp.report, "report path (stdout when omitted)");

    BsnArgs bsn_args;
    auto* b = app.add_subcommand("bsn", "bidirectional spatial-aware normalization on FMAP inputs");
    b->add_option("--x", bsn_args.x, "feature map (FMAP)")->required();
    b->add_option("--q", bsn_args.q, "appearance embedding (FMAP), upsampled to x when smaller")->required();
    b->add_option("--mask", bsn_args.mask, "facial mask (PFM), pooled to x's size")->required();
    b->add_option("--alpha", bsn_args.alpha, "alpha for every channel")->check(CLI::Range(0.0, 1.0));
    b->add_option("--beta", bsn_args.beta, "beta for every channel")->check(CLI::Range(0.0, 1.0));
    b->add_option("--eps", bsn_args.eps, "AdaIN denominator guard");
    b->add_option("--out", bsn_args.out, "FMAP output")->required();

    SampleArgs sample;
    auto* s = app.add_subcommand("sample", "draw training tuples from a dataset catalog");
    s->add_option("--catalog", sample.catalog, "catalog text file")->required();
    s->add_option("--sigma", sample.sigma, "image-mode probability in [0,1]");
    s->add_option("--seed", sample.seed, "RNG seed");
    s->add_option("--count", sample.count, "number of tuples");
    s->add_option("--out", sample.out, "output path (stdout when omitted)");

    SynthArgs synth;
    auto* y = app.add_subcommand("synth", "write a seeded synthetic icosphere sequence");
    y->add_option("--kind", synth.kind, "static, translate or rotate");
    y->add_option("--frames", synth.frames, "frame count");
    y->add_option("--seed", synth.seed, "RNG seed");
    y->add_option("--size", synth.size, "WxH");
    y->add_option("--step", synth.step, "px per frame (translate) or degrees per frame (rotate)");
    y->add_option("--subdiv", synth.subdiv, "icosphere subdivision level");
    y->add_option("--out-dir", synth.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (r->parsed()) return run_render(render);
        if (f->parsed()) return run_flow(flow);
        if (t->parsed()) return run_tmploss(tmp);
        if (b->parsed()) return run_bsn(bsn_args);
        if (s->parsed()) return run_sample(sample);
        if (y->parsed()) return run_synth(synth);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
