#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include "meshflow/meshflow.hpp"

using namespace meshflow;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = MESHFLOW_SCRATCH;

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult cli(const std::string& args) {
    fs::create_directories(kScratch);
    // Per-test capture files so tests can run concurrently.
    const std::string tag = ::testing::UnitTest::GetInstance()->current_test_info()->name();
    const fs::path out = kScratch / (tag + ".stdout"), err = kScratch / (tag + ".stderr");
    const std::string cmd = std::string("\"") + MESHFLOW_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path fresh_dir(const std::string& name) {
    const fs::path d = kScratch / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string frame_name(const char* stem, int k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d.%s", stem, k, ext);
    return buf;
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(cli("").code, 2); }

TEST(Cli, RenderMissingSizeIsUsageError) {
    const fs::path d = fresh_dir("render_nosize");
    write_file_atomic(d / "tri.obj", "v 0 0 1\nv 3 0 1\nv 0 3 1\nf 1 2 3\n");
    const CliResult r = cli("render --mesh " + q(d / "tri.obj") + " --out-color " + q(d / "c.ppm"));
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(fs::exists(d / "c.ppm"));
}

TEST(Cli, RenderSingleTriangleMask) {
    const fs::path d = fresh_dir("render_tri");
    write_file_atomic(d / "tri.obj", "v 0 0 1\nv 3 0 1\nv 0 3 1\nf 1 2 3\n");
    const CliResult r = cli("render --mesh " + q(d / "tri.obj") + " --size 4x4 --out-mask " + q(d / "m.pfm") +
                      " --out-color " + q(d / "c.ppm") + " --out-depth " + q(d / "z.pfm"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "covered=10\n");
    const Image mask = decode_pfm(read_file(d / "m.pfm"));
    double ones = 0.0;
    for (double v : mask.data) ones += v;
    EXPECT_EQ(ones, 10.0);
    EXPECT_EQ(decode_pfm(read_file(d / "z.pfm")).at(0, 0), 1.0);
}

TEST(Cli, RenderMatchesLibrary) {
    const fs::path d = fresh_dir("render_ico");
    SynthOptions opt;
    opt.kind = SynthKind::rotate;
    opt.step = 10.0;
    opt.frames = 3;
    opt.seed = 5;
    const SynthSequence seq = make_sequence(opt);
    write_file_atomic(d / "mesh.obj", encode_obj(seq.mesh));
    write_file_atomic(d / "tex.txt", encode_texture(seq.texture));
    write_file_atomic(d / "pose.txt", encode_pose(seq.poses[2]));
    const CliResult r = cli("render --mesh " + q(d / "mesh.obj") + " --pose " + q(d / "pose.txt") + " --texture " +
                      q(d / "tex.txt") + " --size 64x64 --out-color " + q(d / "c.ppm") + " --out-depth " +
                      q(d / "z.pfm"));
    ASSERT_EQ(r.code, 0) << r.err;
    const RasterBuffers lib = rasterize(project(seq.mesh, seq.poses[2]), seq.texture, 64, 64);
    EXPECT_EQ(read_file(d / "c.ppm"), encode_ppm(lib.color));
    EXPECT_EQ(read_file(d / "z.pfm"), encode_pfm(depth_image(lib)));
}

TEST(Cli, RenderFromModel) {
    const fs::path d = fresh_dir("render_model");
    MorphableModel m;
    m.id_dims = m.exp_dims = 1;
    m.mean_shape = {{0, 0, 1}, {3, 0, 1}, {0, 3, 1}};
    m.id_basis = {0, 0, 0, 1, 0, 0, 0, 0, 0};  // stretches vertex 1 along x
    m.exp_basis.assign(9, 0.0);
    m.triangles = {{0, 1, 2}};
    write_file_atomic(d / "m.mm3d", encode_model(m));
    write_file_atomic(d / "id.coef", encode_coefficients({{3.0}, {0.0}}));
    write_file_atomic(d / "exp.coef", encode_coefficients({{0.0}, {0.0}}));
    const CliResult r = cli("render --model " + q(d / "m.mm3d") + " --coef-id " + q(d / "id.coef") + " --coef-exp " +
                      q(d / "exp.coef") + " --size 8x8");
    ASSERT_EQ(r.code, 0) << r.err;
    const Mesh mesh = recombine(m, {{3.0}, {0.0}}, {{0.0}, {0.0}});
    EXPECT_EQ(r.out, "covered=" + std::to_string(rasterize(mesh, Texture::uniform(3, {1, 1, 1}), 8, 8).coverage()) + "\n");
}

TEST(Cli, RenderRejectsModelAndMesh) {
    const fs::path d = fresh_dir("render_both");
    write_file_atomic(d / "tri.obj", "v 0 0 1\nv 3 0 1\nv 0 3 1\nf 1 2 3\n");
    EXPECT_EQ(cli("render --mesh " + q(d / "tri.obj") + " --model x --size 4x4").code, 2);
    EXPECT_EQ(cli("render --size 4x4").code, 2);
    EXPECT_EQ(cli("render --mesh " + q(d / "tri.obj") + " --size 4by4").code, 2);
}

TEST(Cli, ParseErrorExitCode) {
    const fs::path d = fresh_dir("parse_err");
    write_file_atomic(d / "bad.obj", "v 0 0 1\nv nope 0 1\n");
    EXPECT_EQ(cli("render --mesh " + q(d / "bad.obj") + " --size 4x4").code, 3);
    EXPECT_EQ(cli("render --mesh " + q(d / "missing.obj") + " --size 4x4").code, 3);
}

TEST(Cli, FlowTopologyMismatch) {
    const fs::path d = fresh_dir("flow_topo");
    write_file_atomic(d / "a.obj", "v 0 0 1\nv 3 0 1\nv 0 3 1\nf 1 2 3\n");
    write_file_atomic(d / "b.obj", "v 0 0 1\nv 3 0 1\nv 0 3 1\nv 3 3 1\nf 1 2 3\nf 2 4 3\n");
    const CliResult r = cli("flow --mesh-t " + q(d / "a.obj") + " --mesh-tm1 " + q(d / "b.obj") + " --size 4x4 --out " +
                      q(d / "f.flw"));
    EXPECT_EQ(r.code, 4);
    EXPECT_FALSE(fs::exists(d / "f.flw"));
}

TEST(Cli, FlowIdenticalAndTranslated) {
    const fs::path d = fresh_dir("flow_basic");
    write_file_atomic(d / "a.obj", "v 0 0 1\nv 6 0 1\nv 0 6 1\nf 1 2 3\n");
    write_file_atomic(d / "b.obj", "v 1 0 1\nv 7 0 1\nv 1 6 1\nf 1 2 3\n");
    CliResult r = cli("flow --mesh-t " + q(d / "a.obj") + " --mesh-tm1 " + q(d / "a.obj") + " --size 8x8 --out " +
                q(d / "same.flw"));
    ASSERT_EQ(r.code, 0) << r.err;
    FlowField f = decode_flow(read_file(d / "same.flw"));
    EXPECT_EQ(r.out, "valid=" + std::to_string(f.valid_count()) + "\n");
    EXPECT_EQ(f.valid_count(), 28u);
    for (std::size_t i = 0; i < f.vectors.size(); ++i)
        if (f.valid[i]) {
            EXPECT_EQ(f.vectors[i], (Vec3{}));
        }
    // t is shifted one pixel left of t-1: every valid vector is (-1, 0, 0).
    r = cli("flow --mesh-t " + q(d / "a.obj") + " --mesh-tm1 " + q(d / "b.obj") + " --size 8x8 --out " +
            q(d / "shift.flw"));
    ASSERT_EQ(r.code, 0) << r.err;
    f = decode_flow(read_file(d / "shift.flw"));
    EXPECT_GT(f.valid_count(), 0u);
    for (std::size_t i = 0; i < f.vectors.size(); ++i)
        if (f.valid[i]) {
            EXPECT_EQ(f.vectors[i], (Vec3{-1, 0, 0}));
        }
}

TEST(Cli, FlowRotationMatchesLibrary) {
    const fs::path d = fresh_dir("flow_rot");
    ASSERT_EQ(cli("synth --kind rotate --frames 2 --seed 3 --out-dir " + q(d)).code, 0);
    const CliResult r = cli("flow --mesh-t " + q(d / "mesh.obj") + " --mesh-tm1 " + q(d / "mesh.obj") + " --pose-t " +
                      q(d / "pose_001.txt") + " --pose-tm1 " + q(d / "pose_000.txt") + " --size 64x64 --out " +
                      q(d / "f.flw"));
    ASSERT_EQ(r.code, 0) << r.err;
    const Mesh mesh = decode_obj(read_file(d / "mesh.obj"));
    const Mesh mt = project(mesh, decode_pose(read_file(d / "pose_001.txt")));
    const Mesh mp = project(mesh, decode_pose(read_file(d / "pose_000.txt")));
    const Texture white = Texture::uniform(mesh.vertex_count(), {1, 1, 1});
    const RasterBuffers bt = rasterize(mt, white, 64, 64), bp = rasterize(mp, white, 64, 64);
    EXPECT_EQ(read_file(d / "f.flw"), encode_flow(dense_flow(FramePair(mt, mp, bt, bp))));
}

TEST(Cli, TmplossCountMismatch) {
    const fs::path d = fresh_dir("tmp_count");
    ASSERT_EQ(cli("synth --kind static --frames 3 --out-dir " + q(d)).code, 0);
    const CliResult r = cli("tmploss --frames " + q(d / "frame_000.ppm") + "," + q(d / "frame_001.ppm") + "," +
                      q(d / "frame_002.ppm") + " --flows " + q(d / "x.flw"));
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, StaticPipelineHasZeroError) {
    const fs::path d = fresh_dir("static_pipe");
    const CliResult s = cli("synth --kind static --frames 3 --seed 9 --out-dir " + q(d));
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_EQ(s.out, "frames=3 vertices=162 triangles=320\n");
    std::string frames, flows;
    for (int k = 0; k < 3; ++k) {
        frames += (k ? "," : "") + (d / frame_name("frame", k, "ppm")).string();
        if (k == 0) continue;
        const fs::path out = d / frame_name("flow", k, "flw");
        ASSERT_EQ(cli("flow --mesh-t " + q(d / "mesh.obj") + " --mesh-tm1 " + q(d / "mesh.obj") + " --pose-t " +
                      q(d / frame_name("pose", k, "txt")) + " --pose-tm1 " + q(d / frame_name("pose", k - 1, "txt")) +
                      " --size 64x64 --out " + q(out))
                      .code,
                  0);
        flows += (k > 1 ? "," : "") + out.string();
    }
    const CliResult r = cli("tmploss --frames " + frames + " --flows " + flows + " --report " + q(d / "report.txt"));
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string report = read_file(d / "report.txt");
    EXPECT_NE(report.find("pair=0 valid="), std::string::npos);
    EXPECT_NE(report.find("\ne_tmp=0\n"), std::string::npos) << report;
}

TEST(Cli, TmplossTwoPairsIsMeanOfPairs) {
    const fs::path d = fresh_dir("tmp_two");
    const std::vector<Image> frames{Image(3, 3, 3, 0.0), Image(3, 3, 3, 0.2), Image(3, 3, 3, 0.2)};
    FlowField f(3, 3);
    std::fill(f.valid.begin(), f.valid.end(), std::uint8_t{1});
    for (int k = 0; k < 3; ++k) write_file_atomic(d / frame_name("frame", k, "ppm"), encode_ppm(frames[static_cast<std::size_t>(k)]));
    write_file_atomic(d / "f.flw", encode_flow(f));
    const CliResult r = cli("tmploss --frames " + q(d / "frame_000.ppm") + "," + q(d / "frame_001.ppm") + "," +
                      q(d / "frame_002.ppm") + " --flows " + q(d / "f.flw") + "," + q(d / "f.flw"));
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<Image> decoded;
    for (int k = 0; k < 3; ++k) decoded.push_back(decode_ppm(read_file(d / frame_name("frame", k, "ppm"))));
    const std::vector<FlowField> flows{f, f};
    EXPECT_EQ(r.out, format_report(temporal_error(decoded, flows)));
    const double v = 51.0 / 255.0;
    EXPECT_DOUBLE_EQ(temporal_error(decoded, flows).e_tmp, v * v / 2.0);
}

TEST(Cli, SampleSigmaOneIsImageOnly) {
    const fs::path d = fresh_dir("sample");
    write_file_atomic(d / "cat.txt", "clip c0 a 10\nimage i0\nimage i1\nimage i2\n");
    const CliResult r = cli("sample --catalog " + q(d / "cat.txt") + " --sigma 1 --count 50 --seed 4");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    int n = 0;
    for (std::string line; std::getline(lines, line); ++n) EXPECT_EQ(line.rfind("mode=image ", 0), 0u) << line;
    EXPECT_EQ(n, 50);
    // Library and CLI agree draw for draw.
    std::istringstream in(read_file(d / "cat.txt"));
    const DatasetCatalog cat = parse_catalog(in);
    Sampler s(4);
    std::string expect;
    for (int i = 0; i < 50; ++i) expect += format_tuple(s.draw(cat, 1.0)) + "\n";
    EXPECT_EQ(r.out, expect);
}

TEST(Cli, SampleErrors) {
    const fs::path d = fresh_dir("sample_err");
    write_file_atomic(d / "bad.txt", "clip c0 a\n");
    write_file_atomic(d / "few.txt", "image i0\n");
    EXPECT_EQ(cli("sample --catalog " + q(d / "bad.txt")).code, 3);
    EXPECT_EQ(cli("sample --catalog " + q(d / "few.txt") + " --sigma 1").code, 4);
    EXPECT_EQ(cli("sample --catalog " + q(d / "few.txt") + " --sigma 2").code, 2);
}

TEST(Cli, BsnMatchesLibrary) {
    const fs::path d = fresh_dir("bsn");
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureMap x(8, 8, 4), qm(4, 4, 4);
    for (auto& v : x.values) v = static_cast<float>(u(rng));
    for (auto& v : qm.values) v = static_cast<float>(u(rng));
    Image mask(16, 16, 1);
    for (int y = 4; y < 12; ++y)
        for (int xx = 3; xx < 13; ++xx) mask.at(xx, y) = 1.0;
    write_file_atomic(d / "x.fmap", encode_feature_map(x));
    write_file_atomic(d / "q.fmap", encode_feature_map(qm));
    write_file_atomic(d / "m.pfm", encode_pfm(mask));
    const CliResult r = cli("bsn --x " + q(d / "x.fmap") + " --q " + q(d / "q.fmap") + " --mask " + q(d / "m.pfm") +
                      " --out " + q(d / "o.fmap"));
    ASSERT_EQ(r.code, 0) << r.err;
    const FeatureMap expect =
        bsn(x, upsample_embedding(qm, 8, 8), downsample_mask(mask, 8, 8), BsnParams::initial(4));
    EXPECT_EQ(read_file(d / "o.fmap"), encode_feature_map(expect));
    EXPECT_EQ(cli("bsn --x " + q(d / "x.fmap") + " --q " + q(d / "q.fmap") + " --mask " + q(d / "m.pfm") +
                  " --alpha 1.5 --out " + q(d / "o2.fmap"))
                  .code,
              2);
}

TEST(Cli, SynthIsDeterministic) {
    const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
    ASSERT_EQ(cli("synth --kind translate --frames 4 --seed 7 --out-dir " + q(a)).code, 0);
    ASSERT_EQ(cli("synth --kind translate --frames 4 --seed 7 --out-dir " + q(b)).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(read_file(e.path()), read_file(b / e.path().filename())) << e.path();
    }
    EXPECT_EQ(files, 2u + 4u + 4u);
    EXPECT_EQ(cli("synth --kind wobble --out-dir " + q(a)).code, 2);
}
