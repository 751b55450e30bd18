#include <gtest/gtest.h>

#include <random>

#include "meshflow/neuralmath.hpp"
#include "oracles.hpp"

using namespace meshflow;

namespace {

FeatureMap random_map(std::mt19937_64& rng, int h, int w, int c, double lo = -2.0, double hi = 3.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    FeatureMap f(h, w, c);
    for (auto& v : f.values) v = u(rng);
    return f;
}

SoftMask random_mask(std::mt19937_64& rng, int h, int w) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SoftMask m(h, w);
    for (auto& v : m.values) v = u(rng);
    return m;
}

Image binary_mask(int w, int h, auto&& pred) {
    Image m(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at(x, y) = pred(x, y) ? 1.0 : 0.0;
    return m;
}

}  // namespace

TEST(ChannelStats, MatchesLonghand) {
    std::mt19937_64 rng(1);
    const FeatureMap f = random_map(rng, 5, 7, 3);
    const ChannelStats s = channel_stats(f);
    for (int c = 0; c < 3; ++c) {
        double m, sd;
        oracle::channel_stats(f, c, m, sd);
        EXPECT_NEAR(s.mean[c], m, 1e-14);
        EXPECT_NEAR(s.stddev[c], sd, 1e-14);
    }
}

TEST(Adain, ImposesTargetStatistics) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureMap a = random_map(rng, 6, 5, 4);
        const FeatureMap b = random_map(rng, 3, 9, 4, 1.0, 10.0);
        const ChannelStats sa = channel_stats(a), sb = channel_stats(b), so = channel_stats(adain(a, b));
        for (int c = 0; c < 4; ++c) {
            EXPECT_NEAR(so.mean[c], sb.mean[c], 1e-9);
            // The eps in the denominator shrinks the spread by sd/(sd+eps).
            EXPECT_NEAR(so.stddev[c], sb.stddev[c] * sa.stddev[c] / (sa.stddev[c] + kAdainEps), 1e-9);
            EXPECT_NEAR(so.stddev[c] / sb.stddev[c], 1.0, 2 * kAdainEps / sa.stddev[c]);
        }
    }
}

TEST(Adain, SelfTransferIsNearIdentity) {
    std::mt19937_64 rng(3);
    const FeatureMap a = random_map(rng, 4, 4, 2);
    const FeatureMap out = adain(a, a);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(out.values[i], a.values[i], 1e-4);
}

TEST(Adain, ConstantTargetGivesConstantOutput) {
    std::mt19937_64 rng(4);
    const FeatureMap out = adain(random_map(rng, 4, 4, 2), FeatureMap(2, 2, 2, 1.5));
    for (double v : out.values) EXPECT_DOUBLE_EQ(v, 1.5);
}

TEST(Adain, ChannelMismatchThrows) {
    EXPECT_THROW(adain(FeatureMap(2, 2, 3), FeatureMap(2, 2, 2)), DimensionError);
}

TEST(Bsn, ZeroBlendIsIdentity) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const FeatureMap x = random_map(rng, 6, 6, 3), q = random_map(rng, 6, 6, 3);
        const SoftMask h = random_mask(rng, 6, 6);
        BsnParams p{std::vector(3, 0.0), std::vector(3, 0.0)};
        const FeatureMap out = bsn(x, q, h, p);
        for (std::size_t i = 0; i < x.values.size(); ++i) EXPECT_NEAR(out.values[i], x.values[i], 1e-12);
    }
}

TEST(Bsn, EmptyMaskClosedForm) {
    // With h == 0 the facial half is identically zero, so only the background
    // term and the pass-through survive.
    std::mt19937_64 rng(6);
    const FeatureMap x = random_map(rng, 5, 4, 2), q = random_map(rng, 5, 4, 2);
    const SoftMask h(5, 4, 0.0);
    const BsnParams p = BsnParams::initial(2);
    const FeatureMap out = bsn(x, q, h, p);
    const ChannelStats sq = channel_stats(q);
    for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 4; ++xx)
            for (int c = 0; c < 2; ++c) {
                // back = adain(x, 0) = mean(0) = 0; face = adain(0, q) = mu(q).
                const double expect = 0.8 * sq.mean[c] + 0.9 * x.at(y, xx, c);
                EXPECT_NEAR(out.at(y, xx, c), expect, 1e-12);
            }
}

TEST(Bsn, MatchesFourTermLonghand) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const FeatureMap x = random_map(rng, 7, 5, 3), q = random_map(rng, 7, 5, 3);
        const SoftMask h = random_mask(rng, 7, 5);
        const FeatureMap out = bsn(x, q, h, BsnParams::initial(3));
        const FeatureMap ref = oracle::bsn(x, q, h, 0.8, 0.1);
        for (std::size_t i = 0; i < out.values.size(); ++i) EXPECT_NEAR(out.values[i], ref.values[i], 1e-10);
    }
}

TEST(Bsn, RejectsBadInputs) {
    const FeatureMap x(2, 2, 2), q(2, 3, 2);
    const SoftMask h(2, 2);
    EXPECT_THROW(bsn(x, q, h, BsnParams::initial(2)), DimensionError);
    EXPECT_THROW(bsn(x, x, SoftMask(3, 2), BsnParams::initial(2)), DimensionError);
    EXPECT_THROW(bsn(x, x, h, BsnParams::initial(3)), DimensionError);
    EXPECT_THROW(bsn(x, x, h, BsnParams{{0.5, 1.5}, {0.1, 0.1}}), ArgumentError);
    EXPECT_THROW(bsn(x, x, h, BsnParams{{0.5, 0.5}, {-0.1, 0.1}}), ArgumentError);
}

TEST(DownsampleMask, AllOnesStaysOne) {
    const SoftMask m = downsample_mask(Image(12, 9, 1, 1.0), 4, 5);
    for (double v : m.values) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(DownsampleMask, CheckerboardAveragesToHalf) {
    const Image checker = binary_mask(8, 8, [](int x, int y) { return (x + y) % 2 == 0; });
    const SoftMask m = downsample_mask(checker, 4, 4);
    for (double v : m.values) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(DownsampleMask, MatchesBoxFilterForIntegerRatio) {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution coin(0.4);
    const Image src = binary_mask(12, 12, [&](int, int) { return coin(rng); });
    const SoftMask m = downsample_mask(src, 4, 3);
    for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 3; ++ox) {
            double s = 0.0;
            for (int y = 3 * oy; y < 3 * oy + 3; ++y)
                for (int x = 4 * ox; x < 4 * ox + 4; ++x) s += src.at(x, y);
            EXPECT_NEAR(m.at(oy, ox), s / 12.0, 1e-15);
        }
}

TEST(DownsampleMask, FractionalOverlapPreservesMass) {
    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.5);
    const Image src = binary_mask(10, 7, [&](int, int) { return coin(rng); });
    const SoftMask m = downsample_mask(src, 3, 4);
    double total_src = 0.0, total_out = 0.0;
    for (double v : src.data) total_src += v;
    for (double v : m.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        total_out += v;
    }
    EXPECT_NEAR(total_out * (10.0 / 4.0) * (7.0 / 3.0), total_src, 1e-12);
}

TEST(DownsampleMask, RejectsUpscaleAndMultichannel) {
    EXPECT_THROW(downsample_mask(Image(4, 4, 1), 8, 4), ArgumentError);
    EXPECT_THROW(downsample_mask(Image(4, 4, 3), 2, 2), ArgumentError);
}

TEST(UpsampleEmbedding, ConstantStaysConstant) {
    const FeatureMap out = upsample_embedding(FeatureMap(3, 2, 2, 0.7), 9, 8);
    for (double v : out.values) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(UpsampleEmbedding, SinglePixelBroadcasts) {
    FeatureMap p(1, 1, 2);
    p.values = {1.0, -2.0};
    const FeatureMap out = upsample_embedding(p, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 3; ++x) {
            EXPECT_EQ(out.at(y, x, 0), 1.0);
            EXPECT_EQ(out.at(y, x, 1), -2.0);
        }
}

TEST(UpsampleEmbedding, PreservesLinearRamp) {
    FeatureMap p(4, 5, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) p.at(y, x, 0) = 2.0 * x - 3.0 * y;
    const FeatureMap out = upsample_embedding(p, 10, 13);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 13; ++x) {
            const double sx = x * 4.0 / 12.0, sy = y * 3.0 / 9.0;
            EXPECT_NEAR(out.at(y, x, 0), 2.0 * sx - 3.0 * sy, 1e-6);
        }
    // Corners land on source corners.
    EXPECT_EQ(out.at(9, 12, 0), p.at(3, 4, 0));
}

TEST(UpsampleEmbedding, RejectsDownscale) {
    EXPECT_THROW(upsample_embedding(FeatureMap(4, 4, 1), 2, 4), ArgumentError);
}

TEST(Losses, AppearanceIsMeanL1) {
    FeatureMap a(1, 2, 1), b(1, 2, 1);
    a.values = {1.0, 2.0};
    b.values = {0.0, 4.0};
    EXPECT_EQ(appearance_loss(a, b), 1.5);
    EXPECT_THROW(appearance_loss(a, FeatureMap(2, 1, 1)), DimensionError);
}

TEST(Losses, ReconstructionModes) {
    const Image y(3, 3, 3, 0.25), x(3, 3, 3, 0.75);
    EXPECT_EQ(reconstruction_loss(y, x, SampleMode::video), 0.5);
    EXPECT_EQ(reconstruction_loss(y, x, SampleMode::image), 0.0);
    EXPECT_EQ(reconstruction_loss(y, Image(2, 2, 3), SampleMode::image), 0.0);
}

TEST(Losses, HingeExamples) {
    const std::vector<FeatureMap> real{FeatureMap(2, 2, 1, 2.0)};
    const std::vector<FeatureMap> fake{FeatureMap(2, 2, 1, -3.0)};
    const AdversarialLoss l = adversarial_loss(real, fake, AdversarialForm::hinge);
    EXPECT_EQ(l.d_loss, 0.0);
    EXPECT_EQ(l.g_loss, 3.0);
    const std::vector<FeatureMap> zero{FeatureMap(2, 2, 1, 0.0)};
    const AdversarialLoss z = adversarial_loss(zero, zero, AdversarialForm::hinge);
    EXPECT_EQ(z.d_loss, 2.0);
    EXPECT_EQ(z.g_loss, 0.0);
}

TEST(Losses, HingeAveragesOverScales) {
    FeatureMap r0(1, 2, 1), f0(1, 2, 1), r1(1, 1, 1), f1(1, 1, 1);
    r0.values = {0.5, 3.0};
    f0.values = {-0.5, 2.0};
    r1.values = {-1.0};
    f1.values = {0.25};
    const std::vector<FeatureMap> real{r0, r1}, fake{f0, f1};
    const AdversarialLoss l = adversarial_loss(real, fake, AdversarialForm::hinge);
    const double d0 = (0.5 + 0.0) / 2 + (0.5 + 3.0) / 2, d1 = 2.0 + 1.25;
    const double g0 = -(1.5 / 2), g1 = -0.25;
    EXPECT_DOUBLE_EQ(l.d_loss, (d0 + d1) / 2);
    EXPECT_DOUBLE_EQ(l.g_loss, (g0 + g1) / 2);
}

TEST(Losses, LogForm) {
    const std::vector<FeatureMap> real{FeatureMap(1, 1, 1, 0.75)};
    const std::vector<FeatureMap> fake{FeatureMap(1, 1, 1, 0.25)};
    const AdversarialLoss l = adversarial_loss(real, fake, AdversarialForm::log);
    EXPECT_NEAR(l.d_loss, -(std::log(0.75) + std::log(0.75)), 1e-15);
    EXPECT_NEAR(l.g_loss, std::log(0.75), 1e-15);
    const std::vector<FeatureMap> bad{FeatureMap(1, 1, 1, 1.0)};
    EXPECT_THROW(adversarial_loss(bad, fake, AdversarialForm::log), ArgumentError);
}

TEST(Losses, AdversarialRejectsBadLists) {
    const std::vector<FeatureMap> one{FeatureMap(1, 1, 1)}, two(2, FeatureMap(1, 1, 1)), none;
    EXPECT_THROW(adversarial_loss(none, none, AdversarialForm::hinge), ArgumentError);
    EXPECT_THROW(adversarial_loss(one, two, AdversarialForm::hinge), DimensionError);
}

TEST(Losses, TotalWithDefaultWeights) {
    EXPECT_EQ(total_loss(1, 2, 3, 4), 62.0);
    EXPECT_EQ(total_loss(1, 1, 1, 1, LossWeights{1, 0, 0, 0}), 1.0);
}

TEST(Losses, L1TriangleInequality) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const FeatureMap a = random_map(rng, 3, 3, 2), b = random_map(rng, 3, 3, 2), c = random_map(rng, 3, 3, 2);
        EXPECT_LE(appearance_loss(a, c), appearance_loss(a, b) + appearance_loss(b, c) + 1e-15);
        EXPECT_GE(appearance_loss(a, b), 0.0);
    }
}
