#include "glancevad/synthetic.hpp"

#include "tmpdir.hpp"

#include <gtest/gtest.h>

using namespace glancevad;

namespace {

SynthConfig tiny() {
    SynthConfig c;
    c.num_normal_train = 3;
    c.num_abnormal_train = 4;
    c.num_normal_test = 2;
    c.num_abnormal_test = 2;
    return c;
}

VideoEntry abnormal_entry(std::vector<FrameInterval> gt, Index frames = 100) {
    VideoEntry v;
    v.video_id = "v";
    v.label = VideoLabel::Abnormal;
    v.total_frames = frames;
    v.set_ground_truth(std::move(gt));
    return v;
}

}  // namespace

TEST(Synth, DefaultConfigIsValid) { EXPECT_NO_THROW(SynthConfig{}.validate()); }

TEST(Synth, InfeasiblePackingRejected) {
    auto c = tiny();
    c.interval_len_max = 200;
    c.interval_len_min = 100;
    EXPECT_THROW(generate_synthetic(c), GenerationError);
}

TEST(Synth, ShapesAndIntervals) {
    const auto ds = generate_synthetic(tiny());
    EXPECT_EQ(ds.manifest.videos.size(), 11u);
    for (const auto& v : ds.manifest.videos) {
        const auto& x = ds.features.at(v.video_id);
        EXPECT_EQ(x.cols(), 16);
        EXPECT_GE(x.rows(), 192);
        EXPECT_LE(x.rows(), 320);
        EXPECT_EQ(x.rows(), v.num_snippets());
        EXPECT_NO_THROW(ds.sequence(v));
        const auto& gt = v.ground_truth();
        if (v.label == VideoLabel::Normal) {
            EXPECT_TRUE(gt.empty());
        } else {
            EXPECT_GE(gt.size(), 1u);
            EXPECT_LE(gt.size(), 2u);
            for (const auto& iv : gt) {
                EXPECT_GE(iv.start, 0);
                EXPECT_LE(iv.end, v.total_frames);
            }
        }
    }
}

TEST(Synth, NoAbnormalVideos) {
    auto c = tiny();
    c.num_abnormal_train = 0;
    c.num_abnormal_test = 0;
    for (const auto& v : generate_synthetic(c).manifest.videos) {
        EXPECT_EQ(v.label, VideoLabel::Normal);
        EXPECT_FALSE(v.has_ground_truth());
    }
}

TEST(Synth, DeterministicBytes) {
    TempDir a, b;
    (void)b;
    write_dataset(a / "one", generate_synthetic(tiny()));
    write_dataset(a / "two", generate_synthetic(tiny()));
    EXPECT_EQ(read_file(a / "one/manifest.json"), read_file(a / "two/manifest.json"));
    EXPECT_EQ(read_file(a / "one/features/train_abnormal_0002.gvf"),
              read_file(a / "two/features/train_abnormal_0002.gvf"));
    auto other = tiny();
    other.seed = RngSeed{1};
    EXPECT_NE(generate_synthetic(other).features.at("train_abnormal_0002"),
              generate_synthetic(tiny()).features.at("train_abnormal_0002"));
}

TEST(SampleGlances, OnePerIntervalInside) {
    const auto ds = generate_synthetic(tiny());
    const auto g = sample_glances(ds.manifest, RngSeed{4});
    for (const auto& v : ds.manifest.videos) {
        const auto* vg = g.find(v.video_id);
        if (v.label == VideoLabel::Normal) {
            EXPECT_EQ(vg, nullptr);
            continue;
        }
        ASSERT_NE(vg, nullptr);
        const auto& gt = v.ground_truth();
        ASSERT_EQ(vg->glances.size(), gt.size());
        for (std::size_t i = 0; i < gt.size(); ++i) {
            EXPECT_GE(vg->glances[i].frame, gt[i].start);
            EXPECT_LT(vg->glances[i].frame, gt[i].end);
            EXPECT_FALSE(vg->glances[i].wall_clock_annotated_at.has_value());
        }
    }
}

TEST(SampleGlances, SingletonAndSorted) {
    DatasetManifest m;
    m.videos.push_back(abnormal_entry({{10, 11}}));
    EXPECT_EQ(sample_glances(m, RngSeed{0}).videos[0].frames(), std::vector<Index>{10});
    m.videos[0] = abnormal_entry({{0, 20}, {30, 50}, {70, 90}});
    const auto f = sample_glances(m, RngSeed{3}).videos[0].frames();
    ASSERT_EQ(f.size(), 3u);
    EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
}

TEST(SampleGlances, UniformByChiSquare) {
    DatasetManifest m;
    m.videos.push_back(abnormal_entry({{0, 100}}));
    std::vector<double> counts(100, 0.0);
    const int n = 10000;
    for (int s = 0; s < n; ++s) counts[sample_glances(m, RngSeed{static_cast<std::uint64_t>(s)}).videos[0].glances[0].frame] += 1;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - n / 100.0) * (c - n / 100.0) / (n / 100.0);
    // Upper 1% point of chi-square with 99 degrees of freedom.
    EXPECT_LT(chi2, 134.642);
}

TEST(PerturbGlances, IdentityAndClamp) {
    const GlanceSet g("v", {5, 20}, 1, 50);
    EXPECT_EQ(perturb_glances(g, 0, RngSeed{1}).frames(), g.frames());
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto p = perturb_glances(GlanceSet("v", {5}, 1, 50), 100, RngSeed{s});
        ASSERT_EQ(p.size(), 1u);
        EXPECT_GE(p.frames()[0], 0);
        EXPECT_LE(p.frames()[0], 49);
    }
    const auto p = perturb_glances(g, 3, RngSeed{2});
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LE(std::abs(p.frames()[i] - g.frames()[i]), 3);
    EXPECT_THROW(perturb_glances(g, -1, RngSeed{0}), ConfigError);
}

TEST(SplitSupervision, DisjointAndDeterministic) {
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) ids.push_back("a" + std::to_string(i));
    for (double frac : {0.25, 0.5, 0.75, 1.0}) {
        const auto s = split_supervision(ids, 1.0 - frac, frac, RngSeed{7});
        EXPECT_EQ(s.glance.size(), static_cast<std::size_t>(std::llround(frac * 20)));
        EXPECT_EQ(s.glance.size() + s.weak.size(), 20u);
        std::set<std::string> all(s.glance.begin(), s.glance.end());
        all.insert(s.weak.begin(), s.weak.end());
        EXPECT_EQ(all.size(), 20u);
        auto shuffled = ids;
        std::reverse(shuffled.begin(), shuffled.end());
        EXPECT_EQ(split_supervision(shuffled, 1.0 - frac, frac, RngSeed{7}).glance, s.glance);
    }
    EXPECT_THROW(split_supervision(ids, 0.6, 0.6, RngSeed{0}), ConfigError);
}
