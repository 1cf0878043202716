#pragma once
/**
 * @file synthetic.hpp
 * @brief Synthetic stand-in for snippet features with known anomaly
 * intervals, plus glance sampling and perturbation.
 *
 * Feature model for video v, snippet t:
 *
 *   x(t) = scene_v + e(t)                                   (every video)
 *        + shift * ramp(t) * a_c                             (inside anomaly intervals)
 *        + (context_level + context_bump * exp(-dist(t)/decay) + drift(t)) * u
 *                                                            (abnormal videos)
 *
 * e(t) is AR(1) noise, a_c one of several unit anomaly directions, u a shared
 * unit context direction and drift(t) a per-video random walk. The context term
 * spans whole abnormal videos, so a scorer trained on video labels alone can
 * separate videos by context and still mis-rank frames inside abnormal videos.
 */

#include "glancevad/core_types.hpp"
#include "glancevad/dataio.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace glancevad {

struct SynthConfig {
    Index num_normal_train = 30;
    Index num_abnormal_train = 30;
    Index num_normal_test = 20;
    Index num_abnormal_test = 20;
    Index t_min = 192;
    Index t_max = 320;
    Index dim = 16;
    Index frames_per_snippet = 16;
    double fps = 30.0;
    Index intervals_min = 1;
    Index intervals_max = 2;
    Index interval_len_min = 40;  ///< snippets
    Index interval_len_max = 90;  ///< snippets
    Index interval_gap_min = 8;   ///< snippets between consecutive intervals
    Index anomaly_classes = 3;
    double shift = 3.0;
    double ramp = 4.0;  ///< snippets over which an anomaly fades in and out
    double scene_sd = 0.5;
    double noise_sd = 1.0;
    double noise_rho = 0.5;
    double context_level = 1.5;
    double context_bump = 0.5;
    double context_decay = 12.0;  ///< snippets
    double drift_sd = 0.05;
    RngSeed seed{0};

    void validate() const {
        if (num_normal_train < 0 || num_abnormal_train < 0 || num_normal_test < 0 || num_abnormal_test < 0) {
            throw ConfigError("SynthConfig: counts must be >= 0");
        }
        if (t_min < 1 || t_max < t_min) throw ConfigError("SynthConfig: need 1 <= t_min <= t_max");
        if (dim < 1 || frames_per_snippet < 1 || !(fps > 0.0)) throw ConfigError("SynthConfig: dim/fps invalid");
        if (intervals_min < 1 || intervals_max < intervals_min) {
            throw ConfigError("SynthConfig: need 1 <= intervals_min <= intervals_max");
        }
        if (interval_len_min < 1 || interval_len_max < interval_len_min) {
            throw ConfigError("SynthConfig: need 1 <= interval_len_min <= interval_len_max");
        }
        if (interval_gap_min < 0 || anomaly_classes < 1) throw ConfigError("SynthConfig: gap/classes invalid");
        if (!(shift >= 0.0) || !(noise_sd >= 0.0) || !(scene_sd >= 0.0) || !(drift_sd >= 0.0)) {
            throw ConfigError("SynthConfig: magnitudes must be >= 0");
        }
        if (!(noise_rho >= 0.0 && noise_rho < 1.0)) throw ConfigError("SynthConfig: noise_rho must be in [0, 1)");
        if (!(ramp >= 1.0) || !(context_decay > 0.0)) throw ConfigError("SynthConfig: ramp >= 1 and decay > 0");
        const Index needed = intervals_max * interval_len_max + (intervals_max - 1) * interval_gap_min;
        if (needed > t_min) {
            throw GenerationError("SynthConfig: " + std::to_string(intervals_max) + " intervals of up to " +
                                  std::to_string(interval_len_max) + " snippets do not fit in t_min=" +
                                  std::to_string(t_min));
        }
    }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = {{"num_normal_train", c.num_normal_train},
         {"num_abnormal_train", c.num_abnormal_train},
         {"num_normal_test", c.num_normal_test},
         {"num_abnormal_test", c.num_abnormal_test},
         {"t_min", c.t_min},
         {"t_max", c.t_max},
         {"dim", c.dim},
         {"frames_per_snippet", c.frames_per_snippet},
         {"fps", c.fps},
         {"intervals_min", c.intervals_min},
         {"intervals_max", c.intervals_max},
         {"interval_len_min", c.interval_len_min},
         {"interval_len_max", c.interval_len_max},
         {"interval_gap_min", c.interval_gap_min},
         {"anomaly_classes", c.anomaly_classes},
         {"shift", c.shift},
         {"ramp", c.ramp},
         {"scene_sd", c.scene_sd},
         {"noise_sd", c.noise_sd},
         {"noise_rho", c.noise_rho},
         {"context_level", c.context_level},
         {"context_bump", c.context_bump},
         {"context_decay", c.context_decay},
         {"drift_sd", c.drift_sd},
         {"seed", c.seed.value}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
    SynthConfig d;
#define GLANCEVAD_FIELD(name) c.name = j.value(#name, d.name)
    GLANCEVAD_FIELD(num_normal_train);
    GLANCEVAD_FIELD(num_abnormal_train);
    GLANCEVAD_FIELD(num_normal_test);
    GLANCEVAD_FIELD(num_abnormal_test);
    GLANCEVAD_FIELD(t_min);
    GLANCEVAD_FIELD(t_max);
    GLANCEVAD_FIELD(dim);
    GLANCEVAD_FIELD(frames_per_snippet);
    GLANCEVAD_FIELD(fps);
    GLANCEVAD_FIELD(intervals_min);
    GLANCEVAD_FIELD(intervals_max);
    GLANCEVAD_FIELD(interval_len_min);
    GLANCEVAD_FIELD(interval_len_max);
    GLANCEVAD_FIELD(interval_gap_min);
    GLANCEVAD_FIELD(anomaly_classes);
    GLANCEVAD_FIELD(shift);
    GLANCEVAD_FIELD(ramp);
    GLANCEVAD_FIELD(scene_sd);
    GLANCEVAD_FIELD(noise_sd);
    GLANCEVAD_FIELD(noise_rho);
    GLANCEVAD_FIELD(context_level);
    GLANCEVAD_FIELD(context_bump);
    GLANCEVAD_FIELD(context_decay);
    GLANCEVAD_FIELD(drift_sd);
#undef GLANCEVAD_FIELD
    c.seed = RngSeed{j.value("seed", d.seed.value)};
}

/// Manifest plus in-memory features keyed by video id.
struct SyntheticDataset {
    DatasetManifest manifest;
    std::map<std::string, FeatureMatrix32> features;

    [[nodiscard]] FeatureSequence sequence(const VideoEntry& v) const {
        return FeatureSequence(v.video_id, features.at(v.video_id).cast<double>(), v.frames_per_snippet,
                               v.total_frames);
    }
};

namespace detail {

inline Vector random_unit(Rng& rng, Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = rng.normal();
    const double n = v.norm();
    return n > 0.0 ? Vector(v / n) : Vector(Vector::Unit(dim, 0));
}

/// Non-overlapping [start, end) snippet intervals, sorted.
inline std::vector<std::pair<Index, Index>> place_intervals(Rng& rng, Index length, const SynthConfig& c) {
    const Index count = rng.uniform_int(c.intervals_min, c.intervals_max);
    std::vector<Index> lengths(static_cast<std::size_t>(count));
    Index used = (count - 1) * c.interval_gap_min;
    for (auto& l : lengths) {
        l = rng.uniform_int(c.interval_len_min, c.interval_len_max);
        used += l;
    }
    const Index free = length - used;
    if (free < 0) throw GenerationError("synthetic: intervals do not fit in a video of " + std::to_string(length));
    // Split the free snippets into count + 1 gaps.
    std::vector<Index> cuts(static_cast<std::size_t>(count));
    for (auto& cut : cuts) cut = rng.uniform_int(0, free);
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::pair<Index, Index>> out;
    Index pos = 0;
    Index prev_cut = 0;
    for (Index i = 0; i < count; ++i) {
        pos += cuts[static_cast<std::size_t>(i)] - prev_cut;
        prev_cut = cuts[static_cast<std::size_t>(i)];
        if (i > 0) pos += c.interval_gap_min;
        out.emplace_back(pos, pos + lengths[static_cast<std::size_t>(i)]);
        pos += lengths[static_cast<std::size_t>(i)];
    }
    return out;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SynthConfig& c) {
    c.validate();
    Rng rng(c.seed, Stream::Synthesis);
    std::vector<Vector> anomaly_dirs;
    for (Index k = 0; k < c.anomaly_classes; ++k) anomaly_dirs.push_back(detail::random_unit(rng, c.dim));
    const Vector context_dir = detail::random_unit(rng, c.dim);

    SyntheticDataset ds;
    auto make_video = [&](const std::string& id, VideoLabel label, Split split) {
        const Index length = rng.uniform_int(c.t_min, c.t_max);
        VideoEntry v;
        v.video_id = id;
        v.feature_path = "features/" + id + ".gvf";
        v.label = label;
        v.frames_per_snippet = c.frames_per_snippet;
        v.total_frames = length * c.frames_per_snippet - rng.uniform_int(0, c.frames_per_snippet - 1);
        v.split = split;
        v.fps = c.fps;

        std::vector<std::pair<Index, Index>> intervals;
        if (label == VideoLabel::Abnormal) intervals = detail::place_intervals(rng, length, c);

        Vector scene(c.dim);
        for (Index i = 0; i < c.dim; ++i) scene[i] = rng.normal(0.0, c.scene_sd);
        std::vector<Index> classes;
        for (std::size_t i = 0; i < intervals.size(); ++i) classes.push_back(rng.uniform_int(0, c.anomaly_classes - 1));

        Matrix x(length, c.dim);
        Vector noise = Vector::Zero(c.dim);
        const double innovation = std::sqrt(1.0 - c.noise_rho * c.noise_rho);
        double drift = 0.0;
        for (Index t = 0; t < length; ++t) {
            for (Index i = 0; i < c.dim; ++i) {
                const double fresh = rng.normal(0.0, c.noise_sd);
                noise[i] = t == 0 ? fresh : c.noise_rho * noise[i] + innovation * fresh;
            }
            Vector row = scene + noise;
            drift += rng.normal(0.0, c.drift_sd);
            if (label == VideoLabel::Abnormal) {
                double dist = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < intervals.size(); ++k) {
                    const auto [s, e] = intervals[k];
                    if (t >= s && t < e) {
                        dist = 0.0;
                        const double r = std::min({1.0, static_cast<double>(t - s + 1) / c.ramp,
                                                   static_cast<double>(e - t) / c.ramp});
                        row += c.shift * r * anomaly_dirs[static_cast<std::size_t>(classes[k])];
                    } else {
                        dist = std::min(dist, static_cast<double>(t < s ? s - t : t - e + 1));
                    }
                }
                const double context = c.context_level + c.context_bump * std::exp(-dist / c.context_decay) + drift;
                row += context * context_dir;
            }
            x.row(t) = row.transpose();
        }

        std::vector<FrameInterval> frames;
        for (const auto& [s, e] : intervals) {
            frames.push_back({s * c.frames_per_snippet, std::min(e * c.frames_per_snippet, v.total_frames)});
        }
        v.set_ground_truth(std::move(frames));
        ds.features.emplace(id, x.cast<float>());
        ds.manifest.videos.push_back(std::move(v));
    };

    auto make_split = [&](const char* prefix, Index count, VideoLabel label, Split split) {
        for (Index i = 0; i < count; ++i) {
            char id[64];
            std::snprintf(id, sizeof id, "%s_%04lld", prefix, static_cast<long long>(i));
            make_video(id, label, split);
        }
    };
    make_split("train_normal", c.num_normal_train, VideoLabel::Normal, Split::Train);
    make_split("train_abnormal", c.num_abnormal_train, VideoLabel::Abnormal, Split::Train);
    make_split("test_normal", c.num_normal_test, VideoLabel::Normal, Split::Test);
    make_split("test_abnormal", c.num_abnormal_test, VideoLabel::Abnormal, Split::Test);
    return ds;
}

/// Writes manifest.json and features/<id>.gvf under dir.
inline void write_dataset(const fs::path& dir, const SyntheticDataset& ds) {
    for (const auto& v : ds.manifest.videos) store_features(dir / v.feature_path, ds.features.at(v.video_id));
    store_manifest(dir / "manifest.json", ds.manifest);
}

// ---------------------------------------------------------------------------
// Glances
// ---------------------------------------------------------------------------

/// One frame drawn uniformly from each ground-truth interval of every abnormal
/// training and test video.
inline GlanceFile sample_glances(const DatasetManifest& m, RngSeed seed) {
    GlanceFile out;
    for (const auto& v : m.videos) {
        if (v.label != VideoLabel::Abnormal) continue;
        Rng rng(seed, Stream::GlanceSampling, fnv1a64(v.video_id));
        VideoGlances vg{v.video_id, {}};
        for (const auto& iv : v.ground_truth()) {
            if (iv.end <= iv.start) throw GenerationError("sample_glances: empty interval in '" + v.video_id + "'");
            const Index f = rng.uniform_int(iv.start, iv.end - 1);
            if (!vg.glances.empty() && vg.glances.back().frame >= f) continue;
            vg.glances.push_back({f, std::nullopt, "synthetic"});
        }
        out.videos.push_back(std::move(vg));
    }
    return out;
}

/// Each glance shifted by a uniform integer in [-max_shift, max_shift] and
/// clamped into the video; repeated frames collapse.
inline GlanceSet perturb_glances(const GlanceSet& glances, Index max_shift, RngSeed seed) {
    if (max_shift < 0) throw ConfigError("perturb_glances: max_shift must be >= 0");
    if (max_shift == 0) return glances;
    Rng rng(seed, Stream::Perturbation, fnv1a64(glances.video_id()));
    std::vector<Index> frames;
    frames.reserve(glances.size());
    for (Index f : glances.frames()) {
        const Index shifted = f + rng.uniform_int(-max_shift, max_shift);
        frames.push_back(std::clamp<Index>(shifted, 0, glances.total_frames() - 1));
    }
    return GlanceSet::from_unsorted(glances.video_id(), std::move(frames), glances.frames_per_snippet(),
                                    glances.total_frames());
}

/// Disjoint glance / weak / excluded partition of the abnormal training videos.
struct SupervisionSplit {
    std::vector<std::string> glance;
    std::vector<std::string> weak;
};

inline SupervisionSplit split_supervision(std::vector<std::string> abnormal_ids, double weak_fraction,
                                          double glance_fraction, RngSeed seed) {
    if (weak_fraction < 0.0 || glance_fraction < 0.0 || weak_fraction + glance_fraction > 1.0 + 1e-12) {
        throw ConfigError("split_supervision: fractions must be >= 0 and sum to <= 1");
    }
    std::sort(abnormal_ids.begin(), abnormal_ids.end());
    Rng rng(seed, Stream::SupervisionSplit);
    rng.shuffle(abnormal_ids);
    const auto n = static_cast<double>(abnormal_ids.size());
    const auto n_glance = static_cast<std::size_t>(std::llround(glance_fraction * n));
    const auto n_weak = std::min(abnormal_ids.size() - n_glance, static_cast<std::size_t>(std::llround(weak_fraction * n)));
    SupervisionSplit s;
    s.glance.assign(abnormal_ids.begin(), abnormal_ids.begin() + static_cast<std::ptrdiff_t>(n_glance));
    s.weak.assign(abnormal_ids.begin() + static_cast<std::ptrdiff_t>(n_glance),
                  abnormal_ids.begin() + static_cast<std::ptrdiff_t>(n_glance + n_weak));
    return s;
}

}  // namespace glancevad
