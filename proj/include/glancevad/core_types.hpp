#pragma once
/**
 * @file core_types.hpp
 * @brief Domain value types shared by every module: feature sequences, glance
 * sets, Gaussian kernels, score tracks and seeded randomness.
 *
 * All types validate on construction and are immutable afterwards, so they can
 * be shared freely between readers.
 */

#include "glancevad/errors.hpp"

#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace glancevad {

using Index = std::int64_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr Index kDefaultFramesPerSnippet = 16;

// ---------------------------------------------------------------------------
// Frame / snippet conversion
// ---------------------------------------------------------------------------

inline Index frame_to_snippet(Index frame, Index frames_per_snippet) {
    if (frame < 0 || frames_per_snippet < 1) {
        throw OutOfRangeError("frame_to_snippet: frame must be >= 0 and frames_per_snippet >= 1 (got frame=" +
                              std::to_string(frame) + ", frames_per_snippet=" +
                              std::to_string(frames_per_snippet) + ")");
    }
    return frame / frames_per_snippet;
}

/// Checks total_frames lies in ((T-1)*fps, T*fps].
inline bool frame_count_consistent(Index num_snippets, Index frames_per_snippet, Index total_frames) {
    return num_snippets >= 1 && frames_per_snippet >= 1 && total_frames <= num_snippets * frames_per_snippet &&
           total_frames > (num_snippets - 1) * frames_per_snippet;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class VideoLabel : std::uint8_t { Normal = 0, Abnormal = 1 };

inline int label_value(VideoLabel y) noexcept { return static_cast<int>(y); }

inline VideoLabel label_from_int(long long y) {
    if (y == 0) return VideoLabel::Normal;
    if (y == 1) return VideoLabel::Abnormal;
    throw ValidationError("video label must be 0 or 1, got " + std::to_string(y));
}

// ---------------------------------------------------------------------------
// FeatureSequence
// ---------------------------------------------------------------------------

/// T x D snippet features of one video plus its frame bookkeeping.
class FeatureSequence {
public:
    FeatureSequence(std::string video_id, Matrix features, Index frames_per_snippet, Index total_frames)
        : video_id_(std::move(video_id)),
          features_(std::move(features)),
          frames_per_snippet_(frames_per_snippet),
          total_frames_(total_frames) {
        if (features_.rows() < 1 || features_.cols() < 1) {
            throw InvariantError("FeatureSequence '" + video_id_ + "': T and D must be >= 1");
        }
        if (!features_.allFinite()) {
            throw InvariantError("FeatureSequence '" + video_id_ + "': non-finite feature value");
        }
        if (!frame_count_consistent(features_.rows(), frames_per_snippet_, total_frames_)) {
            throw InvariantError("FeatureSequence '" + video_id_ + "': total_frames=" + std::to_string(total_frames_) +
                                 " inconsistent with T=" + std::to_string(features_.rows()) +
                                 " and frames_per_snippet=" + std::to_string(frames_per_snippet_));
        }
    }

    /// Sequence with one frame per snippet (used for resampled training tracks).
    static FeatureSequence unit_frames(std::string video_id, Matrix features) {
        const Index t = features.rows();
        return FeatureSequence(std::move(video_id), std::move(features), 1, t);
    }

    [[nodiscard]] const std::string& video_id() const noexcept { return video_id_; }
    [[nodiscard]] const Matrix& features() const noexcept { return features_; }
    [[nodiscard]] Index length() const noexcept { return features_.rows(); }
    [[nodiscard]] Index dim() const noexcept { return features_.cols(); }
    [[nodiscard]] Index frames_per_snippet() const noexcept { return frames_per_snippet_; }
    [[nodiscard]] Index total_frames() const noexcept { return total_frames_; }

private:
    std::string video_id_;
    Matrix features_;
    Index frames_per_snippet_;
    Index total_frames_;
};

// ---------------------------------------------------------------------------
// GlanceSet
// ---------------------------------------------------------------------------

/**
 * Single-frame glance annotations of one video, stored in frames and
 * converted to snippet indices on construction.
 *
 * Frames must be strictly increasing and inside [0, total_frames). Several
 * glances falling into the same snippet collapse to one snippet index.
 */
class GlanceSet {
public:
    GlanceSet() = default;

    GlanceSet(std::string video_id, std::vector<Index> frames, Index frames_per_snippet, Index total_frames)
        : video_id_(std::move(video_id)),
          frames_(std::move(frames)),
          frames_per_snippet_(frames_per_snippet),
          total_frames_(total_frames) {
        if (frames_per_snippet_ < 1) throw InvariantError("GlanceSet: frames_per_snippet must be >= 1");
        for (std::size_t i = 0; i < frames_.size(); ++i) {
            const Index f = frames_[i];
            if (f < 0 || f >= total_frames_) {
                throw OutOfRangeError("GlanceSet '" + video_id_ + "': frame " + std::to_string(f) +
                                      " outside [0, " + std::to_string(total_frames_) + ")");
            }
            if (i > 0 && f <= frames_[i - 1]) {
                throw InvariantError("GlanceSet '" + video_id_ + "': frames must be strictly increasing");
            }
        }
        snippets_.reserve(frames_.size());
        for (Index f : frames_) {
            const Index s = f / frames_per_snippet_;
            if (!snippets_.empty() && snippets_.back() == s) {
                spdlog::warn("video '{}': glance at frame {} duplicates snippet {}; deduplicated", video_id_, f, s);
                continue;
            }
            snippets_.push_back(s);
        }
    }

    /// Sorts and drops repeated frames before constructing.
    static GlanceSet from_unsorted(std::string video_id, std::vector<Index> frames, Index frames_per_snippet,
                                   Index total_frames) {
        std::sort(frames.begin(), frames.end());
        frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
        return GlanceSet(std::move(video_id), std::move(frames), frames_per_snippet, total_frames);
    }

    /// Glances expressed directly as snippet indices of a one-frame-per-snippet track.
    static GlanceSet from_snippets(std::string video_id, std::vector<Index> snippets, Index num_snippets) {
        return from_unsorted(std::move(video_id), std::move(snippets), 1, num_snippets);
    }

    [[nodiscard]] const std::string& video_id() const noexcept { return video_id_; }
    [[nodiscard]] const std::vector<Index>& frames() const noexcept { return frames_; }
    [[nodiscard]] const std::vector<Index>& snippets() const noexcept { return snippets_; }
    [[nodiscard]] Index frames_per_snippet() const noexcept { return frames_per_snippet_; }
    [[nodiscard]] Index total_frames() const noexcept { return total_frames_; }
    [[nodiscard]] bool empty() const noexcept { return frames_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return frames_.size(); }

    /// Non-empty iff the video is abnormal.
    void check_label(VideoLabel y) const {
        if (empty() == (y == VideoLabel::Abnormal)) {
            throw InvariantError("GlanceSet '" + video_id_ + "': glances must be present iff the video is abnormal");
        }
    }

private:
    std::string video_id_;
    std::vector<Index> frames_;
    std::vector<Index> snippets_;
    Index frames_per_snippet_ = kDefaultFramesPerSnippet;
    Index total_frames_ = 0;
};

// ---------------------------------------------------------------------------
// GaussianKernel / ScoreTrack
// ---------------------------------------------------------------------------

struct GaussianKernel {
    Index mu = 0;           ///< snippet position
    double severity = 0.0;  ///< o in [0, 1]
    double radius = 0.1;    ///< context radius in normalized time (video length = 1)

    void validate(Index num_snippets) const {
        if (!(severity >= 0.0 && severity <= 1.0)) throw InvariantError("GaussianKernel: severity outside [0,1]");
        if (!(radius > 0.0) || !std::isfinite(radius)) throw InvariantError("GaussianKernel: radius must be > 0");
        if (mu < 0 || mu >= num_snippets) throw OutOfRangeError("GaussianKernel: mu outside [0, T)");
    }
};

/// Per-snippet scores in [0, 1]; also the type of rendered pseudo-labels.
class ScoreTrack {
public:
    ScoreTrack() = default;
    explicit ScoreTrack(std::vector<double> scores) : scores_(std::move(scores)) {
        for (std::size_t i = 0; i < scores_.size(); ++i) {
            const double s = scores_[i];
            if (!(s >= 0.0 && s <= 1.0)) {
                throw InvariantError("ScoreTrack: entry " + std::to_string(i) + " = " + std::to_string(s) +
                                     " outside [0,1]");
            }
        }
    }

    [[nodiscard]] std::span<const double> values() const noexcept { return scores_; }
    [[nodiscard]] const std::vector<double>& vector() const noexcept { return scores_; }
    [[nodiscard]] Index length() const noexcept { return static_cast<Index>(scores_.size()); }
    [[nodiscard]] double operator[](Index t) const { return scores_[static_cast<std::size_t>(t)]; }

private:
    std::vector<double> scores_;
};

/// Repeats every snippet score frames_per_snippet times, truncated to total_frames.
inline std::vector<double> snippet_to_frame_scores(const ScoreTrack& track, Index frames_per_snippet,
                                                   Index total_frames) {
    if (!frame_count_consistent(track.length(), frames_per_snippet, total_frames)) {
        throw InvariantError("snippet_to_frame_scores: total_frames=" + std::to_string(total_frames) +
                             " inconsistent with T=" + std::to_string(track.length()) +
                             " x frames_per_snippet=" + std::to_string(frames_per_snippet));
    }
    std::vector<double> frames(static_cast<std::size_t>(total_frames));
    for (Index f = 0; f < total_frames; ++f) {
        frames[static_cast<std::size_t>(f)] = track[f / frames_per_snippet];
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

struct RngSeed {
    std::uint64_t value = 0;
    friend bool operator==(RngSeed, RngSeed) = default;
};

/// splitmix64 finalizer; used to derive independent sub-streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named sub-streams so adding a consumer never shifts another's sequence.
enum class Stream : std::uint64_t {
    WeightInit = 1,
    PairOrder = 2,
    Resample = 3,
    Synthesis = 4,
    GlanceSampling = 5,
    Perturbation = 6,
    SupervisionSplit = 7,
};

class Rng {
public:
    explicit Rng(RngSeed seed) : engine_(mix_seed(seed.value)) {}
    Rng(RngSeed seed, Stream stream, std::uint64_t sub = 0)
        : engine_(mix_seed(mix_seed(seed.value) ^ mix_seed(static_cast<std::uint64_t>(stream) * 0x100000001b3ULL + sub))) {}

    std::mt19937_64& engine() noexcept { return engine_; }

    /// Uniform integer in [lo, hi].
    Index uniform_int(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace glancevad
