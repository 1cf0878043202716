#pragma once
/**
 * @file metrics.hpp
 * @brief Frame-level ROC AUC and average precision, pooled over all test
 * videos and over abnormal videos only (AUC_A / AP_A).
 *
 * AUC uses the Mann-Whitney form with half credit for ties. AP is the
 * step-wise sum (R_k - R_{k-1}) * P_k over distinct descending thresholds, so
 * tied scores enter the curve together.
 */

#include "glancevad/core_types.hpp"
#include "glancevad/scorer.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace glancevad {

namespace detail {

inline void check_metric_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                const char* who) {
    if (scores.size() != labels.size()) {
        throw ShapeError(std::string(who) + ": scores and labels differ in length");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw NumericError(std::string(who) + ": non-finite score");
    }
}

/// Indices sorted by descending score (ties in index order).
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace detail

inline double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_metric_inputs(scores, labels, "roc_auc");
    const auto num_pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    const auto num_neg = static_cast<double>(labels.size()) - num_pos;
    if (num_pos == 0 || num_neg == 0) throw UndefinedMetricError("roc_auc: both classes must be present");

    // Walk groups of equal score from the top; every positive beats the
    // negatives in later groups and ties half of those in its own group.
    const auto order = detail::descending_order(scores);
    double wins = 0.0;
    double neg_remaining = num_neg;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        double pos = 0.0;
        double neg = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? pos : neg) += 1.0;
            ++j;
        }
        neg_remaining -= neg;
        wins += pos * neg_remaining + 0.5 * pos * neg;
        i = j;
    }
    return wins / (num_pos * num_neg);
}

inline double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    detail::check_metric_inputs(scores, labels, "average_precision");
    const auto num_pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    if (num_pos == 0) throw UndefinedMetricError("average_precision: no positive labels");

    const auto order = detail::descending_order(scores);
    double ap = 0.0;
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        double new_tp = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? new_tp : fp) += 1.0;
            ++j;
        }
        tp += new_tp;
        if (new_tp > 0.0) ap += (new_tp / num_pos) * (tp / (tp + fp));
        i = j;
    }
    return ap;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct PopulationCounts {
    std::size_t frames = 0;
    std::size_t positive_frames = 0;
    std::size_t videos = 0;
};

struct EvalReport {
    double auc = 0.0;
    double ap = 0.0;
    double auc_abnormal = 0.0;
    double ap_abnormal = 0.0;
    PopulationCounts all;
    PopulationCounts abnormal;
};

/// Frame-expanded scores and ground truth of one test video.
struct FrameScores {
    VideoLabel label = VideoLabel::Normal;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

inline EvalReport evaluate_frames(std::span<const FrameScores> videos) {
    std::vector<double> all_scores;
    std::vector<std::uint8_t> all_labels;
    std::vector<double> abn_scores;
    std::vector<std::uint8_t> abn_labels;
    EvalReport report;
    for (const auto& v : videos) {
        if (v.scores.size() != v.labels.size()) throw ShapeError("evaluate: frame scores and labels differ in length");
        all_scores.insert(all_scores.end(), v.scores.begin(), v.scores.end());
        all_labels.insert(all_labels.end(), v.labels.begin(), v.labels.end());
        ++report.all.videos;
        if (v.label == VideoLabel::Abnormal) {
            abn_scores.insert(abn_scores.end(), v.scores.begin(), v.scores.end());
            abn_labels.insert(abn_labels.end(), v.labels.begin(), v.labels.end());
            ++report.abnormal.videos;
        }
    }
    auto count = [](const std::vector<std::uint8_t>& l) {
        return static_cast<std::size_t>(std::count(l.begin(), l.end(), std::uint8_t{1}));
    };
    report.all.frames = all_labels.size();
    report.all.positive_frames = count(all_labels);
    report.abnormal.frames = abn_labels.size();
    report.abnormal.positive_frames = count(abn_labels);

    report.auc = roc_auc(all_scores, all_labels);
    report.ap = average_precision(all_scores, all_labels);
    report.auc_abnormal = roc_auc(abn_scores, abn_labels);
    report.ap_abnormal = average_precision(abn_scores, abn_labels);
    return report;
}

/// A test video with frame-level ground truth.
struct EvalVideo {
    FeatureSequence features;
    VideoLabel label;
    std::vector<std::uint8_t> frame_labels;
};

/// Model scores for each video, expanded to frames.
inline std::vector<FrameScores> score_videos(const ScorerModel& model, std::span<const EvalVideo> videos) {
    std::vector<FrameScores> out;
    out.reserve(videos.size());
    for (const auto& v : videos) {
        const auto track = forward(model, v.features);
        out.push_back({v.label,
                       snippet_to_frame_scores(track, v.features.frames_per_snippet(), v.features.total_frames()),
                       v.frame_labels});
    }
    return out;
}

inline EvalReport evaluate(const ScorerModel& model, std::span<const EvalVideo> videos) {
    const auto frames = score_videos(model, videos);
    return evaluate_frames(frames);
}

}  // namespace glancevad
