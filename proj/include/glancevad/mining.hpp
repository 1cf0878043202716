#pragma once
/**
 * @file mining.hpp
 * @brief Gaussian kernel mining: bidirectional expansion from each glance
 * while the current score stays above a threshold.
 *
 * The dynamic threshold is alpha * A[g]; every walk stops at the first snippet
 * that fails (break, not skip) and never crosses into a neighbouring glance,
 * whose own expansion covers that side. The first and last glance walk to the
 * video start and end.
 */

#include "glancevad/core_types.hpp"

#include <set>
#include <span>
#include <string>

namespace glancevad {

struct MiningConfig {
    double alpha = 0.9;
    /// When false the threshold is the constant alpha instead of alpha * A[g].
    bool dynamic_threshold = true;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("MiningConfig: alpha must be in (0, 1]");
    }
};

inline std::set<Index> mine(std::span<const double> scores, std::span<const Index> glance_snippets,
                            const MiningConfig& config) {
    config.validate();
    const auto n = static_cast<Index>(scores.size());
    for (std::size_t i = 0; i < glance_snippets.size(); ++i) {
        const Index g = glance_snippets[i];
        if (g < 0 || g >= n) {
            throw OutOfRangeError("mine: glance snippet " + std::to_string(g) + " outside [0, " + std::to_string(n) +
                                  ")");
        }
        if (i > 0 && g <= glance_snippets[i - 1]) throw InvariantError("mine: glance snippets must be increasing");
    }

    std::set<Index> mined;
    const auto num_glances = glance_snippets.size();
    for (std::size_t i = 0; i < num_glances; ++i) {
        const Index g = glance_snippets[i];
        const double threshold = config.dynamic_threshold ? config.alpha * scores[static_cast<std::size_t>(g)]
                                                          : config.alpha;
        const Index left_stop = i == 0 ? 0 : glance_snippets[i - 1] + 1;
        const Index right_stop = i + 1 == num_glances ? n - 1 : glance_snippets[i + 1] - 1;

        for (Index t = g; t >= left_stop; --t) {
            if (!(scores[static_cast<std::size_t>(t)] > threshold)) break;
            mined.insert(t);
        }
        for (Index t = g; t <= right_stop; ++t) {
            if (!(scores[static_cast<std::size_t>(t)] > threshold)) break;
            mined.insert(t);
        }
    }
    return mined;
}

inline std::set<Index> mine(const ScoreTrack& scores, const GlanceSet& glances, const MiningConfig& config) {
    return mine(scores.values(), glances.snippets(), config);
}

}  // namespace glancevad
