#pragma once
/**
 * @file splatting.hpp
 * @brief Temporal Gaussian splatting: one anomaly kernel per snippet, rendered
 * into a dense pseudo-label track.
 *
 * Positions are measured in normalized time (t / T), so a radius of 0.1 spans
 * a tenth of the video regardless of its snippet count. The splat sum is
 * clamped with min(x, 1).
 */

#include "glancevad/core_types.hpp"

#include <cmath>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glancevad {

enum class KernelFamily { Normal, Cauchy, Laplace };

inline std::string_view to_string(KernelFamily f) noexcept {
    switch (f) {
        case KernelFamily::Normal: return "normal";
        case KernelFamily::Cauchy: return "cauchy";
        case KernelFamily::Laplace: return "laplace";
    }
    return "normal";
}

inline KernelFamily kernel_family_from_string(std::string_view s) {
    if (s == "normal" || s == "Normal" || s == "gaussian") return KernelFamily::Normal;
    if (s == "cauchy" || s == "Cauchy") return KernelFamily::Cauchy;
    if (s == "laplace" || s == "Laplace") return KernelFamily::Laplace;
    throw ConfigError("unknown kernel family '" + std::string(s) + "' (expected normal|cauchy|laplace)");
}

/// Unit-severity kernel profile at normalized distance d >= 0.
inline double kernel_profile(double d, double radius, KernelFamily family) noexcept {
    switch (family) {
        case KernelFamily::Normal: return std::exp(-(d * d) / (2.0 * radius * radius));
        case KernelFamily::Cauchy: return (radius * radius) / (d * d + radius * radius);
        case KernelFamily::Laplace: return std::exp(-d / radius);
    }
    return 0.0;
}

inline double normalized_distance(Index t, Index mu, Index num_snippets) noexcept {
    const Index diff = t > mu ? t - mu : mu - t;
    return static_cast<double>(diff) / static_cast<double>(num_snippets);
}

inline double kernel_value(const GaussianKernel& kernel, Index t, Index num_snippets, KernelFamily family) {
    if (t < 0 || t >= num_snippets) {
        throw OutOfRangeError("kernel_value: t=" + std::to_string(t) + " outside [0, " +
                              std::to_string(num_snippets) + ")");
    }
    kernel.validate(num_snippets);
    const double v =
        kernel.severity * kernel_profile(normalized_distance(t, kernel.mu, num_snippets), kernel.radius, family);
    if (!std::isfinite(v)) throw NumericError("kernel_value: non-finite result");
    return v;
}

// ---------------------------------------------------------------------------
// KernelTrack
// ---------------------------------------------------------------------------

class KernelTrack {
public:
    KernelTrack(std::vector<GaussianKernel> kernels, KernelFamily family)
        : kernels_(std::move(kernels)), family_(family) {
        const auto n = static_cast<Index>(kernels_.size());
        if (n < 1) throw InvariantError("KernelTrack: needs at least one kernel");
        for (Index i = 0; i < n; ++i) {
            const auto& k = kernels_[static_cast<std::size_t>(i)];
            if (k.mu != i) throw InvariantError("KernelTrack: kernel " + std::to_string(i) + " has mu != index");
            k.validate(n);
        }
    }

    [[nodiscard]] const std::vector<GaussianKernel>& kernels() const noexcept { return kernels_; }
    [[nodiscard]] KernelFamily family() const noexcept { return family_; }
    [[nodiscard]] Index length() const noexcept { return static_cast<Index>(kernels_.size()); }

    [[nodiscard]] std::vector<double> severities() const {
        std::vector<double> s;
        s.reserve(kernels_.size());
        for (const auto& k : kernels_) s.push_back(k.severity);
        return s;
    }

private:
    std::vector<GaussianKernel> kernels_;
    KernelFamily family_;
};

namespace detail {

inline void check_snippets_in_range(std::span<const Index> snippets, Index num_snippets, std::string_view who) {
    for (Index s : snippets) {
        if (s < 0 || s >= num_snippets) {
            throw OutOfRangeError(std::string(who) + ": snippet " + std::to_string(s) + " outside [0, " +
                                  std::to_string(num_snippets) + ")");
        }
    }
}

}  // namespace detail

/// Severity 1 at every glance snippet, 0 elsewhere, all radii r_g.
inline KernelTrack init_kernels(std::span<const Index> glance_snippets, Index num_snippets, double r_g,
                                KernelFamily family) {
    if (num_snippets < 1) throw InvariantError("init_kernels: T must be >= 1");
    if (!(r_g > 0.0)) throw ConfigError("init_kernels: r_g must be > 0");
    detail::check_snippets_in_range(glance_snippets, num_snippets, "init_kernels");
    std::vector<GaussianKernel> kernels(static_cast<std::size_t>(num_snippets));
    for (Index i = 0; i < num_snippets; ++i) kernels[static_cast<std::size_t>(i)] = {i, 0.0, r_g};
    for (Index g : glance_snippets) kernels[static_cast<std::size_t>(g)].severity = 1.0;
    return KernelTrack(std::move(kernels), family);
}

inline KernelTrack init_kernels(const GlanceSet& glances, Index num_snippets, double r_g, KernelFamily family) {
    return init_kernels(glances.snippets(), num_snippets, r_g, family);
}

/// Severity 1 exactly on glances ∪ mined, 0 elsewhere; radii are kept.
inline KernelTrack update_kernels(const KernelTrack& track, const std::set<Index>& mined,
                                  std::span<const Index> glance_snippets) {
    const Index n = track.length();
    detail::check_snippets_in_range(glance_snippets, n, "update_kernels");
    std::vector<GaussianKernel> kernels = track.kernels();
    for (auto& k : kernels) k.severity = 0.0;
    for (Index g : glance_snippets) kernels[static_cast<std::size_t>(g)].severity = 1.0;
    for (Index m : mined) {
        if (m < 0 || m >= n) {
            throw OutOfRangeError("update_kernels: mined snippet " + std::to_string(m) + " outside [0, " +
                                  std::to_string(n) + ")");
        }
        kernels[static_cast<std::size_t>(m)].severity = 1.0;
    }
    return KernelTrack(std::move(kernels), track.family());
}

inline KernelTrack update_kernels(const KernelTrack& track, const std::set<Index>& mined, const GlanceSet& glances) {
    return update_kernels(track, mined, glances.snippets());
}

/**
 * Splat every kernel and clamp: A(t) = min(sum_i f_i(t), 1).
 *
 * Kernels sharing one radius reuse a per-distance profile table; the summation
 * order over kernels is ascending in either case.
 */
inline ScoreTrack render(const KernelTrack& track) {
    const Index n = track.length();
    const auto& kernels = track.kernels();

    bool uniform_radius = true;
    for (const auto& k : kernels) uniform_radius = uniform_radius && k.radius == kernels.front().radius;

    std::vector<double> profile;
    if (uniform_radius) {
        profile.resize(static_cast<std::size_t>(n));
        for (Index d = 0; d < n; ++d) {
            profile[static_cast<std::size_t>(d)] =
                kernel_profile(normalized_distance(d, 0, n), kernels.front().radius, track.family());
        }
    }

    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (Index t = 0; t < n; ++t) {
        double sum = 0.0;
        for (const auto& k : kernels) {
            if (k.severity == 0.0) continue;
            const Index d = t > k.mu ? t - k.mu : k.mu - t;
            const double shape = uniform_radius ? profile[static_cast<std::size_t>(d)]
                                                : kernel_profile(normalized_distance(t, k.mu, n), k.radius,
                                                                 track.family());
            sum += k.severity * shape;
        }
        if (!std::isfinite(sum)) throw NumericError("render: non-finite splat at snippet " + std::to_string(t));
        out[static_cast<std::size_t>(t)] = std::min(sum, 1.0);
    }
    return ScoreTrack(std::move(out));
}

/// 0/1 indicator of the kernels' severities; the splat-free alternative used in ablations.
inline ScoreTrack render_binary(const KernelTrack& track) {
    std::vector<double> out;
    out.reserve(track.kernels().size());
    for (const auto& k : track.kernels()) out.push_back(k.severity > 0.0 ? 1.0 : 0.0);
    return ScoreTrack(std::move(out));
}

}  // namespace glancevad
