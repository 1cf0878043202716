#pragma once
// Central finite differences against the analytic gradient.

#include "glancevad/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace gradcheck {

using namespace glancevad;

enum class Term { Mil, Abn, Nor, Total };

struct Instance {
    ScorerModel model;
    Matrix x;
    VideoLabel label;
    std::vector<double> rendered;
    Term term;
};

inline double term_of(const LossBreakdown& l, Term t) {
    switch (t) {
        case Term::Mil: return l.l_mil;
        case Term::Abn: return l.l_abn;
        case Term::Nor: return l.l_nor;
        case Term::Total: return l.l_total;
    }
    return 0.0;
}

inline bool uses_rendered(Term t) { return t == Term::Abn || t == Term::Total; }

inline double loss_at(const Instance& in, const ScorerModel& m) {
    const auto c = forward_cached(m, in.x);
    std::optional<std::span<const double>> r;
    if (uses_rendered(in.term)) r = std::span<const double>(in.rendered);
    return term_of(video_loss(c.scores, in.label, r, TopKRule{}), in.term);
}

inline Vector analytic(const Instance& in) {
    std::optional<std::span<const double>> r;
    if (uses_rendered(in.term)) r = std::span<const double>(in.rendered);
    Vector g = compute_gradient(in.model, in.x, in.label, r, TopKRule{}).grad;
    if (in.term == Term::Abn) g -= compute_gradient(in.model, in.x, in.label, std::nullopt, TopKRule{}).grad;
    return g;
}

// True when a step of size h could cross a ReLU kink, a top-k boundary or the
// log clamp, where the loss is not differentiable.
inline bool near_nonsmooth(const Instance& in, double h) {
    const auto c = forward_cached(in.model, in.x);
    const double margin = 10.0 * h;
    if (in.model.config().activation == Activation::ReLU) {
        if ((c.z1.array().abs() < margin).any() || (c.z2.array().abs() < margin).any()) return true;
    }
    auto s = c.scores;
    const auto k = static_cast<std::size_t>(TopKRule{}.resolve(static_cast<Index>(s.size())));
    std::sort(s.begin(), s.end(), std::greater<>());
    if (k < s.size() && s[k - 1] - s[k] < margin) return true;
    for (double v : s) {
        if (v < 1e-4 || v > 1.0 - 1e-4) return true;
    }
    return false;
}

inline Instance random_instance(std::mt19937_64& gen, Term term) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScorerConfig cfg;
    cfg.input_dim = 1 + static_cast<Index>(gen() % 5);
    cfg.hidden1 = 2 + static_cast<Index>(gen() % 5);
    cfg.hidden2 = 2 + static_cast<Index>(gen() % 4);
    cfg.temporal_width = gen() % 2 ? 3 : 1;
    cfg.activation = gen() % 2 ? Activation::Tanh : Activation::ReLU;
    const Index t = 1 + static_cast<Index>(gen() % 8);
    Instance in{ScorerModel::initialized(cfg, RngSeed{gen()}), Matrix(t, cfg.input_dim),
                term == Term::Nor ? VideoLabel::Normal : VideoLabel::Abnormal, {}, term};
    for (Index i = 0; i < in.x.size(); ++i) in.x.data()[i] = 2.0 * u(gen) - 1.0;
    for (Index i = 0; i < t; ++i) in.rendered.push_back(gen() % 3 == 0 ? 1.0 : u(gen));
    return in;
}

struct Result {
    double max_rel_error = 0.0;
};

inline double relative_error(double a, double n) {
    const double scale = std::max({std::fabs(a), std::fabs(n), 1e-6});
    return std::fabs(a - n) / scale;
}

inline Result check(const Instance& in, double h = 1e-4) {
    const Vector g = analytic(in);
    ScorerModel probe = in.model;
    Result r;
    for (Index i = 0; i < probe.parameter_count(); ++i) {
        const double orig = probe.params()[i];
        probe.params()[i] = orig + h;
        const double up = loss_at(in, probe);
        probe.params()[i] = orig - h;
        const double down = loss_at(in, probe);
        probe.params()[i] = orig;
        r.max_rel_error = std::max(r.max_rel_error, relative_error(g[i], (up - down) / (2.0 * h)));
    }
    return r;
}

// Draws instances until `count` smooth ones have been checked; returns the worst error.
inline double worst_over(std::mt19937_64& gen, int count, Term term) {
    double worst = 0.0;
    for (int done = 0; done < count;) {
        auto in = random_instance(gen, term);
        if (near_nonsmooth(in, 1e-4)) continue;
        worst = std::max(worst, check(in).max_rel_error);
        ++done;
    }
    return worst;
}

}  // namespace gradcheck
