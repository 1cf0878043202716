#pragma once
/**
 * @file scorer.hpp
 * @brief Snippet-level anomaly scorer (MIL baseline) with hand-written
 * reverse-mode gradients.
 *
 * Architecture: two temporal convolution stages (width 1 or 3, zero padded)
 * with a pointwise nonlinearity, then a width-1 score head and a logistic.
 * All parameters live in one flat vector so the optimiser and the checkpoint
 * writer can treat them uniformly; the layer accessors are views into it.
 *
 * Losses:
 *   - MIL: BCE between the mean of the top-K scores and the video label.
 *   - abnormal: mean snippet BCE against rendered pseudo-labels.
 * Log arguments are clamped to [eps, 1 - eps]; the clamp has zero gradient
 * outside that band.
 */

#include "glancevad/core_types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace glancevad {

inline constexpr double kLogEpsilon = 1e-7;

enum class Activation { ReLU, Tanh };

NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::ReLU, "relu"}, {Activation::Tanh, "tanh"}})

struct ScorerConfig {
    Index input_dim = 1024;
    Index hidden1 = 512;
    Index hidden2 = 128;
    Index temporal_width = 1;  // 1 or 3
    Activation activation = Activation::ReLU;

    void validate() const {
        if (input_dim < 1 || hidden1 < 1 || hidden2 < 1) throw ConfigError("ScorerConfig: widths must be >= 1");
        if (temporal_width != 1 && temporal_width != 3) throw ConfigError("ScorerConfig: temporal_width must be 1 or 3");
    }
};

inline void to_json(nlohmann::json& j, const ScorerConfig& c) {
    j = {{"input_dim", c.input_dim},
         {"hidden1", c.hidden1},
         {"hidden2", c.hidden2},
         {"temporal_width", c.temporal_width},
         {"activation", c.activation}};
}

inline void from_json(const nlohmann::json& j, ScorerConfig& c) {
    ScorerConfig d;
    c.input_dim = j.value("input_dim", d.input_dim);
    c.hidden1 = j.value("hidden1", d.hidden1);
    c.hidden2 = j.value("hidden2", d.hidden2);
    c.temporal_width = j.value("temporal_width", d.temporal_width);
    c.activation = j.value("activation", d.activation);
}

/// K for top-k pooling. fixed_k == 0 selects max(1, floor(T/16) + 1).
struct TopKRule {
    Index fixed_k = 0;

    [[nodiscard]] Index resolve(Index num_snippets) const {
        const Index k = fixed_k > 0 ? fixed_k : std::max<Index>(1, num_snippets / 16 + 1);
        if (k > num_snippets) {
            throw ParameterError("top-k: K=" + std::to_string(k) + " exceeds T=" + std::to_string(num_snippets));
        }
        return k;
    }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class ScorerModel {
public:
    using ConstMatrixView = Eigen::Map<const Matrix>;
    using MatrixView = Eigen::Map<Matrix>;

    explicit ScorerModel(ScorerConfig config) : config_(config) {
        config_.validate();
        const Index k = config_.temporal_width;
        w1_ = 0;
        b1_ = w1_ + k * config_.input_dim * config_.hidden1;
        w2_ = b1_ + config_.hidden1;
        b2_ = w2_ + k * config_.hidden1 * config_.hidden2;
        w3_ = b2_ + config_.hidden2;
        b3_ = w3_ + config_.hidden2;
        size_ = b3_ + 1;
        params_ = Vector::Zero(size_);
        grads_ = Vector::Zero(size_);
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
    static ScorerModel initialized(ScorerConfig config, RngSeed seed) {
        ScorerModel m(config);
        Rng rng(seed, Stream::WeightInit);
        const Index k = m.config_.temporal_width;
        auto fill = [&](Index begin, Index end, Index fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Index i = begin; i < end; ++i) m.params_[i] = rng.uniform(-bound, bound);
        };
        fill(m.w1_, m.w2_, k * m.config_.input_dim);
        fill(m.w2_, m.w3_, k * m.config_.hidden1);
        fill(m.w3_, m.size_, m.config_.hidden2);
        return m;
    }

    [[nodiscard]] const ScorerConfig& config() const noexcept { return config_; }
    [[nodiscard]] Index parameter_count() const noexcept { return size_; }

    [[nodiscard]] Vector& params() noexcept { return params_; }
    [[nodiscard]] const Vector& params() const noexcept { return params_; }
    [[nodiscard]] Vector& gradient() noexcept { return grads_; }
    [[nodiscard]] const Vector& gradient() const noexcept { return grads_; }
    void zero_gradient() { grads_.setZero(); }

    [[nodiscard]] ConstMatrixView w1() const {
        return {params_.data() + w1_, config_.temporal_width * config_.input_dim, config_.hidden1};
    }
    [[nodiscard]] Eigen::Map<const Eigen::RowVectorXd> b1() const { return {params_.data() + b1_, config_.hidden1}; }
    [[nodiscard]] ConstMatrixView w2() const {
        return {params_.data() + w2_, config_.temporal_width * config_.hidden1, config_.hidden2};
    }
    [[nodiscard]] Eigen::Map<const Eigen::RowVectorXd> b2() const { return {params_.data() + b2_, config_.hidden2}; }
    [[nodiscard]] Eigen::Map<const Vector> w3() const { return {params_.data() + w3_, config_.hidden2}; }
    [[nodiscard]] double b3() const { return params_[b3_]; }

    /// Offsets of each parameter block in the flat vector, in layout order.
    struct Layout {
        Index w1, b1, w2, b2, w3, b3, size;
    };
    [[nodiscard]] Layout layout() const noexcept { return {w1_, b1_, w2_, b2_, w3_, b3_, size_}; }

private:
    ScorerConfig config_;
    Index w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0, size_ = 0;
    Vector params_;
    Vector grads_;
};

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace detail {

/// Row t holds [x(t-h), ..., x(t+h)], zero outside the sequence.
inline Matrix im2col(const Matrix& x, Index width) {
    if (width == 1) return x;
    const Index half = width / 2;
    const Index n = x.rows();
    const Index c = x.cols();
    Matrix out = Matrix::Zero(n, width * c);
    for (Index t = 0; t < n; ++t) {
        for (Index j = 0; j < width; ++j) {
            const Index src = t + j - half;
            if (src >= 0 && src < n) out.block(t, j * c, 1, c) = x.row(src);
        }
    }
    return out;
}

inline Matrix col2im(const Matrix& cols, Index width, Index channels) {
    if (width == 1) return cols;
    const Index half = width / 2;
    const Index n = cols.rows();
    Matrix out = Matrix::Zero(n, channels);
    for (Index t = 0; t < n; ++t) {
        for (Index j = 0; j < width; ++j) {
            const Index src = t + j - half;
            if (src >= 0 && src < n) out.row(src) += cols.block(t, j * channels, 1, channels);
        }
    }
    return out;
}

inline Matrix activate(const Matrix& z, Activation a) {
    if (a == Activation::ReLU) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
}

inline Matrix activation_derivative(const Matrix& z, const Matrix& h, Activation a) {
    if (a == Activation::ReLU) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - h.array().square()).matrix();
}

inline double sigmoid(double z) noexcept {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double clamp_probability(double p) noexcept { return std::clamp(p, kLogEpsilon, 1.0 - kLogEpsilon); }

/// d/dp of -(y log p + (1-y) log(1-p)) through the epsilon clamp.
inline double bce_grad(double p, double target) noexcept {
    if (p < kLogEpsilon || p > 1.0 - kLogEpsilon) return 0.0;
    return -target / p + (1.0 - target) / (1.0 - p);
}

inline double bce(double p, double target) noexcept {
    const double q = clamp_probability(p);
    return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

}  // namespace detail

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
    Matrix x_cols, z1, h1, h1_cols, z2, h2;
    Vector logits;
    std::vector<double> scores;
};

inline ForwardCache forward_cached(const ScorerModel& model, const Matrix& x) {
    const auto& cfg = model.config();
    if (x.cols() != cfg.input_dim) {
        throw ShapeError("scorer: feature dimension " + std::to_string(x.cols()) + " != model input width " +
                         std::to_string(cfg.input_dim));
    }
    if (x.rows() < 1) throw ShapeError("scorer: empty feature sequence");
    ForwardCache c;
    c.x_cols = detail::im2col(x, cfg.temporal_width);
    c.z1 = c.x_cols * model.w1();
    c.z1.rowwise() += model.b1();
    c.h1 = detail::activate(c.z1, cfg.activation);
    c.h1_cols = detail::im2col(c.h1, cfg.temporal_width);
    c.z2 = c.h1_cols * model.w2();
    c.z2.rowwise() += model.b2();
    c.h2 = detail::activate(c.z2, cfg.activation);
    c.logits = c.h2 * model.w3();
    c.logits.array() += model.b3();
    c.scores.resize(static_cast<std::size_t>(x.rows()));
    for (Index t = 0; t < x.rows(); ++t) {
        const double z = c.logits[t];
        if (!std::isfinite(z)) throw NumericError("scorer: non-finite logit at snippet " + std::to_string(t));
        c.scores[static_cast<std::size_t>(t)] = detail::sigmoid(z);
    }
    return c;
}

inline ScoreTrack forward(const ScorerModel& model, const FeatureSequence& features) {
    return ScoreTrack(forward_cached(model, features.features()).scores);
}

// ---------------------------------------------------------------------------
// Pooling and losses
// ---------------------------------------------------------------------------

/// Indices of the K largest scores; ties resolved toward the lower index.
inline std::vector<Index> topk_indices(std::span<const double> scores, Index k) {
    const auto n = static_cast<Index>(scores.size());
    if (k < 1 || k > n) {
        throw ParameterError("top-k: K=" + std::to_string(k) + " must be in [1, T=" + std::to_string(n) + "]");
    }
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Index a, Index b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        return sa != sb ? sa > sb : a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

inline double topk_pool(std::span<const double> scores, Index k) {
    double sum = 0.0;
    for (Index i : topk_indices(scores, k)) sum += scores[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(k);
}

inline double topk_pool(const ScoreTrack& track, Index k) { return topk_pool(track.values(), k); }

inline double mil_loss(double y_hat, VideoLabel y) { return detail::bce(y_hat, label_value(y)); }

inline double abn_loss(std::span<const double> predicted, std::span<const double> rendered) {
    if (predicted.size() != rendered.size() || predicted.empty()) {
        throw ShapeError("abn_loss: predicted length " + std::to_string(predicted.size()) + " != rendered length " +
                         std::to_string(rendered.size()));
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < predicted.size(); ++t) sum += detail::bce(predicted[t], rendered[t]);
    return sum / static_cast<double>(predicted.size());
}

inline double abn_loss(const ScoreTrack& predicted, const ScoreTrack& rendered) {
    return abn_loss(predicted.values(), rendered.values());
}

struct LossBreakdown {
    double l_mil = 0.0;
    double l_abn = 0.0;
    double l_nor = 0.0;
    double l_total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o) {
        l_mil += o.l_mil;
        l_abn += o.l_abn;
        l_nor += o.l_nor;
        l_total += o.l_total;
        return *this;
    }
    LossBreakdown& operator/=(double n) {
        l_mil /= n;
        l_abn /= n;
        l_nor /= n;
        l_total /= n;
        return *this;
    }
};

/**
 * Loss of one video and dL/dA per snippet.
 *
 * Abnormal videos contribute the MIL term and, when pseudo-labels are given,
 * the snippet BCE term. Normal videos contribute the MIL term with y = 0,
 * reported as l_nor.
 */
inline LossBreakdown video_loss(std::span<const double> scores, VideoLabel y,
                                std::optional<std::span<const double>> rendered, const TopKRule& topk,
                                std::vector<double>* score_grad = nullptr) {
    const auto n = static_cast<Index>(scores.size());
    const Index k = topk.resolve(n);
    const auto selected = topk_indices(scores, k);
    double y_hat = 0.0;
    for (Index i : selected) y_hat += scores[static_cast<std::size_t>(i)];
    y_hat /= static_cast<double>(k);

    LossBreakdown loss;
    const double target = label_value(y);
    const double mil = detail::bce(y_hat, target);
    if (y == VideoLabel::Abnormal) {
        loss.l_mil = mil;
    } else {
        loss.l_nor = mil;
    }
    if (score_grad) {
        score_grad->assign(scores.size(), 0.0);
        const double g = detail::bce_grad(y_hat, target) / static_cast<double>(k);
        for (Index i : selected) (*score_grad)[static_cast<std::size_t>(i)] += g;
    }

    if (rendered && y == VideoLabel::Abnormal) {
        loss.l_abn = abn_loss(scores, *rendered);
        if (score_grad) {
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t t = 0; t < scores.size(); ++t) {
                (*score_grad)[t] += detail::bce_grad(scores[t], (*rendered)[t]) * inv_n;
            }
        }
    }
    loss.l_total = loss.l_mil + loss.l_abn + loss.l_nor;
    return loss;
}

/// Gradient of sum_t dA[t] * A[t] w.r.t. every parameter, in the flat layout.
inline Vector backprop(const ScorerModel& model, const ForwardCache& cache, std::span<const double> score_grad) {
    const auto& cfg = model.config();
    const auto layout = model.layout();
    const Index n = cache.h2.rows();

    Vector dz3(n);
    for (Index t = 0; t < n; ++t) {
        const double a = cache.scores[static_cast<std::size_t>(t)];
        dz3[t] = score_grad[static_cast<std::size_t>(t)] * a * (1.0 - a);
    }

    Vector grad = Vector::Zero(layout.size);
    grad.segment(layout.w3, cfg.hidden2) = cache.h2.transpose() * dz3;
    grad[layout.b3] = dz3.sum();

    Matrix dz2 = (dz3 * model.w3().transpose()).cwiseProduct(
        detail::activation_derivative(cache.z2, cache.h2, cfg.activation));
    {
        Matrix gw2 = cache.h1_cols.transpose() * dz2;
        Eigen::Map<Matrix>(grad.data() + layout.w2, gw2.rows(), gw2.cols()) = gw2;
        grad.segment(layout.b2, cfg.hidden2) = dz2.colwise().sum().transpose();
    }

    Matrix dh1 = detail::col2im(dz2 * model.w2().transpose(), cfg.temporal_width, cfg.hidden1);
    Matrix dz1 = dh1.cwiseProduct(detail::activation_derivative(cache.z1, cache.h1, cfg.activation));
    {
        Matrix gw1 = cache.x_cols.transpose() * dz1;
        Eigen::Map<Matrix>(grad.data() + layout.w1, gw1.rows(), gw1.cols()) = gw1;
        grad.segment(layout.b1, cfg.hidden1) = dz1.colwise().sum().transpose();
    }

    if (!grad.allFinite()) throw NumericError("scorer: non-finite gradient");
    return grad;
}

struct VideoGradient {
    LossBreakdown loss;
    Vector grad;
    std::vector<double> scores;
};

/// Loss and full parameter gradient for one video; does not touch model buffers.
inline VideoGradient compute_gradient(const ScorerModel& model, const Matrix& features, VideoLabel y,
                                      std::optional<std::span<const double>> rendered, const TopKRule& topk) {
    ForwardCache cache = forward_cached(model, features);
    std::vector<double> score_grad;
    VideoGradient out;
    out.loss = video_loss(cache.scores, y, rendered, topk, &score_grad);
    out.grad = backprop(model, cache, score_grad);
    out.scores = std::move(cache.scores);
    return out;
}

/// Accumulates weight * dL/dtheta into the model's gradient buffer.
inline LossBreakdown backward(ScorerModel& model, const FeatureSequence& features, VideoLabel y,
                              std::optional<std::span<const double>> rendered, const TopKRule& topk,
                              double weight = 1.0) {
    auto g = compute_gradient(model, features.features(), y, rendered, topk);
    model.gradient() += weight * g.grad;
    return g.loss;
}

}  // namespace glancevad
