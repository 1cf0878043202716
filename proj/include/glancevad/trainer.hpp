#pragma once
/**
 * @file trainer.hpp
 * @brief Normal/abnormal pair training with per-iteration pseudo-label refresh.
 *
 * Each iteration resamples both videos of a pair to N snippets, scores the
 * abnormal one with the current model, mines pseudo anomaly snippets around
 * its glances, updates and renders the kernel track, and then takes one Adam
 * step on the batch-mean of
 *
 *     L_mil(abnormal) + L_abn(abnormal, rendered) + L_nor(normal).
 *
 * Abnormal videos without glances (weak supervision) skip L_abn.
 */

#include "glancevad/core_types.hpp"
#include "glancevad/mining.hpp"
#include "glancevad/optim.hpp"
#include "glancevad/scorer.hpp"
#include "glancevad/splatting.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace glancevad {

NLOHMANN_JSON_SERIALIZE_ENUM(KernelFamily, {{KernelFamily::Normal, "normal"},
                                            {KernelFamily::Cauchy, "cauchy"},
                                            {KernelFamily::Laplace, "laplace"}})

struct TrainConfig {
    Index resample_len = 200;
    Index batch_pairs = 8;
    double lr = 1e-4;
    double weight_decay = 5e-4;
    Index epochs = 50;
    double alpha = 0.9;
    double r_g = 0.1;
    KernelFamily kernel_family = KernelFamily::Normal;
    RngSeed seed{0};
    TopKRule topk{};
    ScorerConfig model{};

    // Component switches for the ablation rows.
    bool mining = true;
    bool dynamic_threshold = true;
    bool binary_labels = false;

    void validate() const {
        if (resample_len < 1) throw ConfigError("TrainConfig: resample_len must be >= 1");
        if (batch_pairs < 1) throw ConfigError("TrainConfig: batch_pairs must be >= 1");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("TrainConfig: lr and weight_decay must be >= 0");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("TrainConfig: alpha must be in (0, 1]");
        if (!(r_g > 0.0)) throw ConfigError("TrainConfig: r_g must be > 0");
        if (topk.fixed_k < 0) throw ConfigError("TrainConfig: topk must be >= 0");
        model.validate();
    }

    [[nodiscard]] MiningConfig mining_config() const { return {alpha, dynamic_threshold}; }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"resample_len", c.resample_len},
         {"batch_pairs", c.batch_pairs},
         {"lr", c.lr},
         {"weight_decay", c.weight_decay},
         {"epochs", c.epochs},
         {"alpha", c.alpha},
         {"r_g", c.r_g},
         {"kernel_family", c.kernel_family},
         {"seed", c.seed.value},
         {"topk", c.topk.fixed_k},
         {"model", c.model},
         {"mining", c.mining},
         {"dynamic_threshold", c.dynamic_threshold},
         {"binary_labels", c.binary_labels}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.resample_len = j.value("resample_len", d.resample_len);
    c.batch_pairs = j.value("batch_pairs", d.batch_pairs);
    c.lr = j.value("lr", d.lr);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.epochs = j.value("epochs", d.epochs);
    c.alpha = j.value("alpha", d.alpha);
    c.r_g = j.value("r_g", d.r_g);
    c.kernel_family = j.value("kernel_family", d.kernel_family);
    c.seed = RngSeed{j.value("seed", d.seed.value)};
    c.topk = TopKRule{j.value("topk", d.topk.fixed_k)};
    c.model = j.value("model", d.model);
    c.mining = j.value("mining", d.mining);
    c.dynamic_threshold = j.value("dynamic_threshold", d.dynamic_threshold);
    c.binary_labels = j.value("binary_labels", d.binary_labels);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

struct Resampled {
    FeatureSequence features;     ///< N snippets, one frame per snippet
    std::optional<GlanceSet> glances;
    std::vector<Index> source;    ///< original snippet index of every resampled position
};

/**
 * Picks N snippet positions from a length-T sequence.
 *
 * T >= N: [0, T) is split into N contiguous bins [floor(jT/N), floor((j+1)T/N))
 * and one random member represents each bin; a bin holding a glance is
 * represented by that glance (the first one if it holds several).
 * T < N: position j takes snippet floor(jT/N) (repeat padding).
 */
inline std::vector<Index> resample_indices(Index length, Index n, std::span<const Index> glance_snippets, Rng& rng) {
    if (length < 1 || n < 1) throw ConfigError("resample: T and N must be >= 1");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    if (length >= n) {
        std::size_t next_glance = 0;
        for (Index j = 0; j < n; ++j) {
            const Index lo = j * length / n;
            const Index hi = (j + 1) * length / n;  // exclusive
            while (next_glance < glance_snippets.size() && glance_snippets[next_glance] < lo) ++next_glance;
            if (next_glance < glance_snippets.size() && glance_snippets[next_glance] < hi) {
                idx[static_cast<std::size_t>(j)] = glance_snippets[next_glance];
            } else {
                idx[static_cast<std::size_t>(j)] = hi - lo == 1 ? lo : rng.uniform_int(lo, hi - 1);
            }
        }
    } else {
        for (Index j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = j * length / n;
    }
    return idx;
}

/// Resampled position of a source snippet: its bin (T >= N) or the first copy (T < N).
inline Index resampled_position(Index snippet, Index length, Index n) {
    if (length >= n) {
        // Largest j with floor(j*T/N) <= snippet.
        Index j = ((snippet + 1) * n - 1) / length;
        while (j > 0 && j * length / n > snippet) --j;
        while (j + 1 < n && (j + 1) * length / n <= snippet) ++j;
        return j;
    }
    // Smallest j with floor(j*T/N) == snippet.
    return (snippet * n + length - 1) / length;
}

inline Resampled resample(const FeatureSequence& features, const std::optional<GlanceSet>& glances, Index n,
                          Rng& rng) {
    const Index length = features.length();
    const std::vector<Index> empty;
    const auto& snippets = glances ? glances->snippets() : empty;
    auto idx = resample_indices(length, n, snippets, rng);

    Matrix out(n, features.dim());
    for (Index j = 0; j < n; ++j) out.row(j) = features.features().row(idx[static_cast<std::size_t>(j)]);

    std::optional<GlanceSet> remapped;
    if (glances) {
        std::vector<Index> positions;
        positions.reserve(snippets.size());
        for (Index g : snippets) positions.push_back(resampled_position(g, length, n));
        remapped = GlanceSet::from_snippets(glances->video_id(), std::move(positions), n);
    }
    return {FeatureSequence::unit_frames(features.video_id(), std::move(out)), std::move(remapped), std::move(idx)};
}

inline Resampled resample(const FeatureSequence& features, const std::optional<GlanceSet>& glances, Index n,
                          RngSeed seed) {
    Rng rng(seed, Stream::Resample);
    return resample(features, glances, n, rng);
}

// ---------------------------------------------------------------------------
// Pseudo-labels
// ---------------------------------------------------------------------------

struct PseudoLabels {
    std::set<Index> mined;
    std::vector<double> targets;
};

/// mine -> update -> render (or the 0/1 indicator when binary_labels is set).
inline PseudoLabels make_pseudo_labels(std::span<const double> scores, std::span<const Index> glance_snippets,
                                       const TrainConfig& config) {
    const auto n = static_cast<Index>(scores.size());
    PseudoLabels out;
    if (config.mining) out.mined = mine(scores, glance_snippets, config.mining_config());
    auto kernels = update_kernels(init_kernels(glance_snippets, n, config.r_g, config.kernel_family), out.mined,
                                  glance_snippets);
    out.targets = config.binary_labels ? render_binary(kernels).vector() : render(kernels).vector();
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// A training video. Ground truth never reaches the trainer; abnormal videos
/// without glances are trained with the video label alone.
struct TrainVideo {
    FeatureSequence features;
    VideoLabel label;
    std::optional<GlanceSet> glances;
};

struct EpochRecord {
    Index epoch = 0;
    LossBreakdown loss;
    double wall_ms = 0.0;
};

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
    j = {{"epoch", r.epoch},           {"l_mil", r.loss.l_mil},     {"l_abn", r.loss.l_abn},
         {"l_nor", r.loss.l_nor},      {"l_total", r.loss.l_total}, {"wall_ms", r.wall_ms}};
}

/// Optional per-pair hook, used by tests to inspect mining and targets.
struct PairTrace {
    const std::string& abnormal_id;
    const std::vector<double>& scores;
    const std::optional<GlanceSet>& glances;
    const PseudoLabels* labels;
};

class Trainer {
public:
    Trainer(TrainConfig config, std::vector<TrainVideo> dataset)
        : config_(std::move(config)),
          model_(ScorerModel::initialized(config_.model, config_.seed)),
          adam_(AdamState::zeros(model_.parameter_count())),
          dataset_(std::move(dataset)) {
        config_.validate();
        for (std::size_t i = 0; i < dataset_.size(); ++i) {
            const auto& v = dataset_[i];
            if (v.features.dim() != config_.model.input_dim) {
                throw ShapeError("trainer: video '" + v.features.video_id() + "' has D=" +
                                 std::to_string(v.features.dim()) + ", model expects " +
                                 std::to_string(config_.model.input_dim));
            }
            if (v.glances && v.label == VideoLabel::Normal && !v.glances->empty()) {
                throw InvariantError("trainer: normal video '" + v.features.video_id() + "' carries glances");
            }
            (v.label == VideoLabel::Normal ? normal_ : abnormal_).push_back(i);
        }
        if (normal_.empty() || abnormal_.empty()) {
            throw ConfigError("trainer: dataset needs at least one normal and one abnormal video");
        }
    }

    [[nodiscard]] const ScorerModel& model() const noexcept { return model_; }
    [[nodiscard]] ScorerModel& model() noexcept { return model_; }
    [[nodiscard]] const TrainConfig& config() const noexcept { return config_; }
    [[nodiscard]] Index epochs_done() const noexcept { return epoch_; }

    void set_trace(std::function<void(const PairTrace&)> trace) { trace_ = std::move(trace); }

    /**
     * Pairs for one epoch: both index lists shuffled and zipped to the longer
     * length, the shorter one reshuffled each time it runs out.
     */
    [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> epoch_pairs(Rng& rng) const {
        std::vector<std::size_t> nor = normal_;
        std::vector<std::size_t> abn = abnormal_;
        rng.shuffle(nor);
        rng.shuffle(abn);
        const std::size_t count = std::max(nor.size(), abn.size());
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        pairs.reserve(count);
        std::vector<std::size_t> nor_pool = nor;
        std::vector<std::size_t> abn_pool = abn;
        for (std::size_t i = 0; i < count; ++i) {
            if (i > 0 && i % nor.size() == 0) rng.shuffle(nor_pool);
            if (i > 0 && i % abn.size() == 0) rng.shuffle(abn_pool);
            pairs.emplace_back(nor_pool[i % nor.size()], abn_pool[i % abn.size()]);
        }
        return pairs;
    }

    EpochRecord train_epoch() {
        const auto start = std::chrono::steady_clock::now();
        Rng order_rng(config_.seed, Stream::PairOrder, static_cast<std::uint64_t>(epoch_));
        Rng resample_rng(config_.seed, Stream::Resample, static_cast<std::uint64_t>(epoch_));
        const auto pairs = epoch_pairs(order_rng);

        LossBreakdown epoch_loss;
        for (std::size_t begin = 0; begin < pairs.size(); begin += static_cast<std::size_t>(config_.batch_pairs)) {
            const std::size_t end = std::min(pairs.size(), begin + static_cast<std::size_t>(config_.batch_pairs));
            model_.zero_gradient();
            LossBreakdown batch_loss;
            const double weight = 1.0 / static_cast<double>(end - begin);
            for (std::size_t p = begin; p < end; ++p) {
                batch_loss += train_pair(dataset_[pairs[p].first], dataset_[pairs[p].second], resample_rng, weight);
            }
            adam_step(model_.params(), model_.gradient(), adam_, config_.lr, config_.weight_decay);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(pairs.size());

        EpochRecord record;
        record.epoch = epoch_++;
        record.loss = epoch_loss;
        record.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return record;
    }

    std::vector<EpochRecord> train(const std::function<void(const EpochRecord&)>& on_epoch = {}) {
        std::vector<EpochRecord> log;
        while (epoch_ < config_.epochs) {
            log.push_back(train_epoch());
            if (on_epoch) on_epoch(log.back());
        }
        return log;
    }

private:
    LossBreakdown train_pair(const TrainVideo& normal, const TrainVideo& abnormal, Rng& rng, double weight) {
        const Index n = config_.resample_len;
        auto abn = resample(abnormal.features, abnormal.glances, n, rng);
        auto nor = resample(normal.features, std::nullopt, n, rng);

        LossBreakdown loss;
        {
            ForwardCache cache = forward_cached(model_, abn.features.features());
            std::optional<PseudoLabels> labels;
            if (abn.glances && !abn.glances->empty()) {
                labels = make_pseudo_labels(cache.scores, abn.glances->snippets(), config_);
            }
            if (trace_) trace_({abnormal.features.video_id(), cache.scores, abn.glances, labels ? &*labels : nullptr});
            std::optional<std::span<const double>> target;
            if (labels) target = std::span<const double>(labels->targets);
            std::vector<double> dscore;
            loss += video_loss(cache.scores, VideoLabel::Abnormal, target, config_.topk, &dscore);
            model_.gradient() += weight * backprop(model_, cache, dscore);
        }
        {
            ForwardCache cache = forward_cached(model_, nor.features.features());
            std::vector<double> dscore;
            loss += video_loss(cache.scores, VideoLabel::Normal, std::nullopt, config_.topk, &dscore);
            model_.gradient() += weight * backprop(model_, cache, dscore);
        }
        return loss;
    }

    TrainConfig config_;
    ScorerModel model_;
    AdamState adam_;
    std::vector<TrainVideo> dataset_;
    std::vector<std::size_t> normal_;
    std::vector<std::size_t> abnormal_;
    Index epoch_ = 0;
    std::function<void(const PairTrace&)> trace_;
};

}  // namespace glancevad
