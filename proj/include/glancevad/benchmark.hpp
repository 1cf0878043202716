#pragma once
/**
 * @file benchmark.hpp
 * @brief Seeded synthetic benchmark: dataset assembly, single runs and the
 * ablation studies behind `glancevad ablate`.
 *
 * Every run regenerates the synthetic dataset and glances from its seed, so a
 * (setting, seed) pair is fully reproducible on its own. Settings within one
 * seed share the dataset, the weight initialisation and the pair order; they
 * differ only in the knob under study.
 */

#include "glancevad/core_types.hpp"
#include "glancevad/dataio.hpp"
#include "glancevad/metrics.hpp"
#include "glancevad/synthetic.hpp"
#include "glancevad/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace glancevad {

/// Model and optimiser settings sized for the synthetic benchmark.
inline TrainConfig desk_train_config(Index input_dim = 16) {
    TrainConfig c;
    c.model.input_dim = input_dim;
    c.model.hidden1 = 32;
    c.model.hidden2 = 16;
    c.model.temporal_width = 3;
    c.lr = 1e-3;
    c.batch_pairs = 4;
    c.epochs = 60;
    return c;
}

struct BenchmarkSetting {
    std::string study;
    std::string name;
    double value = 0.0;  ///< numeric x-axis value for plots
    TrainConfig train;
    double glance_fraction = 1.0;  ///< abnormal training videos with glances
    double weak_fraction = 0.0;    ///< abnormal training videos with video labels only
    Index jitter_snippets = 0;     ///< glance perturbation, in snippets
};

inline std::vector<TrainVideo> build_train_set(const SyntheticDataset& ds, const GlanceFile& glances,
                                               const BenchmarkSetting& s, RngSeed seed) {
    std::vector<std::string> abnormal_ids;
    for (const auto& v : ds.manifest.videos) {
        if (v.split == Split::Train && v.label == VideoLabel::Abnormal) abnormal_ids.push_back(v.video_id);
    }
    const auto split = split_supervision(abnormal_ids, s.weak_fraction, s.glance_fraction, seed);
    const std::set<std::string> glance_ids(split.glance.begin(), split.glance.end());
    const std::set<std::string> weak_ids(split.weak.begin(), split.weak.end());

    std::vector<TrainVideo> out;
    for (const auto& v : ds.manifest.videos) {
        if (v.split != Split::Train) continue;
        if (v.label == VideoLabel::Normal) {
            out.push_back({ds.sequence(v), v.label, std::nullopt});
        } else if (glance_ids.count(v.video_id)) {
            auto g = glance_set_for(glances, v);
            if (s.jitter_snippets > 0) g = perturb_glances(g, s.jitter_snippets * v.frames_per_snippet, seed);
            out.push_back({ds.sequence(v), v.label, std::move(g)});
        } else if (weak_ids.count(v.video_id)) {
            out.push_back({ds.sequence(v), v.label, std::nullopt});
        }
    }
    return out;
}

inline std::vector<EvalVideo> build_test_set(const DatasetManifest& m,
                                             const std::function<FeatureSequence(const VideoEntry&)>& load) {
    std::vector<EvalVideo> out;
    for (const auto& v : m.videos) {
        if (v.split == Split::Test) out.push_back({load(v), v.label, v.frame_labels()});
    }
    return out;
}

inline std::vector<EvalVideo> build_test_set(const SyntheticDataset& ds) {
    return build_test_set(ds.manifest, [&](const VideoEntry& v) { return ds.sequence(v); });
}

struct RunResult {
    std::string study;
    std::string setting;
    double value = 0.0;
    std::uint64_t seed = 0;
    EvalReport report;
};

/// Generates data for `seed`, trains one setting and evaluates it on the test split.
inline RunResult run_setting(const SynthConfig& synth, const BenchmarkSetting& s, std::uint64_t seed) {
    SynthConfig sc = synth;
    sc.seed = RngSeed{seed};
    const auto ds = generate_synthetic(sc);
    const auto glances = sample_glances(ds.manifest, RngSeed{seed});
    TrainConfig tc = s.train;
    tc.seed = RngSeed{seed};
    tc.model.input_dim = sc.dim;
    Trainer trainer(tc, build_train_set(ds, glances, s, RngSeed{seed}));
    trainer.train();
    const auto test = build_test_set(ds);
    return {s.study, s.name, s.value, seed, evaluate(trainer.model(), test)};
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

inline BenchmarkSetting weak_setting(const TrainConfig& base, std::string study = "components") {
    return {std::move(study), "weak_mil", 0.0, base, 0.0, 1.0, 0};
}

inline BenchmarkSetting glance_setting(const TrainConfig& base, std::string study = "components",
                                       std::string name = "full") {
    return {std::move(study), std::move(name), 0.0, base, 1.0, 0.0, 0};
}

inline std::vector<BenchmarkSetting> make_study(const std::string& study, const TrainConfig& base) {
    std::vector<BenchmarkSetting> out;
    if (study == "components") {
        auto row = [&](std::string name, bool mining, bool dynamic, bool gaussian) {
            auto s = glance_setting(base, study, std::move(name));
            s.train.mining = mining;
            s.train.dynamic_threshold = dynamic;
            s.train.binary_labels = !gaussian;
            s.value = static_cast<double>(out.size());
            out.push_back(s);
        };
        auto baseline = weak_setting(base, study);
        baseline.name = "baseline";
        out.push_back(baseline);
        row("mining", true, false, false);
        row("gaussian", false, false, true);
        row("mining+dynamic", true, true, false);
        row("mining+gaussian", true, false, true);
        row("full", true, true, true);
    } else if (study == "alpha") {
        for (double a : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0}) {
            auto s = glance_setting(base, study, "alpha=" + nlohmann::json(a).dump());
            s.train.alpha = a;
            s.value = a;
            out.push_back(s);
        }
    } else if (study == "rg") {
        for (double r : {0.02, 0.05, 0.1, 0.2, 0.3, 0.5}) {
            auto s = glance_setting(base, study, "r_g=" + nlohmann::json(r).dump());
            s.train.r_g = r;
            s.value = r;
            out.push_back(s);
        }
    } else if (study == "perturb") {
        for (Index j : {0, 1, 5, 10, 25}) {
            auto s = glance_setting(base, study, "jitter=" + std::to_string(j));
            s.jitter_snippets = j;
            s.value = static_cast<double>(j);
            out.push_back(s);
        }
    } else if (study == "ratio") {
        struct Row {
            const char* name;
            double weak, glance;
        };
        for (const Row& r : {Row{"weak_full", 1.0, 0.0}, Row{"weak_25", 0.25, 0.0}, Row{"weak_50", 0.5, 0.0},
                             Row{"weak_75", 0.75, 0.0}, Row{"glance_25", 0.0, 0.25}, Row{"glance_50", 0.0, 0.5},
                             Row{"glance_75", 0.0, 0.75}, Row{"mixed_75w_25g", 0.75, 0.25},
                             Row{"mixed_50w_50g", 0.5, 0.5}, Row{"mixed_25w_75g", 0.25, 0.75},
                             Row{"glance_full", 0.0, 1.0}}) {
            BenchmarkSetting s{study, r.name, r.glance, base, r.glance, r.weak, 0};
            out.push_back(s);
        }
    } else if (study == "family") {
        for (auto f : {KernelFamily::Normal, KernelFamily::Cauchy, KernelFamily::Laplace}) {
            auto s = glance_setting(base, study, std::string(to_string(f)));
            s.train.kernel_family = f;
            s.value = static_cast<double>(out.size());
            out.push_back(s);
        }
    } else {
        throw ConfigError("unknown study '" + study + "' (expected components|alpha|rg|perturb|ratio|family)");
    }
    return out;
}

struct StudyRow {
    std::string setting;
    double value = 0.0;
    std::size_t runs = 0;
    double auc_mean = 0, auc_sd = 0, ap_mean = 0, ap_sd = 0;
    double auc_abnormal_mean = 0, auc_abnormal_sd = 0, ap_abnormal_mean = 0, ap_abnormal_sd = 0;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    const double sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
    return {m, sd};
}

}  // namespace detail

/// Mean and sample standard deviation per setting, in first-seen order.
inline std::vector<StudyRow> aggregate(const std::vector<RunResult>& runs) {
    std::vector<StudyRow> rows;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunResult*>> by;
    for (const auto& r : runs) {
        if (!by.count(r.setting)) order.push_back(r.setting);
        by[r.setting].push_back(&r);
    }
    for (const auto& name : order) {
        const auto& rs = by[name];
        std::vector<double> auc, ap, auca, apa;
        for (const auto* r : rs) {
            auc.push_back(r->report.auc);
            ap.push_back(r->report.ap);
            auca.push_back(r->report.auc_abnormal);
            apa.push_back(r->report.ap_abnormal);
        }
        StudyRow row;
        row.setting = name;
        row.value = rs.front()->value;
        row.runs = rs.size();
        std::tie(row.auc_mean, row.auc_sd) = detail::mean_sd(auc);
        std::tie(row.ap_mean, row.ap_sd) = detail::mean_sd(ap);
        std::tie(row.auc_abnormal_mean, row.auc_abnormal_sd) = detail::mean_sd(auca);
        std::tie(row.ap_abnormal_mean, row.ap_abnormal_sd) = detail::mean_sd(apa);
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<RunResult> run_study(const SynthConfig& synth, const std::vector<BenchmarkSetting>& settings,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::function<void(const RunResult&)>& on_run = {}) {
    std::vector<RunResult> runs;
    for (auto seed : seeds) {
        for (const auto& s : settings) {
            runs.push_back(run_setting(synth, s, seed));
            if (on_run) on_run(runs.back());
        }
    }
    return runs;
}

inline std::string study_csv(const std::vector<StudyRow>& rows) {
    std::ostringstream out;
    out << "setting,value,runs,auc_mean,auc_sd,ap_mean,ap_sd,auc_abnormal_mean,auc_abnormal_sd,ap_abnormal_mean,"
           "ap_abnormal_sd\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& r : rows) {
        out << r.setting << ',' << r.value << ',' << r.runs << ',' << r.auc_mean << ',' << r.auc_sd << ','
            << r.ap_mean << ',' << r.ap_sd << ',' << r.auc_abnormal_mean << ',' << r.auc_abnormal_sd << ','
            << r.ap_abnormal_mean << ',' << r.ap_abnormal_sd << '\n';
    }
    return out.str();
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    return {{"auc", r.auc},
            {"ap", r.ap},
            {"auc_abnormal", r.auc_abnormal},
            {"ap_abnormal", r.ap_abnormal},
            {"num_frames",
             {{"all", r.all.frames},
              {"all_positive", r.all.positive_frames},
              {"all_videos", r.all.videos},
              {"abnormal", r.abnormal.frames},
              {"abnormal_positive", r.abnormal.positive_frames},
              {"abnormal_videos", r.abnormal.videos}}}};
}

inline nlohmann::json study_json(const std::string& study, const std::vector<RunResult>& runs,
                                 const std::vector<StudyRow>& rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : runs) {
        auto j = report_to_json(r.report);
        j["setting"] = r.setting;
        j["value"] = r.value;
        j["seed"] = r.seed;
        jr.push_back(j);
    }
    nlohmann::json series = nlohmann::json::array();
    for (const auto& r : rows) {
        series.push_back({{"setting", r.setting},
                          {"value", r.value},
                          {"runs", r.runs},
                          {"auc", {{"mean", r.auc_mean}, {"sd", r.auc_sd}}},
                          {"ap", {{"mean", r.ap_mean}, {"sd", r.ap_sd}}},
                          {"auc_abnormal", {{"mean", r.auc_abnormal_mean}, {"sd", r.auc_abnormal_sd}}},
                          {"ap_abnormal", {{"mean", r.ap_abnormal_mean}, {"sd", r.ap_abnormal_sd}}}});
    }
    return {{"study", study}, {"series", series}, {"runs", jr}};
}

}  // namespace glancevad
