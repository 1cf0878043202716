// glancevad command-line tool: synth, render, train, eval, ablate, annotate.

#include "glancevad/annotation_service.hpp"
#include "glancevad/benchmark.hpp"
#include "glancevad/checkpoint.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

using namespace glancevad;
using nlohmann::json;

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("glancevad");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* level = std::getenv("GLANCEVAD_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

template <typename T>
T config_from(const json& j, const std::string& what) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// Train split as trainer input. Abnormal videos listed in the glance file
// train with their glances; the others fall back to the video label.
std::vector<TrainVideo> training_set(const fs::path& manifest_path, const DatasetManifest& m, const GlanceFile& g) {
    std::vector<TrainVideo> out;
    std::size_t weak = 0;
    for (const auto& v : m.videos) {
        if (v.split != Split::Train) continue;
        auto seq = load_sequence(manifest_path.parent_path(), v);
        if (v.label == VideoLabel::Abnormal && g.find(v.video_id) && !g.find(v.video_id)->glances.empty()) {
            out.push_back({std::move(seq), v.label, glance_set_for(g, v)});
        } else {
            if (v.label == VideoLabel::Abnormal) ++weak;
            out.push_back({std::move(seq), v.label, std::nullopt});
        }
    }
    if (weak > 0) spdlog::info("{} abnormal training videos have no glances and train with the video label only", weak);
    return out;
}

std::vector<EvalVideo> test_set(const fs::path& manifest_path, const DatasetManifest& m) {
    return build_test_set(m, [&](const VideoEntry& v) { return load_sequence(manifest_path.parent_path(), v); });
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
    SynthConfig c = a.config.empty() ? SynthConfig{} : config_from<SynthConfig>(read_json(a.config), "synth config");
    if (a.seed) c.seed = RngSeed{*a.seed};
    const auto ds = generate_synthetic(c);
    const fs::path out(a.out);
    write_dataset(out, ds);
    const auto glances = sample_glances(ds.manifest, c.seed);
    store_glances(out / "glances.json", glances);
    write_json(out / "synth_config.json", c);

    std::size_t counts[2][2] = {};
    std::size_t marks = 0;
    for (const auto& v : ds.manifest.videos) ++counts[v.split == Split::Test][label_value(v.label)];
    for (const auto& v : glances.videos) marks += v.glances.size();
    std::cout << "videos: train " << counts[0][0] << " normal / " << counts[0][1] << " abnormal, test "
              << counts[1][0] << " normal / " << counts[1][1] << " abnormal\n";
    std::cout << "glances: " << marks << " on " << glances.videos.size() << " abnormal videos, mean "
              << (glances.videos.empty() ? 0.0 : static_cast<double>(marks) / glances.videos.size())
              << " per video\n";
    std::cout << "written to " << out.string() << "\n";
}

struct RenderArgs {
    std::string manifest, glances, scores, out, family = "normal";
    double alpha = 0.9, r_g = 0.1;
    bool no_dynamic = false;
};

void run_render(const RenderArgs& a) {
    const auto m = load_manifest(a.manifest);
    const auto g = load_glances(a.glances, m);
    const auto family = kernel_family_from_string(a.family);
    const MiningConfig mining{a.alpha, !a.no_dynamic};
    mining.validate();
    std::optional<json> scores;
    if (!a.scores.empty()) scores = read_json(a.scores);

    json out = json::object();
    for (const auto& v : m.videos) {
        const auto* vg = g.find(v.video_id);
        if (!vg) continue;
        const auto gs = glance_set_for(g, v);
        const Index n = v.num_snippets();
        std::set<Index> mined;
        if (scores) {
            if (!scores->contains(v.video_id)) {
                spdlog::debug("no score track for '{}'; skipped", v.video_id);
                continue;
            }
            const auto track = (*scores)[v.video_id].get<std::vector<double>>();
            if (static_cast<Index>(track.size()) != n) {
                throw ShapeError("scores for '" + v.video_id + "' have length " + std::to_string(track.size()) +
                                 ", expected " + std::to_string(n));
            }
            mined = mine(ScoreTrack(track), gs, mining);
        }
        const auto kernels = update_kernels(init_kernels(gs, n, a.r_g, family), mined, gs);
        out[v.video_id] = {{"glance_snippets", gs.snippets()},
                           {"mined", std::vector<Index>(mined.begin(), mined.end())},
                           {"track", render(kernels).vector()}};
    }
    if (out.empty()) throw ValidationError("no video has both glances and a score track");
    write_json(a.out, out);
    spdlog::info("rendered {} tracks to {}", out.size(), a.out);
}

struct TrainArgs {
    std::string manifest, glances, config, out, log;
    std::optional<std::uint64_t> seed;
    bool no_mining = false, no_dynamic = false, binary_labels = false;
};

void run_train(const TrainArgs& a) {
    const auto m = load_manifest(a.manifest);
    const auto g = load_glances(a.glances, m);
    auto data = training_set(a.manifest, m, g);
    if (data.empty()) throw ConfigError("manifest has no training videos");
    const Index dim = data.front().features.dim();

    TrainConfig c = desk_train_config(dim);
    if (!a.config.empty()) {
        const auto j = read_json(a.config);
        c = config_from<TrainConfig>(j, "train config");
        if (!j.contains("model") || !j["model"].contains("input_dim")) c.model.input_dim = dim;
    }
    if (a.seed) c.seed = RngSeed{*a.seed};
    if (a.no_mining) c.mining = false;
    if (a.no_dynamic) c.dynamic_threshold = false;
    if (a.binary_labels) c.binary_labels = true;

    Trainer trainer(c, std::move(data));
    const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
    std::string log;
    trainer.train([&](const EpochRecord& r) {
        log += json(r).dump() + "\n";
        spdlog::debug("epoch {} l_total {:.5f} (mil {:.5f} abn {:.5f} nor {:.5f})", r.epoch, r.loss.l_total,
                      r.loss.l_mil, r.loss.l_abn, r.loss.l_nor);
    });
    store_checkpoint(a.out, trainer.model(), trainer.config());
    write_file_atomic(log_path, log);
    spdlog::info("trained {} epochs; checkpoint {} (config {})", c.epochs, a.out, config_hash(trainer.config()));
}

struct EvalArgs {
    std::string checkpoint, manifest, out, tracks;
};

void run_eval(const EvalArgs& a) {
    const auto ck = load_checkpoint(a.checkpoint);
    const auto m = load_manifest(a.manifest);
    const auto test = test_set(a.manifest, m);
    if (test.empty()) throw ConfigError("manifest has no test videos");
    const auto report = evaluate(ck.model, test);
    auto j = report_to_json(report);
    j["config_hash"] = ck.config_hash;
    write_json(a.out, j);
    if (!a.tracks.empty()) {
        json tracks = json::object();
        for (const auto& v : test) tracks[v.features.video_id()] = forward(ck.model, v.features).vector();
        write_json(a.tracks, tracks);
    }
    std::cout << "AUC " << report.auc << "  AP " << report.ap << "  AUC_A " << report.auc_abnormal << "  AP_A "
              << report.ap_abnormal << "\n";
}

struct AblateArgs {
    std::string study, out, synth_config, train_config;
    int seeds = 3;
};

void run_ablate(const AblateArgs& a) {
    const SynthConfig synth =
        a.synth_config.empty() ? SynthConfig{} : config_from<SynthConfig>(read_json(a.synth_config), "synth config");
    TrainConfig base = desk_train_config(synth.dim);
    if (!a.train_config.empty()) base = config_from<TrainConfig>(read_json(a.train_config), "train config");
    if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
    const auto settings = make_study(a.study, base);
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < a.seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    const auto runs = run_study(synth, settings, seeds, [](const RunResult& r) {
        spdlog::info("{} seed {}: AUC {:.4f} AP {:.4f} AUC_A {:.4f} AP_A {:.4f}", r.setting, r.seed, r.report.auc,
                     r.report.ap, r.report.auc_abnormal, r.report.ap_abnormal);
    });
    const auto rows = aggregate(runs);
    const fs::path out(a.out);
    write_file_atomic(out / (a.study + ".csv"), study_csv(rows));
    write_json(out / (a.study + ".json"), study_json(a.study, runs, rows));
    std::cout << study_csv(rows);
}

struct AnnotateArgs {
    std::string manifest, videos, glances, ui, host = "127.0.0.1", annotator = "annotator";
    int port = 8080;
};

httplib::Server* g_server = nullptr;

void run_annotate(const AnnotateArgs& a) {
    AnnotationOptions o;
    o.videos_dir = a.videos;
    o.glances_path = a.glances;
    o.annotator = a.annotator;
    if (!a.ui.empty()) o.ui_dir = a.ui;
    AnnotationService service(load_manifest(a.manifest), o);
    httplib::Server server;
    service.mount(server);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    spdlog::info("annotation service on http://{}:{} (glances saved to {})", a.host, a.port, a.glances);
    if (!server.listen(a.host, a.port)) throw ConfigError("cannot listen on " + a.host + ":" + std::to_string(a.port));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Glance-supervised video anomaly detection"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic dataset with glances");
    s->add_option("--config", synth.config, "synth config JSON");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--seed", synth.seed, "overrides the config seed");

    RenderArgs render_args;
    auto* r = app.add_subcommand("render", "render pseudo-label tracks from glances");
    r->add_option("--manifest", render_args.manifest)->required();
    r->add_option("--glances", render_args.glances)->required();
    r->add_option("--scores", render_args.scores, "per-video score tracks (eval --tracks output); enables mining");
    r->add_option("--alpha", render_args.alpha);
    r->add_option("--r-g", render_args.r_g);
    r->add_option("--family", render_args.family, "normal|cauchy|laplace");
    r->add_flag("--no-dynamic-threshold", render_args.no_dynamic);
    r->add_option("--out", render_args.out)->required();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train a scorer");
    t->add_option("--manifest", train.manifest)->required();
    t->add_option("--glances", train.glances)->required();
    t->add_option("--config", train.config, "train config JSON (default: desk config)");
    t->add_option("--out", train.out, "checkpoint path")->required();
    t->add_option("--log", train.log, "JSON-lines log (default: <out>.log.jsonl)");
    t->add_option("--seed", train.seed);
    t->add_flag("--no-mining", train.no_mining);
    t->add_flag("--no-dynamic-threshold", train.no_dynamic);
    t->add_flag("--binary-labels", train.binary_labels);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    e->add_option("--checkpoint", eval.checkpoint)->required();
    e->add_option("--manifest", eval.manifest)->required();
    e->add_option("--out", eval.out, "report JSON")->required();
    e->add_option("--tracks", eval.tracks, "also write per-video snippet score tracks");

    AblateArgs ablate;
    auto* ab = app.add_subcommand("ablate", "run an ablation study on synthetic data");
    ab->add_option("--study", ablate.study)
        ->required()
        ->check(CLI::IsMember({"components", "alpha", "rg", "perturb", "ratio", "family"}));
    ab->add_option("--out", ablate.out)->required();
    ab->add_option("--seeds", ablate.seeds);
    ab->add_option("--synth-config", ablate.synth_config);
    ab->add_option("--train-config", ablate.train_config);

    AnnotateArgs annotate;
    auto* an = app.add_subcommand("annotate", "serve the annotation API");
    an->add_option("--manifest", annotate.manifest)->required();
    an->add_option("--videos", annotate.videos, "directory of <video_id>.mp4 files")->required();
    an->add_option("--glances", annotate.glances, "glance file to create or extend")->required();
    an->add_option("--port", annotate.port);
    an->add_option("--host", annotate.host);
    an->add_option("--ui", annotate.ui, "static UI directory served at /");
    an->add_option("--annotator", annotate.annotator);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*s) run_synth(synth);
        if (*r) run_render(render_args);
        if (*t) run_train(train);
        if (*e) run_eval(eval);
        if (*ab) run_ablate(ablate);
        if (*an) run_annotate(annotate);
    } catch (const Error& err) {
        spdlog::error("{}", err.what());
        return exit_code_for(err.kind());
    } catch (const fs::filesystem_error& err) {
        spdlog::error("{}", err.what());
        return exit_code_for(ErrorKind::Data);
    } catch (const json::exception& err) {
        spdlog::error("{}", err.what());
        return exit_code_for(ErrorKind::Data);
    }
    return 0;
}
