// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "glancevad/benchmark.hpp"
#include "glancevad/checkpoint.hpp"

#include "gradcheck.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace glancevad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
}

void run(const std::string& name, const std::function<Outcome()>& check) {
    try {
        report(name, check());
    } catch (const std::exception& e) {
        report(name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmtd(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(2024);
    double worst = 0.0;
    const std::pair<gradcheck::Term, const char*> terms[] = {{gradcheck::Term::Mil, "L_mil"},
                                                             {gradcheck::Term::Abn, "L_abn"},
                                                             {gradcheck::Term::Nor, "L_nor"},
                                                             {gradcheck::Term::Total, "L_total"}};
    std::string per_term;
    for (auto [term, label] : terms) {
        const double w = gradcheck::worst_over(gen, 20, term);
        worst = std::max(worst, w);
        per_term += std::string(" ") + label + "=" + fmtd("%.1e", w);
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs < 10.0,
            "80 instances (20 per loss, T<=8, D<=5), worst relative error" + per_term + fmtd(", %.2fs", secs)};
}

Outcome mining_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(gen() % 64);
        std::vector<double> a(static_cast<std::size_t>(n));
        const bool coarse = gen() % 3 == 0;  // repeated values exercise the strict inequality
        for (auto& v : a) v = coarse ? static_cast<double>(gen() % 4) / 3.0 : u(gen);
        std::set<Index> gs;
        const int ng = static_cast<int>(gen() % 5);
        for (int k = 0; k < ng; ++k) gs.insert(static_cast<Index>(gen() % static_cast<std::uint64_t>(n)));
        const std::vector<Index> g(gs.begin(), gs.end());
        const double alpha = i % 20 == 0 ? 1.0 : 0.01 + 0.99 * u(gen);
        const auto got = mine(a, g, MiningConfig{alpha, true});
        const auto want = oracle::mine(a, std::vector<long long>(g.begin(), g.end()), alpha);
        if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 5.0,
            std::to_string(mismatches) + " mismatches in 1000 instances (T<=64, <=4 glances)" + fmtd(", %.2fs", secs)};
}

Outcome rendering_invariants() {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int clamp = 0, symmetry = 0, decay = 0, monotone = 0, brute = 0;
    double max_diff = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Index n = 1 + static_cast<Index>(gen() % 32);
        const auto family = static_cast<KernelFamily>(gen() % 3);
        const double r = 0.05 + 0.45 * u(gen);
        std::vector<double> sev(static_cast<std::size_t>(n)), rad(static_cast<std::size_t>(n), r);
        for (auto& s : sev) s = gen() % 2 ? 0.0 : (gen() % 2 ? 1.0 : u(gen));
        auto make = [&](const std::vector<double>& s) {
            std::vector<GaussianKernel> k;
            for (Index t = 0; t < n; ++t) k.push_back({t, s[static_cast<std::size_t>(t)], r});
            return KernelTrack(k, family);
        };
        const auto a = render(make(sev));

        for (double v : a.values()) clamp += !(v >= 0.0 && v <= 1.0);

        const auto want = oracle::render(sev, rad, static_cast<int>(family));
        double diff = 0.0;
        for (Index t = 0; t < n; ++t) diff = std::max(diff, std::fabs(a[t] - want[static_cast<std::size_t>(t)]));
        max_diff = std::max(max_diff, diff);
        brute += diff > 1e-12;

        auto raised = sev;
        const auto j = static_cast<std::size_t>(gen() % static_cast<std::uint64_t>(n));
        raised[j] += (1.0 - raised[j]) * u(gen);
        const auto b = render(make(raised));
        for (Index t = 0; t < n; ++t) monotone += b[t] < a[t];

        std::vector<double> single(static_cast<std::size_t>(n), 0.0);
        const Index mu = static_cast<Index>(gen() % static_cast<std::uint64_t>(n));
        single[static_cast<std::size_t>(mu)] = 1.0;
        const auto s = render(make(single));
        for (Index d = 1; mu - d >= 0 && mu + d < n; ++d) symmetry += s[mu - d] != s[mu + d];
        for (Index t = mu + 1; t < n; ++t) decay += !(s[t] < s[t - 1]);
        for (Index t = mu - 1; t >= 0; --t) decay += !(s[t] < s[t + 1]);
        decay += s[mu] != 1.0;
    }
    const int total = clamp + symmetry + decay + monotone + brute;
    return {total == 0, "1000 tracks; violations: clamp " + std::to_string(clamp) + ", symmetry " +
                            std::to_string(symmetry) + ", decay " + std::to_string(decay) + ", severity-monotone " +
                            std::to_string(monotone) + ", brute-force " + std::to_string(brute) +
                            fmtd(" (max |diff| %.1e)", max_diff)};
}

Outcome metric_oracle() {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int auc_bad = 0, ap_bad = 0, with_ties = 0;
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 2 + gen() % 199;
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        const int levels = i % 2 == 0 ? 2 + static_cast<int>(gen() % 6) : 0;
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = levels ? static_cast<double>(gen() % static_cast<std::uint64_t>(levels)) / levels : u(gen);
            y[k] = static_cast<std::uint8_t>(gen() % 2);
        }
        // both classes present
        const std::size_t pos = gen() % n;
        y[pos] = 1;
        y[(pos + 1 + gen() % (n - 1)) % n] = 0;
        with_ties += levels > 0;
        auc_bad += roc_auc(s, y) != oracle::auc(s, y);
        ap_bad += average_precision(s, y) != oracle::ap(s, y);
    }
    return {auc_bad + ap_bad == 0, "500 instances (n<=200, " + std::to_string(with_ties) +
                                       " with heavy ties); inexact AUC " + std::to_string(auc_bad) + ", inexact AP " +
                                       std::to_string(ap_bad)};
}

Outcome mining_monotonicity() {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int not_nested = 0, alpha_one = 0;
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(gen() % 64);
        std::vector<double> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = gen() % 4 == 0 ? 0.5 : u(gen);
        std::set<Index> gs;
        for (int k = 0; k < 1 + static_cast<int>(gen() % 4); ++k) gs.insert(static_cast<Index>(gen() % n));
        const std::vector<Index> g(gs.begin(), gs.end());
        double a1 = 0.01 + 0.99 * u(gen), a2 = 0.01 + 0.99 * u(gen);
        if (a1 > a2) std::swap(a1, a2);
        const auto loose = mine(a, g, {a1, true});
        const auto tight = mine(a, g, {a2, true});
        not_nested += !std::includes(loose.begin(), loose.end(), tight.begin(), tight.end());

        const auto one = mine(a, g, {1.0, true});
        alpha_one += !one.empty();
        TrainConfig c;
        c.alpha = 1.0;
        const auto labels = make_pseudo_labels(a, g, c);
        alpha_one += labels.targets != render(init_kernels(g, n, c.r_g, c.kernel_family)).vector();
    }

    // Instrumented training epoch at alpha = 1.
    SynthConfig sc;
    sc.num_normal_train = sc.num_abnormal_train = 6;
    sc.num_normal_test = sc.num_abnormal_test = 0;
    const auto ds = generate_synthetic(sc);
    const auto glances = sample_glances(ds.manifest, RngSeed{0});
    auto tc = desk_train_config();
    tc.alpha = 1.0;
    tc.epochs = 1;
    Trainer trainer(tc, build_train_set(ds, glances, glance_setting(tc), RngSeed{0}));
    int traced = 0;
    trainer.set_trace([&](const PairTrace& p) {
        ++traced;
        if (!p.glances || !p.labels) return;
        const auto& g = p.glances->snippets();
        alpha_one += !p.labels->mined.empty();
        alpha_one += p.labels->targets != render(init_kernels(g, tc.resample_len, tc.r_g, tc.kernel_family)).vector();
    });
    trainer.train();
    return {not_nested == 0 && alpha_one == 0 && traced > 0,
            "1000 random instances plus " + std::to_string(traced) +
                " traced training pairs; nesting violations " + std::to_string(not_nested) +
                ", alpha=1 violations " + std::to_string(alpha_one)};
}

// ---------------------------------------------------------------------------
// Synthetic benchmark, shared by the directional, ordering and perturbation checks.

struct Bench {
    SynthConfig synth;
    TrainConfig base = desk_train_config();
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::map<std::string, StudyRow> rows;
    std::map<std::string, double> seconds;

    const StudyRow& get(const BenchmarkSetting& s) {
        auto it = rows.find(s.name);
        if (it != rows.end()) return it->second;
        const auto t0 = Clock::now();
        const auto runs = run_study(synth, {s}, seeds);
        seconds[s.name] = seconds_since(t0);
        return rows[s.name] = aggregate(runs).front();
    }

    BenchmarkSetting component(const std::string& name) {
        for (auto& s : make_study("components", base)) {
            if (s.name == name) return s;
        }
        throw ConfigError("no component row " + name);
    }
    BenchmarkSetting jitter(Index j) {
        auto s = glance_setting(base, "perturb", "jitter=" + std::to_string(j));
        s.jitter_snippets = j;
        return s;
    }
};

Outcome directional(Bench& b) {
    auto weak = weak_setting(b.base);
    auto glance = glance_setting(b.base);
    const auto& w = b.get(weak);
    const auto& g = b.get(glance);
    const double secs = b.seconds[weak.name] + b.seconds[glance.name];
    const double d_ap = 100.0 * (g.ap_mean - w.ap_mean);
    const double d_auca = 100.0 * (g.auc_abnormal_mean - w.auc_abnormal_mean);
    return {d_ap >= 5.0 && d_auca >= 5.0 && secs < 300.0,
            fmtd("glance vs weak MIL over 3 seeds: AP %+.2f pts, AUC_A %+.2f pts", d_ap, d_auca) +
                fmtd(" (glance AP %.4f, weak AP %.4f)", g.ap_mean, w.ap_mean) + fmtd(", %.1fs", secs)};
}

Outcome ordering(Bench& b) {
    const std::vector<std::string> names{"baseline", "mining", "gaussian", "mining+dynamic", "mining+gaussian", "full"};
    std::ostringstream table;
    char line[200];
    std::snprintf(line, sizeof line, "\n    %-16s %-17s %-8s %-8s %s", "setting", "AP mean (sd)", "AUC", "AUC_A",
                  "AP_A");
    table << line;
    for (const auto& n : names) {
        const auto& r = b.get(b.component(n));
        std::snprintf(line, sizeof line, "\n    %-16s %.4f (%.4f)  %.4f   %.4f   %.4f", n.c_str(), r.ap_mean, r.ap_sd,
                      r.auc_mean, r.auc_abnormal_mean, r.ap_abnormal_mean);
        table << line;
    }
    const double full = b.get(b.component("full")).ap_mean;
    const double binary = b.get(b.component("mining+dynamic")).ap_mean;
    const double no_mining = b.get(b.component("gaussian")).ap_mean;
    return {full >= binary && full >= no_mining,
            fmtd("mean AP full %.4f vs binary labels %.4f (margin %+.4f) and no mining ", full, binary, full - binary) +
                fmtd("%.4f (margin %+.4f)", no_mining, full - no_mining) + table.str()};
}

Outcome perturbation(Bench& b) {
    const double ap0 = b.get(b.jitter(0)).ap_mean;
    const double ap5 = b.get(b.jitter(5)).ap_mean;
    const double ap25 = b.get(b.jitter(25)).ap_mean;
    const double drop5 = 100.0 * (ap0 - ap5);
    return {ap0 >= ap5 && ap5 >= ap25 && drop5 <= 2.0,
            fmtd("mean AP at jitter 0/5/25 snippets: %.4f / %.4f / %.4f, drop at 5 = %.2f pts", ap0, ap5, ap25, drop5)};
}

// ---------------------------------------------------------------------------

Outcome determinism(const std::string& cli, const fs::path& work) {
    fs::remove_all(work);
    auto pipeline = [&](const std::string& tag) {
        const auto dir = work / tag;
        const std::string q = "\"" + dir.string();
        const std::string cmds[] = {
            "\"" + cli + "\" synth --seed 0 --out " + q + "/data\"",
            "\"" + cli + "\" train --manifest " + q + "/data/manifest.json\" --glances " + q +
                "/data/glances.json\" --out " + q + "/model.ckpt\"",
            "\"" + cli + "\" eval --checkpoint " + q + "/model.ckpt\" --manifest " + q + "/data/manifest.json\" --out " +
                q + "/report.json\" --tracks " + q + "/tracks.json\"",
        };
        for (const auto& c : cmds) {
            if (std::system((c + " > /dev/null 2>&1").c_str()) != 0) throw std::runtime_error("command failed: " + c);
        }
    };
    const auto t0 = Clock::now();
    pipeline("a");
    pipeline("b");
    std::vector<std::string> differ;
    for (const char* f : {"data/manifest.json", "data/glances.json", "data/features/train_abnormal_0007.gvf",
                          "model.ckpt", "report.json", "tracks.json"}) {
        if (read_file(work / "a" / f) != read_file(work / "b" / f)) differ.push_back(f);
    }
    const double secs = seconds_since(t0);
    fs::remove_all(work);
    std::string list;
    for (const auto& d : differ) list += " " + d;
    return {differ.empty(), "synth+train+eval twice via the CLI: " +
                                (differ.empty() ? std::string("checkpoint, report, tracks and data byte-identical")
                                                : "differ:" + list) +
                                fmtd(", %.1fs", secs)};
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    const std::string cli = argc > 1 ? argv[1] : GLANCEVAD_CLI_PATH;
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "glancevad_acceptance";
    const auto t0 = Clock::now();

    run("gradient correctness", gradients);
    run("mining oracle", mining_oracle);
    run("rendering invariants", rendering_invariants);
    run("metric oracle", metric_oracle);
    Bench bench;
    run("directional end-to-end", [&] { return directional(bench); });
    run("component ablation ordering", [&] { return ordering(bench); });
    run("perturbation robustness trend", [&] { return perturbation(bench); });
    run("mining monotonicity and alpha=1", mining_monotonicity);
    run("determinism", [&] { return determinism(cli, work); });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << fmtd(" in %.1fs", seconds_since(t0)) << std::endl;
    return failures == 0 ? 0 : 1;
}
