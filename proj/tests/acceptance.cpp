// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "seeds/cli.hpp"
#include "seeds/io.hpp"
#include "seeds/log.hpp"
#include "support.hpp"

using namespace seeds;
using namespace seeds::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << "criterion " << id << " [" << (v.pass ? "PASS" : "FAIL") << "] " << title << ": " << v.detail
              << fmt(" (%.1fs)", seconds_since(t0)) << std::endl;
}

Verdict harmonic_arithmetic() {
    struct Case {
        double s, u;
        const char* want;
    };
    const Case cases[] = {{82.8, 3.5, "6.7"}, {87.0, 49.8, "63.3"}, {48.5, 50.6, "49.5"}};
    Verdict v{true, ""};
    for (const Case& c : cases) {
        const std::string got = fmt("%.1f", harmonic_mean(c.s, c.u));
        v.detail += fmt("HM(%.1f, %.1f)=%s ", c.s, c.u, got.c_str());
        if (got != c.want) v.pass = false;
    }
    return v;
}

Verdict gradient_checks() {
    const auto t0 = Clock::now();
    Verdict v{true, ""};
    double worst = 0.0;
    std::string worst_block;
    for (const GradReport& r : gradient_suite()) {
        if (r.worst_error() > worst) worst = r.worst_error(), worst_block = r.block;
        if (!(r.worst_error() < 1e-4)) {
            v.pass = false;
            v.detail += r.block + fmt(" rel err %.2e (%s); ", r.worst_error(), r.worst.c_str());
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 60.0) v.pass = false;
    v.detail += fmt("8 blocks, worst relative error %.2e in %s", worst, worst_block.c_str());
    return v;
}

Verdict diffusion_marginal() {
    const NoiseSchedule sched = build_schedule(100, 8.5e-4, 1.2e-2);
    const std::vector<double> x0 = {1.0, -1.5, 2.0, 0.75};
    const std::size_t n = 10000, d = x0.size();
    RngStream rng(2024);
    Verdict v{true, ""};
    double worst_mean = 0.0, worst_var = 0.0;
    for (std::size_t t : {1, 50, 100}) {
        // Iterate the one-step kernel t times and compare with the closed-form marginal.
        Matrix x(n, d);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) x(r, c) = x0[c];
        for (std::size_t k = 1; k <= t; ++k) {
            const Matrix z = sample_gaussian(rng, n, d);
            for (std::size_t r = 0; r < n; ++r) {
                const auto next = diffuse_step(x.row(r), k, z.row(r), sched);
                std::copy(next.begin(), next.end(), x.row(r).begin());
            }
        }
        // And the closed form itself.
        Matrix base(n, d);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) base(r, c) = x0[c];
        const Matrix xc = diffuse_closed(base, t, sample_gaussian(rng, n, d), sched);
        for (const Matrix* m : {static_cast<const Matrix*>(&x), &xc}) {
            for (std::size_t c = 0; c < d; ++c) {
                double mu = 0.0, var = 0.0;
                for (std::size_t r = 0; r < n; ++r) mu += (*m)(r, c);
                mu /= double(n);
                for (std::size_t r = 0; r < n; ++r) var += ((*m)(r, c) - mu) * ((*m)(r, c) - mu);
                var /= double(n - 1);
                const double want_mu = std::sqrt(sched.alpha_bar[t]) * x0[c];
                const double want_var = 1.0 - sched.alpha_bar[t];
                worst_mean = std::max(worst_mean, std::abs(mu - want_mu) / std::abs(want_mu));
                worst_var = std::max(worst_var, std::abs(var - want_var) / want_var);
            }
        }
    }
    v.pass = worst_mean < 0.05 && worst_var < 0.05;
    v.detail = fmt("t in {1,50,100}, 1e4 draws: worst relative mean error %.2f%%, variance error %.2f%%",
                   100 * worst_mean, 100 * worst_var);
    return v;
}

Verdict mixture_diversity() {
    Verdict v{true, ""};
    for (DenoiserMode mode : {DenoiserMode::per_timestep, DenoiserMode::shared}) {
        const auto t0 = Clock::now();
        const MixtureResult r = run_mixture(mode);
        const double secs = seconds_since(t0);
        const bool ok = r.share[0] >= 0.3 && r.share[1] >= 0.3 && r.max_mean_error <= 0.3 && secs <= 300.0;
        v.pass = v.pass && ok;
        v.detail += fmt("%s: shares %.3f/%.3f, means e1 %.3f/%.3f, max mean error %.3f; ",
                        mode == DenoiserMode::shared ? "shared" : "per-timestep", r.share[0], r.share[1],
                        r.mean[0][0], r.mean[1][0], r.max_mean_error);
    }
    return v;
}

Verdict adain_exactness() {
    RngStream rng(5);
    const std::size_t pairs = 1000, e = 16;
    double worst = 0.0;
    auto stats = [](std::span<const double> x) {
        double mu = 0.0;
        for (double v : x) mu += v;
        mu /= double(x.size());
        double var = 0.0;
        for (double v : x) var += (v - mu) * (v - mu);
        return std::pair{mu, std::sqrt(var / double(x.size()))};
    };
    const Matrix a = randn(rng, pairs, e, 3.0), c = randn(rng, pairs, e, 2.0);
    const Matrix batch = adain_forward(a, c, kAdainFloor);
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto out = adain(a.row(i), c.row(i));
        const auto [mo, so] = stats(out);
        const auto [mb, sb] = stats(batch.row(i));
        const auto [mc, sc] = stats(c.row(i));
        worst = std::max({worst, std::abs(mo - mc), std::abs(so - sc), std::abs(mb - mc), std::abs(sb - sc)});
    }
    return {worst <= 1e-9, fmt("1000 pairs, worst |mean/std deviation| %.2e", worst)};
}

Verdict kmeans_oracle() {
    RngStream rng(99);
    std::size_t instances = 0, mismatches = 0, bad_counts = 0, exhaustive = 0, suboptimal = 0;
    for (std::size_t b = 2; b <= 12; ++b) {
        for (std::size_t S = 1; S <= 3 && S <= b; ++S) {
            for (std::size_t P = 1; S * P <= b; ++P) {
                for (int rep = 0; rep < 4; ++rep) {
                    const std::size_t d = 1 + rng.index(3);
                    const Matrix x = randn(rng, b, d);
                    const SamplingConfig cfg{S, P, 100, rng.next_u64()};
                    const Selection sel = kmeans_select(x, cfg);
                    const ReferenceSelection ref = reference_select(x, S, P, cfg.seed);
                    ++instances;
                    std::vector<std::size_t> per(S, 0);
                    for (std::size_t k : sel.cluster) ++per[k];
                    for (std::size_t k = 0; k < S; ++k)
                        if (per[k] != P) ++bad_counts;
                    if (sel.indices.size() != S * P) ++bad_counts;
                    std::vector<std::size_t> flat;
                    for (const auto& g : ref.per_cluster) flat.insert(flat.end(), g.begin(), g.end());
                    if (flat != sel.indices) ++mismatches;
                }
            }
        }
    }
    // On well-separated instances Lloyd must also reach the exhaustive optimum.
    for (std::size_t b = 6; b <= 12; b += 3) {
        for (std::size_t S = 2; S <= 3; ++S) {
            for (int rep = 0; rep < 3; ++rep) {
                const Matrix x = separated_blobs(rng, b, S, 2);
                const KMeansResult km = lloyd_kmeans(x, S, 100, rng.next_u64());
                const double best = exhaustive_min_sse(x, S);
                ++exhaustive;
                if (assignment_sse(x, km.assignment, S) > best * (1 + 1e-12) + 1e-12) ++suboptimal;
            }
        }
    }
    return {mismatches == 0 && bad_counts == 0 && suboptimal == 0,
            fmt("%zu instances (b<=12, S<=3): %zu oracle mismatches, %zu count violations; %zu exhaustive "
                "partition checks, %zu suboptimal",
                instances, mismatches, bad_counts, exhaustive, suboptimal)};
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "seeds");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (rc != 0) throw std::runtime_error("seeds " + args[1] + " failed: " + err.str());
    return rc;
}

const std::string kPreset = std::string(SEEDS_SOURCE_DIR) + "/configs/desk.cfg";

struct EndToEnd {
    fs::path root;
    EvalReport full, single;
    double oracle = 0.0;
    double seconds = 0.0;
};

EndToEnd run_end_to_end(const fs::path& root) {
    EndToEnd e2e{root};
    const auto t0 = Clock::now();
    run_cli({"run-all", "--config", kPreset, "--out", (root / "full").string(), "--quiet"});
    run_cli({"run-all", "--config", kPreset, "--out", (root / "single").string(), "--quiet", "--set",
             "semantic.single_branch=true"});
    run_cli({"train-classifier", "--oracle", "--config", kPreset, "--out", (root / "full").string(), "--quiet"});
    e2e.seconds = seconds_since(t0);

    for (auto [dir, rep] : {std::pair{"full", &e2e.full}, std::pair{"single", &e2e.single}}) {
        const RunConfig cfg = load_config(kPreset, {"paths.out=" + (root / dir).string()});
        cli::eval_stage(cfg, rep);
    }
    const RunConfig cfg = load_config(kPreset, {"paths.out=" + (root / "full").string()});
    const cli::Inputs in = cli::load_inputs(cfg);
    const FeatureDataset unseen_test =
        io::load_dataset_csv(cli::out_path(cfg, cli::kUnseenTest), in.table, DatasetSplit::unseen_test);
    e2e.oracle = head_accuracy(io::load_head(cli::out_path(cfg, cli::kOracleHead)), unseen_test, in.table);
    return e2e;
}

Verdict zero_shot_transfer(const EndToEnd& r) {
    const bool ok = r.full.zsd >= 50.0 && r.oracle >= 90.0 && r.single.zsd < r.full.zsd && r.seconds < 600.0;
    return {ok, fmt("ZSD full %.2f%% (chance 25%%), oracle %.2f%%, single-branch ablation %.2f%%; GZSD full "
                    "seen %.1f / unseen %.1f / HM %.1f; three runs took %.0fs",
                    r.full.zsd, r.oracle, r.single.zsd, r.full.gzsd_seen, r.full.gzsd_unseen, r.full.hm, r.seconds)};
}

Verdict determinism(const EndToEnd& r) {
    run_cli({"run-all", "--config", kPreset, "--out", (r.root / "repeat").string(), "--quiet"});
    std::vector<std::string> differing;
    for (const char* f : {cli::kCheckpoint, cli::kReportText, cli::kReportCsv, cli::kSynthBank, cli::kSelectedBank,
                          cli::kUnseenHead, cli::kLossCurve}) {
        if (io::read_file((r.root / "full" / f).string()) != io::read_file((r.root / "repeat" / f).string()))
            differing.push_back(f);
    }
    std::string detail = "two run-all invocations, same seed: ";
    if (differing.empty()) return {true, detail + "checkpoint, bank, head, curve and reports byte-identical"};
    for (const auto& f : differing) detail += f + " ";
    return {false, detail + "differ"};
}

Verdict io_round_trips(const fs::path& root) {
    std::vector<std::string> problems;
    // Embeddings with awkward doubles.
    RngStream rng(3);
    Matrix vecs = randn(rng, 5, 7, 1e3);
    vecs(0, 0) = 1e-300;
    vecs(1, 1) = -0.0;
    vecs(2, 2) = 0.1;
    vecs(3, 3) = 1.0 / 3.0;
    const std::vector<std::string> tokens = {"tomato", "egg", "stewed", "a_b", "x9"};
    const io::Embeddings back = io::parse_embeddings(io::format_embeddings(tokens, vecs));
    if (back.tokens != tokens) problems.push_back("embedding tokens");
    for (std::size_t i = 0; i < vecs.size(); ++i)
        if (std::signbit(back.vectors.data()[i]) != std::signbit(vecs.data()[i]) ||
            back.vectors.data()[i] != vecs.data()[i])
            problems.push_back("embedding value " + std::to_string(i));

    // Checkpoint: encode → decode → restore into a fresh state → encode again.
    const RunConfig cfg = load_config(kPreset, {"paths.out=" + (root / "full").string()});
    const cli::Inputs in = cli::load_inputs(cfg);
    const std::string bytes = io::read_file(cli::out_path(cfg, cli::kCheckpoint));
    SynthesizerState st = cli::load_state(cfg, in, cli::out_path(cfg, cli::kCheckpoint));
    if (io::encode_checkpoint(io::capture(st, cfg.to_text(false))) != bytes)
        problems.push_back("checkpoint re-encode differs");
    const FeatureBank bank = io::load_feature_bank(cli::out_path(cfg, cli::kSynthBank));
    const FeatureBank bank2 = io::parse_bank_csv(io::format_bank_csv(bank));
    if (bank2.features != bank.features || bank2.classes != bank.classes) problems.push_back("bank csv");

    // Malformed inputs must name line and field.
    std::size_t addressed = 0, total = 0;
    auto expect = [&](const std::function<void()>& f, std::size_t line, std::size_t field) {
        ++total;
        try {
            f();
        } catch (const io::ParseError& e) {
            if (e.line() == line && e.field() == field) ++addressed;
            return;
        } catch (...) {
        }
    };
    expect([] { io::parse_embeddings("2 3\na 1 2 3\nb 1 x 3\n"); }, 3, 3);
    expect([] { io::parse_embeddings("2 3\na 1 2 3\nb 1 2\n"); }, 3, 0);
    expect([] { io::parse_embeddings("2 3\na 1 2 nan\nb 1 2 3\n"); }, 2, 4);
    expect([] { io::parse_embeddings("two 3\n"); }, 1, 0);
    expect([] { io::parse_embeddings("2 3\na 1 2 3\na 1 2 3\n"); }, 3, 1);
    expect([] { parse_config("train.epochs=5\nbogus\n"); }, 2, 0);
    if (addressed != total) problems.push_back(fmt("%zu/%zu malformed inputs line/field addressed", addressed, total));

    bool bad_magic = false;
    try {
        io::decode_checkpoint("NOTACKPT" + bytes.substr(8));
    } catch (const std::exception&) {
        bad_magic = true;
    }
    if (!bad_magic) problems.push_back("bad magic accepted");

    std::string detail = "embeddings, checkpoint and bank round-trips; " + fmt("%zu malformed inputs", total);
    if (problems.empty()) return {true, detail + " addressed by line/field"};
    for (const auto& p : problems) detail += "; " + p;
    return {false, detail};
}

}  // namespace

int main() {
    log::set_level(log::Level::quiet);
    const fs::path root = fs::temp_directory_path() / fmt("seeds_acceptance_%d", static_cast<int>(::getpid()));
    fs::remove_all(root);

    report(1, "harmonic mean arithmetic", harmonic_arithmetic);
    report(2, "finite-difference gradient suite", gradient_checks);
    report(3, "diffusion marginal law", diffusion_marginal);
    report(4, "diffusion mode coverage on a 2-mode mixture", mixture_diversity);
    report(5, "AdaIN statistic transfer", adain_exactness);
    report(6, "k-means selection vs brute-force oracle", kmeans_oracle);

    EndToEnd e2e;
    std::string e2e_error;
    try {
        e2e = run_end_to_end(root);
    } catch (const std::exception& e) {
        e2e_error = e.what();
    }
    auto needs_e2e = [&](auto fn) {
        return [&, fn]() -> Verdict {
            if (!e2e_error.empty()) return {false, "end-to-end run failed: " + e2e_error};
            return fn(e2e);
        };
    };
    report(7, "end-to-end zero-shot transfer", needs_e2e(zero_shot_transfer));
    report(8, "run-all determinism", needs_e2e(determinism));
    report(9, "I/O round-trips and addressed errors",
           needs_e2e([&](const EndToEnd&) { return io_round_trips(root); }));

    fs::remove_all(root);
    std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
