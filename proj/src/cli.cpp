#include "seeds/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>

#include "seeds/log.hpp"

namespace seeds::cli {

std::string out_path(const RunConfig& cfg, const char* file) { return cfg.paths.out + "/" + file; }

Inputs load_inputs(const RunConfig& cfg) {
    const RunPaths& p = cfg.paths;
    Inputs in;
    if (!std::filesystem::exists(p.resolve(p.class_embeddings, kClassEmbeddings)))
        throw std::runtime_error("no class embeddings at " + p.resolve(p.class_embeddings, kClassEmbeddings) +
                                 "; run `seeds gen-benchmark` first or set paths.class_embeddings");
    in.table = io::load_semantic_table(p.resolve(p.class_embeddings, kClassEmbeddings), p.resolve(p.split, kSplit));
    in.ingredients = io::load_corpus(p.resolve(p.ingredient_corpus, kIngredientCorpus), Domain::ingredient);
    in.cuisines = io::load_corpus(p.resolve(p.cuisine_corpus, kCuisineCorpus), Domain::cuisine);
    if (in.table.dim() != cfg.synth.s)
        throw std::runtime_error("class embeddings have dim " + std::to_string(in.table.dim()) +
                                 " but dims.s = " + std::to_string(cfg.synth.s));
    return in;
}

namespace {

FeatureDataset load_split_csv(const RunConfig& cfg, const Inputs& in, const std::string& configured,
                              const char* file, DatasetSplit split) {
    const std::string path = cfg.paths.resolve(configured, file);
    FeatureDataset ds = io::load_dataset_csv(path, in.table, split);
    if (ds.features.cols() != cfg.synth.d)
        throw std::runtime_error(path + ": features have dim " + std::to_string(ds.features.cols()) +
                                 " but dims.d = " + std::to_string(cfg.synth.d));
    return ds;
}

std::vector<std::string> unseen_names(const SemanticTable& t) {
    std::vector<std::string> out;
    for (std::size_t id : t.ids(Split::unseen)) out.push_back(t.name(id));
    return out;
}

}  // namespace

void check_snapshot(const std::string& snapshot, const RunConfig& cfg) {
    static const std::set<std::string> structural = {"dims.d",      "dims.s",        "dims.e",
                                                     "dims.hidden", "dims.branch_hidden", "dims.latent",
                                                     "schedule.T",  "denoiser.mode", "semantic.single_branch"};
    const auto saved = parse_pairs(snapshot);
    const auto active = parse_pairs(cfg.to_text(false));
    for (const auto& [key, value] : active) {
        auto it = saved.find(key);
        const std::string old = it == saved.end() ? "<absent>" : it->second;
        if (old == value || key == "train.epochs") continue;
        if (structural.count(key))
            throw std::runtime_error("checkpoint was written with " + key + "=" + old + " but the config has " + key +
                                     "=" + value + "; refusing to load");
        log::warn("config drift since checkpoint: " + key + " was " + old + ", now " + value);
    }
}

SynthesizerState load_state(const RunConfig& cfg, const Inputs& in, const std::string& path) {
    const io::Checkpoint ckpt = io::load_checkpoint(path);
    check_snapshot(ckpt.config, cfg);
    const io::Entry* names = ckpt.find("seen_head.classes");
    if (!names || !std::holds_alternative<std::vector<std::string>>(*names))
        throw std::runtime_error(path + ": missing seen classifier class list");
    ClassifierHead skeleton(std::get<std::vector<std::string>>(*names), cfg.synth.d);
    SynthesizerState st = make_synthesizer(cfg.synth, in.table, in.ingredients, in.cuisines, std::move(skeleton));
    io::restore(ckpt, st);
    return st;
}

std::string gen_benchmark_stage(const RunConfig& cfg) {
    const Benchmark b = gen_benchmark(cfg.bench);
    io::save_semantic_table(out_path(cfg, kClassEmbeddings), out_path(cfg, kSplit), b.table);
    io::save_corpus(out_path(cfg, kIngredientCorpus), b.ingredients);
    io::save_corpus(out_path(cfg, kCuisineCorpus), b.cuisines);
    io::save_dataset_csv(out_path(cfg, kSeenTrain), b.seen_train, b.table);
    io::save_dataset_csv(out_path(cfg, kSeenTest), b.seen_test, b.table);
    io::save_dataset_csv(out_path(cfg, kUnseenTest), b.unseen_test, b.table);
    io::save_dataset_csv(out_path(cfg, kUnseenTrain), b.unseen_train, b.table);
    return "gen-benchmark: " + std::to_string(b.table.ids(Split::seen).size()) + " seen / " +
           std::to_string(b.table.ids(Split::unseen).size()) + " unseen classes, d=" + std::to_string(b.spec.d) +
           ", written to " + cfg.paths.out;
}

std::string train_stage(const RunConfig& cfg, bool resume) {
    const Inputs in = load_inputs(cfg);
    const FeatureDataset train =
        load_split_csv(cfg, in, cfg.paths.seen_train, kSeenTrain, DatasetSplit::seen_train);
    SynthesizerState st;
    if (resume) {
        st = load_state(cfg, in, out_path(cfg, kCheckpoint));
    } else {
        ClassifierHead head = train_seen_classifier(train, in.table, cfg.head);
        io::save_head(out_path(cfg, kSeenHead), head);
        st = make_synthesizer(cfg.synth, in.table, in.ingredients, in.cuisines, std::move(head));
    }
    const std::size_t done = static_cast<std::size_t>(st.epoch);
    const std::size_t todo = cfg.synth.epochs > done ? cfg.synth.epochs - done : 0;
    train_synthesizer(st, train, in.table, todo);
    io::save_checkpoint(out_path(cfg, kCheckpoint), io::capture(st, cfg.to_text(false)));
    io::save_loss_curve(out_path(cfg, kLossCurve), st.curve);
    std::string msg = "train: " + std::to_string(todo) + " epochs (total " + std::to_string(st.epoch) + ")";
    if (!st.curve.empty()) msg += ", final l_total=" + io::format_double(st.curve.back().total);
    return msg;
}

std::string synthesize_stage(const RunConfig& cfg) {
    const Inputs in = load_inputs(cfg);
    const SynthesizerState st = load_state(cfg, in, out_path(cfg, kCheckpoint));
    const FeatureBank bank = synthesize_unseen(st, in.table, unseen_names(in.table), cfg.synth_per_class);
    io::save_feature_bank(out_path(cfg, kSynthBank), bank);
    return "synthesize: " + std::to_string(bank.features.rows()) + " features for " +
           std::to_string(bank.classes.size()) + " unseen classes";
}

std::string select_stage(const RunConfig& cfg) {
    const FeatureBank bank = io::load_feature_bank(out_path(cfg, kSynthBank));
    const FeatureBank sel = select_features(bank, cfg.sampling);
    io::save_feature_bank(out_path(cfg, kSelectedBank), sel);
    return "select: kept " + std::to_string(sel.per_class()) + " of " + std::to_string(bank.per_class()) +
           " features per class";
}

std::string train_classifier_stage(const RunConfig& cfg, bool oracle) {
    if (oracle) {
        const Inputs in = load_inputs(cfg);
        const FeatureDataset real =
            load_split_csv(cfg, in, cfg.paths.unseen_train, kUnseenTrain, DatasetSplit::unseen_train);
        const ClassifierHead head = train_oracle_classifier(real, in.table, cfg.head);
        io::save_head(out_path(cfg, kOracleHead), head);
        return "train-classifier: oracle head over " + std::to_string(head.class_count()) + " unseen classes";
    }
    const FeatureBank bank = io::load_feature_bank(out_path(cfg, kSelectedBank));
    const ClassifierHead head = train_unseen_classifier(bank, cfg.head);
    io::save_head(out_path(cfg, kUnseenHead), head);
    return "train-classifier: unseen head over " + std::to_string(head.class_count()) + " classes from " +
           std::to_string(bank.features.rows()) + " synthesized features";
}

std::string eval_stage(const RunConfig& cfg, EvalReport* report) {
    const Inputs in = load_inputs(cfg);
    const FeatureDataset seen_test = load_split_csv(cfg, in, cfg.paths.seen_test, kSeenTest, DatasetSplit::seen_test);
    const FeatureDataset unseen_test =
        load_split_csv(cfg, in, cfg.paths.unseen_test, kUnseenTest, DatasetSplit::unseen_test);
    const ClassifierHead seen = io::load_head(out_path(cfg, kSeenHead));
    const ClassifierHead unseen = io::load_head(out_path(cfg, kUnseenHead));
    const EvalReport r = merge_and_evaluate(seen, unseen, seen_test, unseen_test, in.table);
    io::write_atomic(out_path(cfg, kReportText), r.to_text());
    io::write_atomic(out_path(cfg, kReportCsv), EvalReport::csv_header() + "\n" + r.to_csv_row() + "\n");
    if (report) *report = r;
    char buf[160];
    std::snprintf(buf, sizeof buf, "eval: zsd=%.1f gzsd_seen=%.1f gzsd_unseen=%.1f hm=%.1f (top-1 accuracy, %%)",
                  r.zsd, r.gzsd_seen, r.gzsd_unseen, r.hm);
    return buf;
}

std::string export_stage(const RunConfig& cfg, const std::string& bank, const std::string& csv) {
    const std::string src = bank.empty() ? out_path(cfg, kSynthBank) : bank;
    const std::string dst = csv.empty() ? out_path(cfg, kFeaturesCsv) : csv;
    const FeatureBank b = io::load_feature_bank(src);
    io::write_atomic(dst, io::format_bank_csv(b));
    return "export: " + std::to_string(b.features.rows()) + " features from " + src + " to " + dst;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zero-shot region-feature synthesis with semantic-separable diffusion"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> sets;
    bool verbose = false, quiet = false, resume = false, oracle = false;
    std::vector<double> hm;
    std::string bank_path, csv_path;

    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "config file (key=value lines)");
        sub->add_option("-s,--set", sets, "override a config key, e.g. --set train.epochs=10");
        sub->add_option("-o,--out", out_dir, "output directory (paths.out)");
        sub->add_flag("-v,--verbose", verbose, "log per-epoch losses");
        sub->add_flag("-q,--quiet", quiet, "only print errors");
        return sub;
    };
    CLI::App* gen = common(app.add_subcommand("gen-benchmark", "write the synthetic compositional benchmark"));
    CLI::App* train = common(app.add_subcommand("train", "train the seen classifier and the synthesizer"));
    train->add_flag("--resume", resume, "continue from the checkpoint up to train.epochs");
    CLI::App* synth = common(app.add_subcommand("synthesize", "synthesize unseen-class features"));
    CLI::App* select = common(app.add_subcommand("select", "k-means selection of synthesized features"));
    CLI::App* tc = common(app.add_subcommand("train-classifier", "train the unseen classifier"));
    tc->add_flag("--oracle", oracle, "train on real unseen features instead (upper bound)");
    CLI::App* eval = common(app.add_subcommand("eval", "merge classifiers and score ZSD/GZSD"));
    eval->add_option("--hm", hm, "print the harmonic mean of two scores and exit")->expected(2);
    CLI::App* all = common(app.add_subcommand("run-all", "every stage in order"));
    CLI::App* exp = common(app.add_subcommand("export", "write a feature bank as CSV"));
    exp->add_option("--bank", bank_path, "bank file (default: synthesized bank)");
    exp->add_option("--csv", csv_path, "destination CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (eval->parsed() && !hm.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", harmonic_mean(hm[0], hm[1]));
            out << buf << "\n";
            return 0;
        }
        log::set_level(quiet ? log::Level::quiet : verbose ? log::Level::info : log::Level::warn);
        if (!out_dir.empty()) sets.push_back("paths.out=" + out_dir);
        const RunConfig cfg = load_config(config_path, sets);
        std::filesystem::create_directories(cfg.paths.out);

        auto say = [&](const std::string& line) {
            if (!quiet) out << line << "\n";
        };
        if (gen->parsed()) say(gen_benchmark_stage(cfg));
        if (train->parsed()) say(train_stage(cfg, resume));
        if (synth->parsed()) say(synthesize_stage(cfg));
        if (select->parsed()) say(select_stage(cfg));
        if (tc->parsed()) say(train_classifier_stage(cfg, oracle));
        if (eval->parsed()) say(eval_stage(cfg));
        if (exp->parsed()) say(export_stage(cfg, bank_path, csv_path));
        if (all->parsed()) {
            say(gen_benchmark_stage(cfg));
            say(train_stage(cfg, false));
            say(synthesize_stage(cfg));
            say(select_stage(cfg));
            say(train_classifier_stage(cfg, false));
            say(eval_stage(cfg));
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace seeds::cli
