#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "seeds/log.hpp"
#include "seeds/pipeline.hpp"
#include "support.hpp"

using namespace seeds;
using doctest::Approx;

namespace {

BenchmarkSpec small_spec() {
    BenchmarkSpec spec;
    spec.train_per_class = 24;
    spec.test_per_class = 12;
    return spec;
}

SynthesizerConfig small_config() {
    SynthesizerConfig cfg;
    cfg.steps = 8;
    cfg.epochs = 2;
    cfg.batch = 32;
    cfg.critic_iters = 2;
    cfg.adam.learning_rate = 1e-3;
    return cfg;
}

std::vector<std::vector<double>> snapshot(SynthesizerState& st) {
    std::vector<std::vector<double>> out;
    for (const ParamRef& p : st.all_params()) out.push_back(*p.value);
    return out;
}

std::vector<std::string> unseen_names(const SemanticTable& t) {
    std::vector<std::string> out;
    for (std::size_t id : t.ids(Split::unseen)) out.push_back(t.name(id));
    return out;
}

}  // namespace

TEST_CASE("benchmark: default split, determinism, learnability") {
    const Benchmark a = gen_benchmark(BenchmarkSpec{});
    CHECK(a.table.ids(Split::seen).size() == 12);
    CHECK(a.table.ids(Split::unseen).size() == 4);
    CHECK(a.seen_train.size() == 12 * 200);
    CHECK(a.unseen_test.size() == 4 * 100);
    const Benchmark b = gen_benchmark(BenchmarkSpec{});
    CHECK(a.seen_train.features == b.seen_train.features);
    CHECK(a.table.vectors() == b.table.vectors());
    CHECK(nearest_mean_accuracy(a.class_means, a.unseen_test, a.table.ids(Split::unseen)) >= 90.0);
    // Class names carry their attribute words so lexical masks can find them.
    const std::string& name = a.table.name(0);
    CHECK(name.find('_') != std::string::npos);
}

TEST_CASE("benchmark: one mode and no noise puts every sample on its class mean") {
    BenchmarkSpec spec = small_spec();
    spec.modes_per_class = 1;
    spec.sigma = 0.0;
    const Benchmark b = gen_benchmark(spec);
    for (std::size_t r = 0; r < b.seen_train.size(); ++r) {
        const auto mean = b.class_means.row(b.seen_train.labels[r]);
        for (std::size_t c = 0; c < spec.d; ++c) CHECK(b.seen_train.features(r, c) == Approx(mean[c]));
    }
}

TEST_CASE("benchmark settings validation") {
    BenchmarkSpec overlap;
    overlap.unseen_pairs = {{0, 0}};
    overlap.seen_pairs = {{0, 0}, {1, 1}, {0, 1}};
    CHECK_THROWS(overlap.validate_and_complete());

    BenchmarkSpec novel_attribute;
    novel_attribute.seen_pairs = {{0, 0}, {0, 1}, {1, 0}};
    novel_attribute.unseen_pairs = {{3, 3}};
    CHECK_THROWS(novel_attribute.validate_and_complete());

    BenchmarkSpec range;
    range.unseen_pairs = {{9, 0}};
    CHECK_THROWS(range.validate_and_complete());
}

TEST_CASE("seen classifier: separable toy, class count, reproducibility, single class") {
    SemanticTable t(2);
    const std::vector<double> v{1, 0};
    t.add("left", v, Split::seen);
    t.add("right", v, Split::seen);
    t.add("other", v, Split::unseen);
    RngStream rng(1);
    FeatureDataset data;
    data.features = Matrix(200, 3);
    for (std::size_t i = 0; i < 200; ++i) {
        data.labels.push_back(i % 2);
        for (std::size_t c = 0; c < 3; ++c) data.features(i, c) = 0.3 * rng.gaussian() + (i % 2 ? 2.0 : -2.0);
    }
    const ClassifierHead h = train_seen_classifier(data, t);
    CHECK(h.class_count() == 2);
    CHECK(head_accuracy(h, data, t) >= 99.0);
    CHECK(train_seen_classifier(data, t).weights == h.weights);

    FeatureDataset one = data;
    for (auto& l : one.labels) l = 0;
    CHECK_THROWS(train_seen_classifier(one, t));
    FeatureDataset leaked = data;
    leaked.labels[0] = 2;
    CHECK_THROWS(train_seen_classifier(leaked, t));
}

TEST_CASE("loss weights combine as documented") {
    const LossWeights w;
    CHECK(w.total(1, 1, 1, 1) == Approx(3.1));
    LossWeights bad;
    bad.lambda2 = -1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("zero loss weights leave every parameter unchanged") {
    log::set_level(log::Level::quiet);
    const Benchmark b = gen_benchmark(small_spec());
    SynthesizerConfig cfg = small_config();
    cfg.weights = {0.0, 0.0, 0.0};
    cfg.mask_mode = MaskMode::learnable;
    SynthesizerState st = make_synthesizer(cfg, b.table, b.ingredients, b.cuisines,
                                           train_seen_classifier(b.seen_train, b.table));
    const auto before = snapshot(st);
    train_synthesizer(st, b.seen_train, b.table);
    CHECK(snapshot(st) == before);
    CHECK(st.curve.size() == 2);
}

TEST_CASE("non-finite data aborts training with the epoch") {
    log::set_level(log::Level::quiet);
    Benchmark b = gen_benchmark(small_spec());
    b.seen_train.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
    SynthesizerState st = make_synthesizer(small_config(), b.table, b.ingredients, b.cuisines,
                                           train_seen_classifier(gen_benchmark(small_spec()).seen_train, b.table));
    CHECK_THROWS_AS(train_synthesizer(st, b.seen_train, b.table), TrainingDiverged);
}

TEST_CASE("single-branch mode merges the corpora and shares the semantics") {
    log::set_level(log::Level::quiet);
    const Benchmark b = gen_benchmark(small_spec());
    SynthesizerConfig cfg = small_config();
    cfg.single_branch = true;
    const SynthesizerState st = make_synthesizer(cfg, b.table, b.ingredients, b.cuisines,
                                                 train_seen_classifier(b.seen_train, b.table));
    CHECK(st.corpus_i.size() == b.ingredients.size() + b.cuisines.size());
    const auto ids = b.table.ids(Split::unseen);
    const BranchSemantics bs = state_semantics(st, b.table, ids);
    CHECK(bs.ingredient == bs.cuisine);
}

TEST_CASE("default benchmark: losses fall, synthesis is non-collapsed, selection is balanced") {
    log::set_level(log::Level::quiet);
    const Benchmark b = gen_benchmark(BenchmarkSpec{});
    SynthesizerConfig cfg;
    cfg.adam.learning_rate = 3e-3;
    cfg.cosine_decay = true;
    SynthesizerState st = make_synthesizer(cfg, b.table, b.ingredients, b.cuisines,
                                           train_seen_classifier(b.seen_train, b.table));
    train_synthesizer(st, b.seen_train, b.table);
    REQUIRE(st.curve.size() == 50);
    const LossRecord& first = st.curve.front();
    const LossRecord& last = st.curve.back();
    CHECK(last.ang1 < first.ang1);
    CHECK(last.ang2 < first.ang2);
    CHECK(last.rec < first.rec);

    const FeatureBank bank = synthesize_unseen(st, b.table, unseen_names(b.table));
    CHECK(bank.per_class() == 500);
    CHECK(bank.features.cols() == 16);
    CHECK(bank.features.all_finite());
    for (std::size_t k = 0; k < bank.classes.size(); ++k) {
        std::vector<double> mu(16, 0.0);
        double trace = 0.0;
        for (std::size_t r = 0; r < 500; ++r)
            for (std::size_t c = 0; c < 16; ++c) mu[c] += bank.features(k * 500 + r, c) / 500.0;
        for (std::size_t r = 0; r < 500; ++r)
            for (std::size_t c = 0; c < 16; ++c) trace += std::pow(bank.features(k * 500 + r, c) - mu[c], 2) / 499.0;
        CHECK(trace > 1e-4);
    }
    const FeatureBank sel = select_features(bank, SamplingConfig{});
    CHECK(sel.per_class() == 250);
    const ClassifierHead unseen = train_unseen_classifier(sel);
    CHECK(unseen.class_count() == 4);
    CHECK(train_unseen_classifier(sel).weights == unseen.weights);
    CHECK(head_accuracy(unseen, b.unseen_test, b.table) >= 50.0);
    CHECK_THROWS(synthesize_unseen(st, b.table, {"no_such_class"}));
}

TEST_CASE("feature bank balance is enforced") {
    FeatureBank bank{{"a", "b"}, Matrix(3, 2), {0, 0, 1}};
    CHECK_THROWS(bank.per_class());
    CHECK_THROWS(train_unseen_classifier(bank));
    SamplingConfig cfg;
    cfg.clusters = 1;
    cfg.per_cluster = 1;
    FeatureBank ok{{"a", "b"}, Matrix(4, 2), {0, 0, 1, 1}};
    CHECK(select_features(ok, cfg).per_class() == 1);
}

TEST_CASE("harmonic mean values and properties") {
    CHECK(harmonic_mean(82.8, 3.5) == Approx(6.7).epsilon(0.01));
    CHECK(harmonic_mean(87.0, 49.8) == Approx(63.3).epsilon(0.001));
    CHECK(harmonic_mean(48.5, 50.6) == Approx(49.5).epsilon(0.001));
    CHECK(harmonic_mean(0, 0) == 0.0);
    CHECK_THROWS(harmonic_mean(-1, 2));
    RngStream rng(2);
    for (int i = 0; i < 100; ++i) {
        const double a = 100 * rng.uniform(), c = 100 * rng.uniform();
        const double h = harmonic_mean(a, c);
        CHECK(h == Approx(harmonic_mean(c, a)));
        CHECK(h <= 2 * std::min(a, c) + 1e-12);
        CHECK(h <= (a + c) / 2 + 1e-12);
        CHECK(harmonic_mean(a, a) == Approx(a));
    }
}

TEST_CASE("merge keeps seen rows verbatim and evaluation is well-formed") {
    log::set_level(log::Level::quiet);
    const Benchmark b = gen_benchmark(small_spec());
    const ClassifierHead seen = train_seen_classifier(b.seen_train, b.table);
    const ClassifierHead oracle = train_oracle_classifier(b.unseen_train, b.table);
    const ClassifierHead merged = merge_heads(seen, oracle);
    REQUIRE(merged.class_count() == 16);
    for (std::size_t r = 0; r < seen.class_count(); ++r) {
        CHECK(merged.classes[r] == seen.classes[r]);
        CHECK(merged.bias[r] == seen.bias[r]);
        for (std::size_t c = 0; c < seen.dim(); ++c) CHECK(merged.weights(r, c) == seen.weights(r, c));
    }
    const Matrix ls = seen.logits(b.seen_test.features), lm = merged.logits(b.seen_test.features);
    for (std::size_t r = 0; r < ls.rows(); ++r)
        for (std::size_t c = 0; c < ls.cols(); ++c) CHECK(lm(r, c) == ls(r, c));

    CHECK_THROWS(merge_heads(seen, seen));

    const EvalReport rep = merge_and_evaluate(seen, oracle, b.seen_test, b.unseen_test, b.table);
    for (double v : {rep.zsd, rep.gzsd_seen, rep.gzsd_unseen, rep.hm}) CHECK((v >= 0.0 && v <= 100.0));
    CHECK(rep.gzsd_unseen <= rep.zsd);
    CHECK(rep.hm == Approx(harmonic_mean(rep.gzsd_seen, rep.gzsd_unseen)));
    CHECK(rep.to_csv_row().find(',') != std::string::npos);

    const EvalReport empty =
        merge_and_evaluate(seen, ClassifierHead({}, seen.dim()), b.seen_test, b.unseen_test, b.table);
    CHECK(empty.gzsd_unseen == 0.0);
    CHECK(empty.hm == 0.0);
}
