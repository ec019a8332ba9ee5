#include "seeds/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "seeds/io.hpp"

namespace seeds {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::size_t to_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument(key + ": expected an unsigned integer, got '" + v + "'");
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
        throw std::invalid_argument(key + ": expected a finite real, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(key + ": expected true/false, got '" + v + "'");
}

std::string pairs_text(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::string s;
    for (const auto& [i, c] : pairs) s += (s.empty() ? "" : ";") + std::to_string(i) + ":" + std::to_string(c);
    return s;
}

std::vector<std::pair<std::size_t, std::size_t>> to_pairs(const std::string& key, const std::string& v) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument(key + ": pair '" + item + "' must be ingredient:cuisine");
        out.emplace_back(to_count(key, trim(item.substr(0, colon))), to_count(key, trim(item.substr(colon + 1))));
    }
    return out;
}

std::string real_text(double v) { return io::format_double(v); }

struct Setting {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    bool path = false;
};

#define COUNT(KEY, FIELD)                                                                   \
    Setting {                                                                               \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_count(KEY, v); },        \
            [](const RunConfig& c) { return std::to_string(c.FIELD); }                      \
    }
#define REAL(KEY, FIELD)                                                                    \
    Setting {                                                                               \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_real(KEY, v); },         \
            [](const RunConfig& c) { return real_text(c.FIELD); }                           \
    }
#define FLAG(KEY, FIELD)                                                                    \
    Setting {                                                                               \
        KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(KEY, v); },         \
            [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }      \
    }
#define PATH(KEY, FIELD)                                                                    \
    Setting {                                                                               \
        KEY, [](RunConfig& c, const std::string& v) { c.paths.FIELD = v; },                 \
            [](const RunConfig& c) { return c.paths.FIELD; }, true                          \
    }

const std::vector<Setting>& settings() {
    static const std::vector<Setting> all = {
        COUNT("bench.ingredients", bench.ingredients),
        COUNT("bench.cuisines", bench.cuisines),
        {"bench.seen_pairs", [](RunConfig& c, const std::string& v) { c.bench.seen_pairs = to_pairs("bench.seen_pairs", v); },
         [](const RunConfig& c) { return pairs_text(c.bench.seen_pairs); }},
        {"bench.unseen_pairs",
         [](RunConfig& c, const std::string& v) { c.bench.unseen_pairs = to_pairs("bench.unseen_pairs", v); },
         [](const RunConfig& c) { return pairs_text(c.bench.unseen_pairs); }},
        COUNT("bench.modes", bench.modes_per_class),
        COUNT("bench.train_per_class", bench.train_per_class),
        COUNT("bench.test_per_class", bench.test_per_class),
        REAL("bench.sigma", bench.sigma),
        REAL("bench.feature_scale", bench.feature_scale),
        REAL("bench.offset_scale", bench.offset_scale),
        REAL("bench.semantic_noise", bench.semantic_noise),
        {"bench.seed", [](RunConfig& c, const std::string& v) { c.bench.seed = to_u64("bench.seed", v); },
         [](const RunConfig& c) { return std::to_string(c.bench.seed); }},
        COUNT("dims.d", synth.d),
        COUNT("dims.s", synth.s),
        COUNT("dims.e", synth.e),
        COUNT("dims.hidden", synth.hidden),
        COUNT("dims.branch_hidden", synth.branch_hidden),
        COUNT("dims.latent", synth.latent),
        COUNT("schedule.T", synth.steps),
        REAL("schedule.beta_start", synth.beta_start),
        REAL("schedule.beta_end", synth.beta_end),
        REAL("loss.lambda1", synth.weights.lambda1),
        REAL("loss.lambda2", synth.weights.lambda2),
        REAL("loss.lambda3", synth.weights.lambda3),
        REAL("loss.gp_weight", synth.gp_weight),
        REAL("loss.mask_l1", synth.mask_l1),
        REAL("optim.lr", synth.adam.learning_rate),
        REAL("optim.weight_decay", synth.adam.weight_decay),
        FLAG("optim.cosine_decay", synth.cosine_decay),
        COUNT("train.epochs", synth.epochs),
        COUNT("train.batch", synth.batch),
        COUNT("train.critic_iters", synth.critic_iters),
        {"train.t_sampling",
         [](RunConfig& c, const std::string& v) {
             if (v == "uniform")
                 c.synth.t_sampling = TimestepSampling::uniform;
             else if (v == "all")
                 c.synth.t_sampling = TimestepSampling::all_timesteps;
             else
                 throw std::invalid_argument("train.t_sampling: expected uniform|all, got '" + v + "'");
         },
         [](const RunConfig& c) {
             return std::string(c.synth.t_sampling == TimestepSampling::uniform ? "uniform" : "all");
         }},
        COUNT("sampling.clusters", sampling.clusters),
        COUNT("sampling.per_cluster", sampling.per_cluster),
        COUNT("sampling.synth_per_class", synth_per_class),
        COUNT("sampling.max_iter", sampling.max_iterations),
        {"denoiser.mode",
         [](RunConfig& c, const std::string& v) {
             if (v == "per_timestep")
                 c.synth.denoiser = DenoiserMode::per_timestep;
             else if (v == "shared")
                 c.synth.denoiser = DenoiserMode::shared;
             else
                 throw std::invalid_argument("denoiser.mode: expected per_timestep|shared, got '" + v + "'");
         },
         [](const RunConfig& c) {
             return std::string(c.synth.denoiser == DenoiserMode::shared ? "shared" : "per_timestep");
         }},
        {"semantic.mask_mode",
         [](RunConfig& c, const std::string& v) {
             if (v == "fixed")
                 c.synth.mask_mode = MaskMode::fixed_lexical;
             else if (v == "learnable")
                 c.synth.mask_mode = MaskMode::learnable;
             else
                 throw std::invalid_argument("semantic.mask_mode: expected fixed|learnable, got '" + v + "'");
         },
         [](const RunConfig& c) {
             return std::string(c.synth.mask_mode == MaskMode::learnable ? "learnable" : "fixed");
         }},
        FLAG("semantic.single_branch", synth.single_branch),
        COUNT("classifier.max_epochs", head.max_epochs),
        COUNT("classifier.batch", head.batch),
        REAL("classifier.lr", head.adam.learning_rate),
        REAL("classifier.tolerance", head.tolerance),
        {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        PATH("paths.out", out),
        PATH("paths.class_embeddings", class_embeddings),
        PATH("paths.split", split),
        PATH("paths.ingredient_corpus", ingredient_corpus),
        PATH("paths.cuisine_corpus", cuisine_corpus),
        PATH("paths.seen_train", seen_train),
        PATH("paths.seen_test", seen_test),
        PATH("paths.unseen_test", unseen_test),
        PATH("paths.unseen_train", unseen_train),
    };
    return all;
}

#undef COUNT
#undef REAL
#undef FLAG
#undef PATH

}  // namespace

std::string RunPaths::resolve(const std::string& configured, const std::string& file) const {
    return configured.empty() ? out + "/" + file : configured;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const Setting& s : settings())
        if (key == s.key) {
            s.set(cfg, value);
            return;
        }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void RunConfig::finalize() {
    synth.seed = seed;
    sampling.seed = seed;
    head.seed = seed;
    bench.d = synth.d;
    bench.s = synth.s;
    BenchmarkSpec probe = bench;
    probe.validate_and_complete();
    synth.validate();
    if (sampling.clusters == 0 || sampling.per_cluster == 0)
        throw std::invalid_argument("sampling.clusters and sampling.per_cluster must be >= 1");
    if (synth_per_class < sampling.clusters * sampling.per_cluster)
        throw std::invalid_argument("sampling.synth_per_class (" + std::to_string(synth_per_class) +
                                    ") must be >= clusters * per_cluster (" +
                                    std::to_string(sampling.clusters * sampling.per_cluster) + ")");
    if (head.batch == 0 || !(head.adam.learning_rate > 0.0) || !(head.tolerance >= 0.0))
        throw std::invalid_argument("classifier settings: batch >= 1, lr > 0, tolerance >= 0 required");
    if (paths.out.empty()) throw std::invalid_argument("paths.out must not be empty");
}

std::string RunConfig::to_text(bool with_paths) const {
    std::string out;
    for (const Setting& s : settings()) {
        if (s.path && !with_paths) continue;
        out += std::string(s.key) + "=" + s.get(*this) + "\n";
    }
    return out;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw io::ParseError(origin, n, "expected key=value");
        try {
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw io::ParseError(origin, n, e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = path.empty() ? RunConfig{} : parse_config(io::read_file(path), path);
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override '" + o + "' must be key=value");
        apply_setting(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    if (const char* env = std::getenv("SEEDS_SEED"); env && *env) cfg.seed = to_u64("SEEDS_SEED", env);
    cfg.finalize();
    return cfg;
}

std::map<std::string, std::string> parse_pairs(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

}  // namespace seeds
