#include "seeds/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace seeds::io {

namespace {

std::string location(const std::string& path, std::size_t line, std::size_t field) {
    std::string s = path + ":" + std::to_string(line);
    if (field) s += ":field " + std::to_string(field);
    return s;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> split_char(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == sep) {
            out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

bool parse_real(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_count(std::string_view s, std::uint64_t& out) {
    if (s.empty()) return false;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

// Little-endian byte helpers.
void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    put_u64(b, u);
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}

    void need(std::size_t n, const char* what) const {
        if (b_.size() - pos_ < n)
            throw std::runtime_error(path_ + ": truncated file while reading " + what + " at byte " +
                                     std::to_string(pos_));
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(b_[pos_++]);
    }
    double f64(const char* what) {
        const std::uint64_t u = u64(what);
        double v;
        std::memcpy(&v, &u, sizeof v);
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const noexcept { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    std::size_t size() const noexcept { return b_.size(); }
    const std::string& path() const noexcept { return path_; }

private:
    const std::string& b_;
    std::string path_;
    std::size_t pos_ = 0;
};

// Guards allocation sizes read from a file against its remaining length.
std::uint64_t checked_count(Reader& r, std::uint64_t count, std::size_t unit, const char* what) {
    if (unit && count > (r.size() - r.pos()) / unit)
        throw std::runtime_error(r.path() + ": " + what + " count " + std::to_string(count) +
                                 " exceeds the file size (truncated or corrupt)");
    return count;
}

}  // namespace

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what, std::size_t field)
    : std::runtime_error(location(path, line, field) + ": " + what), line_(line), field_(field) {}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "' (missing file?)");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------

Embeddings parse_embeddings(const std::string& text, const std::string& path) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError(path, 1, "missing \"count dim\" header");
    const auto head = split_ws(lines[0]);
    std::uint64_t count = 0, dim = 0;
    if (head.size() != 2 || !parse_count(head[0], count) || !parse_count(head[1], dim))
        throw ParseError(path, 1, "header must be \"count dim\", got \"" + lines[0] + "\"");
    if (dim == 0) throw ParseError(path, 1, "dim must be >= 1");

    Embeddings e;
    std::set<std::string> seen;
    std::vector<double> values;
    std::size_t ln = 1;
    for (; ln < lines.size(); ++ln) {
        const auto f = split_ws(lines[ln]);
        if (f.empty()) continue;
        if (e.tokens.size() == count) throw ParseError(path, ln + 1, "more records than the header count " +
                                                                      std::to_string(count));
        if (f.size() != dim + 1)
            throw ParseError(path, ln + 1, "expected token and " + std::to_string(dim) + " values, got " +
                                               std::to_string(f.size() - 1) + " values");
        if (!seen.insert(f[0]).second) throw ParseError(path, ln + 1, "duplicate token '" + f[0] + "'", 1);
        for (std::size_t k = 1; k < f.size(); ++k) {
            double v;
            if (!parse_real(f[k], v))
                throw ParseError(path, ln + 1, "not a finite real: '" + f[k] + "'", k + 1);
            values.push_back(v);
        }
        e.tokens.push_back(f[0]);
    }
    if (e.tokens.size() != count)
        throw ParseError(path, ln, "header promises " + std::to_string(count) + " records, found " +
                                       std::to_string(e.tokens.size()));
    e.vectors = Matrix(count, dim, std::move(values));
    return e;
}

Embeddings load_embeddings(const std::string& path) { return parse_embeddings(read_file(path), path); }

std::string format_embeddings(const std::vector<std::string>& tokens, const Matrix& vectors) {
    if (tokens.size() != vectors.rows()) throw ShapeError("format_embeddings: token/row count mismatch");
    std::string out = std::to_string(tokens.size()) + " " + std::to_string(vectors.cols()) + "\n";
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        if (tokens[r].empty() || split_ws(tokens[r]).size() != 1)
            throw std::invalid_argument("format_embeddings: token '" + tokens[r] + "' is empty or has whitespace");
        out += tokens[r];
        for (double v : vectors.row(r)) out += " " + format_double(v);
        out += "\n";
    }
    return out;
}

void save_embeddings(const std::string& path, const std::vector<std::string>& tokens, const Matrix& vectors) {
    write_atomic(path, format_embeddings(tokens, vectors));
}

Corpus load_corpus(const std::string& path, Domain domain) {
    Embeddings e = load_embeddings(path);
    Corpus c{domain, std::move(e.tokens), std::move(e.vectors)};
    c.validate();
    return c;
}

void save_corpus(const std::string& path, const Corpus& corpus) { save_embeddings(path, corpus.tokens, corpus.vectors); }

std::map<std::string, Split> load_split(const std::string& path) {
    const auto lines = lines_of(read_file(path));
    std::map<std::string, Split> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l = lines[i];
        if (auto h = l.find('#'); h != std::string_view::npos) l = l.substr(0, h);
        const auto f = split_ws(l);
        if (f.empty()) continue;
        if (f.size() != 2) throw ParseError(path, i + 1, "expected \"class-id seen|unseen\"");
        Split s;
        if (f[1] == "seen")
            s = Split::seen;
        else if (f[1] == "unseen")
            s = Split::unseen;
        else
            throw ParseError(path, i + 1, "split must be 'seen' or 'unseen', got '" + f[1] + "'", 2);
        if (!out.emplace(f[0], s).second) throw ParseError(path, i + 1, "class '" + f[0] + "' listed twice", 1);
    }
    return out;
}

void save_split(const std::string& path, const SemanticTable& table) {
    std::string out;
    for (std::size_t k = 0; k < table.size(); ++k)
        out += table.name(k) + (table.split(k) == Split::seen ? " seen\n" : " unseen\n");
    write_atomic(path, out);
}

SemanticTable load_semantic_table(const std::string& embeddings_path, const std::string& split_path) {
    const Embeddings e = load_embeddings(embeddings_path);
    const auto split = load_split(split_path);
    SemanticTable t(e.vectors.cols());
    for (std::size_t r = 0; r < e.tokens.size(); ++r) {
        auto it = split.find(e.tokens[r]);
        if (it == split.end())
            throw std::runtime_error(split_path + ": class '" + e.tokens[r] + "' from " + embeddings_path +
                                     " has no split entry");
        t.add(e.tokens[r], e.vectors.row(r), it->second);
    }
    for (const auto& [name, s] : split)
        if (!t.find(name))
            throw std::runtime_error(split_path + ": class '" + name + "' has no embedding in " + embeddings_path);
    return t;
}

void save_semantic_table(const std::string& embeddings_path, const std::string& split_path,
                         const SemanticTable& table) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < table.size(); ++k) names.push_back(table.name(k));
    save_embeddings(embeddings_path, names, table.vectors());
    save_split(split_path, table);
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_header(std::size_t d) {
    std::string h = "class";
    for (std::size_t j = 0; j < d; ++j) h += ",f" + std::to_string(j);
    return h + "\n";
}

struct CsvRows {
    std::vector<std::string> classes;
    Matrix features;
};

CsvRows parse_feature_csv(const std::string& text, const std::string& path) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError(path, 1, "missing header \"class,f0,...\"");
    const auto head = split_char(lines[0], ',');
    if (head.size() < 2 || head[0] != "class") throw ParseError(path, 1, "header must start with \"class,f0\"");
    for (std::size_t j = 1; j < head.size(); ++j)
        if (head[j] != "f" + std::to_string(j - 1))
            throw ParseError(path, 1, "expected column 'f" + std::to_string(j - 1) + "', got '" + head[j] + "'", j + 1);
    const std::size_t d = head.size() - 1;
    CsvRows out;
    std::vector<double> values;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_char(lines[i], ',');
        if (f.size() != d + 1)
            throw ParseError(path, i + 1, "expected " + std::to_string(d + 1) + " fields, got " + std::to_string(f.size()));
        if (f[0].empty()) throw ParseError(path, i + 1, "empty class id", 1);
        for (std::size_t j = 1; j < f.size(); ++j) {
            double v;
            if (!parse_real(f[j], v)) throw ParseError(path, i + 1, "not a finite real: '" + f[j] + "'", j + 1);
            values.push_back(v);
        }
        out.classes.push_back(f[0]);
    }
    out.features = Matrix(out.classes.size(), d, std::move(values));
    return out;
}

}  // namespace

void save_dataset_csv(const std::string& path, const FeatureDataset& data, const SemanticTable& table) {
    std::string out = csv_header(data.features.cols());
    for (std::size_t r = 0; r < data.size(); ++r) {
        out += table.name(data.labels[r]);
        for (double v : data.features.row(r)) out += "," + format_double(v);
        out += "\n";
    }
    write_atomic(path, out);
}

FeatureDataset load_dataset_csv(const std::string& path, const SemanticTable& table, DatasetSplit split) {
    CsvRows rows = parse_feature_csv(read_file(path), path);
    FeatureDataset ds;
    ds.split = split;
    for (std::size_t r = 0; r < rows.classes.size(); ++r) {
        const auto id = table.find(rows.classes[r]);
        if (!id) throw ParseError(path, r + 2, "class '" + rows.classes[r] + "' is not in the semantic table", 1);
        const bool want_seen = split == DatasetSplit::seen_train || split == DatasetSplit::seen_test;
        if ((table.split(*id) == Split::seen) != want_seen)
            throw ParseError(path, r + 2,
                             "class '" + rows.classes[r] + "' does not belong in a " + std::string(split_name(split)) +
                                 " set",
                             1);
        ds.labels.push_back(*id);
    }
    ds.features = std::move(rows.features);
    return ds;
}

// ---------------------------------------------------------------------------

std::string encode_feature_bank(const FeatureBank& bank) {
    const std::size_t per = bank.per_class();
    for (std::size_t r = 0; r < bank.labels.size(); ++r)
        if (bank.labels[r] != (per ? r / per : 0))
            throw std::invalid_argument("encode_feature_bank: rows must be grouped by class");
    std::string b = "SEEDSFB1";
    put_u64(b, bank.classes.size());
    put_u64(b, per);
    put_u64(b, bank.features.cols());
    for (double v : bank.features.data()) put_f64(b, v);
    for (const std::string& c : bank.classes) {
        put_u64(b, c.size());
        b += c;
    }
    return b;
}

FeatureBank decode_feature_bank(const std::string& bytes, const std::string& path) {
    Reader r(bytes, path);
    if (r.bytes(std::min<std::size_t>(8, bytes.size()), "magic") != "SEEDSFB1")
        throw std::runtime_error(path + ": not a feature bank (bad magic)");
    const std::uint64_t classes = r.u64("class count");
    const std::uint64_t per = r.u64("rows per class");
    const std::uint64_t d = r.u64("feature dim");
    if (classes && per && d && classes * per > (r.size() - r.pos()) / 8 / d)
        throw std::runtime_error(path + ": feature block exceeds the file size (truncated or corrupt)");
    FeatureBank bank;
    bank.features = Matrix(classes * per, d);
    for (double& v : bank.features.data()) v = r.f64("feature values");
    checked_count(r, classes, 8, "class");
    for (std::uint64_t k = 0; k < classes; ++k) {
        const std::uint64_t len = checked_count(r, r.u64("class id length"), 1, "class id byte");
        bank.classes.push_back(r.bytes(len, "class id"));
        bank.labels.insert(bank.labels.end(), per, k);
    }
    if (r.pos() != r.size()) throw std::runtime_error(path + ": trailing bytes after the class table");
    return bank;
}

void save_feature_bank(const std::string& path, const FeatureBank& bank) {
    write_atomic(path, encode_feature_bank(bank));
}

FeatureBank load_feature_bank(const std::string& path) { return decode_feature_bank(read_file(path), path); }

std::string format_bank_csv(const FeatureBank& bank) {
    std::string out = csv_header(bank.features.cols());
    for (std::size_t r = 0; r < bank.labels.size(); ++r) {
        out += bank.classes.at(bank.labels[r]);
        for (double v : bank.features.row(r)) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

FeatureBank parse_bank_csv(const std::string& text, const std::string& path) {
    CsvRows rows = parse_feature_csv(text, path);
    FeatureBank bank;
    std::unordered_map<std::string, std::size_t> idx;
    for (const std::string& c : rows.classes) {
        auto [it, fresh] = idx.emplace(c, bank.classes.size());
        if (fresh) bank.classes.push_back(c);
        bank.labels.push_back(it->second);
    }
    bank.features = std::move(rows.features);
    return bank;
}

// ---------------------------------------------------------------------------

void save_head(const std::string& path, const ClassifierHead& head) {
    std::string out = "class,bias";
    for (std::size_t j = 0; j < head.dim(); ++j) out += ",w" + std::to_string(j);
    out += "\n";
    for (std::size_t k = 0; k < head.class_count(); ++k) {
        out += head.classes[k] + "," + format_double(head.bias[k]);
        for (double v : head.weights.row(k)) out += "," + format_double(v);
        out += "\n";
    }
    write_atomic(path, out);
}

ClassifierHead load_head(const std::string& path) {
    const auto lines = lines_of(read_file(path));
    if (lines.empty()) throw ParseError(path, 1, "missing header \"class,bias,w0,...\"");
    const auto head = split_char(lines[0], ',');
    if (head.size() < 3 || head[0] != "class" || head[1] != "bias")
        throw ParseError(path, 1, "header must start with \"class,bias,w0\"");
    const std::size_t d = head.size() - 2;
    std::vector<std::string> names;
    std::vector<double> bias, w;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_char(lines[i], ',');
        if (f.size() != d + 2)
            throw ParseError(path, i + 1, "expected " + std::to_string(d + 2) + " fields, got " + std::to_string(f.size()));
        names.push_back(f[0]);
        for (std::size_t j = 1; j < f.size(); ++j) {
            double v;
            if (!parse_real(f[j], v)) throw ParseError(path, i + 1, "not a finite real: '" + f[j] + "'", j + 1);
            (j == 1 ? bias : w).push_back(v);
        }
    }
    ClassifierHead h(names, d);
    h.weights = Matrix(names.size(), d, std::move(w));
    h.bias = std::move(bias);
    return h;
}

void save_loss_curve(const std::string& path, const std::vector<LossRecord>& curve) {
    std::string out = "epoch,l_ang1,l_ang2,l_adv,l_r,l_total\n";
    for (const LossRecord& r : curve)
        out += std::to_string(r.epoch) + "," + format_double(r.ang1) + "," + format_double(r.ang2) + "," +
               format_double(r.adv) + "," + format_double(r.rec) + "," + format_double(r.total) + "\n";
    write_atomic(path, out);
}

// ---------------------------------------------------------------------------

const Entry* Checkpoint::find(const std::string& key) const {
    for (const auto& [k, e] : entries)
        if (k == key) return &e;
    return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::string data;
    std::string dir;
    for (const auto& [key, entry] : ckpt.entries) {
        put_u64(dir, key.size());
        dir += key;
        dir.push_back(static_cast<char>(entry.index()));
        const std::uint64_t offset = data.size();
        std::visit(
            [&](const auto& vec) {
                put_u64(dir, vec.size());
                put_u64(dir, offset);
                using T = typename std::decay_t<decltype(vec)>::value_type;
                for (const T& v : vec) {
                    if constexpr (std::is_same_v<T, double>)
                        put_f64(data, v);
                    else if constexpr (std::is_same_v<T, std::uint64_t>)
                        put_u64(data, v);
                    else {
                        put_u64(data, v.size());
                        data += v;
                    }
                }
            },
            entry);
    }
    std::string b = "SEEDSCP1";
    put_u32(b, ckpt.version);
    put_u64(b, ckpt.config.size());
    b += ckpt.config;
    put_u64(b, ckpt.entries.size());
    return b + dir + data;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& path) {
    Reader r(bytes, path);
    if (bytes.size() < 8 || bytes.compare(0, 8, "SEEDSCP1") != 0)
        throw std::runtime_error(path + ": not a checkpoint (bad magic)");
    r.seek(8);
    Checkpoint c;
    c.version = r.u32("format version");
    if (c.version != kCheckpointVersion)
        throw std::runtime_error(path + ": checkpoint format version " + std::to_string(c.version) +
                                 " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    c.config = r.bytes(checked_count(r, r.u64("config length"), 1, "config byte"), "config snapshot");
    const std::uint64_t n = checked_count(r, r.u64("entry count"), 25, "entry");

    struct Dir {
        std::string key;
        std::uint8_t kind;
        std::uint64_t count, offset;
    };
    std::vector<Dir> dir;
    for (std::uint64_t i = 0; i < n; ++i) {
        Dir d;
        d.key = r.bytes(checked_count(r, r.u64("key length"), 1, "key byte"), "key");
        d.kind = r.u8("entry kind");
        if (d.kind > 2) throw std::runtime_error(path + ": entry '" + d.key + "' has unknown kind");
        d.count = r.u64("entry count");
        d.offset = r.u64("entry offset");
        dir.push_back(std::move(d));
    }
    const std::size_t base = r.pos();
    std::size_t end = base;
    std::set<std::string> keys;
    for (const Dir& d : dir) {
        if (!keys.insert(d.key).second) throw std::runtime_error(path + ": duplicate entry '" + d.key + "'");
        if (d.offset > r.size() - base) throw std::runtime_error(path + ": entry '" + d.key + "' offset out of range");
        r.seek(base + d.offset);
        if (d.kind == 0) {
            std::vector<double> v(checked_count(r, d.count, 8, d.key.c_str()));
            for (double& x : v) x = r.f64(d.key.c_str());
            c.entries.emplace_back(d.key, std::move(v));
        } else if (d.kind == 1) {
            std::vector<std::uint64_t> v(checked_count(r, d.count, 8, d.key.c_str()));
            for (auto& x : v) x = r.u64(d.key.c_str());
            c.entries.emplace_back(d.key, std::move(v));
        } else {
            std::vector<std::string> v;
            checked_count(r, d.count, 8, d.key.c_str());
            for (std::uint64_t k = 0; k < d.count; ++k)
                v.push_back(r.bytes(checked_count(r, r.u64(d.key.c_str()), 1, d.key.c_str()), d.key.c_str()));
            c.entries.emplace_back(d.key, std::move(v));
        }
        end = std::max(end, r.pos());
    }
    if (end != r.size()) throw std::runtime_error(path + ": trailing bytes after the data section");
    return c;
}

namespace {

struct OptGroup {
    const char* name;
    Adam* opt;
    ParamList params;
};

std::vector<OptGroup> groups(SynthesizerState& st) {
    return {{"branches", &st.opt_branches, st.branch_params()},
            {"masks", &st.opt_masks, st.mask_params()},
            {"generator", &st.opt_generator, st.generator_params()},
            {"critic", &st.opt_critic, st.critic_params()},
            {"denoiser", &st.opt_denoiser, st.denoiser_params()}};
}

template <class T>
const std::vector<T>& get(const Checkpoint& c, const std::string& key) {
    const Entry* e = c.find(key);
    if (!e) throw std::runtime_error("checkpoint: missing entry '" + key + "'");
    const auto* v = std::get_if<std::vector<T>>(e);
    if (!v) throw std::runtime_error("checkpoint: entry '" + key + "' has the wrong kind");
    return *v;
}

void copy_sized(const std::vector<double>& src, std::vector<double>& dst, const std::string& key) {
    if (src.size() != dst.size())
        throw std::runtime_error("checkpoint: entry '" + key + "' has " + std::to_string(src.size()) +
                                 " values, model expects " + std::to_string(dst.size()));
    dst = src;
}

}  // namespace

Checkpoint capture(SynthesizerState& st, const std::string& config_snapshot) {
    Checkpoint c;
    c.config = config_snapshot;
    c.entries.emplace_back("seen_head.classes", st.seen_head.classes);
    for (const ParamRef& p : st.all_params()) c.entries.emplace_back("param." + p.name, *p.value);
    for (OptGroup& g : groups(st)) {
        const std::string pre = std::string("adam.") + g.name;
        c.entries.emplace_back(pre + ".steps", std::vector<std::uint64_t>{g.opt->step_count()});
        for (std::size_t i = 0; i < g.params.size(); ++i) {
            c.entries.emplace_back(pre + ".m." + g.params[i].name, g.opt->first_moments().at(i));
            c.entries.emplace_back(pre + ".v." + g.params[i].name, g.opt->second_moments().at(i));
        }
    }
    c.entries.emplace_back("rng", std::vector<std::uint64_t>{st.rng.seed(), st.rng.position()});
    c.entries.emplace_back("epoch", std::vector<std::uint64_t>{st.epoch});
    std::vector<double> curve;
    for (const LossRecord& r : st.curve)
        curve.insert(curve.end(), {static_cast<double>(r.epoch), r.ang1, r.ang2, r.adv, r.rec, r.total});
    c.entries.emplace_back("curve", std::move(curve));
    return c;
}

void restore(const Checkpoint& c, SynthesizerState& st) {
    if (get<std::string>(c, "seen_head.classes") != st.seen_head.classes)
        throw std::runtime_error("checkpoint: seen classifier classes differ from the active semantic table");
    for (const ParamRef& p : st.all_params()) copy_sized(get<double>(c, "param." + p.name), *p.value, "param." + p.name);
    for (OptGroup& g : groups(st)) {
        const std::string pre = std::string("adam.") + g.name;
        const auto& steps = get<std::uint64_t>(c, pre + ".steps");
        if (steps.size() != 1) throw std::runtime_error("checkpoint: malformed '" + pre + ".steps'");
        g.opt->mutable_step_count() = steps[0];
        for (std::size_t i = 0; i < g.params.size(); ++i) {
            const std::string m = pre + ".m." + g.params[i].name, v = pre + ".v." + g.params[i].name;
            copy_sized(get<double>(c, m), g.opt->first_moments().at(i), m);
            copy_sized(get<double>(c, v), g.opt->second_moments().at(i), v);
        }
    }
    const auto& rng = get<std::uint64_t>(c, "rng");
    const auto& epoch = get<std::uint64_t>(c, "epoch");
    const auto& curve = get<double>(c, "curve");
    if (rng.size() != 2 || epoch.size() != 1 || curve.size() % 6)
        throw std::runtime_error("checkpoint: malformed rng/epoch/curve entries");
    st.rng = RngStream(rng[0], rng[1]);
    st.epoch = epoch[0];
    st.curve.clear();
    for (std::size_t i = 0; i < curve.size(); i += 6)
        st.curve.push_back({static_cast<std::size_t>(curve[i]), curve[i + 1], curve[i + 2], curve[i + 3], curve[i + 4],
                            curve[i + 5]});
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_atomic(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

}  // namespace seeds::io
