#include "ncdsvm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "ncdsvm/util.hpp"

namespace ncdsvm::corpus {

namespace fs = std::filesystem;

std::array<std::size_t, 2> Corpus::class_counts() const {
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& r : records) ++counts[label_index(r.label)];
    return counts;
}

bool Corpus::balanced() const {
    auto c = class_counts();
    return c[0] == c[1];
}

std::optional<DatasetFormat> parse_format(std::string_view id) {
    if (id == "csic-http") return DatasetFormat::csic_http;
    if (id == "sms-tsv") return DatasetFormat::sms_tsv;
    if (id == "dga-list") return DatasetFormat::dga_list;
    if (id == "sentiment140-csv") return DatasetFormat::sentiment140_csv;
    if (id == "imdb-dirs") return DatasetFormat::imdb_dirs;
    if (id == "generic-labeled-lines") return DatasetFormat::generic_labeled_lines;
    return std::nullopt;
}

std::string_view format_id(DatasetFormat f) {
    switch (f) {
        case DatasetFormat::csic_http: return "csic-http";
        case DatasetFormat::sms_tsv: return "sms-tsv";
        case DatasetFormat::dga_list: return "dga-list";
        case DatasetFormat::sentiment140_csv: return "sentiment140-csv";
        case DatasetFormat::imdb_dirs: return "imdb-dirs";
        case DatasetFormat::generic_labeled_lines: return "generic-labeled-lines";
    }
    return "?";
}

static std::string load_error_message(const fs::path& path, std::size_t line,
                                      const std::string& what) {
    std::string m = path.string();
    if (line > 0) {
        m += ':';
        m += std::to_string(line);
    }
    m += ": ";
    m += what;
    return m;
}

LoadError::LoadError(const fs::path& p, std::size_t l, const std::string& what)
    : std::runtime_error(load_error_message(p, l, what)), path(p), line(l) {}

LoadError::LoadError(const fs::path& p, const std::string& what)
    : LoadError(p, 0, what) {}

namespace {

std::ostream& warn_stream(const LoadOptions& opts) {
    return opts.warnings ? *opts.warnings : std::cerr;
}

// Reports a bad record: throws in strict mode, otherwise logs and lets the
// caller skip it.
void malformed(const LoadOptions& opts, const fs::path& path, std::size_t line,
               const std::string& what) {
    if (opts.strict) throw LoadError(path, line, what);
    warn_stream(opts) << "warning: " << load_error_message(path, line, what)
                      << " (record skipped)\n";
}

// Calls fn(line_number, line) for each newline-delimited line; a trailing
// '\r' (CRLF input) is stripped.
template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        std::string_view line = content.substr(pos, nl == std::string_view::npos
                                                         ? std::string_view::npos
                                                         : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(++lineno, line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string read_input_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) throw LoadError(path, "cannot open file");
    try {
        return util::read_file(path);
    } catch (const std::exception& e) {
        throw LoadError(path, e.what());
    }
}

// Regular files directly inside dir, sorted by name for deterministic
// record order.
std::vector<fs::path> sorted_files_in(const fs::path& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        if (it->is_regular_file(ec)) files.push_back(it->path());
    }
    if (ec) throw LoadError(dir, "cannot list directory: " + ec.message());
    std::sort(files.begin(), files.end());
    return files;
}

bool is_http_request_line(std::string_view line) {
    static constexpr std::string_view methods[] = {
        "GET ", "POST ", "PUT ", "HEAD ", "DELETE ", "OPTIONS ", "TRACE ", "CONNECT ", "PATCH "};
    if (line.find(" HTTP/") == std::string_view::npos) return false;
    for (std::string_view m : methods)
        if (line.substr(0, m.size()) == m) return true;
    return false;
}

// Extracts the message body of every POST request in a raw HTTP request
// dump (requests separated by blank lines). Only the urlencoded payload is
// kept — the request line and headers carry no per-record signal here.
void parse_csic_file(const fs::path& path, Label label, const LoadOptions& opts,
                     std::vector<TextRecord>& out) {
    std::string content = read_input_file(path);
    enum class St { outside, headers, body };
    St st = St::outside;
    bool cur_is_post = false;
    std::string cur_body;
    auto flush = [&] {
        if (cur_is_post && !cur_body.empty()) out.push_back({std::move(cur_body), label});
        cur_body.clear();
        cur_is_post = false;
    };
    for_each_line(content, [&](std::size_t lineno, std::string_view line) {
        if (is_http_request_line(line)) {
            flush();
            cur_is_post = line.substr(0, 5) == "POST ";
            st = St::headers;
        } else if (line.empty()) {
            if (st == St::headers) st = St::body;
            // blank lines outside headers just separate requests
        } else if (st == St::headers) {
            // header line; not needed
        } else if (st == St::body) {
            if (cur_is_post) {
                if (!cur_body.empty()) cur_body += '\n';
                cur_body += line;
            }
            // body content of non-POST requests is ignored
        } else {
            malformed(opts, path, lineno, "content outside any HTTP request");
        }
    });
    flush();
}

void parse_domain_file(const fs::path& path, Label label, std::vector<TextRecord>& out) {
    std::string content = read_input_file(path);
    for_each_line(content, [&](std::size_t, std::string_view line) {
        if (line.empty() || line.front() == '#') return;
        std::size_t tab = line.find('\t');
        std::string_view domain = tab == std::string_view::npos ? line : line.substr(0, tab);
        if (!domain.empty()) out.push_back({std::string(domain), label});
    });
}

// Classifies a two-sided dataset file by its name. Returns nullopt for
// files that belong to neither side (they are skipped).
std::optional<Label> label_from_name(const fs::path& file, std::string_view a_hint1,
                                     std::string_view a_hint2, std::string_view b_hint,
                                     const LoadOptions& opts) {
    std::string name = lower(file.filename().string());
    bool is_a = name.find(a_hint1) != std::string::npos ||
                (!a_hint2.empty() && name.find(a_hint2) != std::string::npos);
    bool is_b = name.find(b_hint) != std::string::npos;
    if (is_a && is_b) {
        malformed(opts, file, 0, "ambiguous file name (matches both classes); file skipped");
        return std::nullopt;
    }
    if (is_a) return Label::class_a;
    if (is_b) return Label::class_b;
    return std::nullopt;
}

Corpus load_csic(const fs::path& path, const LoadOptions& opts) {
    Corpus c;
    c.class_names = {"normal", "anomalous"};
    std::vector<fs::path> files =
        fs::is_directory(path) ? sorted_files_in(path) : std::vector<fs::path>{path};
    for (const fs::path& f : files) {
        // "anomalous" deliberately matched by its stem so both common
        // spellings (anomalous/anomalic dumps) land on class B.
        if (auto label = label_from_name(f, "normal", "", "anomal", opts))
            parse_csic_file(f, *label, opts, c.records);
    }
    return c;
}

Corpus load_dga(const fs::path& path, const LoadOptions& opts) {
    Corpus c;
    c.class_names = {"legit", "dga"};
    std::vector<fs::path> files =
        fs::is_directory(path) ? sorted_files_in(path) : std::vector<fs::path>{path};
    for (const fs::path& f : files) {
        if (auto label = label_from_name(f, "legit", "normal", "dga", opts))
            parse_domain_file(f, *label, c.records);
    }
    return c;
}

Corpus load_sms(const fs::path& path, const LoadOptions& opts) {
    Corpus c;
    c.class_names = {"ham", "spam"};
    std::string content = read_input_file(path);
    for_each_line(content, [&](std::size_t lineno, std::string_view line) {
        if (line.empty()) return;
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            malformed(opts, path, lineno, "expected label<TAB>text");
            return;
        }
        std::string_view label = line.substr(0, tab);
        std::string_view text = line.substr(tab + 1);
        Label l;
        if (label == "ham") l = Label::class_a;
        else if (label == "spam") l = Label::class_b;
        else {
            malformed(opts, path, lineno, "unknown label '" + std::string(label) + "'");
            return;
        }
        if (!text.empty()) c.records.push_back({std::string(text), l});
    });
    return c;
}

// Minimal RFC-4180 reader: quoted fields may contain commas, doubled
// quotes and newlines. Returns one row per call; fields appended to `row`.
struct CsvReader {
    std::string_view content;
    std::size_t pos = 0;
    std::size_t line = 1;

    // Returns the 1-based line the row started on, or 0 at end of input.
    std::size_t next_row(std::vector<std::string>& row, bool& bad_quote) {
        row.clear();
        bad_quote = false;
        // skip blank lines between records
        while (pos < content.size() && (content[pos] == '\n' || content[pos] == '\r')) {
            if (content[pos] == '\n') ++line;
            ++pos;
        }
        if (pos >= content.size()) return 0;
        std::size_t start_line = line;
        std::string field;
        bool in_quotes = false;
        while (pos < content.size()) {
            char ch = content[pos];
            if (in_quotes) {
                if (ch == '"') {
                    if (pos + 1 < content.size() && content[pos + 1] == '"') {
                        field += '"';
                        pos += 2;
                    } else {
                        in_quotes = false;
                        ++pos;
                    }
                } else {
                    if (ch == '\n') ++line;
                    field += ch;
                    ++pos;
                }
                continue;
            }
            if (ch == '"') {
                in_quotes = true;
                ++pos;
            } else if (ch == ',') {
                row.push_back(std::move(field));
                field.clear();
                ++pos;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && pos + 1 < content.size() && content[pos + 1] == '\n') ++pos;
                ++line;
                ++pos;
                break;
            } else {
                field += ch;
                ++pos;
            }
        }
        if (in_quotes) bad_quote = true;
        row.push_back(std::move(field));
        return start_line;
    }
};

Corpus load_sentiment140(const fs::path& path, const LoadOptions& opts) {
    Corpus c;
    c.class_names = {"positive", "negative"};
    std::string content = read_input_file(path);
    CsvReader reader{content};
    std::vector<std::string> row;
    bool bad_quote = false;
    while (std::size_t lineno = reader.next_row(row, bad_quote)) {
        if (bad_quote) {
            malformed(opts, path, lineno, "unterminated quoted field");
            continue;
        }
        if (row.size() < 6) {
            malformed(opts, path, lineno,
                      "expected 6 columns, got " + std::to_string(row.size()));
            continue;
        }
        Label l;
        if (row[0] == "0") l = Label::class_b;       // negative
        else if (row[0] == "4") l = Label::class_a;  // positive
        else {
            malformed(opts, path, lineno, "polarity '" + row[0] + "' is not 0 or 4");
            continue;
        }
        if (!row[5].empty()) c.records.push_back({row[5], l});
    }
    return c;
}

Corpus load_imdb(const fs::path& path, const LoadOptions& opts) {
    Corpus c;
    c.class_names = {"pos", "neg"};
    if (!fs::is_directory(path)) throw LoadError(path, "expected a directory tree");
    struct Entry {
        std::string rel;
        fs::path file;
        Label label;
    };
    std::vector<Entry> entries;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(path, ec), end; !ec && it != end;
         it.increment(ec)) {
        if (!it->is_regular_file(ec)) continue;
        fs::path rel = fs::relative(it->path(), path, ec);
        if (ec) continue;
        std::optional<Label> label;
        for (const auto& part : rel) {
            if (part == "pos") label = Label::class_a;
            else if (part == "neg") label = Label::class_b;
        }
        if (label) entries.push_back({rel.generic_string(), it->path(), *label});
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.rel < b.rel; });
    for (const Entry& e : entries) {
        std::string text;
        try {
            text = util::read_file(e.file);
        } catch (const std::exception& ex) {
            malformed(opts, e.file, 0, ex.what());
            continue;
        }
        if (!text.empty()) c.records.push_back({std::move(text), e.label});
    }
    return c;
}

Corpus load_generic(const fs::path& path, const LoadOptions& opts) {
    std::string content = read_input_file(path);
    std::vector<std::pair<std::string, std::string>> rows;  // (label, text)
    std::vector<std::string> labels;                        // distinct, in file order
    for_each_line(content, [&](std::size_t lineno, std::string_view line) {
        if (line.empty()) return;
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            malformed(opts, path, lineno, "expected label<TAB>text");
            return;
        }
        std::string label(line.substr(0, tab));
        std::string_view text = line.substr(tab + 1);
        if (label.empty()) {
            malformed(opts, path, lineno, "empty label");
            return;
        }
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
            labels.push_back(label);
            if (labels.size() > 2)
                throw LoadError(path, lineno,
                                "more than two distinct labels ('" + labels[0] + "', '" +
                                    labels[1] + "', '" + labels[2] + "', ...)");
        }
        if (!text.empty()) rows.emplace_back(std::move(label), std::string(text));
    });
    // Deterministic mapping: the lexicographically smaller label is class A.
    std::sort(labels.begin(), labels.end());
    Corpus c;
    if (!labels.empty()) c.class_names[0] = labels[0];
    if (labels.size() > 1) c.class_names[1] = labels[1];
    for (auto& [label, text] : rows) {
        Label l = (label == labels[0]) ? Label::class_a : Label::class_b;
        c.records.push_back({std::move(text), l});
    }
    return c;
}

}  // namespace

Corpus load_dataset(const fs::path& path, DatasetFormat format, const LoadOptions& opts) {
    Corpus c;
    switch (format) {
        case DatasetFormat::csic_http: c = load_csic(path, opts); break;
        case DatasetFormat::sms_tsv: c = load_sms(path, opts); break;
        case DatasetFormat::dga_list: c = load_dga(path, opts); break;
        case DatasetFormat::sentiment140_csv: c = load_sentiment140(path, opts); break;
        case DatasetFormat::imdb_dirs: c = load_imdb(path, opts); break;
        case DatasetFormat::generic_labeled_lines: c = load_generic(path, opts); break;
    }
    if (c.records.empty()) throw LoadError(path, "empty corpus: no usable records");
    c.dataset_id = std::string(format_id(format));
    return c;
}

namespace {

// Shared core of the duplicate transforms. Texts seen under both labels
// are always removed; within-label repeats are collapsed when requested.
Corpus filter_duplicates(const Corpus& c, bool collapse_within_label) {
    std::unordered_map<std::string_view, std::array<bool, 2>> seen;
    seen.reserve(c.records.size() * 2);
    for (const auto& r : c.records) seen[r.text][label_index(r.label)] = true;
    std::unordered_set<std::string_view> emitted;
    Corpus out;
    out.dataset_id = c.dataset_id;
    out.class_names = c.class_names;
    for (const auto& r : c.records) {
        const auto& flags = seen.find(r.text)->second;
        if (flags[0] && flags[1]) continue;
        if (collapse_within_label && !emitted.insert(r.text).second) continue;
        out.records.push_back(r);
    }
    return out;
}

}  // namespace

Corpus deduplicate(const Corpus& c) { return filter_duplicates(c, true); }

Corpus remove_cross_label_conflicts(const Corpus& c) { return filter_duplicates(c, false); }

namespace {

// Keeps the records whose positions are marked; order preserved.
Corpus select_records(const Corpus& c, const std::vector<char>& keep) {
    Corpus out;
    out.dataset_id = c.dataset_id;
    out.class_names = c.class_names;
    for (std::size_t i = 0; i < c.records.size(); ++i)
        if (keep[i]) out.records.push_back(c.records[i]);
    return out;
}

}  // namespace

Corpus balance(const Corpus& c, std::uint64_t seed) {
    auto counts = c.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::invalid_argument("balance: both classes must be present (counts " +
                                    std::to_string(counts[0]) + "/" +
                                    std::to_string(counts[1]) + ")");
    if (counts[0] == counts[1]) return c;
    Label majority = counts[0] > counts[1] ? Label::class_a : Label::class_b;
    std::size_t target = std::min(counts[0], counts[1]);
    std::vector<std::uint32_t> majority_positions;
    for (std::size_t i = 0; i < c.records.size(); ++i)
        if (c.records[i].label == majority)
            majority_positions.push_back(static_cast<std::uint32_t>(i));
    util::Rng rng(seed);
    rng.shuffle(majority_positions);
    std::vector<char> keep(c.records.size(), 1);
    for (std::size_t i = target; i < majority_positions.size(); ++i)
        keep[majority_positions[i]] = 0;
    return select_records(c, keep);
}

Corpus subsample_per_class(const Corpus& c, std::size_t n_per_class, std::uint64_t seed) {
    util::Rng rng(seed);
    std::vector<char> keep(c.records.size(), 1);
    for (Label label : {Label::class_a, Label::class_b}) {
        std::vector<std::uint32_t> positions;
        for (std::size_t i = 0; i < c.records.size(); ++i)
            if (c.records[i].label == label) positions.push_back(static_cast<std::uint32_t>(i));
        if (positions.size() <= n_per_class) continue;
        rng.shuffle(positions);
        for (std::size_t i = n_per_class; i < positions.size(); ++i) keep[positions[i]] = 0;
    }
    return select_records(c, keep);
}

SplitIndices split_gi_indices(std::span<const Label> labels, std::size_t i_per_class,
                              std::uint64_t seed) {
    std::array<std::vector<std::uint32_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[label_index(labels[i])].push_back(static_cast<std::uint32_t>(i));
    if (by_class[0].size() != by_class[1].size())
        throw std::invalid_argument("split requires a balanced corpus (counts " +
                                    std::to_string(by_class[0].size()) + "/" +
                                    std::to_string(by_class[1].size()) + ")");
    if (i_per_class > by_class[0].size())
        throw std::invalid_argument("i_per_class " + std::to_string(i_per_class) +
                                    " exceeds per-class count " +
                                    std::to_string(by_class[0].size()));
    util::Rng rng(seed);
    SplitIndices out;
    for (auto& positions : by_class) {
        rng.shuffle(positions);
        out.i_indices.insert(out.i_indices.end(), positions.begin(),
                             positions.begin() + static_cast<std::ptrdiff_t>(i_per_class));
        out.g_indices.insert(out.g_indices.end(),
                             positions.begin() + static_cast<std::ptrdiff_t>(i_per_class),
                             positions.end());
    }
    std::sort(out.i_indices.begin(), out.i_indices.end());
    std::sort(out.g_indices.begin(), out.g_indices.end());
    return out;
}

Partition split_gi(const Corpus& c, std::size_t i_per_class, std::uint64_t seed) {
    std::vector<Label> labels;
    labels.reserve(c.records.size());
    for (const auto& r : c.records) labels.push_back(r.label);
    SplitIndices idx = split_gi_indices(labels, i_per_class, seed);
    Partition p;
    p.seed = seed;
    p.i_set.reserve(idx.i_indices.size());
    p.g_set.reserve(idx.g_indices.size());
    for (std::uint32_t i : idx.i_indices) p.i_set.push_back(c.records[i]);
    for (std::uint32_t i : idx.g_indices) p.g_set.push_back(c.records[i]);
    return p;
}

LengthStats length_stats(const Corpus& c) {
    if (c.records.empty()) throw std::invalid_argument("length_stats: empty corpus");
    std::array<std::vector<std::size_t>, 2> lengths;
    for (const auto& r : c.records) lengths[label_index(r.label)].push_back(r.text.size());
    LengthStats stats;
    for (std::size_t cls = 0; cls < 2; ++cls) {
        auto& v = lengths[cls];
        auto& s = stats.per_class[cls];
        s.count = v.size();
        if (v.empty()) continue;
        std::uint64_t sum = 0;
        for (std::size_t len : v) sum += len;
        s.mean = static_cast<double>(sum) / static_cast<double>(v.size());
        std::sort(v.begin(), v.end());
        std::size_t mid = v.size() / 2;
        s.median = v.size() % 2 ? static_cast<double>(v[mid])
                                : (static_cast<double>(v[mid - 1]) + static_cast<double>(v[mid])) / 2.0;
    }
    return stats;
}

Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
    for (const SynthClassSpec* cls : {&spec.class_a, &spec.class_b}) {
        if (cls->count == 0) throw std::invalid_argument("synth: class count must be > 0");
        if (cls->alphabet.empty()) throw std::invalid_argument("synth: alphabet must be non-empty");
        if (cls->min_len == 0 || cls->min_len > cls->max_len)
            throw std::invalid_argument("synth: need 1 <= min_len <= max_len");
    }
    if (spec.class_a.alphabet == spec.class_b.alphabet)
        std::cerr << "warning: synth classes share one alphabet; classes will be "
                     "indistinguishable\n";
    util::Rng rng(seed);
    Corpus c;
    c.dataset_id = "synth";
    c.class_names = {"synth-a", "synth-b"};
    auto emit = [&](const SynthClassSpec& cls, Label label) {
        for (std::size_t i = 0; i < cls.count; ++i) {
            std::size_t len = cls.min_len + static_cast<std::size_t>(
                                                rng.below(cls.max_len - cls.min_len + 1));
            std::string text(len, '\0');
            for (char& ch : text) ch = cls.alphabet[rng.below(cls.alphabet.size())];
            c.records.push_back({std::move(text), label});
        }
    };
    emit(spec.class_a, Label::class_a);
    emit(spec.class_b, Label::class_b);
    return c;
}

void save_cache(const Corpus& c, const fs::path& path) {
    std::string out;
    for (const auto& r : c.records) {
        out += label_char(r.label);
        out += '\t';
        out += util::base64_encode(r.text);
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

Corpus load_cache(const fs::path& path, const LoadOptions& opts) {
    std::string content = read_input_file(path);
    Corpus c;
    for_each_line(content, [&](std::size_t lineno, std::string_view line) {
        if (line.empty()) return;
        if (line.size() < 2 || (line[0] != 'A' && line[0] != 'B') || line[1] != '\t') {
            malformed(opts, path, lineno, "expected A|B<TAB>base64");
            return;
        }
        auto text = util::base64_decode(line.substr(2));
        if (!text) {
            malformed(opts, path, lineno, "invalid base64 payload");
            return;
        }
        if (!text->empty())
            c.records.push_back({std::move(*text),
                                 line[0] == 'A' ? Label::class_a : Label::class_b});
    });
    if (c.records.empty()) throw LoadError(path, "empty corpus: no usable records");
    c.dataset_id = path.stem().string();
    return c;
}

}  // namespace ncdsvm::corpus
