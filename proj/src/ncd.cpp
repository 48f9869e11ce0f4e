#include "ncdsvm/ncd.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <memory>
#include <stdexcept>

#include "ncdsvm/util.hpp"

namespace ncdsvm::ncd {

namespace fs = std::filesystem;
using corpus::Label;

GeneratorSet build_generators(std::span<const corpus::TextRecord> g_set, std::size_t k,
                              std::uint64_t seed, std::optional<std::uint64_t> size_cap,
                              const compress::CompressorConfig& cfg) {
    if (k < 2 || k % 2 != 0)
        throw std::invalid_argument("generator count k must be even and >= 2, got " +
                                    std::to_string(k));
    std::array<std::vector<std::uint32_t>, 2> by_class;
    for (std::size_t i = 0; i < g_set.size(); ++i) {
        if (size_cap && g_set[i].text.size() > *size_cap)
            throw std::invalid_argument("generator size cap " + std::to_string(*size_cap) +
                                        " is smaller than record " + std::to_string(i) + " (" +
                                        std::to_string(g_set[i].text.size()) + " bytes)");
        by_class[corpus::label_index(g_set[i].label)].push_back(static_cast<std::uint32_t>(i));
    }
    if (by_class[0].size() != by_class[1].size())
        throw std::invalid_argument("generator input must be balanced (counts " +
                                    std::to_string(by_class[0].size()) + "/" +
                                    std::to_string(by_class[1].size()) + ")");
    std::size_t per_class = k / 2;
    if (by_class[0].size() < per_class)
        throw std::invalid_argument("need at least k/2 = " + std::to_string(per_class) +
                                    " records per class, got " +
                                    std::to_string(by_class[0].size()));
    compress::make_compressor(cfg);  // validate the config up front

    GeneratorSet set;
    set.cfg = cfg;
    set.seed = seed;
    set.size_cap = size_cap.value_or(0);
    util::Rng rng(seed);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        auto& positions = by_class[cls];
        rng.shuffle(positions);
        std::vector<std::string> bytes(per_class);
        std::vector<std::uint32_t> members(per_class, 0);
        // Rotation over the generators still accepting records; one that
        // cannot take an offered record without busting the cap is closed
        // for good and the record cascades to the next open one.
        std::vector<std::size_t> open(per_class);
        for (std::size_t g = 0; g < per_class; ++g) open[g] = g;
        std::size_t cursor = 0;
        for (std::uint32_t rec : positions) {
            const std::string& text = g_set[rec].text;
            bool placed = false;
            while (!open.empty()) {
                std::size_t pos = cursor % open.size();
                std::size_t g = open[pos];
                std::uint64_t grown = bytes[g].size() + text.size() +
                                      (bytes[g].empty() ? 0 : cfg.record_separator.size());
                if (!size_cap || grown <= *size_cap) {
                    if (!bytes[g].empty()) bytes[g] += cfg.record_separator;
                    bytes[g] += text;
                    ++members[g];
                    cursor = pos + 1;
                    placed = true;
                    break;
                }
                open.erase(open.begin() + static_cast<std::ptrdiff_t>(pos));
                cursor = pos;  // the next open generator shifted into this slot
            }
            if (!placed) ++set.unused_records;
        }
        Label label = cls == 0 ? Label::class_a : Label::class_b;
        for (std::size_t g = 0; g < per_class; ++g)
            set.generators.push_back({std::move(bytes[g]), label, members[g]});
    }
    set.cached_sizes.reserve(k);
    for (const auto& gen : set.generators)
        set.cached_sizes.push_back(compress::compressed_size(gen.bytes, cfg));
    return set;
}

double ncd_distance(const GeneratorEntry& g, std::string_view s_text,
                    const compress::CompressorConfig& cfg, std::uint64_t cached_g_size,
                    compress::SizeCache* cache) {
    if (s_text.empty()) throw std::invalid_argument("ncd_distance: record text is empty");
    std::string_view chunks[] = {g.bytes, cfg.record_separator, s_text};
    std::uint64_t c_gs = compress::make_compressor(cfg)->size_of_chunks(chunks);
    std::int64_t cond =
        static_cast<std::int64_t>(c_gs) - static_cast<std::int64_t>(cached_g_size);
    std::uint64_t c_s = compress::cached_size(s_text, cfg, cache);
    return static_cast<double>(cond) / static_cast<double>(c_s);
}

double ncd_distance(const GeneratorEntry& g, std::string_view s_text,
                    const compress::CompressorConfig& cfg, compress::SizeCache* cache) {
    return ncd_distance(g, s_text, cfg, compress::cached_size(g.bytes, cfg, cache), cache);
}

namespace {

void check_well_formed(const GeneratorSet& gens) {
    std::size_t k = gens.generators.size();
    if (k < 2 || k % 2 != 0 || gens.cached_sizes.size() != k)
        throw std::invalid_argument("generator set is malformed (k=" + std::to_string(k) +
                                    ", cached sizes=" + std::to_string(gens.cached_sizes.size()) +
                                    ")");
}

}  // namespace

AttributeMatrix featurize(std::span<const corpus::TextRecord> records, const GeneratorSet& gens,
                          int workers) {
    check_well_formed(gens);
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].text.empty())
            throw std::invalid_argument("featurize: record at index " + std::to_string(i) +
                                        " has empty text");
    AttributeMatrix m;
    m.rows = records.size();
    m.cols = gens.k();
    m.values.assign(m.rows * m.cols, 0.0);
    m.row_labels.reserve(m.rows);
    for (const auto& r : records) m.row_labels.push_back(r.label);
    m.column_labels.reserve(m.cols);
    for (const auto& g : gens.generators) m.column_labels.push_back(g.label);
    if (m.rows == 0) return m;

    auto comp = compress::make_compressor(gens.cfg);
    std::vector<std::unique_ptr<compress::PrimedPrefix>> primed;
    primed.reserve(m.cols);
    for (const auto& g : gens.generators) {
        std::string_view prefix[] = {g.bytes, gens.cfg.record_separator};
        primed.push_back(comp->prime(prefix));
    }
    compress::SizeCache record_sizes;  // repeated texts share one C(s)
    std::atomic<std::size_t> non_positive{0};
    util::parallel_for(m.rows, workers, [&](std::size_t i) {
        const std::string& text = records[i].text;
        auto c_s = static_cast<double>(compress::cached_size(text, gens.cfg, &record_sizes));
        for (std::size_t j = 0; j < m.cols; ++j) {
            std::int64_t cond = static_cast<std::int64_t>(primed[j]->size_with(text)) -
                                static_cast<std::int64_t>(gens.cached_sizes[j]);
            double v = static_cast<double>(cond) / c_s;
            if (v <= 0.0) non_positive.fetch_add(1, std::memory_order_relaxed);
            m.values[i * m.cols + j] = v;
        }
    });
    m.non_positive_count = non_positive.load();
    if (m.non_positive_count > 0)
        std::cerr << "warning: featurize: " << m.non_positive_count
                  << " non-positive attribute value(s) (container overhead on short records); "
                     "values kept as computed\n";
    return m;
}

void save_generator_set(const GeneratorSet& gens, const fs::path& dir) {
    check_well_formed(gens);
    fs::create_directories(dir);
    std::string manifest;
    manifest += "format_version = 1\n";
    manifest += "k = " + std::to_string(gens.k()) + "\n";
    manifest += "seed = " + std::to_string(gens.seed) + "\n";
    manifest += "size_cap = " + std::to_string(gens.size_cap) + "\n";
    manifest += "unused_records = " + std::to_string(gens.unused_records) + "\n";
    manifest += "algorithm = " + gens.cfg.algorithm + "\n";
    manifest += "level = " + std::to_string(gens.cfg.level) + "\n";
    manifest += "record_separator = " + util::escape_bytes(gens.cfg.record_separator) + "\n";
    std::array<std::size_t, 2> index_in_class{0, 0};
    for (std::size_t j = 0; j < gens.k(); ++j) {
        const auto& g = gens.generators[j];
        std::size_t idx = index_in_class[corpus::label_index(g.label)]++;
        std::string name = std::string("gen_") + corpus::label_char(g.label) + "_" +
                           std::to_string(idx) + ".bin";
        manifest += std::string("gen = ") + corpus::label_char(g.label) + " " +
                    std::to_string(idx) + " " + std::to_string(g.member_count) + " " +
                    std::to_string(gens.cached_sizes[j]) + "\n";
        util::atomic_write_file(dir / name, g.bytes);
    }
    util::atomic_write_file(dir / "manifest.txt", manifest);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void manifest_error(const fs::path& dir, const std::string& what) {
    throw std::runtime_error("generator set at " + dir.string() + ": " + what);
}

std::uint64_t need_u64(const fs::path& dir, const std::map<std::string, std::string>& kv,
                       const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) manifest_error(dir, "manifest is missing '" + key + "'");
    auto v = util::parse_u64(it->second);
    if (!v) manifest_error(dir, "manifest value for '" + key + "' is not a number");
    return *v;
}

}  // namespace

GeneratorSet load_generator_set(const fs::path& dir) {
    std::string manifest;
    try {
        manifest = util::read_file(dir / "manifest.txt");
    } catch (const std::exception& e) {
        manifest_error(dir, e.what());
    }
    std::map<std::string, std::string> kv;
    struct GenLine {
        char cls;
        std::uint64_t index, members, size;
    };
    std::vector<GenLine> gen_lines;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= manifest.size()) {
        std::size_t nl = manifest.find('\n', pos);
        std::string_view line(manifest.data() + pos,
                              (nl == std::string::npos ? manifest.size() : nl) - pos);
        pos = (nl == std::string::npos) ? manifest.size() + 1 : nl + 1;
        ++lineno;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            manifest_error(dir, "manifest line " + std::to_string(lineno) + " has no '='");
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key == "gen") {
            // "<class> <index> <member_count> <compressed_size>"
            std::array<std::string_view, 4> parts;
            std::size_t n = 0, p = 0;
            std::string_view v = value;
            while (n < 4 && p < v.size()) {
                std::size_t sp = v.find(' ', p);
                if (sp == std::string_view::npos) sp = v.size();
                if (sp > p) parts[n++] = v.substr(p, sp - p);
                p = sp + 1;
            }
            if (n != 4 || (parts[0] != "A" && parts[0] != "B"))
                manifest_error(dir, "bad gen line " + std::to_string(lineno));
            auto idx = util::parse_u64(parts[1]);
            auto members = util::parse_u64(parts[2]);
            auto size = util::parse_u64(parts[3]);
            if (!idx || !members || !size)
                manifest_error(dir, "bad gen line " + std::to_string(lineno));
            gen_lines.push_back({parts[0][0], *idx, *members, *size});
        } else {
            kv[key] = value;
        }
    }
    if (need_u64(dir, kv, "format_version") != 1)
        manifest_error(dir, "unsupported format_version");
    GeneratorSet set;
    std::uint64_t k = need_u64(dir, kv, "k");
    set.seed = need_u64(dir, kv, "seed");
    set.size_cap = need_u64(dir, kv, "size_cap");
    set.unused_records = need_u64(dir, kv, "unused_records");
    auto alg = kv.find("algorithm");
    if (alg == kv.end()) manifest_error(dir, "manifest is missing 'algorithm'");
    set.cfg.algorithm = alg->second;
    set.cfg.level = static_cast<int>(need_u64(dir, kv, "level"));
    auto sep = kv.find("record_separator");
    if (sep == kv.end()) manifest_error(dir, "manifest is missing 'record_separator'");
    auto unescaped = util::unescape_bytes(sep->second);
    if (!unescaped) manifest_error(dir, "record_separator is not a valid escape sequence");
    set.cfg.record_separator = *unescaped;

    if (gen_lines.size() != k)
        manifest_error(dir, "manifest lists " + std::to_string(gen_lines.size()) +
                                " generators but k = " + std::to_string(k));
    for (std::size_t j = 0; j < gen_lines.size(); ++j) {
        const GenLine& gl = gen_lines[j];
        char expect_cls = j < k / 2 ? 'A' : 'B';
        std::uint64_t expect_idx = j < k / 2 ? j : j - k / 2;
        if (gl.cls != expect_cls || gl.index != expect_idx)
            manifest_error(dir, "generators must be listed as A 0..k/2-1 then B 0..k/2-1");
        std::string name =
            std::string("gen_") + gl.cls + "_" + std::to_string(gl.index) + ".bin";
        std::string bytes;
        try {
            bytes = util::read_file(dir / name);
        } catch (const std::exception& e) {
            manifest_error(dir, e.what());
        }
        std::uint64_t actual = compress::compressed_size(bytes, set.cfg);
        if (actual != gl.size)
            manifest_error(dir, name + ": compressed size " + std::to_string(actual) +
                                    " does not match manifest " + std::to_string(gl.size) +
                                    " (file corrupted or compressor changed)");
        set.generators.push_back({std::move(bytes),
                                  gl.cls == 'A' ? Label::class_a : Label::class_b,
                                  static_cast<std::uint32_t>(gl.members)});
        set.cached_sizes.push_back(gl.size);
    }
    return set;
}

std::string matrix_csv(const AttributeMatrix& m) {
    std::string out = "label";
    for (std::size_t j = 0; j < m.cols; ++j) {
        out += ",g";
        out += std::to_string(j);
        out += '_';
        out += corpus::label_char(m.column_labels[j]);
    }
    out += '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
        out += corpus::label_char(m.row_labels[i]);
        for (std::size_t j = 0; j < m.cols; ++j) {
            out += ',';
            out += util::format_double(m.at(i, j));
        }
        out += '\n';
    }
    return out;
}

void export_matrix_csv(const AttributeMatrix& m, const fs::path& path) {
    util::atomic_write_file(path, matrix_csv(m));
}

}  // namespace ncdsvm::ncd
