// ncd.hpp — class-labeled generator files built from the G split, and the
// n×k compression-distance attribute matrix computed against them.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncdsvm/compress.hpp"
#include "ncdsvm/corpus.hpp"

namespace ncdsvm::ncd {

struct GeneratorEntry {
    std::string bytes;  // member records joined by cfg.record_separator, no trailing separator
    corpus::Label label = corpus::Label::class_a;
    std::uint32_t member_count = 0;
};

// k generator files, k/2 per class, class A entries first. Immutable after
// construction; safe to share across threads.
struct GeneratorSet {
    std::vector<GeneratorEntry> generators;
    std::vector<std::uint64_t> cached_sizes;  // compressed size of each generator
    compress::CompressorConfig cfg;
    std::uint64_t seed = 0;
    std::uint64_t size_cap = 0;        // bytes; 0 = uncapped
    std::uint64_t unused_records = 0;  // dropped because no generator could take them

    std::size_t k() const { return generators.size(); }
};

// Packs a balanced G set into k generators (k/2 per class): per class the
// records are shuffled (seeded) then dealt round-robin. With a size cap, a
// generator that cannot take an offered record without exceeding the cap
// is closed and the record cascades to the next open one; records left
// over when all generators are closed are counted as unused.
GeneratorSet build_generators(std::span<const corpus::TextRecord> g_set, std::size_t k,
                              std::uint64_t seed, std::optional<std::uint64_t> size_cap = {},
                              const compress::CompressorConfig& cfg = {});

// One attribute value: (C(g·s) − C(g)) / C(s). Can be non-positive for
// tiny records (container overhead); callers keep the value as-is.
double ncd_distance(const GeneratorEntry& g, std::string_view s_text,
                    const compress::CompressorConfig& cfg, std::uint64_t cached_g_size,
                    compress::SizeCache* cache = nullptr);
// As above, computing C(g) on the fly (or from cache).
double ncd_distance(const GeneratorEntry& g, std::string_view s_text,
                    const compress::CompressorConfig& cfg,
                    compress::SizeCache* cache = nullptr);

struct AttributeMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major, rows × cols
    std::vector<corpus::Label> row_labels;
    std::vector<corpus::Label> column_labels;
    std::size_t non_positive_count = 0;

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

// values[i][j] = ncd_distance(gens[j], records[i]). Rows are computed
// independently (optionally in parallel); the result is bit-identical for
// any worker count. workers <= 0 selects an automatic count.
AttributeMatrix featurize(std::span<const corpus::TextRecord> records, const GeneratorSet& gens,
                          int workers = 0);

// On-disk layout: <dir>/manifest.txt (line-oriented key = value) plus one
// gen_<class>_<index>.bin raw-bytes file per generator.
void save_generator_set(const GeneratorSet& gens, const std::filesystem::path& dir);
GeneratorSet load_generator_set(const std::filesystem::path& dir);

// CSV export: header `label,g0_A,...`, then one row per record:
// class letter followed by the k attribute values.
std::string matrix_csv(const AttributeMatrix& m);
void export_matrix_csv(const AttributeMatrix& m, const std::filesystem::path& path);

}  // namespace ncdsvm::ncd
