// corpus.hpp — dataset ingestion into a uniform labeled-record corpus,
// plus the deterministic dedupe / balance / split transforms.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ncdsvm::corpus {

enum class Label : std::uint8_t { class_a = 0, class_b = 1 };

inline char label_char(Label l) { return l == Label::class_a ? 'A' : 'B'; }
inline std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }

// One raw text string plus its binary class. Text is kept byte-for-byte as
// loaded; the pipeline is byte-oriented and applies no normalization.
struct TextRecord {
    std::string text;
    Label label = Label::class_a;

    bool operator==(const TextRecord&) const = default;
};

struct Corpus {
    std::vector<TextRecord> records;
    std::string dataset_id;
    // Display names per class, e.g. {"ham","spam"}. Not persisted in caches.
    std::array<std::string, 2> class_names{"A", "B"};

    std::array<std::size_t, 2> class_counts() const;
    bool balanced() const;
};

// Disjoint split: i_set holds the classifier instances, g_set the
// generator material. Their union is the input corpus.
struct Partition {
    std::vector<TextRecord> i_set;
    std::vector<TextRecord> g_set;
    std::uint64_t seed = 0;
};

struct ClassLengthStats {
    double mean = 0;
    double median = 0;
    std::size_t count = 0;
};

// Per-class text length statistics. Lengths are byte counts: loaders keep
// raw bytes and the whole pipeline is byte-oriented.
struct LengthStats {
    std::array<ClassLengthStats, 2> per_class;
};

enum class DatasetFormat {
    csic_http,
    sms_tsv,
    dga_list,
    sentiment140_csv,
    imdb_dirs,
    generic_labeled_lines,
};

std::optional<DatasetFormat> parse_format(std::string_view id);
std::string_view format_id(DatasetFormat f);

struct LoadError : std::runtime_error {
    LoadError(const std::filesystem::path& path, std::size_t line, const std::string& what);
    LoadError(const std::filesystem::path& path, const std::string& what);
    std::filesystem::path path;
    std::size_t line = 0;  // 0 = whole-file error
};

struct LoadOptions {
    // strict: abort (throw LoadError) on the first malformed record.
    // Otherwise malformed records are skipped with a warning.
    bool strict = false;
    std::ostream* warnings = nullptr;  // nullptr = stderr
};

// Ingests one dataset in its native format. Empty texts are dropped; a
// load that yields zero records is an error. Two-sided formats (csic-http,
// dga-list) take a directory and pick up class sides by filename:
//   csic-http: files containing "normal" -> class A, "anomal" -> class B
//   dga-list:  files containing "legit" or "normal" -> A, "dga" -> B
// imdb-dirs takes a directory tree and reads every file under pos/ (A) and
// neg/ (B) subdirectories, recursively.
Corpus load_dataset(const std::filesystem::path& path, DatasetFormat format,
                    const LoadOptions& opts = {});

// Collapses byte-identical texts to their first occurrence and removes
// entirely any text that appears under both labels. Order preserved;
// idempotent.
Corpus deduplicate(const Corpus& c);

// Only the cross-label half of deduplicate: conflicting texts are removed,
// within-class duplicates are kept.
Corpus remove_cross_label_conflicts(const Corpus& c);

// Keeps the minority class whole and down-samples the majority uniformly
// at random (seeded) to the minority count. Record order is preserved.
Corpus balance(const Corpus& c, std::uint64_t seed);

// Per-class uniform random subsample to at most n_per_class records,
// preserving order. balance(c, seed) == subsample to min class count.
Corpus subsample_per_class(const Corpus& c, std::size_t n_per_class, std::uint64_t seed);

// Index-level core of split_gi, exposed so callers can relate partition
// members back to corpus positions. Selection depends only on labels,
// counts and the seed — never on record contents.
struct SplitIndices {
    std::vector<std::uint32_t> i_indices;
    std::vector<std::uint32_t> g_indices;
};
SplitIndices split_gi_indices(std::span<const Label> labels, std::size_t i_per_class,
                              std::uint64_t seed);

// Splits a balanced corpus into disjoint I and G sets with exactly
// i_per_class records per class in I, chosen uniformly at random (seeded).
Partition split_gi(const Corpus& c, std::size_t i_per_class, std::uint64_t seed);

LengthStats length_stats(const Corpus& c);

// Synthetic two-class corpus for dataset-free runs: each class draws
// uniformly from its own alphabet, so classes with disjoint alphabets are
// separable by construction.
struct SynthClassSpec {
    std::size_t count = 100;
    std::size_t min_len = 20;
    std::size_t max_len = 40;
    std::string alphabet;
};
struct SynthSpec {
    SynthClassSpec class_a{100, 20, 40, "abcdefghijklm"};
    SynthClassSpec class_b{100, 20, 40, "nopqrstuvwxyz"};
};
Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Cache format: one record per line, `label<TAB>base64(text)`, label is
// the canonical A/B letter. Base64 keeps arbitrary bytes line-safe.
void save_cache(const Corpus& c, const std::filesystem::path& path);
Corpus load_cache(const std::filesystem::path& path, const LoadOptions& opts = {});

}  // namespace ncdsvm::corpus
