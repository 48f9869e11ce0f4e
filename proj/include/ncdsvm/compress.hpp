// compress.hpp — compressed-size measurement behind a compressor abstraction.
//
// All sizes are the full container output in bytes (for gzip: RFC 1952
// header + deflate stream + trailer), so values can be cross-checked with
// any standard tool. Measurement is deterministic for a fixed config.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

namespace ncdsvm::compress {

struct CompressorConfig {
    std::string algorithm = "gzip";
    int level = 6;
    std::string record_separator = "\n";

    bool operator==(const CompressorConfig&) const = default;
};

// A compression stream pre-fed with a fixed prefix. size_with(suffix)
// returns the container size of prefix+suffix without re-processing the
// prefix; results are identical to a one-shot measurement. Safe for
// concurrent size_with calls.
class PrimedPrefix {
public:
    virtual ~PrimedPrefix() = default;
    virtual std::uint64_t size_with(std::string_view suffix) const = 0;
};

class Compressor {
public:
    virtual ~Compressor() = default;
    virtual std::string_view name() const = 0;
    // Container size of the concatenation of chunks (no separators added).
    virtual std::uint64_t size_of_chunks(std::span<const std::string_view> chunks) const = 0;
    virtual std::unique_ptr<PrimedPrefix> prime(std::span<const std::string_view> prefix_chunks) const = 0;

    std::uint64_t size_of(std::string_view data) const {
        std::string_view one[] = {data};
        return size_of_chunks(one);
    }
};

// Builds the compressor named by cfg.algorithm ("gzip" is the required
// implementation). Throws std::invalid_argument on an unknown name or a
// level outside the algorithm's range.
std::shared_ptr<const Compressor> make_compressor(const CompressorConfig& cfg);

// Content-addressed size cache. Concurrent readers and writers are fine:
// values are a pure function of content, so racing writers store the same
// number and last-write-wins is harmless.
class SizeCache {
public:
    std::optional<std::uint64_t> lookup(std::string_view content) const;
    void store(std::string_view content, std::uint64_t size);
    std::size_t entry_count() const;

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, std::uint64_t, Hash, std::equal_to<>> map_;
};

// C(data) under cfg. Empty input is allowed (yields the container's fixed
// empty-stream size).
std::uint64_t compressed_size(std::string_view data, const CompressorConfig& cfg);

// compressed_size through an optional cache (stored back on miss).
std::uint64_t cached_size(std::string_view data, const CompressorConfig& cfg, SizeCache* cache);

// C(g . sep . s) - C(g) with sep = cfg.record_separator. C(g) comes from
// the cache when one is supplied (and is stored back on miss). Signed:
// container rounding can in principle make the difference non-positive
// for tiny suffixes, and callers are expected to surface that, not hide it.
std::int64_t conditional_size(std::string_view g, std::string_view s, const CompressorConfig& cfg,
                              SizeCache* cache = nullptr);

}  // namespace ncdsvm::compress
