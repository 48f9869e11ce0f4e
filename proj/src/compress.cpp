#include "ncdsvm/compress.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <mutex>
#include <stdexcept>

namespace ncdsvm::compress {

namespace {

// Counting sink: deflate output is discarded chunk by chunk, only the byte
// count survives.
class GzipStream {
public:
    explicit GzipStream(int level) {
        std::memset(&zs_, 0, sizeof zs_);
        // windowBits 15 + 16 selects the gzip container (RFC 1952).
        int rc = deflateInit2(&zs_, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY);
        if (rc != Z_OK) throw std::runtime_error("deflateInit2 failed");
        live_ = true;
    }

    GzipStream(const GzipStream& other) {
        std::memset(&zs_, 0, sizeof zs_);
        int rc = deflateCopy(&zs_, const_cast<z_stream*>(&other.zs_));
        if (rc != Z_OK) throw std::runtime_error("deflateCopy failed");
        live_ = true;
        total_ = other.total_;
    }

    GzipStream& operator=(const GzipStream&) = delete;

    ~GzipStream() {
        if (live_) deflateEnd(&zs_);
    }

    void feed(std::string_view chunk) { pump(chunk, Z_NO_FLUSH); }

    std::uint64_t finish() {
        pump({}, Z_FINISH);
        return total_;
    }

private:
    void pump(std::string_view chunk, int flush) {
        zs_.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(chunk.data()));
        zs_.avail_in = static_cast<uInt>(chunk.size());
        do {
            zs_.next_out = buf_.data();
            zs_.avail_out = static_cast<uInt>(buf_.size());
            int rc = deflate(&zs_, flush);
            if (rc == Z_STREAM_ERROR) throw std::runtime_error("deflate stream error");
            total_ += buf_.size() - zs_.avail_out;
            if (flush == Z_FINISH && rc == Z_STREAM_END) break;
        } while (zs_.avail_in > 0 || (flush == Z_FINISH) || zs_.avail_out == 0);
    }

    z_stream zs_;
    bool live_ = false;
    std::uint64_t total_ = 0;
    std::array<Bytef, 1 << 16> buf_;
};

class GzipPrimedPrefix final : public PrimedPrefix {
public:
    GzipPrimedPrefix(int level, std::span<const std::string_view> prefix_chunks) : base_(level) {
        for (auto c : prefix_chunks) base_.feed(c);
    }

    std::uint64_t size_with(std::string_view suffix) const override {
        GzipStream s(base_);  // deflateCopy; the shared base is never mutated
        s.feed(suffix);
        return s.finish();
    }

private:
    GzipStream base_;
};

class GzipCompressor final : public Compressor {
public:
    explicit GzipCompressor(int level) : level_(level) {}

    std::string_view name() const override { return "gzip"; }

    std::uint64_t size_of_chunks(std::span<const std::string_view> chunks) const override {
        GzipStream s(level_);
        for (auto c : chunks) s.feed(c);
        return s.finish();
    }

    std::unique_ptr<PrimedPrefix> prime(std::span<const std::string_view> prefix_chunks) const override {
        return std::make_unique<GzipPrimedPrefix>(level_, prefix_chunks);
    }

private:
    int level_;
};

}  // namespace

std::shared_ptr<const Compressor> make_compressor(const CompressorConfig& cfg) {
    if (cfg.algorithm == "gzip") {
        if (cfg.level < 1 || cfg.level > 9)
            throw std::invalid_argument("gzip level must be in 1..9, got " + std::to_string(cfg.level));
        return std::make_shared<GzipCompressor>(cfg.level);
    }
    throw std::invalid_argument("unknown compression algorithm: '" + cfg.algorithm + "'");
}

std::optional<std::uint64_t> SizeCache::lookup(std::string_view content) const {
    std::shared_lock lock(mu_);
    auto it = map_.find(content);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void SizeCache::store(std::string_view content, std::uint64_t size) {
    std::unique_lock lock(mu_);
    map_.insert_or_assign(std::string(content), size);
}

std::size_t SizeCache::entry_count() const {
    std::shared_lock lock(mu_);
    return map_.size();
}

std::uint64_t compressed_size(std::string_view data, const CompressorConfig& cfg) {
    return make_compressor(cfg)->size_of(data);
}

std::uint64_t cached_size(std::string_view data, const CompressorConfig& cfg, SizeCache* cache) {
    if (cache) {
        if (auto hit = cache->lookup(data)) return *hit;
    }
    std::uint64_t size = compressed_size(data, cfg);
    if (cache) cache->store(data, size);
    return size;
}

std::int64_t conditional_size(std::string_view g, std::string_view s, const CompressorConfig& cfg,
                              SizeCache* cache) {
    std::uint64_t c_g = cached_size(g, cfg, cache);
    std::string_view chunks[] = {g, cfg.record_separator, s};
    std::uint64_t c_gs = make_compressor(cfg)->size_of_chunks(chunks);
    return static_cast<std::int64_t>(c_gs) - static_cast<std::int64_t>(c_g);
}

}  // namespace ncdsvm::compress
