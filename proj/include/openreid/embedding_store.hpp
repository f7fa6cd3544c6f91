#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace openreid {

/// Per-row metadata of an embedding. Mirrors one line of the store sidecar.
struct RecordMeta {
    std::string image_id;
    std::optional<std::string> track_id;
    std::optional<std::string> identity;
    std::string source;
    double confidence = 1.0;

    friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

/// One face crop: metadata plus its feature vector.
struct EmbeddingRecord {
    RecordMeta meta;
    std::vector<float> vector;

    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// L2-normalizes `vector`. Throws NonFiniteError or ZeroNormError.
std::vector<float> normalize(std::span<const float> vector);

/// Dot product accumulated in double precision, left to right.
double dot(std::span<const float> a, std::span<const float> b);

/// Immutable row-major embedding matrix with aligned metadata.
///
/// Rows are either all unit-norm (`normalized()`), or stored as given. The
/// evaluation code requires normalized stores.
class EmbeddingStore {
public:
    EmbeddingStore() = default;

    /// Validates records (shared dimension >= 2, unique image ids, confidence in
    /// [0,1], finite values) and optionally normalizes every row.
    static EmbeddingStore from_records(std::vector<EmbeddingRecord> records, bool normalize_rows = true);

    /// Empty store of the given dimension.
    static EmbeddingStore empty(std::size_t dimension, bool normalized = true);

    /// Raw constructor used by the file reader; validates alignment and ids.
    EmbeddingStore(std::size_t dimension, bool normalized, std::vector<RecordMeta> meta,
                   std::vector<float> matrix);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return meta_.size(); }
    bool empty() const noexcept { return meta_.empty(); }
    bool normalized() const noexcept { return normalized_; }

    std::span<const float> row(std::size_t i) const {
        return {matrix_.data() + i * dimension_, dimension_};
    }
    const RecordMeta& meta(std::size_t i) const { return meta_[i]; }
    const std::vector<RecordMeta>& metadata() const noexcept { return meta_; }
    std::span<const float> matrix() const noexcept { return matrix_; }

    std::optional<std::size_t> find(const std::string& image_id) const;

    /// Cosine similarity between two rows of a normalized store.
    double cosine(std::size_t a, std::size_t b) const { return dot(row(a), row(b)); }

    std::vector<EmbeddingRecord> records() const;

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

private:
    void index_ids();

    std::size_t dimension_ = 0;
    bool normalized_ = true;
    std::vector<RecordMeta> meta_;
    std::vector<float> matrix_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

inline constexpr char kStoreMagic[4] = {'C', 'F', 'E', '1'};
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 24;

/// Path of the metadata sidecar belonging to a matrix file:
/// `gallery.cfe` -> `gallery.meta.jsonl`.
std::filesystem::path sidecar_path(const std::filesystem::path& matrix_path);

/// Writes the matrix file at `path` and its sidecar next to it.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

/// Reads a store written by save_store. Format problems raise StoreFormatError.
EmbeddingStore load_store(const std::filesystem::path& path);

}  // namespace openreid
