#include "openreid/embedding_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "openreid/error.hpp"

namespace openreid {

namespace {

using ordered_json = nlohmann::ordered_json;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

ordered_json meta_to_json(const RecordMeta& m) {
    ordered_json j;
    j["image_id"] = m.image_id;
    j["track_id"] = m.track_id ? ordered_json(*m.track_id) : ordered_json(nullptr);
    j["identity"] = m.identity ? ordered_json(*m.identity) : ordered_json(nullptr);
    j["source"] = m.source;
    j["confidence"] = m.confidence;
    return j;
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

RecordMeta meta_from_json(const std::string& line, std::size_t line_no) {
    try {
        const auto j = nlohmann::json::parse(line);
        RecordMeta m;
        m.image_id = j.at("image_id").get<std::string>();
        m.track_id = optional_string(j, "track_id");
        m.identity = optional_string(j, "identity");
        m.source = j.at("source").get<std::string>();
        m.confidence = j.at("confidence").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw StoreFormatError(StoreFault::bad_metadata,
                               "metadata line " + std::to_string(line_no) + ": " + e.what());
    }
}

void check_confidence(const RecordMeta& m) {
    if (!(m.confidence >= 0.0 && m.confidence <= 1.0)) {
        throw ValidationError("record '" + m.image_id + "': confidence outside [0,1]");
    }
}

}  // namespace

std::vector<float> normalize(std::span<const float> vector) {
    double sq = 0.0;
    for (float x : vector) {
        if (!std::isfinite(x)) throw NonFiniteError();
        sq += static_cast<double>(x) * x;
    }
    if (sq == 0.0) throw ZeroNormError();
    const double norm = std::sqrt(sq);
    std::vector<float> out(vector.size());
    for (std::size_t i = 0; i < vector.size(); ++i) {
        out[i] = static_cast<float>(vector[i] / norm);
    }
    return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError("dot: dimension " + std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

EmbeddingStore EmbeddingStore::from_records(std::vector<EmbeddingRecord> records, bool normalize_rows) {
    if (records.empty()) {
        throw ValidationError("from_records: no records; use EmbeddingStore::empty for an empty store");
    }
    const std::size_t dim = records.front().vector.size();
    std::vector<RecordMeta> meta;
    std::vector<float> matrix;
    meta.reserve(records.size());
    matrix.reserve(records.size() * dim);
    for (auto& r : records) {
        if (r.vector.size() != dim) {
            throw DimensionMismatchError("record '" + r.meta.image_id + "' has dimension " +
                                         std::to_string(r.vector.size()) + ", expected " +
                                         std::to_string(dim));
        }
        if (normalize_rows) {
            r.vector = normalize(r.vector);
        } else {
            for (float x : r.vector) {
                if (!std::isfinite(x)) throw NonFiniteError();
            }
        }
        matrix.insert(matrix.end(), r.vector.begin(), r.vector.end());
        meta.push_back(std::move(r.meta));
    }
    return EmbeddingStore(dim, normalize_rows, std::move(meta), std::move(matrix));
}

EmbeddingStore EmbeddingStore::empty(std::size_t dimension, bool normalized) {
    return EmbeddingStore(dimension, normalized, {}, {});
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, bool normalized, std::vector<RecordMeta> meta,
                               std::vector<float> matrix)
    : dimension_(dimension), normalized_(normalized), meta_(std::move(meta)), matrix_(std::move(matrix)) {
    if (dimension_ < 2) throw ValidationError("embedding dimension must be at least 2");
    if (matrix_.size() != meta_.size() * dimension_) {
        throw ValidationError("matrix size does not match metadata count");
    }
    for (const auto& m : meta_) check_confidence(m);
    index_ids();
}

void EmbeddingStore::index_ids() {
    by_id_.clear();
    by_id_.reserve(meta_.size());
    for (std::size_t i = 0; i < meta_.size(); ++i) {
        if (!by_id_.emplace(meta_[i].image_id, i).second) {
            throw ValidationError("duplicate image_id '" + meta_[i].image_id + "'");
        }
    }
}

std::optional<std::size_t> EmbeddingStore::find(const std::string& image_id) const {
    auto it = by_id_.find(image_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<EmbeddingRecord> EmbeddingStore::records() const {
    std::vector<EmbeddingRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = row(i);
        out.push_back({meta_[i], std::vector<float>(r.begin(), r.end())});
    }
    return out;
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (a.dimension_ != b.dimension_ || a.normalized_ != b.normalized_ || a.meta_ != b.meta_) {
        return false;
    }
    // Bitwise comparison so that -0.0 / NaN payloads count as differences.
    return a.matrix_.size() == b.matrix_.size() &&
           std::memcmp(a.matrix_.data(), b.matrix_.data(), a.matrix_.size() * sizeof(float)) == 0;
}

std::filesystem::path sidecar_path(const std::filesystem::path& matrix_path) {
    auto p = matrix_path;
    p.replace_extension(".meta.jsonl");
    return p;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::string header;
    header.reserve(kStoreHeaderBytes);
    header.append(kStoreMagic, 4);
    put_u32(header, kStoreVersion);
    put_u32(header, static_cast<std::uint32_t>(store.dimension()));
    put_u64(header, store.size());
    header.push_back(store.normalized() ? 1 : 0);
    header.append(3, '\0');

    std::ofstream bin(path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot open '" + path.string() + "' for writing");
    bin.write(header.data(), static_cast<std::streamsize>(header.size()));

    const auto matrix = store.matrix();
    if constexpr (std::endian::native == std::endian::little) {
        bin.write(reinterpret_cast<const char*>(matrix.data()),
                  static_cast<std::streamsize>(matrix.size() * sizeof(float)));
    } else {
        std::string buf;
        buf.reserve(matrix.size() * 4);
        for (float f : matrix) put_u32(buf, std::bit_cast<std::uint32_t>(f));
        bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!bin) throw IoError("write failed for '" + path.string() + "'");

    const auto meta_path = sidecar_path(path);
    std::ofstream meta(meta_path, std::ios::binary | std::ios::trunc);
    if (!meta) throw IoError("cannot open '" + meta_path.string() + "' for writing");
    for (const auto& m : store.metadata()) meta << meta_to_json(m).dump() << '\n';
    if (!meta) throw IoError("write failed for '" + meta_path.string() + "'");
}

EmbeddingStore load_store(const std::filesystem::path& path) {
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw IoError("cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 4 || std::memcmp(raw, kStoreMagic, 4) != 0) {
        throw StoreFormatError(StoreFault::bad_magic, "'" + path.string() + "' is not an embedding matrix file");
    }
    if (bytes.size() < kStoreHeaderBytes) {
        throw StoreFormatError(StoreFault::truncated_matrix, "'" + path.string() + "': header truncated");
    }
    const std::uint32_t version = get_u32(raw + 4);
    if (version != kStoreVersion) {
        throw StoreFormatError(StoreFault::bad_version,
                               "'" + path.string() + "': unsupported version " + std::to_string(version));
    }
    const std::uint32_t dim = get_u32(raw + 8);
    const std::uint64_t rows = get_u64(raw + 12);
    const unsigned char flag = raw[20];
    if (dim < 2 || flag > 1) {
        throw StoreFormatError(StoreFault::bad_header, "'" + path.string() + "': invalid header fields");
    }

    const auto meta_path = sidecar_path(path);
    std::ifstream meta_in(meta_path, std::ios::binary);
    if (!meta_in) throw IoError("cannot open metadata sidecar '" + meta_path.string() + "'");
    std::vector<RecordMeta> meta;
    std::string line;
    while (std::getline(meta_in, line)) {
        if (line.empty()) continue;
        meta.push_back(meta_from_json(line, meta.size() + 1));
    }
    if (meta.size() != rows) {
        throw StoreFormatError(StoreFault::row_count_mismatch,
                               "'" + path.string() + "': sidecar lists " + std::to_string(meta.size()) +
                                   " records but the matrix header declares " + std::to_string(rows));
    }

    const std::uint64_t payload = bytes.size() - kStoreHeaderBytes;
    const std::uint64_t expected = rows * dim * 4;
    if (payload < expected) {
        throw StoreFormatError(StoreFault::truncated_matrix,
                               "'" + path.string() + "': matrix holds " + std::to_string(payload / (4ULL * dim)) +
                                   " complete rows, header declares " + std::to_string(rows));
    }
    if (payload > expected) {
        throw StoreFormatError(StoreFault::row_count_mismatch,
                               "'" + path.string() + "': trailing bytes after " + std::to_string(rows) + " rows");
    }

    std::vector<float> matrix(rows * dim);
    const unsigned char* p = raw + kStoreHeaderBytes;
    for (std::size_t i = 0; i < matrix.size(); ++i, p += 4) {
        matrix[i] = std::bit_cast<float>(get_u32(p));
    }
    try {
        return EmbeddingStore(dim, flag == 1, std::move(meta), std::move(matrix));
    } catch (const ValidationError& e) {
        throw StoreFormatError(StoreFault::bad_metadata, "'" + path.string() + "': " + e.what());
    }
}

}  // namespace openreid
