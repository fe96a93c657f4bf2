#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "likert/bytes.hpp"

namespace likert {

// On-disk feature-vector store. Values are single-precision in the file;
// in memory they are widened to double for the model.
struct EmbeddingStore {
    int dim = 0;
    std::vector<std::string> ids;  // file order
    std::unordered_map<std::string, std::vector<double>> rows;

    [[nodiscard]] bool contains(const std::string& id) const { return rows.find(id) != rows.end(); }

    [[nodiscard]] const std::vector<double>& at(const std::string& id) const {
        auto it = rows.find(id);
        if (it == rows.end()) {
            throw std::invalid_argument("EmbeddingStore: missing embedding for item '" + id + "'");
        }
        return it->second;
    }
};

namespace detail {

inline constexpr char kEmbeddingMagic[7] = {'L', 'K', 'E', 'M', 'B', '1', '\0'};

}  // namespace detail

inline std::string serialize_embeddings(const EmbeddingStore& store) {
    if (store.dim <= 0) throw std::invalid_argument("serialize_embeddings: dim must be positive");
    std::string out;
    out.append(detail::kEmbeddingMagic, sizeof(detail::kEmbeddingMagic));
    detail::put_u32(out, static_cast<std::uint32_t>(store.ids.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(store.dim));
    for (const auto& id : store.ids) {
        if (id.size() > 0xffff) throw std::invalid_argument("serialize_embeddings: id too long: " + id);
        const auto& vec = store.at(id);
        if (vec.size() != static_cast<std::size_t>(store.dim)) {
            throw std::invalid_argument("serialize_embeddings: row '" + id + "' has wrong dimension");
        }
        detail::put_u16(out, static_cast<std::uint16_t>(id.size()));
        out.append(id);
        for (double v : vec) detail::put_f32(out, static_cast<float>(v));
    }
    return out;
}

inline void save_embeddings(const EmbeddingStore& store, const std::string& path) {
    detail::write_file_atomic(path, serialize_embeddings(store));
}

inline EmbeddingStore parse_embeddings(const std::string& blob) {
    detail::ByteReader r{blob, "embedding file"};
    const std::string magic = r.bytes(sizeof(detail::kEmbeddingMagic), "magic");
    if (std::memcmp(magic.data(), detail::kEmbeddingMagic, sizeof(detail::kEmbeddingMagic)) != 0) {
        throw std::runtime_error("embedding file magic mismatch");
    }
    const std::uint32_t rows = r.u32("row count");
    const std::uint32_t dim = r.u32("dimension");
    if (dim == 0) throw std::runtime_error("embedding file declares zero dimension");
    EmbeddingStore store;
    store.dim = static_cast<int>(dim);
    store.ids.reserve(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
        const std::uint16_t id_len = r.u16("id length");
        std::string id = r.bytes(id_len, "id");
        std::vector<double> vec(dim);
        for (std::uint32_t d = 0; d < dim; ++d) vec[d] = static_cast<double>(r.f32("vector"));
        if (!store.rows.emplace(id, std::move(vec)).second) {
            throw std::runtime_error("embedding file has duplicate id '" + id + "'");
        }
        store.ids.push_back(std::move(id));
    }
    if (r.at != blob.size()) throw std::runtime_error("embedding file has trailing bytes");
    return store;
}

inline EmbeddingStore load_embeddings(const std::string& path) {
    return parse_embeddings(detail::read_file(path));
}

}  // namespace likert
