#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mvlens {

/// Non-owning view of one item's embedding rows. Valid while the owning
/// EmbeddingSet or EmbeddingStore is alive.
struct EmbeddingView {
  std::string_view id;
  std::span<const float> data;  // row-major, n_vectors * dim
  std::size_t n_vectors = 0;
  std::size_t dim = 0;
  std::int64_t token_length = 0;
  std::string_view dataset;

  std::span<const float> row(std::size_t i) const {
    return data.subspan(i * dim, dim);
  }
};

/// One text item's contextualized vectors plus its tokenizer length.
struct EmbeddingSet {
  std::string id;
  std::size_t dim = 0;
  std::vector<float> vectors;  // row-major, n_vectors * dim
  std::int64_t token_length = 0;
  std::string dataset;

  std::size_t n_vectors() const { return dim == 0 ? 0 : vectors.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(vectors).subspan(i * dim, dim);
  }
  EmbeddingView view() const {
    return {id, vectors, n_vectors(), dim, token_length, dataset};
  }
};

struct ManifestItem {
  std::string id;
  std::uint64_t n_vectors = 0;
  std::uint64_t byte_offset = 0;
  std::int64_t token_length = 0;
  std::string dataset;
};

/// Manifest schema. dtype is always "f32" and endianness "little".
struct StoreManifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::size_t dim = 0;
  bool normalized = false;
  std::vector<ManifestItem> items;
  // Free-text note from the producer (special-token handling etc.).
  std::string provenance;
};

/// Parses and schema-checks manifest text. Throws MalformedManifest or
/// DuplicateId. Byte bounds are checked by EmbeddingStore::open.
StoreManifest parse_manifest(std::string_view text);

/// Canonical, deterministic JSON encoding of a manifest.
std::string serialize_manifest(const StoreManifest& manifest);

struct StoreOptions {
  bool normalized = false;
  std::string provenance;
};

/// Row norms must lie within this distance of 1 when a store declares
/// `normalized: true`.
inline constexpr double kNormTolerance = 1e-4;

/// Immutable, validated collection of embedding sets. Copies share state.
///
/// Manifest invariants are checked eagerly when opening. Vector rows are
/// checked for finiteness (and unit norm, for normalized stores) the first
/// time an item is accessed, or all at once through verify(). Concurrent
/// readers are safe.
class EmbeddingStore {
 public:
  /// Opens a manifest + blob pair; the blob is memory-mapped.
  static EmbeddingStore open(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& vectors_path);

  /// Builds an in-memory store. Same checks as write_store.
  static EmbeddingStore from_sets(std::span<const EmbeddingSet> sets,
                                  const StoreOptions& options = {});

  const StoreManifest& manifest() const;
  std::size_t size() const;
  std::size_t dim() const;
  bool normalized() const;

  /// Item in canonical (manifest) order. Throws NonFiniteVector or
  /// NotNormalized on the first access of an offending item.
  EmbeddingView at(std::size_t index) const;

  std::optional<std::size_t> find(std::string_view id) const;

  /// Scans every item. Throws on the first finding.
  void verify() const;

  /// Copies item `index` out of the store.
  EmbeddingSet materialize(std::size_t index) const;
  std::vector<EmbeddingSet> materialize_all() const;

  std::vector<std::int64_t> token_lengths() const;

 private:
  struct State;
  explicit EmbeddingStore(std::shared_ptr<const State> state);

  std::shared_ptr<const State> state_;
};

struct StorePaths {
  std::filesystem::path manifest;
  std::filesystem::path vectors;
};

inline constexpr std::string_view kManifestFileName = "manifest.json";
inline constexpr std::string_view kVectorsFileName = "vectors.bin";

/// Writes `out_dir/manifest.json` and `out_dir/vectors.bin`. Output bytes are
/// a pure function of the input. Throws EmptyStore, DimMismatch, DuplicateId,
/// NonFiniteVector, or NotNormalized (when options.normalized is set).
StorePaths write_store(std::span<const EmbeddingSet> sets,
                       const std::filesystem::path& out_dir,
                       const StoreOptions& options = {});

/// Writes an existing store in canonical layout.
StorePaths write_store(const EmbeddingStore& store,
                       const std::filesystem::path& out_dir);

/// Paths of a store directory written by write_store.
StorePaths store_paths(const std::filesystem::path& dir);

/// Pools several stores into one in-memory store.
///
/// Items whose token_length exceeds max_token_length are dropped. An id that
/// survives filtering in more than one input store is renamed to
/// "<dataset>/<id>" in every store where it occurs. Output order is input
/// store order, then manifest order. Throws DimMismatch,
/// NormalizationMismatch, EmptyStore, or DuplicateId (when renaming does not
/// resolve a collision).
EmbeddingStore merge_stores(std::span<const EmbeddingStore> stores,
                            std::int64_t max_token_length);

}  // namespace mvlens
