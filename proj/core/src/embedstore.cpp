#include "mvlens/embedstore.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mvlens/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "vector blobs are little-endian f32 and are mapped directly");

namespace mvlens {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedManifest, "malformed manifest: " + what);
}

class MappedFile {
 public:
  explicit MappedFile(const std::filesystem::path& path) {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
      throw Error(ErrorCode::Io, "cannot open " + path.string() + ": " +
                                     std::strerror(errno));
    }
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
      ::close(fd);
      throw Error(ErrorCode::Io, "cannot stat " + path.string());
    }
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ > 0) {
      void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
      if (p == MAP_FAILED) {
        ::close(fd);
        throw Error(ErrorCode::Io, "cannot map " + path.string());
      }
      data_ = p;
    }
    ::close(fd);
  }
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile() {
    if (data_ != nullptr) ::munmap(data_, size_);
  }

  std::size_t size() const { return size_; }
  const float* floats() const { return static_cast<const float*>(data_); }

 private:
  void* data_ = nullptr;
  std::size_t size_ = 0;
};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Throws NonFiniteVector / NotNormalized for the first offending row.
void check_rows(std::string_view id, std::span<const float> data,
                std::size_t dim, bool normalized) {
  const std::size_t rows = data.size() / dim;
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const float v = data[r * dim + d];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteVector,
                    "item '" + std::string(id) + "' row " + std::to_string(r) +
                        " has a non-finite entry");
      }
      sq += static_cast<double>(v) * v;
    }
    if (normalized && std::abs(std::sqrt(sq) - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::NotNormalized,
                  "item '" + std::string(id) + "' row " + std::to_string(r) +
                      " has norm " + std::to_string(std::sqrt(sq)) +
                      " in a normalized store");
    }
  }
}

void validate_sets(std::span<const EmbeddingSet> sets, bool normalized) {
  if (sets.empty()) throw Error(ErrorCode::EmptyStore, "no embedding sets");
  const std::size_t dim = sets.front().dim;
  if (dim == 0) throw Error(ErrorCode::DimMismatch, "dim must be >= 1");
  std::unordered_set<std::string_view> ids;
  for (const auto& s : sets) {
    if (s.dim != dim) {
      throw Error(ErrorCode::DimMismatch,
                  "item '" + s.id + "' has dim " + std::to_string(s.dim) +
                      ", expected " + std::to_string(dim));
    }
    if (s.vectors.empty() || s.vectors.size() % dim != 0) {
      throw Error(ErrorCode::DimMismatch,
                  "item '" + s.id + "' holds " +
                      std::to_string(s.vectors.size()) +
                      " floats, not a positive multiple of dim");
    }
    if (s.token_length < 1) {
      throw Error(ErrorCode::MalformedManifest,
                  "item '" + s.id + "' has non-positive token_length");
    }
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id '" + s.id + "'");
    }
    check_rows(s.id, s.vectors, dim, normalized);
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(where + " is missing '" + key + "'");
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    malformed(where + " has a mistyped '" + key + "'");
  }
}

std::uint64_t required_unsigned(const json& obj, const char* key,
                                const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(where + " is missing '" + key + "'");
  if (!it->is_number_unsigned()) {
    malformed(where + " field '" + key + "' must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

}  // namespace

StoreManifest parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) malformed("top level must be an object");

  StoreManifest m;
  const auto version = required_unsigned(doc, "version", "manifest");
  if (version != StoreManifest::kVersion) {
    malformed("unsupported version " + std::to_string(version));
  }
  m.version = static_cast<int>(version);
  m.dim = required_unsigned(doc, "dim", "manifest");
  if (m.dim == 0) malformed("dim must be >= 1");
  if (required<std::string>(doc, "dtype", "manifest") != "f32") {
    malformed("dtype must be \"f32\"");
  }
  if (required<std::string>(doc, "endianness", "manifest") != "little") {
    malformed("endianness must be \"little\"");
  }
  m.normalized = required<bool>(doc, "normalized", "manifest");
  if (auto it = doc.find("provenance"); it != doc.end()) {
    if (!it->is_string()) malformed("provenance must be a string");
    m.provenance = it->get<std::string>();
  }

  auto items = doc.find("items");
  if (items == doc.end() || !items->is_array()) {
    malformed("'items' must be an array");
  }
  m.items.reserve(items->size());
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < items->size(); ++i) {
    const auto& obj = (*items)[i];
    const std::string where = "item " + std::to_string(i);
    if (!obj.is_object()) malformed(where + " is not an object");
    ManifestItem item;
    item.id = required<std::string>(obj, "id", where);
    item.n_vectors = required_unsigned(obj, "n_vectors", where);
    item.byte_offset = required_unsigned(obj, "byte_offset", where);
    item.token_length =
        static_cast<std::int64_t>(required_unsigned(obj, "token_length", where));
    item.dataset = required<std::string>(obj, "dataset", where);
    if (item.n_vectors == 0) malformed(where + " has n_vectors = 0");
    if (item.token_length < 1) malformed(where + " has token_length < 1");
    if (item.byte_offset % sizeof(float) != 0) {
      malformed(where + " byte_offset is not a multiple of 4");
    }
    if (!m.items.empty() && item.byte_offset <= m.items.back().byte_offset) {
      malformed(where + " byte_offset is not strictly increasing");
    }
    if (!ids.insert(item.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id '" + item.id + "'");
    }
    m.items.push_back(std::move(item));
  }
  return m;
}

std::string serialize_manifest(const StoreManifest& manifest) {
  json doc;
  doc["version"] = manifest.version;
  doc["dim"] = manifest.dim;
  doc["dtype"] = "f32";
  doc["endianness"] = "little";
  doc["normalized"] = manifest.normalized;
  if (!manifest.provenance.empty()) doc["provenance"] = manifest.provenance;
  json items = json::array();
  for (const auto& item : manifest.items) {
    items.push_back({{"id", item.id},
                     {"n_vectors", item.n_vectors},
                     {"byte_offset", item.byte_offset},
                     {"token_length", item.token_length},
                     {"dataset", item.dataset}});
  }
  doc["items"] = std::move(items);
  return doc.dump(1) + "\n";
}

struct EmbeddingStore::State {
  StoreManifest manifest;
  std::unordered_map<std::string_view, std::size_t> index;
  std::shared_ptr<const void> owner;
  const float* floats = nullptr;
  std::unique_ptr<std::atomic<bool>[]> checked;

  void build_index() {
    index.reserve(manifest.items.size());
    for (std::size_t i = 0; i < manifest.items.size(); ++i) {
      index.emplace(manifest.items[i].id, i);
    }
    checked = std::make_unique<std::atomic<bool>[]>(manifest.items.size());
  }
};

EmbeddingStore::EmbeddingStore(std::shared_ptr<const State> state)
    : state_(std::move(state)) {}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& vectors_path) {
  auto state = std::make_shared<State>();
  state->manifest = parse_manifest(read_text(manifest_path));
  auto file = std::make_shared<MappedFile>(vectors_path);

  const std::uint64_t file_size = file->size();
  const std::uint64_t row_bytes = state->manifest.dim * sizeof(float);
  for (const auto& item : state->manifest.items) {
    // Division form avoids overflow on absurd n_vectors values.
    const bool fits =
        item.byte_offset <= file_size &&
        item.n_vectors <= (file_size - item.byte_offset) / row_bytes;
    if (!fits) {
      throw Error(ErrorCode::OffsetOutOfBounds,
                  "item '" + item.id + "' spans bytes [" +
                      std::to_string(item.byte_offset) + ", +" +
                      std::to_string(item.n_vectors) + "x" +
                      std::to_string(row_bytes) + ") beyond the " +
                      std::to_string(file_size) + "-byte blob");
    }
  }
  state->floats = file->floats();
  state->owner = std::move(file);
  state->build_index();
  return EmbeddingStore(std::move(state));
}

EmbeddingStore EmbeddingStore::from_sets(std::span<const EmbeddingSet> sets,
                                         const StoreOptions& options) {
  validate_sets(sets, options.normalized);
  auto state = std::make_shared<State>();
  state->manifest.dim = sets.front().dim;
  state->manifest.normalized = options.normalized;
  state->manifest.provenance = options.provenance;

  std::size_t total = 0;
  for (const auto& s : sets) total += s.vectors.size();
  auto blob = std::make_shared<std::vector<float>>();
  blob->reserve(total);
  for (const auto& s : sets) {
    state->manifest.items.push_back({s.id, s.n_vectors(),
                                     blob->size() * sizeof(float),
                                     s.token_length, s.dataset});
    blob->insert(blob->end(), s.vectors.begin(), s.vectors.end());
  }
  state->floats = blob->data();
  state->owner = std::move(blob);
  state->build_index();
  for (std::size_t i = 0; i < sets.size(); ++i) state->checked[i] = true;
  return EmbeddingStore(std::move(state));
}

const StoreManifest& EmbeddingStore::manifest() const {
  return state_->manifest;
}
std::size_t EmbeddingStore::size() const {
  return state_->manifest.items.size();
}
std::size_t EmbeddingStore::dim() const { return state_->manifest.dim; }
bool EmbeddingStore::normalized() const { return state_->manifest.normalized; }

EmbeddingView EmbeddingStore::at(std::size_t index) const {
  const auto& item = state_->manifest.items.at(index);
  const std::size_t dim = state_->manifest.dim;
  std::span<const float> data(
      state_->floats + item.byte_offset / sizeof(float),
      static_cast<std::size_t>(item.n_vectors) * dim);
  if (!state_->checked[index].load(std::memory_order_acquire)) {
    check_rows(item.id, data, dim, state_->manifest.normalized);
    state_->checked[index].store(true, std::memory_order_release);
  }
  return {item.id, data, static_cast<std::size_t>(item.n_vectors), dim,
          item.token_length, item.dataset};
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
  auto it = state_->index.find(id);
  if (it == state_->index.end()) return std::nullopt;
  return it->second;
}

void EmbeddingStore::verify() const {
  for (std::size_t i = 0; i < size(); ++i) at(i);
}

EmbeddingSet EmbeddingStore::materialize(std::size_t index) const {
  const auto v = at(index);
  return {std::string(v.id), v.dim,
          std::vector<float>(v.data.begin(), v.data.end()), v.token_length,
          std::string(v.dataset)};
}

std::vector<EmbeddingSet> EmbeddingStore::materialize_all() const {
  std::vector<EmbeddingSet> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(materialize(i));
  return out;
}

std::vector<std::int64_t> EmbeddingStore::token_lengths() const {
  std::vector<std::int64_t> out;
  out.reserve(size());
  for (const auto& item : state_->manifest.items) {
    out.push_back(item.token_length);
  }
  return out;
}

StorePaths store_paths(const std::filesystem::path& dir) {
  return {dir / kManifestFileName, dir / kVectorsFileName};
}

namespace {

StorePaths write_manifest_and_blob(const StoreManifest& manifest,
                                   std::span<const std::span<const float>> rows,
                                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " +
                                   ec.message());
  }
  const auto paths = store_paths(out_dir);
  {
    std::ofstream blob(paths.vectors, std::ios::binary | std::ios::trunc);
    if (!blob) throw Error(ErrorCode::Io, "cannot write " + paths.vectors.string());
    for (const auto& r : rows) {
      blob.write(reinterpret_cast<const char*>(r.data()),
                 static_cast<std::streamsize>(r.size_bytes()));
    }
    if (!blob) throw Error(ErrorCode::Io, "short write to " + paths.vectors.string());
  }
  {
    std::ofstream out(paths.manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + paths.manifest.string());
    out << serialize_manifest(manifest);
    if (!out) throw Error(ErrorCode::Io, "short write to " + paths.manifest.string());
  }
  return paths;
}

}  // namespace

StorePaths write_store(std::span<const EmbeddingSet> sets,
                       const std::filesystem::path& out_dir,
                       const StoreOptions& options) {
  validate_sets(sets, options.normalized);
  StoreManifest manifest;
  manifest.dim = sets.front().dim;
  manifest.normalized = options.normalized;
  manifest.provenance = options.provenance;
  std::vector<std::span<const float>> rows;
  rows.reserve(sets.size());
  std::uint64_t offset = 0;
  for (const auto& s : sets) {
    manifest.items.push_back(
        {s.id, s.n_vectors(), offset, s.token_length, s.dataset});
    rows.emplace_back(s.vectors);
    offset += s.vectors.size() * sizeof(float);
  }
  return write_manifest_and_blob(manifest, rows, out_dir);
}

StorePaths write_store(const EmbeddingStore& store,
                       const std::filesystem::path& out_dir) {
  if (store.size() == 0) throw Error(ErrorCode::EmptyStore, "no embedding sets");
  StoreManifest manifest;
  manifest.dim = store.dim();
  manifest.normalized = store.normalized();
  manifest.provenance = store.manifest().provenance;
  std::vector<std::span<const float>> rows;
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto v = store.at(i);
    manifest.items.push_back({std::string(v.id), v.n_vectors, offset,
                              v.token_length, std::string(v.dataset)});
    rows.push_back(v.data);
    offset += v.data.size_bytes();
  }
  return write_manifest_and_blob(manifest, rows, out_dir);
}

EmbeddingStore merge_stores(std::span<const EmbeddingStore> stores,
                            std::int64_t max_token_length) {
  if (stores.empty()) throw Error(ErrorCode::EmptyStore, "no stores to merge");
  const std::size_t dim = stores.front().dim();
  const bool normalized = stores.front().normalized();
  for (const auto& s : stores) {
    if (s.dim() != dim) {
      throw Error(ErrorCode::DimMismatch,
                  "cannot merge stores of dim " + std::to_string(dim) +
                      " and " + std::to_string(s.dim()));
    }
    if (s.normalized() != normalized) {
      throw Error(ErrorCode::NormalizationMismatch,
                  "cannot merge normalized and unnormalized stores");
    }
  }

  auto kept = [&](const ManifestItem& item) {
    return item.token_length <= max_token_length;
  };

  // Count the input stores each surviving id appears in.
  std::unordered_map<std::string_view, std::size_t> occurrences;
  for (const auto& s : stores) {
    for (const auto& item : s.manifest().items) {
      if (kept(item)) ++occurrences[item.id];
    }
  }

  std::vector<EmbeddingSet> merged;
  std::string provenance;
  for (const auto& s : stores) {
    if (provenance.empty()) provenance = s.manifest().provenance;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& item = s.manifest().items[i];
      if (!kept(item)) continue;
      EmbeddingSet set = s.materialize(i);
      if (occurrences[item.id] > 1) set.id = set.dataset + "/" + set.id;
      merged.push_back(std::move(set));
    }
  }
  if (merged.empty()) {
    throw Error(ErrorCode::EmptyStore,
                "no items left after the token-length filter");
  }
  return EmbeddingStore::from_sets(merged, {normalized, provenance});
}

}  // namespace mvlens
