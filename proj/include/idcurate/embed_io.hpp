#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace idcurate::embed {

enum class Role { document, live_LL, live_LP, live_LA, external };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);  // throws ValidationError

enum class Format { binary, csv };

/// Picks the format from the extension: ".csv" is CSV, anything else EMB1.
Format format_for_path(const std::filesystem::path& path);

/// Row-major set of unit vectors keyed by (identity_id, image_id).
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::size_t dim, Role role) : dim_(dim), role_(role) {}

  std::size_t dim() const noexcept { return dim_; }
  Role role() const noexcept { return role_; }
  void set_role(Role role) noexcept { role_ = role; }
  std::size_t size() const noexcept { return identity_ids_.size(); }
  bool empty() const noexcept { return identity_ids_.empty(); }

  /// Appends a vector, normalizing it. Throws ValidationError on a dim
  /// mismatch, a non-finite component, a zero vector, or a duplicate key.
  void add(std::string identity_id, std::string image_id, std::span<const float> vec);
  /// Appends without normalizing; the caller guarantees unit norm.
  void add_unit(std::string identity_id, std::string image_id, std::span<const float> vec);

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::string& identity_id(std::size_t i) const { return identity_ids_[i]; }
  const std::string& image_id(std::size_t i) const { return image_ids_[i]; }
  const std::vector<std::string>& identity_ids() const noexcept { return identity_ids_; }
  const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Number of inputs whose norm deviated from 1 by more than 1e-2.
  std::size_t large_norm_deviations() const noexcept { return large_deviations_; }

  bool operator==(const EmbeddingSet& other) const;

 private:
  void push(std::string identity_id, std::string image_id, std::span<const float> vec);

  std::size_t dim_ = 0;
  Role role_ = Role::external;
  std::vector<std::string> identity_ids_;
  std::vector<std::string> image_ids_;
  std::vector<float> data_;
  std::map<std::pair<std::string, std::string>, std::size_t> keys_;
  std::size_t large_deviations_ = 0;
};

/// L2-normalizes in place with a double-precision norm. Vectors already
/// within 1e-6 of unit norm are left untouched, so normalization is
/// idempotent bit-for-bit. Returns the input norm.
double normalize(std::span<float> vec);

/// Ingestion guarantees |norm - 1| <= this for every stored vector.
inline constexpr double kUnitTolerance = 1e-4;

/// `role` is used for CSV only; the EMB1 header carries its own.
EmbeddingSet load_embeddings(const std::filesystem::path& path, Format format,
                             Role csv_role = Role::external);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, Format format);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// In-memory codecs behind load/save.
std::string encode_binary(const EmbeddingSet& set);
EmbeddingSet decode_binary(std::string_view bytes, const std::string& source = "<memory>");
std::string encode_csv(const EmbeddingSet& set);
EmbeddingSet decode_csv(std::string_view text, Role role, const std::string& source = "<memory>");

// -- manifest ---------------------------------------------------------------

struct ManifestEntry {
  std::string identity_id;
  std::map<std::string, std::vector<std::string>> images;  // role name -> image ids
};

struct DatasetManifest {
  std::vector<ManifestEntry> identities;
  std::optional<std::string> profiles_path;

  const ManifestEntry* find(std::string_view identity_id) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

/// Identity ids of `set` that the manifest does not list.
std::vector<std::string> unknown_identities(const DatasetManifest& manifest, const EmbeddingSet& set);

/// Index of the first entry per identity, in first-appearance order.
/// Throws ValidationError if an identity has more than one vector.
std::vector<std::size_t> require_one_per_identity(const EmbeddingSet& set);

}  // namespace idcurate::embed
