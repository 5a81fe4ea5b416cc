#include "idcurate/embed_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "idcurate/error.hpp"
#include "io_util.hpp"

namespace idcurate::embed {

using detail::ordered_json;

namespace {
constexpr std::string_view kMagic = "EMB1";
constexpr double kLeaveAloneTolerance = 1e-6;
constexpr double kWarnTolerance = 1e-2;
}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::document: return "document";
    case Role::live_LL: return "live_LL";
    case Role::live_LP: return "live_LP";
    case Role::live_LA: return "live_LA";
    case Role::external: return "external";
  }
  return "external";
}

Role role_from_string(std::string_view s) {
  for (Role r : {Role::document, Role::live_LL, Role::live_LP, Role::live_LA, Role::external})
    if (to_string(r) == s) return r;
  throw ValidationError("unknown image role '" + std::string(s) +
                        "' (expected document, live_LL, live_LP, live_LA or external)");
}

Format format_for_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? Format::csv : Format::binary;
}

double normalize(std::span<float> vec) {
  double sq = 0.0;
  for (float x : vec) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (norm == 0.0 || std::abs(norm - 1.0) <= kLeaveAloneTolerance) return norm;
  for (float& x : vec) x = static_cast<float>(static_cast<double>(x) / norm);
  return norm;
}

void EmbeddingSet::push(std::string identity_id, std::string image_id, std::span<const float> vec) {
  auto [it, inserted] = keys_.try_emplace({identity_id, image_id}, identity_ids_.size());
  if (!inserted)
    throw ValidationError("duplicate embedding key (" + identity_id + ", " + image_id + ")");
  identity_ids_.push_back(std::move(identity_id));
  image_ids_.push_back(std::move(image_id));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

void EmbeddingSet::add(std::string identity_id, std::string image_id, std::span<const float> vec) {
  const std::string who = "(" + identity_id + ", " + image_id + ")";
  if (dim_ == 0) throw ValidationError("embedding set has dim 0");
  if (vec.size() != dim_)
    throw ValidationError("dim mismatch for " + who + ": got " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
  std::vector<float> v(vec.begin(), vec.end());
  for (float x : v)
    if (!std::isfinite(x)) throw ValidationError("non-finite value in embedding " + who);
  const double norm = normalize(v);
  if (norm == 0.0) throw ValidationError("zero-norm embedding " + who);
  if (std::abs(norm - 1.0) > kWarnTolerance) ++large_deviations_;
  push(std::move(identity_id), std::move(image_id), v);
}

void EmbeddingSet::add_unit(std::string identity_id, std::string image_id, std::span<const float> vec) {
  if (vec.size() != dim_)
    throw ValidationError("dim mismatch for (" + identity_id + ", " + image_id + ")");
  push(std::move(identity_id), std::move(image_id), vec);
}

bool EmbeddingSet::operator==(const EmbeddingSet& o) const {
  return dim_ == o.dim_ && role_ == o.role_ && identity_ids_ == o.identity_ids_ &&
         image_ids_ == o.image_ids_ && data_.size() == o.data_.size() &&
         std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// EMB1 binary: one compact JSON header line, then count*dim little-endian
// float32 values, row-major.

namespace {

std::uint32_t to_le(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big)
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
  return x;
}

}  // namespace

std::string encode_binary(const EmbeddingSet& set) {
  ordered_json h;
  h["magic"] = kMagic;
  h["dim"] = set.dim();
  h["count"] = set.size();
  h["role"] = to_string(set.role());
  h["identity_ids"] = set.identity_ids();
  h["image_ids"] = set.image_ids();
  std::string out = h.dump();
  out += '\n';
  const auto data = set.data();
  const std::size_t off = out.size();
  out.resize(off + data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(data[i]));
    std::memcpy(out.data() + off + i * 4, &le, 4);
  }
  return out;
}

EmbeddingSet decode_binary(std::string_view bytes, const std::string& source) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ParseError(source + ": missing EMB1 header line", 1, 1);
  const ordered_json h = detail::parse_json(bytes.substr(0, nl), source + " header");
  if (!h.is_object() || h.value("magic", "") != kMagic)
    throw ParseError(source + ": not an EMB1 file (bad magic)", 1, 1);
  const auto& jd = detail::require(h, "dim", source);
  const auto& jc = detail::require(h, "count", source);
  if (!jd.is_number_unsigned() || !jc.is_number_unsigned())
    throw ValidationError(source + ": dim and count must be unsigned integers");
  const auto dim = jd.get<std::size_t>();
  const auto count = jc.get<std::size_t>();
  if (dim == 0) throw ValidationError(source + ": dim must be positive");
  const Role role = role_from_string(detail::require_string(h, "role", source));
  const auto& ids = detail::require(h, "identity_ids", source);
  const auto& imgs = detail::require(h, "image_ids", source);
  if (!ids.is_array() || !imgs.is_array() || ids.size() != count || imgs.size() != count)
    throw ValidationError(source + ": identity_ids/image_ids must be arrays of length count");

  const std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() != count * dim * 4)
    throw ValidationError(source + ": payload holds " + std::to_string(payload.size()) +
                          " bytes, header dim " + std::to_string(dim) + " x count " +
                          std::to_string(count) + " requires " + std::to_string(count * dim * 4));

  EmbeddingSet set(dim, role);
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      std::uint32_t le;
      std::memcpy(&le, payload.data() + (i * dim + k) * 4, 4);
      row[k] = std::bit_cast<float>(to_le(le));
    }
    try {
      set.add(ids[i].get<std::string>(), imgs[i].get<std::string>(), row);
    } catch (const ValidationError& e) {
      throw ValidationError(source + ": entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return set;
}

std::string encode_csv(const EmbeddingSet& set) {
  std::string out = "identity_id,image_id";
  for (std::size_t k = 0; k < set.dim(); ++k) out += ",v" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += detail::csv_escape(set.identity_id(i));
    out += ',';
    out += detail::csv_escape(set.image_id(i));
    for (float x : set.row(i)) {
      out += ',';
      out += detail::format_float(x);
    }
    out += '\n';
  }
  return out;
}

EmbeddingSet decode_csv(std::string_view text, Role role, const std::string& source) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(source + ": empty CSV (missing header)", 1, 1);
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 3 || header[0] != "identity_id" || header[1] != "image_id")
    throw ParseError(source + ": header must be identity_id,image_id,v0..v{dim-1}", 1, 1);
  const std::size_t dim = header.size() - 2;
  for (std::size_t k = 0; k < dim; ++k)
    if (header[k + 2] != "v" + std::to_string(k))
      throw ParseError(source + ": header column " + std::to_string(k + 3) + " should be v" + std::to_string(k), 1,
                       k + 3);

  EmbeddingSet set(dim, role);
  std::vector<float> row(dim);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = detail::split_csv_line(lines[ln]);
    const std::string where = source + " row " + std::to_string(ln + 1);
    if (fields.size() != dim + 2)
      throw ValidationError(where + ": dim mismatch, " + std::to_string(fields.size() - 2) +
                            " values for dim " + std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      if (!detail::parse_float(fields[k + 2], row[k]))
        throw ValidationError(where + ": cannot parse v" + std::to_string(k) + " '" + fields[k + 2] + "'");
      if (!std::isfinite(row[k]))
        throw ValidationError(where + ": non-finite value in v" + std::to_string(k));
    }
    try {
      set.add(fields[0], fields[1], row);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, Format format, Role csv_role) {
  if (format == Format::binary) {
    const auto bytes = detail::read_binary_file(path);
    return decode_binary(std::string_view(bytes.data(), bytes.size()), path.string());
  }
  return decode_csv(detail::read_text_file(path), csv_role, path.string());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  return load_embeddings(path, format_for_path(path));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path, Format format) {
  detail::write_file(path, format == Format::binary ? encode_binary(set) : encode_csv(set));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  save_embeddings(set, path, format_for_path(path));
}

// ---------------------------------------------------------------------------
// Manifest

const ManifestEntry* DatasetManifest::find(std::string_view identity_id) const {
  for (const auto& e : identities)
    if (e.identity_id == identity_id) return &e;
  return nullptr;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ordered_json root;
  root["identities"] = ordered_json::array();
  for (const auto& e : m.identities) {
    ordered_json je;
    je["id"] = e.identity_id;
    je["images"] = ordered_json::object();
    for (const auto& [role, imgs] : e.images) je["images"][role] = imgs;
    root["identities"].push_back(std::move(je));
  }
  if (m.profiles_path) root["profiles"] = *m.profiles_path;
  return root.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  detail::write_file(path, manifest_to_json(m));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const ordered_json root = detail::parse_json(detail::read_text_file(path), path.string());
  DatasetManifest m;
  const auto& ids = detail::require(root, "identities", "manifest");
  if (!ids.is_array()) throw ValidationError("manifest.identities: expected array");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string p = "manifest.identities[" + std::to_string(i) + "]";
    ManifestEntry e;
    e.identity_id = detail::require_string(ids[i], "id", p);
    if (auto it = ids[i].find("images"); it != ids[i].end()) {
      for (auto r = it->begin(); r != it->end(); ++r) {
        role_from_string(r.key());
        e.images[r.key()] = r.value().get<std::vector<std::string>>();
      }
    }
    m.identities.push_back(std::move(e));
  }
  if (auto it = root.find("profiles"); it != root.end() && it->is_string()) m.profiles_path = it->get<std::string>();
  return m;
}

std::vector<std::string> unknown_identities(const DatasetManifest& manifest, const EmbeddingSet& set) {
  std::unordered_map<std::string_view, bool> known;
  for (const auto& e : manifest.identities) known.emplace(e.identity_id, true);
  std::vector<std::string> out;
  for (const auto& id : set.identity_ids())
    if (!known.contains(id) && std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  return out;
}

std::vector<std::size_t> require_one_per_identity(const EmbeddingSet& set) {
  std::unordered_map<std::string_view, std::size_t> seen;
  std::vector<std::size_t> rows;
  rows.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto [it, inserted] = seen.emplace(set.identity_id(i), i);
    if (!inserted)
      throw ValidationError("duplicate identity id '" + set.identity_id(i) +
                            "': expected exactly one document vector per identity");
    rows.push_back(i);
  }
  return rows;
}

}  // namespace idcurate::embed
