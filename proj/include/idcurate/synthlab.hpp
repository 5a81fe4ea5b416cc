#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "idcurate/attr_model.hpp"
#include "idcurate/embed_io.hpp"

namespace idcurate::synth {

/// A demographic-style subgroup. Centers of a group with center_spread > 0
/// are normalize(anchor + center_spread * g), g ~ N(0, I), around a random
/// group anchor; center_spread <= 0 draws centers uniformly on the sphere.
struct GroupSpec {
  std::string label;
  std::size_t count = 0;
  double intra_noise = 0.1;
  double center_spread = 0.0;
};

struct ClusterSpec {
  std::size_t n_identities = 0;  // used when groups is empty
  std::map<embed::Role, std::size_t> images_per_identity{{embed::Role::document, 1}};
  std::size_t dim = 64;
  double intra_noise = 0.1;  // per-component std before renormalization
  std::uint64_t seed = 0;
  std::vector<GroupSpec> groups;
  std::string group_class = "group";  // profile class holding the group label
};

/// Throws ValidationError when dim < 2 or a count/noise is invalid.
void validate_spec(const ClusterSpec& spec);

struct Fixture {
  embed::DatasetManifest manifest;
  std::map<embed::Role, embed::EmbeddingSet> sets;
  std::vector<attr::IdentityProfile> profiles;
  std::vector<std::vector<float>> centers;  // one unit center per identity
};

/// Image vector = normalize(center + intra_noise * g). Each identity draws
/// from derive_seed(seed, identity index); anchors from derive_seed(~seed, group).
Fixture generate_clusters(const ClusterSpec& spec, int threads = 0);

/// Writes <dir>/<role>.emb for every role, manifest.json and profiles.jsonl.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace idcurate::synth
