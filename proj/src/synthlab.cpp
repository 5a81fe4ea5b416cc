#include "idcurate/synthlab.hpp"

#include <cmath>

#include "idcurate/error.hpp"
#include "idcurate/rng.hpp"

namespace idcurate::synth {

void validate_spec(const ClusterSpec& spec) {
  if (spec.dim < 2) throw ValidationError("cluster spec: dim must be >= 2");
  if (!(spec.intra_noise >= 0.0)) throw ValidationError("cluster spec: intra_noise must be >= 0");
  for (const auto& g : spec.groups) {
    if (g.label.empty()) throw ValidationError("cluster spec: group label is empty");
    if (!(g.intra_noise >= 0.0)) throw ValidationError("cluster spec: group '" + g.label + "' has negative noise");
    if (!std::isfinite(g.center_spread)) throw ValidationError("cluster spec: group '" + g.label + "' spread");
  }
}

namespace {

void gaussian_fill(Rng& rng, std::vector<double>& v) {
  for (double& x : v) x = rng.gaussian();
}

std::vector<float> to_unit(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k] / norm);
  embed::normalize(out);  // settle float rounding
  return out;
}

std::string image_id(const std::string& identity, embed::Role role, std::size_t k) {
  return identity + "_" + std::string(embed::to_string(role)) + "_" + std::to_string(k);
}

}  // namespace

Fixture generate_clusters(const ClusterSpec& spec, int threads) {
  validate_spec(spec);
  std::vector<GroupSpec> groups = spec.groups;
  if (groups.empty()) groups.push_back({"all", spec.n_identities, spec.intra_noise, 0.0});

  const std::size_t dim = spec.dim;
  std::vector<std::vector<double>> anchors(groups.size(), std::vector<double>(dim));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Rng rng(derive_seed(~spec.seed, g));
    gaussian_fill(rng, anchors[g]);
    const auto unit = to_unit(anchors[g]);
    for (std::size_t k = 0; k < dim; ++k) anchors[g][k] = unit[k];
  }

  std::vector<std::size_t> group_of;
  for (std::size_t g = 0; g < groups.size(); ++g) group_of.insert(group_of.end(), groups[g].count, g);
  const std::size_t n = group_of.size();

  struct Identity {
    std::vector<float> center;
    std::map<embed::Role, std::vector<std::vector<float>>> images;
  };
  std::vector<Identity> ids(n);
  const int nt = threads > 0 ? threads : 1;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (std::int64_t si = 0; si < static_cast<std::int64_t>(n); ++si) {
    const auto i = static_cast<std::size_t>(si);
    const GroupSpec& grp = groups[group_of[i]];
    Rng rng(derive_seed(spec.seed, i));
    std::vector<double> v(dim);
    gaussian_fill(rng, v);
    if (grp.center_spread > 0.0)
      for (std::size_t k = 0; k < dim; ++k) v[k] = anchors[group_of[i]][k] + grp.center_spread * v[k];
    ids[i].center = to_unit(v);
    for (const auto& [role, count] : spec.images_per_identity) {
      auto& imgs = ids[i].images[role];
      for (std::size_t c = 0; c < count; ++c) {
        gaussian_fill(rng, v);
        for (std::size_t k = 0; k < dim; ++k) v[k] = ids[i].center[k] + grp.intra_noise * v[k];
        imgs.push_back(grp.intra_noise == 0.0 ? ids[i].center : to_unit(v));
      }
    }
  }

  Fixture fx;
  for (const auto& [role, count] : spec.images_per_identity) fx.sets.emplace(role, embed::EmbeddingSet(dim, role));
  fx.manifest.profiles_path = "profiles.jsonl";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = attr::format_identity_id(i);
    embed::ManifestEntry entry{id, {}};
    for (auto& [role, imgs] : ids[i].images) {
      auto& names = entry.images[std::string(embed::to_string(role))];
      for (std::size_t c = 0; c < imgs.size(); ++c) {
        names.push_back(image_id(id, role, c));
        fx.sets.at(role).add_unit(id, names.back(), imgs[c]);
      }
    }
    fx.manifest.identities.push_back(std::move(entry));

    attr::IdentityProfile p;
    p.id = id;
    p.generation_index = i;
    p.seed = derive_seed(spec.seed, i);
    p.selections.emplace_back(spec.group_class, groups[group_of[i]].label);
    p.prompt = spec.group_class + " " + groups[group_of[i]].label;
    fx.profiles.push_back(std::move(p));
    fx.centers.push_back(std::move(ids[i].center));
  }
  return fx;
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  for (const auto& [role, set] : fx.sets)
    embed::save_embeddings(set, dir / (std::string(embed::to_string(role)) + ".emb"), embed::Format::binary);
  embed::save_manifest(fx.manifest, dir / "manifest.json");
  attr::write_profiles_jsonl(dir / "profiles.jsonl", fx.profiles);
}

}  // namespace idcurate::synth
