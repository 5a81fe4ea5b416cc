#include <cmath>

#include "doctest.h"
#include "idcurate/curate.hpp"
#include "idcurate/error.hpp"
#include "idcurate/evalkit.hpp"
#include "idcurate/synthlab.hpp"
#include "support.hpp"

using namespace idcurate;
using namespace idcurate::synth;
using embed::Role;

namespace {

std::pair<double, double> mean_scores(const Fixture& fx) {
  const auto s = eval::mated_nonmated_scores(fx.sets.at(Role::document), fx.sets.at(Role::live_LL), 100, 1);
  auto mean = [](const std::vector<double>& v) {
    double t = 0;
    for (double x : v) t += x;
    return t / v.size();
  };
  return {mean(s.mated), mean(s.nonmated)};
}

ClusterSpec basic(double noise, std::uint64_t seed = 5) {
  ClusterSpec spec;
  spec.n_identities = 50;
  spec.dim = 64;
  spec.intra_noise = noise;
  spec.seed = seed;
  spec.images_per_identity = {{Role::document, 1}, {Role::live_LL, 2}};
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  auto s = basic(0.1);
  s.dim = 1;
  CHECK_THROWS_AS(generate_clusters(s), ValidationError);
  s = basic(-0.1);
  CHECK_THROWS_AS(generate_clusters(s), ValidationError);
  s = basic(0.1);
  s.groups.push_back({"", 3, 0.1, 0.0});
  CHECK_THROWS_AS(generate_clusters(s), ValidationError);
}

TEST_CASE("zero noise images equal their centers") {
  const auto fx = generate_clusters(basic(0.0));
  const auto& lives = fx.sets.at(Role::live_LL);
  REQUIRE(lives.size() == 100);
  const auto s = eval::mated_nonmated_scores(fx.sets.at(Role::document), lives, 10, 1);
  for (double m : s.mated) CHECK(m == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t i = 0; i < lives.size(); ++i) {
    const auto& c = fx.centers[i / 2];
    CHECK(std::equal(c.begin(), c.end(), lives.row(i).begin()));
  }
}

TEST_CASE("unit norms, ids, profiles and manifest") {
  ClusterSpec spec = basic(0.2);
  spec.groups = {{"F", 10, 0.3, 0.5}, {"M", 15, 0.1, 0.0}};
  const auto fx = generate_clusters(spec);
  CHECK(fx.profiles.size() == 25);
  CHECK(fx.manifest.identities.size() == 25);
  for (const auto& [role, set] : fx.sets) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      double sq = 0;
      for (float x : set.row(i)) sq += double(x) * x;
      REQUIRE(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
    }
    CHECK(embed::unknown_identities(fx.manifest, set).empty());
  }
  CHECK(*fx.profiles[0].selection("group") == "F");
  CHECK(*fx.profiles[24].selection("group") == "M");
  CHECK(fx.profiles[3].id == attr::format_identity_id(3));
  CHECK(fx.sets.at(Role::live_LL).image_id(1) == "id_000000_live_LL_1");
}

TEST_CASE("determinism") {
  testing::TempDir a("fxa"), b("fxb");
  auto spec = basic(0.1, 42);
  write_fixture(generate_clusters(spec, 1), a.path());
  write_fixture(generate_clusters(spec, 3), b.path());
  for (const char* f : {"document.emb", "live_LL.emb", "manifest.json", "profiles.jsonl"})
    CHECK(testing::slurp(a / f) == testing::slurp(b / f));
  spec.seed = 43;
  write_fixture(generate_clusters(spec), b.path());
  CHECK(testing::slurp(a / "document.emb") != testing::slurp(b / "document.emb"));
}

TEST_CASE("mated above non-mated, and noise lowers mated") {
  const auto [m, n] = mean_scores(generate_clusters(basic(0.1)));
  CHECK(m - n > 0.3);
  double prev = 2.0;
  for (double noise : {0.05, 0.1, 0.2}) {
    const double mated = mean_scores(generate_clusters(basic(noise))).first;
    CHECK(mated < prev);
    prev = mated;
  }
}

TEST_CASE("less spread group loses more identities to filtering") {
  ClusterSpec spec;
  spec.dim = 32;
  spec.seed = 9;
  spec.images_per_identity = {{Role::document, 1}};
  spec.groups = {{"tight", 150, 0.05, 0.35}, {"wide", 150, 0.05, 0.0}};
  const auto fx = generate_clusters(spec);
  const auto g = sim::build_false_match_graph(fx.sets.at(Role::document), 0.5);
  const auto r = curate::filter_to_fmr_target(g, 0.0005);
  std::size_t tight = 0, wide = 0;
  for (const auto& rem : r.removed) (rem.node < 150 ? tight : wide) += 1;
  CHECK(tight > 2 * wide);
  std::vector<std::string> keep = r.retained;
  const auto shift = eval::attribute_shift_report(fx.profiles, keep);
  CHECK(shift.entries[0].attribute == "tight");
  CHECK(shift.entries[0].delta < 0);
}
