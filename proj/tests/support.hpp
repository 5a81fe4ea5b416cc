#pragma once

#include <algorithm>
#include <atomic>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdio>
#include <unistd.h>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "idcurate/attr_model.hpp"
#include "idcurate/curate.hpp"
#include "idcurate/embed_io.hpp"
#include "idcurate/rng.hpp"
#include "idcurate/simcore.hpp"
#include "idcurate/synthlab.hpp"

namespace testing {

namespace fs = std::filesystem;
using idcurate::Rng;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("idcurate_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = static_cast<float>(rng.gaussian());
    sq += double(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(sq));
  return v;
}

/// One vector per identity, ids "n0000", "n0001", ...
inline idcurate::embed::EmbeddingSet random_docs(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  idcurate::embed::EmbeddingSet set(dim, idcurate::embed::Role::document);
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "n%04zu", i);
    set.add(id, std::string(id) + "_doc", random_unit(rng, dim));
  }
  return set;
}

/// Naive dot product: 64-bit accumulation of 32-bit inputs, clamped.
inline float brute_score(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  const double d = std::clamp(acc, -1.0, 1.0);
  return static_cast<float>(d);
}

/// Random graph whose scores are drawn from `levels` distinct values above
/// the threshold, so that degree and simsum ties are frequent.
inline idcurate::sim::FalseMatchGraph random_graph(Rng& rng, std::size_t n, double density, int levels,
                                                   double threshold = 0.5) {
  idcurate::sim::FalseMatchGraph g;
  g.threshold = threshold;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("v" + std::to_string(perm[i]));
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b)
      if (rng.uniform() < density) {
        const double u = levels > 0 ? double(1 + rng.below(levels)) / levels : rng.uniform();
        const float s = static_cast<float>(threshold + (1.0 - threshold) * u);
        g.edges.push_back({a, b, std::max(s, std::nextafter(static_cast<float>(threshold), 2.0f))});
      }
  idcurate::sim::finalize_graph(g);
  return g;
}

/// Exact rational simsum: every float is an integer multiple of 2^-149.
using BigInt = boost::multiprecision::int256_t;
inline BigInt exact_scaled(float f) {
  int exp = 0;
  const double m = std::frexp(static_cast<double>(f), &exp);  // f = m * 2^exp, |m| in [0.5, 1)
  const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  BigInt v = mant;
  const int shift = exp - 53 + 149;
  if (shift >= 0)
    v <<= shift;
  else
    v >>= -shift;  // not reached for float inputs
  return v;
}

struct NaiveStep {
  std::string id;
  std::uint32_t degree;
};

struct NaiveResult {
  std::vector<NaiveStep> removed;
  std::vector<double> trace;
  std::vector<std::string> retained;
};

/// Greedy reference: every iteration rebuilds degrees and simsums from the
/// surviving edge list and rescans all nodes.
inline NaiveResult naive_greedy(const idcurate::sim::FalseMatchGraph& g, double target) {
  const std::size_t n = g.nodes.size();
  std::vector<bool> alive(n, true);
  std::size_t alive_count = n;
  NaiveResult r;
  auto fmr = [&](std::size_t edges) {
    if (alive_count < 2) return 0.0;
    return double(edges) / (double(alive_count) * double(alive_count - 1) / 2.0);
  };
  for (;;) {
    std::vector<std::uint32_t> deg(n, 0);
    std::vector<BigInt> sum(n, 0);
    std::size_t edges = 0;
    for (const auto& e : g.edges) {
      if (!alive[e.a] || !alive[e.b]) continue;
      ++edges;
      ++deg[e.a];
      ++deg[e.b];
      const BigInt s = exact_scaled(e.score);
      sum[e.a] += s;
      sum[e.b] += s;
    }
    r.trace.push_back(fmr(edges));
    if (r.trace.back() <= target) break;
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      if (best == n || deg[v] > deg[best] || (deg[v] == deg[best] && sum[v] > sum[best]) ||
          (deg[v] == deg[best] && sum[v] == sum[best] && g.nodes[v] < g.nodes[best]))
        best = v;
    }
    r.removed.push_back({g.nodes[best], deg[best]});
    alive[best] = false;
    --alive_count;
  }
  for (std::size_t v = 0; v < n; ++v)
    if (alive[v]) r.retained.push_back(g.nodes[v]);
  return r;
}

/// Random config with random clash rules; every reference is valid.
inline idcurate::attr::AttributeConfig random_config(Rng& rng) {
  using namespace idcurate::attr;
  AttributeConfig c;
  const std::size_t classes = 2 + rng.below(6);
  for (std::size_t i = 0; i < classes; ++i) {
    AttributeClass cls;
    cls.name = "c" + std::to_string(i);
    const auto kind = rng.below(4);
    cls.inclusion_probability = kind == 0 ? 1.0 : kind == 1 ? 0.0 : rng.uniform();
    const std::size_t attrs = 1 + rng.below(5);
    for (std::size_t a = 0; a < attrs; ++a)
      cls.attributes.push_back({cls.name + "a" + std::to_string(a), 0.05 + rng.uniform() * 3.0});
    c.classes.push_back(std::move(cls));
  }
  const std::size_t rules = rng.below(8);
  for (std::size_t r = 0; r < rules; ++r) {
    const auto tc = rng.below(classes);
    const auto& tcls = c.classes[tc];
    ClashRule rule;
    rule.trigger = {tcls.name, tcls.attributes[rng.below(tcls.attributes.size())].label};
    const std::size_t ex = 1 + rng.below(3);
    for (std::size_t k = 0; k < ex; ++k) {
      auto ec = rng.below(classes);
      if (ec == tc) ec = (ec + 1) % classes;
      const auto& ecls = c.classes[ec];
      if (rng.below(2) == 0)
        rule.excluded.push_back({ecls.name, std::nullopt});
      else
        rule.excluded.push_back({ecls.name, ecls.attributes[rng.below(ecls.attributes.size())].label});
    }
    c.clash_rules.push_back(std::move(rule));
  }
  return c;
}

/// Independent clash check written against the rule definition.
inline bool clash_free(const idcurate::attr::AttributeConfig& c, const idcurate::attr::IdentityProfile& p) {
  std::map<std::string, std::string> sel(p.selections.begin(), p.selections.end());
  for (const auto& rule : c.clash_rules) {
    auto t = sel.find(rule.trigger.class_name);
    if (t == sel.end() || t->second != *rule.trigger.attribute) continue;
    for (const auto& ex : rule.excluded) {
      auto e = sel.find(ex.class_name);
      if (e == sel.end()) continue;
      if (!ex.attribute || *ex.attribute == e->second) return false;
    }
  }
  return true;
}

}  // namespace testing
