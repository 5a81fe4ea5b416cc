#include "idcurate/curate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "idcurate/error.hpp"
#include "io_util.hpp"

namespace idcurate::curate {

using detail::ordered_json;
using sim::FalseMatchGraph;
using sim::ScoreSum;

double false_match_probability(double fmr, std::uint64_t n) {
  if (n <= 1 || fmr <= 0.0) return 0.0;
  if (fmr >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(n - 1) * std::log1p(-fmr));
}

namespace {

void check_target(double fmr_target) {
  if (!(fmr_target >= 0.0 && fmr_target <= 1.0))
    throw ValidationError("fmr_target must lie in [0, 1], got " + detail::format_double(fmr_target));
}

struct Neighbor {
  std::uint32_t node;
  ScoreSum score;
};

/// CSR adjacency plus the mutable degree/simsum state of the remaining graph.
struct WorkingGraph {
  std::vector<std::size_t> offsets;
  std::vector<Neighbor> adj;
  std::vector<std::uint32_t> degree;
  std::vector<ScoreSum> simsum;
  std::vector<char> alive;
  std::size_t edges = 0;
  std::size_t remaining = 0;

  explicit WorkingGraph(const FalseMatchGraph& g)
      : degree(g.degree), simsum(g.simsum), alive(g.nodes.size(), 1), edges(g.edges.size()), remaining(g.nodes.size()) {
    const std::size_t n = g.nodes.size();
    offsets.assign(n + 1, 0);
    for (const auto& e : g.edges) {
      ++offsets[e.a + 1];
      ++offsets[e.b + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    adj.resize(offsets[n]);
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (const auto& e : g.edges) {
      adj[fill[e.a]++] = {e.b, ScoreSum::of(e.score)};
      adj[fill[e.b]++] = {e.a, ScoreSum::of(e.score)};
    }
  }

  double fmr() const { return sim::dataset_fmr(edges, remaining); }

  /// Deletes v and its incident edges; before(u)/after(u) bracket each
  /// update of a live neighbour.
  template <class Before, class After>
  void remove(std::uint32_t v, Before&& before, After&& after) {
    alive[v] = 0;
    --remaining;
    edges -= degree[v];
    for (std::size_t k = offsets[v]; k < offsets[v + 1]; ++k) {
      const auto [u, s] = adj[k];
      if (!alive[u]) continue;
      before(u);
      --degree[u];
      simsum[u] -= s;
      after(u);
    }
    degree[v] = 0;
    simsum[v] = ScoreSum{};
  }
};

std::vector<std::uint32_t> id_ranks(const FalseMatchGraph& g) {
  std::vector<std::uint32_t> order(g.nodes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return g.nodes[a] != g.nodes[b] ? g.nodes[a] < g.nodes[b] : a < b;
  });
  std::vector<std::uint32_t> rank(g.nodes.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

FilterReport start_report(const FalseMatchGraph& g, const char* method, double target) {
  FilterReport r;
  r.method = method;
  r.threshold = g.threshold;
  r.fmr_target = target;
  r.initial_identities = g.nodes.size();
  r.initial_edges = g.edges.size();
  r.fmr_trace.push_back(sim::dataset_fmr(g.edges.size(), g.nodes.size()));
  return r;
}

void finish_report(FilterReport& r, const FalseMatchGraph& g, const WorkingGraph& w) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (w.alive[i]) r.retained.push_back(g.nodes[i]);
  r.iterations = r.removed.size();
}

}  // namespace

FilterReport filter_to_fmr_target(const FalseMatchGraph& g, double fmr_target) {
  check_target(fmr_target);
  FilterReport report = start_report(g, "fmr_target", fmr_target);
  WorkingGraph w(g);
  const auto rank = id_ranks(g);

  // Best candidate first: highest degree, then highest simsum, then lowest rank.
  struct Key {
    std::uint32_t degree;
    ScoreSum simsum;
    std::uint32_t rank;
    std::uint32_t node;
    bool operator<(const Key& o) const {
      if (degree != o.degree) return degree > o.degree;
      if (simsum != o.simsum) return simsum > o.simsum;
      return rank < o.rank;
    }
  };
  auto key = [&](std::uint32_t v) { return Key{w.degree[v], w.simsum[v], rank[v], v}; };
  std::set<Key> queue;
  for (std::uint32_t v = 0; v < g.nodes.size(); ++v)
    if (w.degree[v] > 0) queue.insert(key(v));

  while (w.fmr() > fmr_target) {
    // fmr > target >= 0 implies at least one edge, so the queue is non-empty.
    const Key top = *queue.begin();
    queue.erase(queue.begin());
    report.removed.push_back({g.nodes[top.node], top.node, top.degree, top.simsum.value()});
    w.remove(
        top.node, [&](std::uint32_t u) { queue.erase(key(u)); },
        [&](std::uint32_t u) {
          if (w.degree[u] > 0) queue.insert(key(u));
        });
    report.fmr_trace.push_back(w.fmr());
  }
  finish_report(report, g, w);
  return report;
}

FilterReport strict_filter(const FalseMatchGraph& g) {
  FilterReport report = start_report(g, "strict", 0.0);
  WorkingGraph w(g);
  for (std::uint32_t v = 0; v < g.nodes.size(); ++v) {
    if (g.degree[v] == 0) continue;
    report.removed.push_back({g.nodes[v], v, w.degree[v], w.simsum[v].value()});
    w.remove(v, [](std::uint32_t) {}, [](std::uint32_t) {});
    report.fmr_trace.push_back(w.fmr());
  }
  finish_report(report, g, w);
  return report;
}

std::string report_to_json(const FilterReport& r) {
  ordered_json j;
  j["method"] = r.method;
  j["threshold"] = r.threshold;
  if (r.method == "fmr_target") j["fmr_target"] = r.fmr_target;
  j["initial_identities"] = r.initial_identities;
  j["initial_edges"] = r.initial_edges;
  j["iterations"] = r.iterations;
  j["retained_count"] = r.retained.size();
  j["retained_fraction"] = r.initial_identities ? static_cast<double>(r.retained.size()) / r.initial_identities : 0.0;
  j["initial_fmr"] = r.fmr_trace.front();
  j["final_fmr"] = r.final_fmr();
  j["removed"] = ordered_json::array();
  for (const auto& m : r.removed) {
    ordered_json e;
    e["identity_id"] = m.identity_id;
    e["degree"] = m.degree;
    e["simsum"] = m.simsum;
    j["removed"].push_back(std::move(e));
  }
  j["fmr_trace"] = r.fmr_trace;
  return j.dump(2) + "\n";
}

std::string retained_to_text(const FilterReport& r) {
  std::string out;
  for (const auto& id : r.retained) {
    out += id;
    out += '\n';
  }
  return out;
}

std::vector<LeakageMatch> leakage_check(const embed::EmbeddingSet& synthetic, const embed::EmbeddingSet& training,
                                        double threshold, const sim::BlockOptions& opts) {
  if (!synthetic.empty() && !training.empty() && synthetic.dim() != training.dim())
    throw ValidationError("leakage_check: dim mismatch (" + std::to_string(synthetic.dim()) + " vs " +
                          std::to_string(training.dim()) + ")");
  auto pairs = kernels::omp::cross_above(sim::matrix_view(synthetic), sim::matrix_view(training), threshold, opts);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const sim::PairScore& a, const sim::PairScore& b) { return a.score > b.score; });
  std::vector<LeakageMatch> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({synthetic.identity_id(p.i), synthetic.image_id(p.i), training.identity_id(p.j),
                   training.image_id(p.j), p.score});
  return out;
}

std::string leakage_to_csv(const std::vector<LeakageMatch>& matches) {
  std::string out = "synthetic_id,synthetic_image,training_id,training_image,score\n";
  for (const auto& m : matches) {
    out += detail::csv_escape(m.synthetic_id) + ',' + detail::csv_escape(m.synthetic_image) + ',' +
           detail::csv_escape(m.training_id) + ',' + detail::csv_escape(m.training_image) + ',' +
           detail::format_float(m.score) + '\n';
  }
  return out;
}

}  // namespace idcurate::curate
