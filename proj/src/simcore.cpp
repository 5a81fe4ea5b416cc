#include "idcurate/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "idcurate/error.hpp"
#include "io_util.hpp"

namespace idcurate::sim {

using detail::ordered_json;

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw ValidationError("cosine_similarity: dim mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return std::clamp(acc, -1.0, 1.0);
}

kernels::MatrixView matrix_view(const embed::EmbeddingSet& set) {
  return {set.data(), set.size(), set.dim()};
}

void pairwise_document_similarities(const embed::EmbeddingSet& docs, const BlockOptions& opts,
                                    const std::function<void(std::span<const PairScore>)>& sink) {
  embed::require_one_per_identity(docs);
  kernels::omp::stream_upper_triangle(matrix_view(docs), opts, sink);
}

std::vector<float> impostor_scores(const embed::EmbeddingSet& set, const BlockOptions& opts) {
  // Identity ids mapped to integers once; the sink only compares labels.
  std::unordered_map<std::string_view, std::uint32_t> label_of;
  std::vector<std::uint32_t> labels(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    labels[i] = label_of.emplace(set.identity_id(i), static_cast<std::uint32_t>(label_of.size())).first->second;
  std::vector<float> out;
  kernels::omp::stream_upper_triangle(matrix_view(set), opts, [&](std::span<const PairScore> tile) {
    for (const auto& p : tile)
      if (labels[p.i] != labels[p.j]) out.push_back(p.score);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

ThresholdCalibration calibrate_threshold(std::span<const double> scores, double fmr_target) {
  if (scores.empty()) throw ValidationError("calibrate_threshold: empty impostor score list");
  if (!(fmr_target >= 0.0 && fmr_target <= 1.0))
    throw ValidationError("calibrate_threshold: fmr_target must lie in [0, 1]");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted)
    if (!std::isfinite(s)) throw ValidationError("calibrate_threshold: non-finite impostor score");
  std::sort(sorted.begin(), sorted.end());

  const std::size_t n = sorted.size();
  const auto above = [&](std::size_t idx_of_value) {
    // count of scores strictly greater than sorted[idx_of_value]
    const auto ub = std::upper_bound(sorted.begin(), sorted.end(), sorted[idx_of_value]);
    return static_cast<std::size_t>(sorted.end() - ub);
  };
  // The exceedance count falls as t rises, so the feasible distinct values
  // form a suffix; binary search for its first element.
  std::size_t lo = 0, hi = n - 1;  // sorted[n-1] is always feasible
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (static_cast<double>(above(mid)) / static_cast<double>(n) <= fmr_target)
      hi = mid;
    else
      lo = mid + 1;
  }
  const double t = sorted[lo];
  const std::size_t exceed = above(lo);

  ThresholdCalibration cal;
  cal.fmr_target = fmr_target;
  cal.threshold = t;
  cal.impostor_count = n;
  cal.false_matches = exceed;
  cal.achieved_fmr = static_cast<double>(exceed) / static_cast<double>(n);
  return cal;
}

std::string calibration_to_json(const std::vector<ThresholdCalibration>& cals) {
  ordered_json root = ordered_json::array();
  for (const auto& c : cals) {
    ordered_json j;
    j["fmr_target"] = c.fmr_target;
    j["threshold"] = c.threshold;
    j["impostor_count"] = c.impostor_count;
    j["false_matches"] = c.false_matches;
    j["achieved_fmr"] = c.achieved_fmr;
    root.push_back(std::move(j));
  }
  return root.dump(2) + "\n";
}

std::vector<double> load_scores(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_text_file(path));
  std::vector<double> out;
  std::size_t column = 0;
  std::size_t start = 0;
  if (!lines.empty()) {
    double probe;
    const auto head = detail::split_csv_line(lines[0]);
    if (head.size() > 1 || !detail::parse_double(head[0], probe)) {
      auto it = std::find(head.begin(), head.end(), "score");
      if (it == head.end()) throw ParseError(path.string() + ": header has no 'score' column", 1, 1);
      column = static_cast<std::size_t>(it - head.begin());
      start = 1;
    }
  }
  for (std::size_t ln = start; ln < lines.size(); ++ln) {
    if (lines[ln].find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(lines[ln]);
    double v;
    if (column >= fields.size() || !detail::parse_double(fields[column], v) || !std::isfinite(v))
      throw ParseError(path.string() + ": bad score", ln + 1, 1);
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph

ScoreSum ScoreSum::of(float score) {
  ScoreSum s;
  s.raw_ = static_cast<__int128>(std::ldexp(static_cast<double>(score), kFractionBits));
  return s;
}

double ScoreSum::value() const {
  return std::ldexp(static_cast<double>(static_cast<long double>(raw_)), -kFractionBits);
}

void finalize_graph(FalseMatchGraph& g) {
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& x, const Edge& y) { return x.a != y.a ? x.a < y.a : x.b < y.b; });
  g.degree.assign(g.nodes.size(), 0);
  g.simsum.assign(g.nodes.size(), ScoreSum{});
  for (const auto& e : g.edges) {
    ++g.degree[e.a];
    ++g.degree[e.b];
    g.simsum[e.a] += ScoreSum::of(e.score);
    g.simsum[e.b] += ScoreSum::of(e.score);
  }
}

std::vector<std::string> check_graph(const FalseMatchGraph& g) {
  std::vector<std::string> problems;
  const std::size_t n = g.nodes.size();
  if (g.degree.size() != n || g.simsum.size() != n) problems.push_back("degree/simsum size differs from node count");
  std::vector<std::uint32_t> deg(n, 0);
  std::vector<double> sum(n, 0.0);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    if (e.a >= n || e.b >= n) {
      problems.push_back("edge " + std::to_string(k) + " references a missing node");
      continue;
    }
    if (e.a == e.b) problems.push_back("self-edge on " + g.nodes[e.a]);
    if (e.a > e.b) problems.push_back("edge " + std::to_string(k) + " not stored with a < b");
    if (!(static_cast<double>(e.score) > g.threshold))
      problems.push_back("edge " + g.nodes[e.a] + "-" + g.nodes[e.b] + " does not exceed the threshold");
    if (k > 0 && g.edges[k - 1].a == e.a && g.edges[k - 1].b == e.b)
      problems.push_back("duplicate edge " + g.nodes[e.a] + "-" + g.nodes[e.b]);
    ++deg[e.a];
    ++deg[e.b];
    sum[e.a] += e.score;
    sum[e.b] += e.score;
  }
  if (g.degree.size() == n && g.simsum.size() == n)
    for (std::size_t i = 0; i < n; ++i) {
      if (deg[i] != g.degree[i]) problems.push_back("degree mismatch at " + g.nodes[i]);
      if (std::abs(sum[i] - g.simsum[i].value()) > 1e-9) problems.push_back("simsum mismatch at " + g.nodes[i]);
    }
  return problems;
}

FalseMatchGraph build_false_match_graph(const embed::EmbeddingSet& docs, double threshold, const BlockOptions& opts) {
  embed::require_one_per_identity(docs);
  FalseMatchGraph g;
  g.threshold = threshold;
  g.nodes = docs.identity_ids();
  for (const auto& p : kernels::omp::pairs_above(matrix_view(docs), threshold, opts))
    g.edges.push_back({p.i, p.j, p.score});
  finalize_graph(g);
  return g;
}

double dataset_fmr(std::size_t edge_count, std::size_t n) {
  if (n < 2) return 0.0;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(edge_count) / pairs;
}

double dataset_fmr(const FalseMatchGraph& graph, std::size_t n) { return dataset_fmr(graph.edges.size(), n); }

std::string edges_to_csv(const FalseMatchGraph& g) {
  std::string out = "id_a,id_b,score\n";
  for (const auto& e : g.edges) {
    out += detail::csv_escape(g.nodes[e.a]);
    out += ',';
    out += detail::csv_escape(g.nodes[e.b]);
    out += ',';
    out += detail::format_float(e.score);
    out += '\n';
  }
  return out;
}

std::string graph_to_json(const FalseMatchGraph& g) {
  // Scores are written as shortest round-trip float text so reloading is exact.
  std::string out = "{\"threshold\":" + detail::format_double(g.threshold) + ",\"nodes\":";
  out += ordered_json(g.nodes).dump();
  out += ",\"edges\":[";
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    if (k) out += ',';
    out += '[' + std::to_string(e.a) + ',' + std::to_string(e.b) + ',' + detail::format_float(e.score) + ']';
  }
  out += "]}\n";
  return out;
}

FalseMatchGraph graph_from_json(std::string_view text, const std::string& source) {
  const ordered_json root = detail::parse_json(text, source);
  FalseMatchGraph g;
  g.threshold = detail::require_number(root, "threshold", source);
  const auto& nodes = detail::require(root, "nodes", source);
  if (!nodes.is_array()) throw ValidationError(source + ".nodes: expected array");
  g.nodes = nodes.get<std::vector<std::string>>();
  const auto& edges = detail::require(root, "edges", source);
  if (!edges.is_array()) throw ValidationError(source + ".edges: expected array");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned() ||
        !e[2].is_number())
      throw ValidationError(source + ".edges[" + std::to_string(k) + "]: expected [a, b, score]");
    auto a = e[0].get<std::uint32_t>(), b = e[1].get<std::uint32_t>();
    if (a > b) std::swap(a, b);
    g.edges.push_back({a, b, e[2].get<float>()});
  }
  finalize_graph(g);
  const auto problems = check_graph(g);
  if (!problems.empty()) throw ValidationError(source + ": invalid graph: " + problems.front());
  return g;
}

FalseMatchGraph load_graph(const std::filesystem::path& path) {
  return graph_from_json(detail::read_text_file(path), path.string());
}

}  // namespace idcurate::sim
