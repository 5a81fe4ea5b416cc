#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "idcurate/embed_io.hpp"
#include "idcurate/kernels.hpp"

namespace idcurate::sim {

using kernels::BlockOptions;
using kernels::PairScore;

/// Dot product of two unit vectors, 64-bit accumulation, clamped to [-1, 1].
/// Throws ValidationError on a dim mismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

kernels::MatrixView matrix_view(const embed::EmbeddingSet& set);

/// Every unordered pair of document vectors exactly once, streamed tile by
/// tile. Indices refer to rows of `docs`. Requires one vector per identity.
void pairwise_document_similarities(const embed::EmbeddingSet& docs, const BlockOptions& opts,
                                    const std::function<void(std::span<const PairScore>)>& sink);

/// Scores of every image pair belonging to two different identities.
std::vector<float> impostor_scores(const embed::EmbeddingSet& set, const BlockOptions& opts = {});

// -- threshold calibration ------------------------------------------------

struct ThresholdCalibration {
  double fmr_target = 0.0;
  double threshold = 0.0;
  std::uint64_t impostor_count = 0;
  double achieved_fmr = 0.0;
  std::uint64_t false_matches = 0;  // scores strictly above threshold
};

/// Smallest observed score t with |{s > t}| / n <= fmr_target.
/// Throws ValidationError for an empty list, a non-finite score, or a
/// target outside [0, 1].
ThresholdCalibration calibrate_threshold(std::span<const double> impostor_scores, double fmr_target);

std::string calibration_to_json(const std::vector<ThresholdCalibration>& cals);

/// One score per line, or CSV with a `score` column (other columns ignored).
std::vector<double> load_scores(const std::filesystem::path& path);

// -- false-match graph -----------------------------------------------------

/// Exact fixed-point sum of scores (2^-110 resolution). Adding and later
/// subtracting the same score restores the previous value exactly, so
/// incremental maintenance never drifts from recomputation.
class ScoreSum {
 public:
  static constexpr int kFractionBits = 110;

  ScoreSum() = default;
  static ScoreSum of(float score);

  ScoreSum& operator+=(ScoreSum o) {
    raw_ += o.raw_;
    return *this;
  }
  ScoreSum& operator-=(ScoreSum o) {
    raw_ -= o.raw_;
    return *this;
  }
  auto operator<=>(const ScoreSum&) const = default;

  double value() const;

 private:
  __int128 raw_ = 0;
};

struct Edge {
  std::uint32_t a = 0;  // a < b, node indices
  std::uint32_t b = 0;
  float score = 0.0f;

  bool operator==(const Edge&) const = default;
};

struct FalseMatchGraph {
  double threshold = 0.0;
  std::vector<std::string> nodes;
  std::vector<Edge> edges;  // sorted by (a, b)
  std::vector<std::uint32_t> degree;
  std::vector<ScoreSum> simsum;

  std::size_t node_count() const { return nodes.size(); }
};

/// Fills degree/simsum from the edge list; sorts edges.
void finalize_graph(FalseMatchGraph& graph);

/// Human-readable invariant violations; empty when the graph is valid.
std::vector<std::string> check_graph(const FalseMatchGraph& graph);

FalseMatchGraph build_false_match_graph(const embed::EmbeddingSet& docs, double threshold,
                                        const BlockOptions& opts = {});

/// |edges| / (n (n-1) / 2); 0 when n < 2.
double dataset_fmr(std::size_t edge_count, std::size_t n_identities);
double dataset_fmr(const FalseMatchGraph& graph, std::size_t n_identities);

std::string edges_to_csv(const FalseMatchGraph& graph);
std::string graph_to_json(const FalseMatchGraph& graph);
FalseMatchGraph graph_from_json(std::string_view text, const std::string& source = "graph");
FalseMatchGraph load_graph(const std::filesystem::path& path);

}  // namespace idcurate::sim
