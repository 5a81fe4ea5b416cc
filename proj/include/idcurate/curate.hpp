#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcurate/embed_io.hpp"
#include "idcurate/simcore.hpp"

namespace idcurate::curate {

/// Probability that one identity falsely matches at least one of the other
/// n - 1 identities when each comparison has false-match rate `fmr`:
/// 1 - (1 - fmr)^(n - 1), evaluated as -expm1((n - 1) * log1p(-fmr)).
double false_match_probability(double fmr, std::uint64_t n);

struct Removal {
  std::string identity_id;
  std::uint32_t node = 0;
  std::uint32_t degree = 0;  // in the remaining graph at removal time
  double simsum = 0.0;

  bool operator==(const Removal&) const = default;
};

struct FilterReport {
  std::string method;  // "fmr_target" or "strict"
  double threshold = 0.0;
  double fmr_target = 0.0;
  std::size_t initial_identities = 0;
  std::size_t initial_edges = 0;
  std::vector<Removal> removed;
  std::vector<double> fmr_trace;  // initial value, then one entry per removal
  std::vector<std::string> retained;  // original node order
  std::size_t iterations = 0;

  double final_fmr() const { return fmr_trace.back(); }
};

/// Removes one identity at a time until the dataset-wide FMR of the
/// remaining set is <= fmr_target. The removed identity has the highest
/// current degree; ties go to the larger incident score sum, then to the
/// lexicographically smallest identity id. Throws ValidationError when
/// fmr_target is outside [0, 1].
FilterReport filter_to_fmr_target(const sim::FalseMatchGraph& graph, double fmr_target);

/// Removes every identity that has at least one above-threshold pair, in
/// node order. The retained set has dataset-wide FMR 0.
FilterReport strict_filter(const sim::FalseMatchGraph& graph);

std::string report_to_json(const FilterReport& report);
/// One retained id per line.
std::string retained_to_text(const FilterReport& report);

struct LeakageMatch {
  std::string synthetic_id;
  std::string synthetic_image;
  std::string training_id;
  std::string training_image;
  float score = 0.0f;
};

/// All cross-set pairs with score > threshold, highest score first (ties:
/// synthetic row, then training row). Throws ValidationError on a dim mismatch.
std::vector<LeakageMatch> leakage_check(const embed::EmbeddingSet& synthetic, const embed::EmbeddingSet& training,
                                        double threshold, const sim::BlockOptions& opts = {});

std::string leakage_to_csv(const std::vector<LeakageMatch>& matches);

}  // namespace idcurate::curate
