#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idcurate/attr_model.hpp"
#include "idcurate/embed_io.hpp"

namespace idcurate::eval {

struct ScoreSample {
  std::vector<double> mated;
  std::vector<double> nonmated;
  std::size_t impostors_per_doc = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> skipped;  // document identities without live images

  bool operator==(const ScoreSample&) const = default;
};

/// Mated: every (document, own live image) pair. Non-mated: for each
/// document, one uniformly chosen live image from each of
/// min(impostors_per_doc, N - 1) other identities drawn without replacement.
/// Each document draws from its own stream derive_seed(seed, doc_row), so the
/// sample is independent of `threads`.
ScoreSample mated_nonmated_scores(const embed::EmbeddingSet& docs, const embed::EmbeddingSet& lives,
                                  std::size_t impostors_per_doc = 100, std::uint64_t seed = 0, int threads = 0);

/// CSV `kind,score` with kind in {mated, nonmated}.
std::string scores_to_csv(const ScoreSample& sample);
ScoreSample scores_from_csv(std::string_view text, const std::string& source = "scores");
ScoreSample load_score_sample(const std::filesystem::path& path);

struct ScoreHistogram {
  std::vector<double> bin_edges;       // bins + 1, strictly increasing
  std::vector<std::uint64_t> counts;   // bins
  std::vector<double> density;         // counts / total
  std::uint64_t clamped_low = 0;       // scores below the range, counted in bin 0
  std::uint64_t clamped_high = 0;      // scores above the range, counted in the last bin

  std::uint64_t total() const;
};

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kDefaultLow = -0.2;
inline constexpr double kDefaultHigh = 1.0;

/// Uniform bins over [lo, hi]; the last bin includes hi.
ScoreHistogram histogram(std::span<const double> scores, std::size_t bins = kDefaultBins, double lo = kDefaultLow,
                         double hi = kDefaultHigh);

std::string histogram_to_json(const ScoreHistogram& h);

/// Natural-log KL(p || q) after adding epsilon to every bin of both
/// densities and renormalizing. Throws ValidationError if edges differ.
double kl_divergence(const ScoreHistogram& p, const ScoreHistogram& q, double epsilon = 1e-10);

struct ShiftEntry {
  std::string class_name;
  std::string attribute;
  std::size_t count_before = 0;
  std::size_t count_after = 0;
  double share_before = 0.0;
  double share_after = 0.0;
  double delta = 0.0;
};

struct ShiftReport {
  std::size_t profiles_before = 0;
  std::size_t profiles_after = 0;
  std::vector<ShiftEntry> entries;  // class order, then attribute order
};

/// Shares are fractions of all profiles (before) and of retained profiles
/// (after), so a class absent from some profiles sums to less than 1.
/// With `config`, ordering follows the config and unseen attributes appear
/// with zero counts; otherwise order of first appearance.
ShiftReport attribute_shift_report(const std::vector<attr::IdentityProfile>& profiles,
                                   const std::vector<std::string>& retained_ids,
                                   const attr::AttributeConfig* config = nullptr);

std::string shift_to_json(const ShiftReport& report);
std::string shift_to_csv(const ShiftReport& report);

struct LabeledSet {
  std::string label;
  const embed::EmbeddingSet* set;
};

/// CSV `dataset_label,identity_id,v0..v{dim-1}`, sets in the given order.
std::string projection_csv(const std::vector<LabeledSet>& sets);
void export_for_projection(const std::vector<LabeledSet>& sets, const std::filesystem::path& path);

struct ProjectionRow {
  std::string label;
  std::string identity_id;
  std::vector<float> vector;
};
std::vector<ProjectionRow> load_projection_csv(const std::filesystem::path& path);

// Plain SVG renderings for quick inspection.
std::string histograms_svg(const std::vector<std::pair<std::string, ScoreHistogram>>& series,
                           const std::string& title);
std::string shift_svg(const ShiftReport& report, const std::string& class_name);

}  // namespace idcurate::eval
