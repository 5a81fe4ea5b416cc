#include "idcurate/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "idcurate/error.hpp"
#include "idcurate/rng.hpp"
#include "idcurate/simcore.hpp"
#include "io_util.hpp"

namespace idcurate::eval {

using detail::ordered_json;

// ---------------------------------------------------------------------------
// Mated / non-mated protocol

ScoreSample mated_nonmated_scores(const embed::EmbeddingSet& docs, const embed::EmbeddingSet& lives,
                                  std::size_t impostors_per_doc, std::uint64_t seed, int threads) {
  if (!docs.empty() && !lives.empty() && docs.dim() != lives.dim())
    throw ValidationError("mated_nonmated_scores: dim mismatch between documents and live images");

  // Identities with live images, in first-appearance order.
  std::unordered_map<std::string_view, std::size_t> pool_index;
  std::vector<std::vector<std::size_t>> live_rows;
  for (std::size_t r = 0; r < lives.size(); ++r) {
    auto [it, inserted] = pool_index.emplace(lives.identity_id(r), live_rows.size());
    if (inserted) live_rows.emplace_back();
    live_rows[it->second].push_back(r);
  }
  const std::size_t pool = live_rows.size();

  struct PerDoc {
    std::vector<double> mated, nonmated;
    bool skipped = false;
  };
  std::vector<PerDoc> results(docs.size());
  const auto n = static_cast<std::int64_t>(docs.size());
  const int nt = threads > 0 ? threads : 1;

#pragma omp parallel for schedule(dynamic, 16) num_threads(nt) if (nt > 1)
  for (std::int64_t d = 0; d < n; ++d) {
    const auto row = static_cast<std::size_t>(d);
    PerDoc& out = results[row];
    auto it = pool_index.find(docs.identity_id(row));
    if (it == pool_index.end()) {
      out.skipped = true;
      continue;
    }
    const std::size_t own = it->second;
    const auto doc = docs.row(row);
    for (std::size_t lr : live_rows[own]) out.mated.push_back(sim::cosine_similarity(doc, lives.row(lr)));

    // Sparse partial Fisher-Yates over the other identities: virtual
    // position p maps to pool index p (p < own) or p + 1.
    Rng rng(derive_seed(seed, row));
    const std::size_t others = pool - 1;
    const std::size_t k = std::min(impostors_per_doc, others);
    std::unordered_map<std::size_t, std::size_t> swapped;
    auto at = [&](std::size_t p) {
      auto s = swapped.find(p);
      return s == swapped.end() ? p : s->second;
    };
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t pick = t + static_cast<std::size_t>(rng.below(others - t));
      const std::size_t chosen = at(pick);
      swapped[pick] = at(t);
      const std::size_t identity = chosen < own ? chosen : chosen + 1;
      const auto& rows = live_rows[identity];
      const std::size_t lr = rows[static_cast<std::size_t>(rng.below(rows.size()))];
      out.nonmated.push_back(sim::cosine_similarity(doc, lives.row(lr)));
    }
  }

  ScoreSample sample;
  sample.impostors_per_doc = impostors_per_doc;
  sample.seed = seed;
  for (std::size_t d = 0; d < results.size(); ++d) {
    if (results[d].skipped) {
      sample.skipped.push_back(docs.identity_id(d));
      continue;
    }
    sample.mated.insert(sample.mated.end(), results[d].mated.begin(), results[d].mated.end());
    sample.nonmated.insert(sample.nonmated.end(), results[d].nonmated.begin(), results[d].nonmated.end());
  }
  return sample;
}

std::string scores_to_csv(const ScoreSample& s) {
  std::string out = "kind,score\n";
  for (double v : s.mated) out += "mated," + detail::format_double(v) + '\n';
  for (double v : s.nonmated) out += "nonmated," + detail::format_double(v) + '\n';
  return out;
}

ScoreSample scores_from_csv(std::string_view text, const std::string& source) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::split_csv_line(lines[0]) != std::vector<std::string>{"kind", "score"})
    throw ParseError(source + ": expected header kind,score", 1, 1);
  ScoreSample s;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = detail::split_csv_line(lines[ln]);
    double v;
    if (f.size() != 2 || !detail::parse_double(f[1], v) || !std::isfinite(v))
      throw ParseError(source + ": bad score row", ln + 1, 1);
    if (f[0] == "mated")
      s.mated.push_back(v);
    else if (f[0] == "nonmated")
      s.nonmated.push_back(v);
    else
      throw ParseError(source + ": unknown kind '" + f[0] + "'", ln + 1, 1);
  }
  return s;
}

ScoreSample load_score_sample(const std::filesystem::path& path) {
  return scores_from_csv(detail::read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Histograms and KL

std::uint64_t ScoreHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ScoreHistogram histogram(std::span<const double> scores, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw ValidationError("histogram: bins must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ValidationError("histogram: range must satisfy lo < hi");
  if (scores.empty()) throw ValidationError("histogram: empty score list");

  ScoreHistogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i < bins; ++i)
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.bin_edges[bins] = hi;
  for (std::size_t i = 0; i < bins; ++i)
    if (!(h.bin_edges[i] < h.bin_edges[i + 1])) throw ValidationError("histogram: range too narrow for bin count");

  h.counts.assign(bins, 0);
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("histogram: non-finite score");
    std::size_t idx;
    if (s < lo) {
      idx = 0;
      ++h.clamped_low;
    } else if (s > hi) {
      idx = bins - 1;
      ++h.clamped_high;
    } else {
      idx = std::min(static_cast<std::size_t>((s - lo) * scale), bins - 1);
      // keep placement consistent with the stored edges
      while (idx > 0 && s < h.bin_edges[idx]) --idx;
      while (idx + 1 < bins && s >= h.bin_edges[idx + 1]) ++idx;
    }
    ++h.counts[idx];
  }
  const double total = static_cast<double>(scores.size());
  h.density.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) h.density[i] = static_cast<double>(h.counts[i]) / total;
  return h;
}

std::string histogram_to_json(const ScoreHistogram& h) {
  ordered_json j;
  j["bin_edges"] = h.bin_edges;
  j["counts"] = h.counts;
  j["density"] = h.density;
  j["clamped_low"] = h.clamped_low;
  j["clamped_high"] = h.clamped_high;
  return j.dump() + "\n";
}

double kl_divergence(const ScoreHistogram& p, const ScoreHistogram& q, double epsilon) {
  if (p.bin_edges != q.bin_edges || p.density.size() != q.density.size())
    throw ValidationError("kl_divergence: histograms have mismatched bin edges");
  if (!(epsilon >= 0.0)) throw ValidationError("kl_divergence: epsilon must be non-negative");
  const std::size_t b = p.density.size();
  double zp = 0.0, zq = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    zp += p.density[i] + epsilon;
    zq += q.density[i] + epsilon;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double pi = (p.density[i] + epsilon) / zp;
    const double qi = (q.density[i] + epsilon) / zq;
    if (pi == 0.0) continue;
    if (qi == 0.0) return HUGE_VAL;  // only reachable with epsilon == 0
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Attribute shift

ShiftReport attribute_shift_report(const std::vector<attr::IdentityProfile>& profiles,
                                   const std::vector<std::string>& retained_ids,
                                   const attr::AttributeConfig* config) {
  std::unordered_map<std::string_view, std::size_t> by_id;
  for (std::size_t i = 0; i < profiles.size(); ++i) by_id.emplace(profiles[i].id, i);
  std::vector<char> kept(profiles.size(), 0);
  std::size_t after = 0;
  for (const auto& id : retained_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("attribute_shift_report: retained id '" + id + "' has no profile");
    if (!kept[it->second]) ++after;
    kept[it->second] = 1;
  }

  ShiftReport report;
  report.profiles_before = profiles.size();
  report.profiles_after = after;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  auto slot = [&](const std::string& c, const std::string& a) -> ShiftEntry& {
    auto [it, inserted] = index.try_emplace({c, a}, report.entries.size());
    if (inserted) report.entries.push_back({c, a});
    return report.entries[it->second];
  };
  if (config)
    for (const auto& c : config->classes)
      for (const auto& a : c.attributes) slot(c.name, a.label);

  for (std::size_t i = 0; i < profiles.size(); ++i)
    for (const auto& [c, a] : profiles[i].selections) {
      ShiftEntry& e = slot(c, a);
      ++e.count_before;
      if (kept[i]) ++e.count_after;
    }

  if (!config) {
    // Group by class in order of first appearance.
    std::vector<std::string> class_order;
    for (const auto& e : report.entries)
      if (std::find(class_order.begin(), class_order.end(), e.class_name) == class_order.end())
        class_order.push_back(e.class_name);
    std::stable_sort(report.entries.begin(), report.entries.end(), [&](const ShiftEntry& x, const ShiftEntry& y) {
      return std::find(class_order.begin(), class_order.end(), x.class_name) <
             std::find(class_order.begin(), class_order.end(), y.class_name);
    });
  }
  for (auto& e : report.entries) {
    e.share_before = profiles.empty() ? 0.0 : static_cast<double>(e.count_before) / profiles.size();
    e.share_after = after == 0 ? 0.0 : static_cast<double>(e.count_after) / after;
    e.delta = e.share_after - e.share_before;
  }
  return report;
}

std::string shift_to_json(const ShiftReport& r) {
  ordered_json j;
  j["profiles_before"] = r.profiles_before;
  j["profiles_after"] = r.profiles_after;
  j["attributes"] = ordered_json::array();
  for (const auto& e : r.entries) {
    ordered_json a;
    a["class"] = e.class_name;
    a["attribute"] = e.attribute;
    a["count_before"] = e.count_before;
    a["count_after"] = e.count_after;
    a["share_before"] = e.share_before;
    a["share_after"] = e.share_after;
    a["delta"] = e.delta;
    j["attributes"].push_back(std::move(a));
  }
  return j.dump(2) + "\n";
}

std::string shift_to_csv(const ShiftReport& r) {
  std::string out = "class,attribute,count_before,count_after,share_before,share_after,delta\n";
  for (const auto& e : r.entries)
    out += detail::csv_escape(e.class_name) + ',' + detail::csv_escape(e.attribute) + ',' +
           std::to_string(e.count_before) + ',' + std::to_string(e.count_after) + ',' +
           detail::format_double(e.share_before) + ',' + detail::format_double(e.share_after) + ',' +
           detail::format_double(e.delta) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Projection export

std::string projection_csv(const std::vector<LabeledSet>& sets) {
  std::size_t dim = 0;
  for (const auto& s : sets) {
    if (s.set->empty()) continue;
    if (dim == 0) dim = s.set->dim();
    if (s.set->dim() != dim) throw ValidationError("export_for_projection: sets have different dims");
  }
  std::string out = "dataset_label,identity_id";
  for (std::size_t k = 0; k < dim; ++k) out += ",v" + std::to_string(k);
  out += '\n';
  for (const auto& s : sets)
    for (std::size_t i = 0; i < s.set->size(); ++i) {
      out += detail::csv_escape(s.label) + ',' + detail::csv_escape(s.set->identity_id(i));
      for (float x : s.set->row(i)) out += ',' + detail::format_float(x);
      out += '\n';
    }
  return out;
}

void export_for_projection(const std::vector<LabeledSet>& sets, const std::filesystem::path& path) {
  detail::write_file(path, projection_csv(sets));
}

std::vector<ProjectionRow> load_projection_csv(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_text_file(path));
  if (lines.empty()) throw ParseError(path.string() + ": empty file", 1, 1);
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "dataset_label" || header[1] != "identity_id")
    throw ParseError(path.string() + ": expected header dataset_label,identity_id,v0..", 1, 1);
  const std::size_t dim = header.size() - 2;
  std::vector<ProjectionRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = detail::split_csv_line(lines[ln]);
    if (f.size() != dim + 2) throw ParseError(path.string() + ": wrong column count", ln + 1, 1);
    ProjectionRow row{f[0], f[1], std::vector<float>(dim)};
    for (std::size_t k = 0; k < dim; ++k)
      if (!detail::parse_float(f[k + 2], row.vector[k])) throw ParseError(path.string() + ": bad value", ln + 1, k + 3);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

std::string histograms_svg(const std::vector<std::pair<std::string, ScoreHistogram>>& series,
                           const std::string& title) {
  const double w = 640, h = 360, left = 50, right = 20, top = 40, bottom = 40;
  double ymax = 0.0;
  for (const auto& [label, hist] : series)
    for (double d : hist.density) ymax = std::max(ymax, d);
  if (ymax <= 0.0) ymax = 1.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\">\n";
  svg += "<text x=\"" + num(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
         "</text>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w - left - right) + "\" height=\"" +
         num(h - top - bottom) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& hist = series[s].second;
    if (hist.bin_edges.empty()) continue;
    const double lo = hist.bin_edges.front(), hi = hist.bin_edges.back();
    auto px = [&](double x) { return left + (x - lo) / (hi - lo) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - y / ymax * (h - top - bottom); };
    std::string pts;
    for (std::size_t i = 0; i < hist.density.size(); ++i) {
      pts += num(px(hist.bin_edges[i])) + ',' + num(py(hist.density[i])) + ' ';
      pts += num(px(hist.bin_edges[i + 1])) + ',' + num(py(hist.density[i])) + ' ';
    }
    const char* color = kPalette[s % std::size(kPalette)];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + num(left + 10) + "\" y=\"" + num(top + 16 + 16.0 * static_cast<double>(s)) +
           "\" font-size=\"12\" fill=\"" + color + "\">" + xml_escape(series[s].first) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string shift_svg(const ShiftReport& report, const std::string& class_name) {
  std::vector<const ShiftEntry*> rows;
  for (const auto& e : report.entries)
    if (e.class_name == class_name) rows.push_back(&e);
  const double bar_h = 10, gap = 8, left = 160, width = 420;
  const double h = 40 + static_cast<double>(rows.size()) * (2 * bar_h + gap);
  double xmax = 0.0;
  for (const auto* e : rows) xmax = std::max({xmax, e->share_before, e->share_after});
  if (xmax <= 0.0) xmax = 1.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"" + num(h) + "\">\n";
  svg += "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(class_name) +
         ": before (blue) / after (orange)</text>\n";
  double y = 36;
  for (const auto* e : rows) {
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + bar_h + 3) + "\" text-anchor=\"end\" font-size=\"11\">" +
           xml_escape(e->attribute) + "</text>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(y) + "\" width=\"" + num(e->share_before / xmax * width) +
           "\" height=\"" + num(bar_h) + "\" fill=\"#1f77b4\"/>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(y + bar_h) + "\" width=\"" +
           num(e->share_after / xmax * width) + "\" height=\"" + num(bar_h) + "\" fill=\"#ff7f0e\"/>\n";
    y += 2 * bar_h + gap;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace idcurate::eval
