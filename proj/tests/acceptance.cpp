// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: idcurate_acceptance [criterion...]   (no arguments: all)

#include <sys/resource.h>

#include <algorithm>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "idcurate/attr_model.hpp"
#include "idcurate/cli.hpp"
#include "idcurate/curate.hpp"
#include "idcurate/evalkit.hpp"
#include "idcurate/kernels.hpp"
#include "idcurate/simcore.hpp"
#include "idcurate/synthlab.hpp"
#include "support.hpp"

using namespace idcurate;
using embed::Role;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// A random clustered fixture: a few groups of varying spread plus background.
synth::Fixture random_fixture(Rng& rng, std::size_t n, std::uint64_t seed) {
  synth::ClusterSpec spec;
  spec.dim = 8 + rng.below(40);
  spec.seed = seed;
  spec.images_per_identity = {{Role::document, 1}};
  std::size_t left = n;
  int k = 0;
  while (left > 0) {
    const std::size_t c = std::min<std::size_t>(left, 1 + rng.below(std::max<std::size_t>(1, n / 3)));
    const double spread = rng.below(3) == 0 ? 0.0 : 0.1 + rng.uniform() * 0.8;
    spec.groups.push_back({"g" + std::to_string(k++), c, rng.uniform() * 0.1, spread});
    left -= c;
  }
  return synth::generate_clusters(spec, 1);
}

// Threshold at a random upper quantile of the fixture's own pair scores.
double random_threshold(Rng& rng, const embed::EmbeddingSet& docs) {
  auto s = sim::impostor_scores(docs);
  if (s.empty()) return 0.5;
  std::sort(s.begin(), s.end());
  const double q = 1.0 - std::pow(rng.uniform(), 2) * 0.3;
  return s[std::min(s.size() - 1, static_cast<std::size_t>(q * s.size()))];
}

// ---------------------------------------------------------------------------

Outcome c1() {
  Outcome o;
  namespace mp = boost::multiprecision;
  using Dec = mp::number<mp::cpp_dec_float<60>>;
  const Dec exact = Dec(1) - mp::pow(Dec("0.999"), 14888);
  const double oracle = exact.convert_to<double>();
  const auto t0 = Clock::now();
  const double got = curate::false_match_probability(0.001, 14889);
  const double took = seconds_since(t0);
  const double rel = std::abs(got - oracle) / oracle;
  o.require(rel <= 1e-9, "relative error " + fmt(rel));
  o.require(curate::false_match_probability(0.0, 14889) == 0.0, "fmr=0");
  o.require(curate::false_match_probability(0.001, 1) == 0.0, "n=1");
  o.require(curate::false_match_probability(0.0, 1) == 0.0, "fmr=0,n=1");
  o.require(took < 0.01, "runtime");
  char v[32];
  std::snprintf(v, sizeof v, "%.17g", got);
  o.detail << "value " << v << " oracle rel err " << fmt(rel);
  return o;
}

Outcome c2() {
  Outcome o;
  Rng rng(20240601);
  const auto t0 = Clock::now();
  std::size_t steps = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(299);
    const auto fx = random_fixture(rng, n, 1000 + t);
    const auto& docs = fx.sets.at(Role::document);
    const auto g = sim::build_false_match_graph(docs, random_threshold(rng, docs));
    const double fmr0 = sim::dataset_fmr(g, g.nodes.size());
    const double target = rng.below(4) == 0 ? 0.0 : rng.uniform() * fmr0;
    const auto r = curate::filter_to_fmr_target(g, target);
    const auto ref = testing::naive_greedy(g, target);
    bool same = r.removed.size() == ref.removed.size() && r.fmr_trace == ref.trace && r.retained == ref.retained;
    for (std::size_t i = 0; same && i < r.removed.size(); ++i)
      same = r.removed[i].identity_id == ref.removed[i].id && r.removed[i].degree == ref.removed[i].degree;
    same = same && r.final_fmr() == ref.trace.back();
    o.require(same, "graph " + std::to_string(t));
    steps += r.removed.size();
  }
  const double took = seconds_since(t0);
  o.require(took < 30.0, "runtime " + fmt(took));
  o.detail << "200 graphs, " << steps << " removals, " << fmt(took) << " s";
  return o;
}

Outcome c3() {
  Outcome o;
  Rng rng(77);
  const auto t0 = Clock::now();
  for (int t = 0; t < 1000; ++t) {
    sim::FalseMatchGraph g;
    if (t % 2 == 0) {
      g = testing::random_graph(rng, 1 + rng.below(400), std::pow(rng.uniform(), 2), static_cast<int>(rng.below(4)));
    } else {
      const auto fx = random_fixture(rng, 2 + rng.below(300), 5000 + t);
      const auto& docs = fx.sets.at(Role::document);
      g = sim::build_false_match_graph(docs, random_threshold(rng, docs));
    }
    const double fmr0 = sim::dataset_fmr(g, g.nodes.size());
    const double target = rng.below(5) == 0 ? 0.0 : std::min(1.0, rng.uniform() * std::max(fmr0, 1e-6) * 1.2);
    const auto r = curate::filter_to_fmr_target(g, target);
    o.require(r.final_fmr() <= target, "final fmr above target on pair " + std::to_string(t));
    const auto& tr = r.fmr_trace;
    o.require(tr.size() < 2 || tr[tr.size() - 1] <= tr[tr.size() - 2], "last step increased on pair " + std::to_string(t));
  }
  const double took = seconds_since(t0);
  o.require(took < 60.0, "runtime " + fmt(took));
  o.detail << "1000 pairs, " << fmt(took) << " s";
  return o;
}

Outcome c4() {
  Outcome o;
  Rng rng(404);
  std::size_t checked = 0, retained_total = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = t < 4 ? 500 : 2 + rng.below(499);
    const auto fx = random_fixture(rng, n, 9000 + t);
    const auto& docs = fx.sets.at(Role::document);
    const double thr = random_threshold(rng, docs);
    const auto r = curate::strict_filter(sim::build_false_match_graph(docs, thr));
    std::vector<std::size_t> rows;
    for (const auto& id : r.retained)
      for (std::size_t i = 0; i < docs.size(); ++i)
        if (docs.identity_id(i) == id) rows.push_back(i);
    o.require(rows.size() == r.retained.size(), "retained id lookup");
    std::size_t bad = 0;
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        bad += double(testing::brute_score(docs.row(rows[a]), docs.row(rows[b]))) > thr;
        ++checked;
      }
    o.require(bad == 0, "fixture " + std::to_string(t) + " kept " + std::to_string(bad) + " pairs");
    retained_total += rows.size();
  }
  o.detail << "40 fixtures, " << checked << " retained pairs checked, " << retained_total << " identities kept";
  return o;
}

Outcome c5() {
  Outcome o;
  testing::TempDir dir("acc5");
  Rng rng(340000);
  std::string text;
  text.reserve(340000 * 12);
  for (int i = 0; i < 340000; ++i) {
    // Float-rounded scores with a heavy right tail and frequent ties.
    double s = rng.gaussian() * 0.08;
    if (rng.below(50) == 0) s += 0.25 * rng.uniform();
    if (rng.below(4) == 0) s = std::round(s * 500) / 500;
    s = static_cast<float>(std::clamp(s, -1.0, 1.0));
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, s);
    text.append(buf, res.ptr);
    text += '\n';
  }
  testing::spit(dir / "impostors.txt", text);
  const auto scores = sim::load_scores(dir / "impostors.txt");
  o.require(scores.size() == 340000, "score count");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  auto rate_above = [&](double t) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    return double(sorted.end() - it) / double(sorted.size());
  };
  std::map<double, double> thr;
  for (double target : {0.001, 0.0001}) {
    const auto c = sim::calibrate_threshold(scores, target);
    thr[target] = c.threshold;
    o.require(rate_above(c.threshold) <= target, "achieved fmr at " + fmt(target));
    o.require(c.achieved_fmr == rate_above(c.threshold), "reported achieved fmr");
    o.require(std::binary_search(sorted.begin(), sorted.end(), c.threshold), "threshold is an observed score");
    const auto lower = std::lower_bound(sorted.begin(), sorted.end(), c.threshold);
    if (lower != sorted.begin())
      o.require(rate_above(*(lower - 1)) > target, "next-lower observed score still meets " + fmt(target));
    o.detail << "t(" << fmt(target) << ")=" << fmt(c.threshold) << " fmr " << fmt(c.achieved_fmr) << "; ";
  }
  o.require(thr[0.0001] >= thr[0.001], "threshold ordering");
  return o;
}

long peak_rss_kb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return ru.ru_maxrss;
}

Outcome c6() {
  Outcome o;
  {
    const auto docs = testing::random_docs(300, 512, 6);
    std::vector<float> oracle, got;
    for (std::size_t i = 0; i < docs.size(); ++i)
      for (std::size_t j = i + 1; j < docs.size(); ++j) oracle.push_back(testing::brute_score(docs.row(i), docs.row(j)));
    sim::pairwise_document_similarities(docs, {64, 0}, [&](std::span<const kernels::PairScore> tile) {
      for (const auto& p : tile) got.push_back(p.score);
    });
    std::sort(oracle.begin(), oracle.end());
    std::sort(got.begin(), got.end());
    o.require(oracle == got, "pair-score multiset differs at N=300");
    o.detail << "N=300 multiset of " << got.size() << " equal; ";
  }
  const auto docs = testing::random_docs(15000, 512, 15);
  const auto t0 = Clock::now();
  const auto g = sim::build_false_match_graph(docs, 0.15);
  const double took = seconds_since(t0);
  const double gb = peak_rss_kb() / 1048576.0;
  o.require(sim::check_graph(g).empty(), "graph consistency");
  o.require(took < 120.0, "runtime " + fmt(took));
  o.require(gb < 2.0, "peak rss " + fmt(gb));
  o.detail << "N=15000 dim=512: " << fmt(took) << " s, " << g.edges.size() << " edges, peak rss " << fmt(gb)
           << " GB";
  return o;
}

// Own binning, same edges as the toolkit default, with additive smoothing.
std::vector<double> oracle_density(const std::vector<double>& s) {
  const std::size_t bins = eval::kDefaultBins;
  const double lo = eval::kDefaultLow, hi = eval::kDefaultHigh;
  std::vector<double> d(bins, 0.0);
  for (double x : s) {
    long b = static_cast<long>(std::floor((x - lo) / (hi - lo) * bins));
    b = std::clamp(b, 0L, long(bins) - 1);
    d[b] += 1.0;
  }
  for (double& x : d) x /= double(s.size());
  return d;
}

double oracle_kl(const std::vector<double>& p, const std::vector<double>& q, double eps) {
  double zp = 0, zq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    zp += p[i] + eps;
    zq += q[i] + eps;
  }
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = (p[i] + eps) / zp, b = (q[i] + eps) / zq;
    kl += a * std::log(a / b);
  }
  return kl;
}

// Mated score of the generator: two noisy views of the same unit center.
std::vector<double> dense_mated(double noise, std::size_t dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> c(dim), a(dim), b(dim), out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    double cn = 0;
    for (auto& x : c) cn += (x = z(gen)) * x;
    cn = std::sqrt(cn);
    double aa = 0, bb = 0, ab = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      a[k] = c[k] / cn + noise * z(gen);
      b[k] = c[k] / cn + noise * z(gen);
      aa += a[k] * a[k];
      bb += b[k] * b[k];
      ab += a[k] * b[k];
    }
    out.push_back(ab / std::sqrt(aa * bb));
  }
  return out;
}

Outcome c7() {
  Outcome o;
  Rng rng(7);
  // Basics.
  for (int t = 0; t < 10000; ++t) {
    const std::size_t bins = 1 + rng.below(60);
    eval::ScoreHistogram p, q;
    p.density.resize(bins);
    q.density.resize(bins);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < bins; ++i) {
      p.density[i] = rng.below(4) == 0 ? 0.0 : rng.uniform();
      q.density[i] = rng.below(4) == 0 ? 0.0 : rng.uniform();
      sp += p.density[i];
      sq += q.density[i];
    }
    if (sp == 0) p.density[0] = sp = 1;
    if (sq == 0) q.density[0] = sq = 1;
    for (auto& x : p.density) x /= sp;
    for (auto& x : q.density) x /= sq;
    p.counts.assign(bins, 0);
    q.counts.assign(bins, 0);
    p.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) p.bin_edges[i] = double(i);
    q.bin_edges = p.bin_edges;
    const double kl = eval::kl_divergence(p, q);
    o.require(kl >= 0.0, "negative KL");
    o.require(eval::kl_divergence(p, p) <= 1e-12, "KL(p,p)");
  }
  {
    eval::ScoreHistogram p, q;
    p.bin_edges = q.bin_edges = {0, 1, 2};
    p.counts = q.counts = {0, 0};
    p.density = {1.0, 0.0};
    q.density = {0.5, 0.5};
    o.require(std::abs(eval::kl_divergence(p, q) - std::log(2.0)) <= 1e-6, "ln 2 case");
  }
  // Shape behavior against a dense-sampling oracle of the generator.
  const std::size_t dim = 64;
  auto fixture_mated = [&](double noise, std::uint64_t seed) {
    synth::ClusterSpec spec;
    spec.n_identities = 2000;
    spec.dim = dim;
    spec.intra_noise = noise;
    spec.seed = seed;
    spec.images_per_identity = {{Role::document, 1}, {Role::live_LL, 30}};
    const auto fx = synth::generate_clusters(spec);
    return eval::mated_nonmated_scores(fx.sets.at(Role::document), fx.sets.at(Role::live_LL), 1, seed).mated;
  };
  const auto base = fixture_mated(0.10, 71);
  const auto base_dense = dense_mated(0.10, dim, 1000000, 1001);
  for (double other : {0.12, 0.15}) {
    const auto s = fixture_mated(other, 72);
    const double got = eval::kl_divergence(eval::histogram(base), eval::histogram(s));
    const double want = oracle_kl(oracle_density(base_dense), oracle_density(dense_mated(other, dim, 1000000, 1002)), 1e-10);
    const double rel = std::abs(got - want) / want;
    o.require(rel <= 0.10, "noise 0.10 vs " + fmt(other) + ": " + fmt(got) + " vs oracle " + fmt(want));
    o.detail << "KL(0.10||" << fmt(other) << ") toolkit " << fmt(got) << " oracle " << fmt(want) << "; ";
  }
  return o;
}

Outcome c8() {
  Outcome o;
  const auto cfg = attr::load_config(IDCURATE_DATA_DIR "/default_attributes.json");
  const auto ps = attr::sample_profiles(cfg, 100000, 49);
  std::size_t female = 0, bald = 0, bald_with_color = 0;
  for (const auto& p : ps) {
    const auto* g = p.selection("gender");
    female += g && *g == "Female";
    const auto* h = p.selection("hairstyle");
    if (h && *h == "bald") {
      ++bald;
      bald_with_color += p.selection("hair_color") != nullptr;
    }
  }
  const double share = double(female) / ps.size();
  o.require(std::abs(share - 0.49) <= 0.005, "female share " + fmt(share));
  o.require(bald > 0 && bald_with_color == 0, "bald with hair colour");

  Rng rng(8);
  std::size_t sampled = 0, violations = 0, configs = 0;
  while (sampled < 1000000) {
    const auto c = testing::random_config(rng);
    if (attr::has_errors(attr::validate_config(c))) continue;
    ++configs;
    for (const auto& p : attr::sample_profiles(c, 1000, rng.next_u64())) violations += !testing::clash_free(c, p);
    sampled += 1000;
  }
  o.require(violations == 0, std::to_string(violations) + " clash violations");
  o.detail << "female share " << fmt(share) << ", bald " << bald << " (0 with hair colour), " << sampled
           << " profiles over " << configs << " configs, " << violations << " violations";
  return o;
}

Outcome c9() {
  Outcome o;
  const std::size_t n = 2000, dim = 32, cluster = 20;
  // Thresholds come from a separate cluster-free reference population.
  synth::ClusterSpec ref;
  ref.n_identities = 1500;
  ref.dim = dim;
  ref.intra_noise = 0.0;
  ref.seed = 101;
  ref.images_per_identity = {{Role::live_LL, 1}};
  const auto rf = synth::generate_clusters(ref);
  const auto imp = sim::impostor_scores(rf.sets.at(Role::live_LL));
  const std::vector<double> s(imp.begin(), imp.end());
  const double t3 = sim::calibrate_threshold(s, 1e-3).threshold;
  const double t4 = sim::calibrate_threshold(s, 1e-4).threshold;

  // Two proxies seeing the same population: the second resolves the tight
  // clusters less well (smaller spread between cluster members).
  std::vector<double> pct;
  std::size_t clustered = 0;
  for (double spread : {0.3, 0.2}) {
    synth::ClusterSpec fx;
    fx.dim = dim;
    fx.seed = 7;
    fx.images_per_identity = {{Role::document, 1}};
    const std::size_t groups = n * 4 / 10 / cluster;
    for (std::size_t i = 0; i < groups; ++i) fx.groups.push_back({"c" + std::to_string(i), cluster, 0.0, spread});
    fx.groups.push_back({"bg", n - groups * cluster, 0.0, 0.0});
    clustered = groups * cluster;
    const auto f = synth::generate_clusters(fx);
    const auto& docs = f.sets.at(Role::document);
    const auto g3 = sim::build_false_match_graph(docs, t3);
    const auto g4 = sim::build_false_match_graph(docs, t4);
    const auto loose = curate::filter_to_fmr_target(g3, 1e-3);
    const auto tight = curate::filter_to_fmr_target(g3, 1e-4);
    const auto paired = curate::filter_to_fmr_target(g4, 1e-4);
    o.require(tight.retained.size() < loose.retained.size(), "tighter target at same threshold");
    const auto loose4 = curate::filter_to_fmr_target(g4, 1e-3);
    o.require(paired.retained.size() <= loose4.retained.size(), "tighter target at the higher threshold");
    pct.push_back(100.0 * paired.retained.size() / n);
    pct.push_back(100.0 * loose.retained.size() / n);
    o.detail << "spread " << fmt(spread) << ": same-threshold " << loose.retained.size() << " > "
             << tight.retained.size() << "; ";
  }
  // Order: A@1e-4 > A@1e-3 > B@1e-4 > B@1e-3.
  for (std::size_t i = 1; i < pct.size(); ++i) o.require(pct[i - 1] > pct[i], "retained ordering at " + std::to_string(i));
  o.detail << "clustered " << 100.0 * clustered / n << "%, thresholds " << fmt(t3) << "/" << fmt(t4) << ", retained %";
  for (double p : pct) o.detail << " " << fmt(p);
  return o;
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "idcurate");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str()};
}

Outcome c10() {
  Outcome o;
  testing::TempDir a("acc10a"), b("acc10b");
  // Primary artifacts per subcommand; run summaries carry timestamps and are excluded.
  const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> steps = {
      {{"synth", "--identities", "300", "--dim", "24", "--seed", "11", "--images", "document=1", "--images",
        "live_LL=3", "--group", "tight:120:0.05:0.3", "--group", "wide:180:0.1"},
       {"document.emb", "live_LL.emb", "manifest.json", "profiles.jsonl"}},
      {{"sample", "--config", IDCURATE_DATA_DIR "/default_attributes.json", "--count", "500", "--seed", "5", "--out",
        "@/sampled.jsonl"},
       {"sampled.jsonl"}},
      {{"prompts", "--profiles", "@/sampled.jsonl"}, {"prompts.jsonl"}},
      {{"calibrate", "--embeddings", "@/live_LL.emb"}, {"calibration.json"}},
      {{"graph", "--embeddings", "@/document.emb", "--threshold", "0.45"}, {"graph.json", "edges.csv"}},
      {{"filter", "--graph", "@/graph.json", "--fmr-target", "0.001"}, {"filter_report.json", "filter_retained.txt"}},
      {{"filter-strict", "--embeddings", "@/document.emb", "--threshold", "0.45"},
       {"strict_report.json", "strict_retained.txt"}},
      {{"leakage", "--synthetic", "@/document.emb", "--training", "@/live_LL.emb", "--threshold", "0.6"},
       {"leakage.csv"}},
      {{"eval-scores", "--docs", "@/document.emb", "--lives", "@/live_LL.emb", "--seed", "3", "--svg"},
       {"scores.csv", "hist_mated.json", "hist_nonmated.json", "scores.svg"}},
      {{"eval-kl", "--p", "@/scores.csv", "--q", "@/scores.csv"}, {"kl.json"}},
      {{"eval-shift", "--profiles", "@/profiles.jsonl", "--retained", "@/filter_retained.txt", "--svg-class",
        "group"},
       {"shift.json", "shift.csv", "shift_group.svg"}},
      {{"export-proj", "--set", "doc=@/document.emb", "--set", "live=@/live_LL.emb"}, {"projection.csv"}},
      {{"pfm", "--fmr", "0.001", "--n", "14889"}, {}},
  };
  std::size_t compared = 0, subcommands = 0;
  for (const auto& [args, files] : steps) {
    std::string stdout_a;
    for (int pass = 0; pass < 2; ++pass) {
      const auto& dir = pass == 0 ? a : b;
      std::vector<std::string> full = {"--out-dir", dir.path().string(), "--threads", pass == 0 ? "1" : "3"};
      for (auto arg : args) {
        if (auto at = arg.find('@'); at != std::string::npos) arg.replace(at, 1, dir.path().string());
        full.push_back(arg);
      }
      auto r = cli_run(full);
      for (auto at = r.out.find(dir.path().string()); at != std::string::npos; at = r.out.find(dir.path().string()))
        r.out.replace(at, dir.path().string().size(), "<dir>");
      o.require(r.code == 0, args[0] + " exit code " + std::to_string(r.code));
      if (pass == 0)
        stdout_a = r.out;
      else
        o.require(r.out == stdout_a, args[0] + " stdout");
    }
    for (const auto& f : files) {
      const auto x = testing::slurp(a / f), y = testing::slurp(b / f);
      o.require(!x.empty() && x == y, args[0] + ": " + f);
      ++compared;
    }
    ++subcommands;
  }
  // Same flags, same thread count, fresh directory: identical too.
  testing::TempDir c("acc10c");
  cli_run({"--out-dir", c.path().string(), "--threads", "1", "synth", "--identities", "300", "--dim", "24", "--seed",
           "11", "--images", "document=1", "--images", "live_LL=3", "--group", "tight:120:0.05:0.3", "--group",
           "wide:180:0.1"});
  o.require(testing::slurp(c / "document.emb") == testing::slurp(a / "document.emb"), "synth rerun");
  o.detail << subcommands << " subcommands, " << compared << " artifacts identical across --threads 1/3";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"1", c1}, {"2", c2}, {"3", c3}, {"4", c4}, {"5", c5}, {"6", c6}, {"7", c7}, {"8", c8}, {"9", c9}, {"10", c10}};
  std::vector<std::string> want(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : all) {
    if (!want.empty() && std::find(want.begin(), want.end(), name) == want.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("criterion %s: %s (%.2f s) %s\n", name.c_str(), o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
