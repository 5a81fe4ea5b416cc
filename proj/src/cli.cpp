#include "idcurate/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "idcurate/attr_model.hpp"
#include "idcurate/curate.hpp"
#include "idcurate/embed_io.hpp"
#include "idcurate/error.hpp"
#include "idcurate/evalkit.hpp"
#include "idcurate/llm_client.hpp"
#include "idcurate/simcore.hpp"
#include "idcurate/synthlab.hpp"
#include "io_util.hpp"

#ifndef IDCURATE_VERSION
#define IDCURATE_VERSION "0.0.0"
#endif

namespace idcurate::cli {

namespace fs = std::filesystem;
using detail::ordered_json;

namespace {

struct Global {
  fs::path out_dir = ".";
  int threads = 0;
  std::size_t block = 128;
  bool verbose = false;
};

/// Per-invocation state handed to subcommand handlers.
struct Context {
  Global& global;
  std::ostream& out;
  std::ostream& err;
  ordered_json results = ordered_json::object();
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;

  fs::path output(const std::string& name, const std::string& override_path = {}) {
    fs::path p = override_path.empty() ? global.out_dir / name : fs::path(override_path);
    outputs.push_back(p.string());
    return p;
  }
  void write(const fs::path& p, std::string_view bytes) { detail::write_file(p, bytes); }
  sim::BlockOptions block() const { return {global.block, global.threads}; }
  void note(const std::string& msg) {
    if (global.verbose) err << msg << "\n";
  }
};

using Handler = std::function<void(Context&)>;

embed::EmbeddingSet load_set(const std::string& path, Context& ctx) {
  auto set = embed::load_embeddings(path);
  if (set.large_norm_deviations() > 0)
    ctx.err << "warning: " << path << ": " << set.large_norm_deviations()
            << " vectors deviated from unit norm by more than 1e-2 and were renormalized\n";
  return set;
}

constexpr const char* kGenericTemplate =
    "A passport-style frontal face photo of a person with a neutral expression against a plain white background.";

std::string fmt(double v) { return detail::format_double(v); }

void write_summary(const std::string& name, const CLI::App& sub, const Context& ctx, double seconds) {
  ordered_json s;
  s["subcommand"] = name;
  ordered_json inputs = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    const auto& r = opt->results();
    inputs[opt->get_name()] = r.size() == 1 ? ordered_json(r.front()) : ordered_json(r);
  }
  s["inputs"] = inputs;
  if (ctx.seed) s["seed"] = *ctx.seed;
  s["threads"] = ctx.global.threads;
  s["versions"] = {{"idcurate", IDCURATE_VERSION}, {"compiler", __VERSION__}, {"openmp", _OPENMP}};
  s["outputs"] = ctx.outputs;
  s["results"] = ctx.results;
  s["wall_time_seconds"] = seconds;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  s["finished_at"] = stamp;
  detail::write_file(ctx.global.out_dir / (name + ".summary.json"), s.dump(2) + "\n");
}

std::vector<std::pair<std::string, std::string>> split_pairs(const std::vector<std::string>& items, char sep,
                                                             const char* flag) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& it : items) {
    const auto pos = it.find(sep);
    if (pos == std::string::npos || pos == 0 || pos + 1 == it.size())
      throw ValidationError(std::string(flag) + " expects KEY" + sep + "VALUE, got '" + it + "'");
    out.emplace_back(it.substr(0, pos), it.substr(pos + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

void add_sample(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("sample", "Sample identity attribute profiles");
  struct Opts {
    std::string config, tmpl, out;
    std::size_t count = 0;
    std::uint64_t seed = 0, first = 0;
    bool validate_only = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--config", o->config, "Attribute config JSON")->required();
  sub->add_option("--count", o->count, "Number of profiles");
  sub->add_option("--seed", o->seed, "Master seed");
  sub->add_option("--first-index", o->first, "Generation index of the first profile");
  sub->add_option("--template", o->tmpl, "Prompt template file");
  sub->add_option("--out", o->out, "Output JSONL (default <out-dir>/profiles.jsonl)");
  sub->add_flag("--validate-only", o->validate_only, "Only validate the config");
  subs.emplace_back(sub, [o](Context& ctx) {
    const auto config = attr::load_config(o->config);
    const auto findings = attr::validate_config(config);
    for (const auto& f : findings)
      ctx.err << (f.severity == attr::Severity::error ? "error: " : "warning: ") << f.where << ": " << f.message
              << "\n";
    ctx.results["findings"] = findings.size();
    if (attr::has_errors(findings)) throw ValidationError("attribute config has errors");
    if (o->validate_only) {
      ctx.out << "config ok (" << findings.size() << " warnings)\n";
      return;
    }
    std::string text = o->tmpl.empty() ? attr::default_template_text() : detail::read_text_file(o->tmpl);
    if (o->tmpl.empty()) {
      const attr::PromptTemplate probe(text);
      for (const auto& ph : probe.placeholders())
        if (std::none_of(config.classes.begin(), config.classes.end(),
                         [&](const attr::AttributeClass& c) { return c.name == ph; })) {
          ctx.note("config classes differ from the default template; using the generic template");
          text = kGenericTemplate;
          break;
        }
    }
    const attr::PromptTemplate tmpl(text);
    tmpl.check_against(config);
    ctx.seed = o->seed;
    auto profiles = attr::sample_profiles(config, o->count, o->seed, o->first, ctx.global.threads);
    std::size_t unsat = 0;
    for (auto& p : profiles) {
      p.prompt = attr::assemble_prompt(p, tmpl);
      unsat += p.unsatisfiable;
    }
    const auto path = ctx.output("profiles.jsonl", o->out);
    attr::write_profiles_jsonl(path, profiles);
    ctx.results["profiles"] = profiles.size();
    ctx.results["unsatisfiable"] = unsat;
    ctx.out << "wrote " << profiles.size() << " profiles to " << path.string() << "\n";
  });
}

void add_prompts(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("prompts", "Expand profile prompts with an optional chat-completion service");
  struct Opts {
    std::string profiles, llm_config, replay, record, out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--profiles", o->profiles, "Profiles JSONL")->required();
  sub->add_option("--llm-config", o->llm_config, "LLM client config JSON (absent: template prompts)");
  sub->add_option("--replay", o->replay, "Serve responses from a recorded transcript");
  sub->add_option("--record", o->record, "Record the exchanges to a transcript file");
  sub->add_option("--out", o->out, "Output JSONL (default <out-dir>/prompts.jsonl)");
  subs.emplace_back(sub, [o](Context& ctx) {
    auto profiles = attr::read_profiles_jsonl(o->profiles);
    llm::LlmConfig config;
    if (!o->llm_config.empty()) config = llm::load_llm_config(o->llm_config);
    std::unique_ptr<llm::Transport> base;
    if (!o->replay.empty())
      base = std::make_unique<llm::ReplayTransport>(fs::path(o->replay));
    else
      base = std::make_unique<llm::HttpTransport>();
    std::optional<llm::RecordingTransport> recorder;
    llm::Transport* transport = base.get();
    if (!o->record.empty()) transport = &recorder.emplace(*base);

    llm::Metrics metrics;
    const auto expansions = llm::expand_prompts(profiles, config, *transport, &metrics);
    for (std::size_t i = 0; i < profiles.size(); ++i) profiles[i].prompt = expansions[i].text;
    const auto path = ctx.output("prompts.jsonl", o->out);
    attr::write_profiles_jsonl(path, profiles);
    if (recorder) recorder->save(ctx.output("", o->record));
    ctx.results["profiles"] = profiles.size();
    ctx.results["requests"] = metrics.requests.load();
    ctx.results["fallbacks"] = metrics.fallbacks.load();
    ctx.out << "wrote " << profiles.size() << " prompts (" << metrics.fallbacks.load() << " template fallbacks)\n";
  });
}

void add_calibrate(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("calibrate", "Pick decision thresholds from impostor scores");
  struct Opts {
    std::string scores, embeddings, out;
    std::vector<double> targets{0.001, 0.0001};
  };
  auto o = std::make_shared<Opts>();
  auto* s = sub->add_option("--scores", o->scores, "Impostor scores (one per line, or CSV with a score column)");
  auto* e = sub->add_option("--embeddings", o->embeddings, "Embedding set; all cross-identity image pairs");
  s->excludes(e);
  sub->add_option("--fmr-target", o->targets, "FMR target(s)")->capture_default_str();
  sub->add_option("--out", o->out, "Output JSON (default <out-dir>/calibration.json)");
  subs.emplace_back(sub, [o](Context& ctx) {
    std::vector<double> scores;
    if (!o->scores.empty()) {
      scores = sim::load_scores(o->scores);
    } else if (!o->embeddings.empty()) {
      const auto set = load_set(o->embeddings, ctx);
      for (float f : sim::impostor_scores(set, ctx.block())) scores.push_back(f);
    } else {
      throw ValidationError("calibrate needs --scores or --embeddings");
    }
    std::vector<sim::ThresholdCalibration> cals;
    for (double t : o->targets) cals.push_back(sim::calibrate_threshold(scores, t));
    const auto path = ctx.output("calibration.json", o->out);
    ctx.write(path, sim::calibration_to_json(cals));
    ctx.results["impostor_count"] = scores.size();
    for (const auto& c : cals) {
      ctx.results["thresholds"][fmt(c.fmr_target)] = c.threshold;
      ctx.out << "fmr_target " << fmt(c.fmr_target) << " threshold " << fmt(c.threshold) << " achieved_fmr "
              << fmt(c.achieved_fmr) << "\n";
    }
  });
}

void add_graph(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("graph", "Build the false-match graph of document embeddings");
  struct Opts {
    std::string embeddings, out;
    double threshold = 0.0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--embeddings", o->embeddings, "Document embeddings, one per identity")->required();
  sub->add_option("--threshold", o->threshold, "Decision threshold (false match: score > threshold)")->required();
  sub->add_option("--out", o->out, "Graph JSON (default <out-dir>/graph.json)");
  subs.emplace_back(sub, [o](Context& ctx) {
    const auto docs = load_set(o->embeddings, ctx);
    const auto g = sim::build_false_match_graph(docs, o->threshold, ctx.block());
    ctx.write(ctx.output("graph.json", o->out), sim::graph_to_json(g));
    ctx.write(ctx.output("edges.csv"), sim::edges_to_csv(g));
    ctx.results["identities"] = g.nodes.size();
    ctx.results["edges"] = g.edges.size();
    ctx.results["dataset_fmr"] = sim::dataset_fmr(g, g.nodes.size());
    ctx.out << g.nodes.size() << " identities, " << g.edges.size() << " false-match pairs, dataset FMR "
            << fmt(sim::dataset_fmr(g, g.nodes.size())) << "\n";
  });
}

struct GraphSource {
  std::string graph, embeddings;
  double threshold = 0.0;

  void add_to(CLI::App* sub) {
    auto* g = sub->add_option("--graph", graph, "Graph JSON from `graph`");
    auto* e = sub->add_option("--embeddings", embeddings, "Document embeddings (builds the graph)");
    sub->add_option("--threshold", threshold, "Threshold used with --embeddings");
    g->excludes(e);
  }
  sim::FalseMatchGraph load(Context& ctx) const {
    if (!graph.empty()) return sim::load_graph(graph);
    if (embeddings.empty()) throw ValidationError("need --graph or --embeddings with --threshold");
    return sim::build_false_match_graph(load_set(embeddings, ctx), threshold, ctx.block());
  }
};

void report_filter(Context& ctx, const curate::FilterReport& r, const std::string& prefix) {
  ctx.write(ctx.output(prefix + "_report.json"), curate::report_to_json(r));
  ctx.write(ctx.output(prefix + "_retained.txt"), curate::retained_to_text(r));
  ctx.results["retained"] = r.retained.size();
  ctx.results["removed"] = r.removed.size();
  ctx.results["final_fmr"] = r.final_fmr();
  ctx.out << "retained " << r.retained.size() << " of " << r.initial_identities << " identities, final FMR "
          << fmt(r.final_fmr()) << "\n";
}

void add_filter(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("filter", "Greedy highest-degree removal down to an FMR target");
  struct Opts {
    GraphSource src;
    double target = 0.001;
  };
  auto o = std::make_shared<Opts>();
  o->src.add_to(sub);
  sub->add_option("--fmr-target", o->target, "Dataset-wide FMR target")->required();
  subs.emplace_back(sub, [o](Context& ctx) {
    report_filter(ctx, curate::filter_to_fmr_target(o->src.load(ctx), o->target), "filter");
  });

  auto* strict = app.add_subcommand("filter-strict", "Remove every identity with any above-threshold pair");
  auto so = std::make_shared<GraphSource>();
  so->add_to(strict);
  subs.emplace_back(strict, [so](Context& ctx) { report_filter(ctx, curate::strict_filter(so->load(ctx)), "strict"); });
}

void add_pfm(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("pfm", "Probability that an identity falsely matches at least one other");
  struct Opts {
    double fmr = 0.0;
    std::uint64_t n = 0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--fmr", o->fmr, "Per-comparison false match rate")->required()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--n", o->n, "Number of identities")->required()->check(CLI::PositiveNumber);
  subs.emplace_back(sub, [o](Context& ctx) {
    const double p = curate::false_match_probability(o->fmr, o->n);
    ctx.results["probability"] = p;
    ctx.out << fmt(p) << "\n";
  });
}

void add_leakage(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("leakage", "Match synthetic identities against a training set");
  struct Opts {
    std::string synthetic, training, out;
    double threshold = 0.0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--synthetic", o->synthetic, "Synthetic embeddings")->required();
  sub->add_option("--training", o->training, "Training-set embeddings")->required();
  sub->add_option("--threshold", o->threshold, "Match threshold (score > threshold)")->required();
  sub->add_option("--out", o->out, "Matches CSV (default <out-dir>/leakage.csv)");
  subs.emplace_back(sub, [o](Context& ctx) {
    const auto matches =
        curate::leakage_check(load_set(o->synthetic, ctx), load_set(o->training, ctx), o->threshold, ctx.block());
    ctx.write(ctx.output("leakage.csv", o->out), curate::leakage_to_csv(matches));
    ctx.results["matches"] = matches.size();
    ctx.out << matches.size() << " matches above " << fmt(o->threshold) << "\n";
  });
}

struct Binning {
  std::size_t bins = eval::kDefaultBins;
  double lo = eval::kDefaultLow;
  double hi = eval::kDefaultHigh;

  void add_to(CLI::App* sub) {
    sub->add_option("--bins", bins, "Histogram bins")->capture_default_str();
    sub->add_option("--lo", lo, "Histogram lower edge")->capture_default_str();
    sub->add_option("--hi", hi, "Histogram upper edge")->capture_default_str();
  }
};

void add_eval_scores(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("eval-scores", "Mated / non-mated score sampling");
  struct Opts {
    std::string docs, lives, out;
    std::size_t impostors = 100;
    std::uint64_t seed = 0;
    bool svg = false;
    Binning bin;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--docs", o->docs, "Document embeddings")->required();
  sub->add_option("--lives", o->lives, "Live-capture embeddings")->required();
  sub->add_option("--impostors", o->impostors, "Impostor identities per document")->capture_default_str();
  sub->add_option("--seed", o->seed, "Sampling seed");
  sub->add_option("--out", o->out, "Scores CSV (default <out-dir>/scores.csv)");
  sub->add_flag("--svg", o->svg, "Also write histograms JSON and SVG");
  o->bin.add_to(sub);
  subs.emplace_back(sub, [o](Context& ctx) {
    ctx.seed = o->seed;
    const auto sample =
        eval::mated_nonmated_scores(load_set(o->docs, ctx), load_set(o->lives, ctx), o->impostors, o->seed,
                                    ctx.global.threads);
    for (const auto& id : sample.skipped) ctx.err << "warning: identity " << id << " has no live images; skipped\n";
    ctx.write(ctx.output("scores.csv", o->out), eval::scores_to_csv(sample));
    if (o->svg && !sample.mated.empty() && !sample.nonmated.empty()) {
      const auto hm = eval::histogram(sample.mated, o->bin.bins, o->bin.lo, o->bin.hi);
      const auto hn = eval::histogram(sample.nonmated, o->bin.bins, o->bin.lo, o->bin.hi);
      ctx.write(ctx.output("hist_mated.json"), eval::histogram_to_json(hm));
      ctx.write(ctx.output("hist_nonmated.json"), eval::histogram_to_json(hn));
      ctx.write(ctx.output("scores.svg"),
                eval::histograms_svg({{"mated", hm}, {"non-mated", hn}}, "cosine similarity"));
    }
    ctx.results["mated"] = sample.mated.size();
    ctx.results["nonmated"] = sample.nonmated.size();
    ctx.results["skipped"] = sample.skipped.size();
    ctx.out << sample.mated.size() << " mated, " << sample.nonmated.size() << " non-mated scores\n";
  });
}

void add_eval_kl(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("eval-kl", "KL divergence between two score samples");
  struct Opts {
    std::string p, q, out;
    double epsilon = 1e-10;
    Binning bin;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--p", o->p, "Scores CSV (reference distribution P)")->required();
  sub->add_option("--q", o->q, "Scores CSV (distribution Q)")->required();
  sub->add_option("--epsilon", o->epsilon, "Additive smoothing per bin")->capture_default_str();
  sub->add_option("--out", o->out, "Output JSON (default <out-dir>/kl.json)");
  o->bin.add_to(sub);
  subs.emplace_back(sub, [o](Context& ctx) {
    const auto p = eval::load_score_sample(o->p);
    const auto q = eval::load_score_sample(o->q);
    ordered_json j;
    j["bins"] = o->bin.bins;
    j["range"] = {o->bin.lo, o->bin.hi};
    j["epsilon"] = o->epsilon;
    j["log_base"] = "e";
    auto one = [&](const char* kind, const std::vector<double>& a, const std::vector<double>& b) {
      if (a.empty() || b.empty()) return;
      const auto ha = eval::histogram(a, o->bin.bins, o->bin.lo, o->bin.hi);
      const auto hb = eval::histogram(b, o->bin.bins, o->bin.lo, o->bin.hi);
      const double kl = eval::kl_divergence(ha, hb, o->epsilon);
      j[kind] = kl;
      ctx.results[kind] = kl;
      ctx.out << kind << " KL(P||Q) = " << fmt(kl) << "\n";
    };
    one("mated", p.mated, q.mated);
    one("nonmated", p.nonmated, q.nonmated);
    ctx.write(ctx.output("kl.json", o->out), j.dump(2) + "\n");
  });
}

void add_eval_shift(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("eval-shift", "Attribute distribution before and after filtering");
  struct Opts {
    std::string profiles, retained, config;
    std::vector<std::string> svg_classes;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--profiles", o->profiles, "Profiles JSONL (all identities)")->required();
  sub->add_option("--retained", o->retained, "Retained ids, one per line")->required();
  sub->add_option("--config", o->config, "Attribute config (ordering and zero-count attributes)");
  sub->add_option("--svg-class", o->svg_classes, "Write a bar chart for this class");
  subs.emplace_back(sub, [o](Context& ctx) {
    const auto profiles = attr::read_profiles_jsonl(o->profiles);
    std::vector<std::string> retained;
    for (auto& line : detail::split_lines(detail::read_text_file(o->retained)))
      if (!line.empty()) retained.push_back(std::move(line));
    std::optional<attr::AttributeConfig> config;
    if (!o->config.empty()) config = attr::load_config(o->config);
    const auto report = eval::attribute_shift_report(profiles, retained, config ? &*config : nullptr);
    ctx.write(ctx.output("shift.json"), eval::shift_to_json(report));
    ctx.write(ctx.output("shift.csv"), eval::shift_to_csv(report));
    for (const auto& cls : o->svg_classes) ctx.write(ctx.output("shift_" + cls + ".svg"), eval::shift_svg(report, cls));
    ctx.results["profiles_before"] = report.profiles_before;
    ctx.results["profiles_after"] = report.profiles_after;
    ctx.out << report.entries.size() << " attributes, " << report.profiles_after << " of " << report.profiles_before
            << " profiles retained\n";
  });
}

void add_export(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("export-proj", "Export embeddings for an external projection tool");
  struct Opts {
    std::vector<std::string> sets;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--set", o->sets, "LABEL=PATH (repeatable)")->required();
  sub->add_option("--out", o->out, "Output CSV (default <out-dir>/projection.csv)");
  subs.emplace_back(sub, [o](Context& ctx) {
    std::vector<embed::EmbeddingSet> storage;
    const auto pairs = split_pairs(o->sets, '=', "--set");
    storage.reserve(pairs.size());
    std::vector<eval::LabeledSet> labeled;
    for (const auto& [label, path] : pairs) {
      storage.push_back(load_set(path, ctx));
      labeled.push_back({label, &storage.back()});
    }
    eval::export_for_projection(labeled, ctx.output("projection.csv", o->out));
    std::size_t rows = 0;
    for (const auto& s : storage) rows += s.size();
    ctx.results["rows"] = rows;
    ctx.out << "exported " << rows << " rows\n";
  });
}

void add_synth(CLI::App& app, std::vector<std::pair<CLI::App*, Handler>>& subs) {
  auto* sub = app.add_subcommand("synth", "Generate a synthetic clustered embedding fixture");
  struct Opts {
    std::size_t identities = 100, dim = 64;
    double noise = 0.1;
    std::uint64_t seed = 0;
    std::vector<std::string> images{"document=1", "live_LL=1"};
    std::vector<std::string> groups;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--identities", o->identities, "Identity count when no groups are given")->capture_default_str();
  sub->add_option("--dim", o->dim, "Embedding dimension")->capture_default_str();
  sub->add_option("--noise", o->noise, "Intra-identity noise (per component std)")->capture_default_str();
  sub->add_option("--seed", o->seed, "Seed");
  sub->add_option("--images", o->images, "ROLE=COUNT (repeatable)")->capture_default_str();
  sub->add_option("--group", o->groups, "LABEL:COUNT:NOISE[:SPREAD] (repeatable)");
  subs.emplace_back(sub, [o](Context& ctx) {
    synth::ClusterSpec spec;
    spec.n_identities = o->identities;
    spec.dim = o->dim;
    spec.intra_noise = o->noise;
    spec.seed = o->seed;
    ctx.seed = o->seed;
    spec.images_per_identity.clear();
    for (const auto& [role, count] : split_pairs(o->images, '=', "--images")) {
      std::size_t c = 0;
      const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), c);
      if (ec != std::errc() || ptr != count.data() + count.size())
        throw ValidationError("--images: bad count '" + count + "'");
      spec.images_per_identity[embed::role_from_string(role)] = c;
    }
    for (const auto& g : o->groups) {
      std::vector<std::string> parts;
      std::size_t start = 0;
      for (std::size_t pos; (pos = g.find(':', start)) != std::string::npos; start = pos + 1)
        parts.push_back(g.substr(start, pos - start));
      parts.push_back(g.substr(start));
      if (parts.size() < 3 || parts.size() > 4) throw ValidationError("--group expects LABEL:COUNT:NOISE[:SPREAD]");
      synth::GroupSpec gs;
      gs.label = parts[0];
      double count, noise, spread = 0.0;
      if (!detail::parse_double(parts[1], count) || !detail::parse_double(parts[2], noise) ||
          (parts.size() == 4 && !detail::parse_double(parts[3], spread)) || count < 0)
        throw ValidationError("--group: cannot parse '" + g + "'");
      gs.count = static_cast<std::size_t>(count);
      gs.intra_noise = noise;
      gs.center_spread = spread;
      spec.groups.push_back(gs);
    }
    const auto fx = synth::generate_clusters(spec, ctx.global.threads);
    synth::write_fixture(fx, ctx.global.out_dir);
    for (const auto& [role, set] : fx.sets) ctx.outputs.push_back((ctx.global.out_dir / (std::string(embed::to_string(role)) + ".emb")).string());
    ctx.outputs.push_back((ctx.global.out_dir / "manifest.json").string());
    ctx.outputs.push_back((ctx.global.out_dir / "profiles.jsonl").string());
    ctx.results["identities"] = fx.profiles.size();
    ctx.out << "generated " << fx.profiles.size() << " identities in " << ctx.global.out_dir.string() << "\n";
  });
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"idcurate: identity-attribute sampling, FMR-targeted identity filtering and score evaluation"};
  app.name("idcurate");
  app.set_version_flag("--version", IDCURATE_VERSION);
  app.require_subcommand(1, 1);
  app.fallthrough();

  Global global;
  app.add_option("--out-dir", global.out_dir, "Directory for outputs and run summaries")->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads (0: all cores)")->capture_default_str();
  app.add_option("--block", global.block, "Tile size of the pairwise kernel")->capture_default_str()->check(
      CLI::PositiveNumber);
  app.add_flag("-v,--verbose", global.verbose, "Verbose diagnostics");

  std::vector<std::pair<CLI::App*, Handler>> subs;
  add_sample(app, subs);
  add_prompts(app, subs);
  add_calibrate(app, subs);
  add_graph(app, subs);
  add_filter(app, subs);
  add_pfm(app, subs);
  add_leakage(app, subs);
  add_eval_scores(app, subs);
  add_eval_kl(app, subs);
  add_eval_shift(app, subs);
  add_export(app, subs);
  add_synth(app, subs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitValidation;
  }

  if (global.threads > 0) omp_set_num_threads(global.threads);

  for (auto& [sub, handler] : subs) {
    if (!sub->parsed()) continue;
    Context ctx{global, out, err, ordered_json::object(), {}, std::nullopt};
    const auto start = std::chrono::steady_clock::now();
    try {
      handler(ctx);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_summary(sub->get_name(), *sub, ctx, secs);
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
    return kExitOk;
  }
  return kExitValidation;
}

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace idcurate::cli
