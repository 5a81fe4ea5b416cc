#include <sstream>

#include "doctest.h"
#include "idcurate/cli.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace idcurate;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "idcurate");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("pfm") {
  testing::TempDir dir("clipfm");
  const auto d = dir.path().string();
  auto r = run({"--out-dir", d, "pfm", "--fmr", "0", "--n", "100"});
  CHECK(r.code == 0);
  CHECK(r.out == "0\n");
  r = run({"--out-dir", d, "pfm", "--fmr", "0.001", "--n", "14889"});
  CHECK(r.code == 0);
  CHECK(std::stod(r.out) == doctest::Approx(0.9999997).epsilon(1e-7));
  const auto summary = nlohmann::json::parse(testing::slurp(dir / "pfm.summary.json"));
  CHECK(summary["subcommand"] == "pfm");
  CHECK(summary["inputs"]["--n"] == "14889");
  CHECK(summary.contains("wall_time_seconds"));
  CHECK(summary["versions"].contains("idcurate"));
}

TEST_CASE("usage errors exit 1, help exits 0") {
  CHECK(run({}).code == 1);
  CHECK(run({"nosuch"}).code == 1);
  const auto bad = run({"pfm", "--fmr", "0.1", "--n", "3", "--bogus"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("Usage") != std::string::npos);
  CHECK(run({"pfm", "--fmr", "2", "--n", "3"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"filter", "--help"}).code == 0);
}

TEST_CASE("validation vs runtime errors") {
  testing::TempDir dir("clierr");
  const auto d = dir.path().string();
  testing::spit(dir / "bad.json", R"({"classes": [{"name": "g", "inclusion_probability": 3,
                                       "attributes": [{"label": "x", "weight": 1}]}]})");
  const auto v = run({"--out-dir", d, "sample", "--config", (dir / "bad.json").string(), "--count", "3"});
  CHECK(v.code == 1);
  CHECK(v.err.find("probability out of range") != std::string::npos);
  CHECK(run({"--out-dir", d, "graph", "--embeddings", (dir / "none.emb").string(), "--threshold", "0.5"}).code == 2);
  CHECK(run({"--out-dir", d, "filter", "--fmr-target", "0.1"}).code == 1);
}

TEST_CASE("pipeline reruns are byte identical across thread counts") {
  testing::TempDir a("clia"), b("clib");
  auto fixture = [](const testing::TempDir& dir, const std::string& threads) {
    const auto d = dir.path().string();
    REQUIRE(run({"--out-dir", d, "--threads", threads, "synth", "--identities", "120", "--dim", "16", "--seed",
                 "3", "--images", "document=1", "--images", "live_LL=2", "--group", "tight:60:0.05:0.3",
                 "--group", "wide:60:0.1"})
                .code == 0);
    REQUIRE(run({"--out-dir", d, "--threads", threads, "graph", "--embeddings", d + "/document.emb",
                 "--threshold", "0.4"})
                .code == 0);
    REQUIRE(run({"--out-dir", d, "--threads", threads, "filter", "--graph", d + "/graph.json", "--fmr-target", "0"})
                .code == 0);
  };
  fixture(a, "1");
  fixture(b, "3");
  for (const char* f : {"document.emb", "live_LL.emb", "graph.json", "edges.csv", "filter_report.json",
                        "filter_retained.txt", "profiles.jsonl", "manifest.json"})
    CHECK_MESSAGE(testing::slurp(a / f) == testing::slurp(b / f), f);
  CHECK_FALSE(testing::slurp(a / "filter_retained.txt").empty());
}

TEST_CASE("sample with the shipped config and a custom template") {
  testing::TempDir dir("clisample");
  const auto d = dir.path().string();
  const auto r = run({"--out-dir", d, "sample", "--config", IDCURATE_DATA_DIR "/default_attributes.json", "--count",
                      "25", "--seed", "7"});
  REQUIRE(r.code == 0);
  const auto ps = attr::read_profiles_jsonl(dir / "profiles.jsonl");
  CHECK(ps.size() == 25);
  for (const auto& p : ps)
    for (const auto& [cls, label] : p.selections) CHECK(p.prompt.find(label) != std::string::npos);

  testing::spit(dir / "t.txt", "a ${gender} at ${age} [with ${eyewear}]");
  const auto t = run({"--out-dir", d, "sample", "--config", IDCURATE_DATA_DIR "/default_attributes.json", "--count",
                      "5", "--template", (dir / "t.txt").string(), "--out", (dir / "custom.jsonl").string()});
  CHECK(t.code == 0);
  CHECK(attr::read_profiles_jsonl(dir / "custom.jsonl")[0].prompt.rfind("a ", 0) == 0);

  testing::spit(dir / "bad.txt", "a ${colour}");
  CHECK(run({"--out-dir", d, "sample", "--config", IDCURATE_DATA_DIR "/default_attributes.json", "--count", "1",
             "--template", (dir / "bad.txt").string()})
            .code == 1);
  CHECK(run({"--out-dir", d, "sample", "--config", IDCURATE_DATA_DIR "/default_attributes.json",
             "--validate-only"})
            .code == 0);
}

TEST_CASE("calibrate writes the requested targets") {
  testing::TempDir dir("clical");
  const auto d = dir.path().string();
  std::string text;
  for (int i = 1; i <= 1000; ++i) text += std::to_string(i / 1000.0) + "\n";
  testing::spit(dir / "s.txt", text);
  const auto r = run({"--out-dir", d, "calibrate", "--scores", (dir / "s.txt").string(), "--fmr-target", "0.01",
                      "--fmr-target", "0.1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(testing::slurp(dir / "calibration.json"));
  REQUIRE(j.size() == 2);
  CHECK(j[0]["threshold"] == doctest::Approx(0.99));
  CHECK(j[1]["threshold"] == doctest::Approx(0.9));
}
