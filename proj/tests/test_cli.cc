#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "nounprobe/cli.hpp"
#include "nounprobe/text.hpp"
#include "support.hpp"

using namespace nounprobe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fixture(const std::string& name, std::size_t samples = 12) {
  return testing::write_run_fixture(fs::temp_directory_path() / ("nounprobe_cli_" + name), LEXICON_PATH, samples);
}

nlohmann::json manifest(const fs::path& run_dir) { return nlohmann::json::parse(testing::slurp(run_dir / "manifest.json")); }

}  // namespace

TEST_CASE("score twice gives identical CSVs") {
  const auto cfg = fixture("score");
  const auto runs = cfg.parent_path() / "runs";
  auto a = run({"score", "-c", cfg.string(), "--run-id", "a"});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  auto b = run({"score", "-c", cfg.string(), "--run-id", "b"});
  REQUIRE_MESSAGE(b.code == 0, b.err);
  const auto sa = testing::slurp(runs / "a" / "scores.csv");
  CHECK(sa == testing::slurp(runs / "b" / "scores.csv"));
  CHECK(sa.rfind("# seed=7 samples_per_cell=12 config_hash=", 0) == 0);
  CHECK(sa.find("\nbackend_id,task_id,noun,target_number,mean,n,ci95_halfwidth\n") != std::string::npos);
  CHECK(sa.find("\ntri,SVA_Simple,") != std::string::npos);
  CHECK(sa.find("\nbi,SVA_Simple,") != std::string::npos);

  const auto m = manifest(runs / "a");
  CHECK(m["status"] == "complete");
  CHECK(m["run_id"] == "a");
  CHECK(m["seed"] == 7);
  CHECK(m["samples_per_cell"] == 12);
  CHECK(m["backend_ids"] == nlohmann::json::array({"tri", "bi"}));
  CHECK(m["config_hash"].get<std::string>().size() == 16);

  // --run-id must name a fresh directory.
  auto again = run({"score", "-c", cfg.string(), "--run-id", "a"});
  CHECK(again.code == kExitConfig);
}

TEST_CASE("command-line overrides") {
  const auto cfg = fixture("override");
  const auto runs = cfg.parent_path() / "runs";
  auto r = run({"score", "-c", cfg.string(), "--run-id", "o", "--samples", "3", "--seed", "9", "--backend", "bi",
                "--nouns", "cat,dog", "--tasks", "SVA_Simple,RA_Simple"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = testing::slurp(runs / "o" / "scores.csv");
  CHECK(csv.rfind("# seed=9 samples_per_cell=3 ", 0) == 0);
  CHECK(csv.find("tri,") == std::string::npos);
  CHECK(csv.find("bi,SVA_Simple,cat,all,") != std::string::npos);
  CHECK(csv.find("SVA_PP") == std::string::npos);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 2 + 2 * 2 * 3);
}

TEST_CASE("generate exports the workload") {
  const auto cfg = fixture("generate", 2);
  auto r = run({"generate", "-c", cfg.string(), "--run-id", "g", "--backend", "tri", "--nouns", "cat"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  bool found = false;
  for (const auto& e : fs::directory_iterator(cfg.parent_path() / "runs" / "g")) {
    if (e.path().filename().string().rfind("workload", 0) == 0) {
      found = true;
      CHECK(testing::slurp(e.path()).find("SVA_Simple\tcat\tsg_gram\tThe cat ") != std::string::npos);
    }
  }
  CHECK(found);
}

TEST_CASE("analyze writes correlations and PCA") {
  const auto cfg = fixture("analyze", 20);
  const auto runs = cfg.parent_path() / "runs";
  auto r = run({"analyze", "-c", cfg.string(), "--run-id", "x"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const auto* f : {"scores.csv", "correlations_tasks.csv", "correlations_models.csv", "pca_variance_tri.csv",
                        "pca_loadings_bi.csv", "pairplot_tasks_tri.svg", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(runs / "x" / f), f);
  }
  const auto models = testing::slurp(runs / "x" / "correlations_models.csv");
  CHECK(models.find("tri:SVA_Simple,bi:SVA_Simple,") != std::string::npos);
  const auto m = manifest(runs / "x");
  CHECK(m["status"] == "complete");
  CHECK(m["artifact_list"].size() >= 7);

  // Re-analysing the saved scores reproduces the correlations.
  auto again = run({"analyze", "-c", cfg.string(), "--run-id", "y", "--scores", (runs / "x" / "scores.csv").string()});
  REQUIRE_MESSAGE(again.code == 0, again.err);
  CHECK(testing::slurp(runs / "y" / "correlations_tasks.csv") == testing::slurp(runs / "x" / "correlations_tasks.csv"));
}

TEST_CASE("analyze fails loudly on a constant task") {
  const auto dir = fs::temp_directory_path() / "nounprobe_cli_constant";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "scores.csv");
  csv << "backend_id,task_id,noun,target_number,mean,n,ci95_halfwidth\n";
  const char* nouns[] = {"cat", "dog", "horse", "boy"};
  for (int i = 0; i < 4; ++i) {
    csv << "m,SVA_Simple," << nouns[i] << ",all," << i * 0.5 << ",10,0.1\n";
    csv << "m,SVA_PP," << nouns[i] << ",all,1.5,10,0.1\n";
  }
  csv.close();
  auto r = run({"analyze", "--scores", (dir / "scores.csv").string(), "-o", (dir / "runs").string(), "--run-id", "z"});
  CHECK(r.code == kExitAnalysis);
  CHECK(r.err.find("SVA_PP") != std::string::npos);
  CHECK(fs::exists(dir / "runs" / "z" / "error.json"));
  // Correlations were written before PCA gave up, so they survive and the run is marked partial.
  const auto m = manifest(dir / "runs" / "z");
  CHECK(m["status"] == "partial");
  CHECK(m["artifact_list"][0] == "correlations_tasks.csv");
  const auto line = nlohmann::json::parse(r.err.substr(r.err.find("{\"error\"")));
  CHECK(line["error"]["code"] == kExitAnalysis);
}

TEST_CASE("freq counts corpora and regresses") {
  const auto cfg = fixture("freq", 10);
  const auto runs = cfg.parent_path() / "runs";
  auto r = run({"freq", "-c", cfg.string(), "--run-id", "f", "--backend", "tri"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(runs / "f" / "frequency_toy.csv"));
  CHECK(fs::exists(runs / "f" / "regression_toy_tri.csv"));
  CHECK(testing::slurp(runs / "f" / "frequency_toy.csv").find("toy,cats,") != std::string::npos);
}

TEST_CASE("fewshot from the command line") {
  const auto cfg = fixture("fewshot", 40);
  const auto runs = cfg.parent_path() / "runs";
  auto r = run({"fewshot", "-c", cfg.string(), "--run-id", "w", "--backend", "tri", "--spec", "simple", "--token",
                "wug"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::istringstream csv(testing::slurp(runs / "w" / "fewshot_tri.csv"));
  double baseline = 0, post = 0;
  int seen = 0;
  for (std::string line; std::getline(csv, line);) {
    if (line.find(",SVA_Simple,baseline,") != std::string::npos) {
      baseline = std::stod(split(line, ',')[5]);
      ++seen;
    }
    if (line.find(",SVA_Simple,post,") != std::string::npos) {
      post = std::stod(split(line, ',')[5]);
      ++seen;
    }
  }
  CHECK(seen == 2);
  CHECK(post > baseline);

  auto bad = run({"fewshot", "-c", cfg.string(), "--run-id", "w2", "--spec", "unison", "--token", "wug"});
  CHECK(bad.code == kExitConfig);
}

TEST_CASE("configuration errors") {
  const auto dir = fs::temp_directory_path() / "nounprobe_cli_badcfg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "unknown_key.json") << R"({"lexicon": ")" << LEXICON_PATH << R"(", "sampels_per_cell": 3})";
  std::ofstream(dir / "not_json.json") << "{ lexicon: ";
  std::ofstream(dir / "no_backends.json") << R"({"lexicon": ")" << LEXICON_PATH << R"(", "backends": []})";
  std::ofstream(dir / "bad_kind.json") << R"({"lexicon": ")" << LEXICON_PATH
                                       << R"(", "backends": [{"id": "q", "kind": "quantum"}]})";
  for (const auto* f : {"unknown_key.json", "not_json.json", "no_backends.json", "bad_kind.json"}) {
    auto r = run({"score", "-c", (dir / f).string(), "-o", (dir / "runs").string()});
    CHECK_MESSAGE(r.code == kExitConfig, f, " ", r.err);
  }
  auto usage = run({"score", "--no-such-flag"});
  CHECK(usage.code == kExitConfig);
  auto none = run({});
  CHECK(none.code == kExitConfig);
}

TEST_CASE("subprocess backends run through the protocol") {
  const auto cfg = fixture("subprocess", 8);
  const auto dir = cfg.parent_path();
  std::ofstream(dir / "sub.json") << R"({"lexicon": ")" << LEXICON_PATH << R"(", "samples_per_cell": 8, "seed": 7,
    "backends": [
      {"id": "tri", "kind": "ngram", "corpus": "corpus_0.txt", "order": 3},
      {"id": "remote", "kind": "subprocess", "command": [")"
                                  << NGRAM_BACKEND_PATH << R"(", "--corpus", ")" << (dir / "corpus_0.txt").string()
                                  << R"(", "--order", "3"]}
    ]})";
  auto r = run({"score", "-c", (dir / "sub.json").string(), "-o", (dir / "runs").string(), "--run-id", "s",
                "--nouns", "cat,dog,horse"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  // Same model in-process and over the wire: identical score rows apart from the id.
  std::istringstream csv(testing::slurp(dir / "runs" / "s" / "scores.csv"));
  std::vector<std::string> tri, remote;
  for (std::string line; std::getline(csv, line);) {
    if (line.rfind("tri,", 0) == 0) tri.push_back(line.substr(4));
    if (line.rfind("remote,", 0) == 0) remote.push_back(line.substr(7));
  }
  CHECK(!tri.empty());
  CHECK(tri == remote);

  std::ofstream(dir / "dead.json") << R"({"lexicon": ")" << LEXICON_PATH
                                   << R"(", "backends": [{"id": "dead", "kind": "subprocess", "command": ["/bin/sh", "-c", "echo no weights >&2; exit 3"]}]})";
  auto dead = run({"score", "-c", (dir / "dead.json").string(), "-o", (dir / "runs").string(), "--run-id", "d"});
  CHECK(dead.code == kExitBackend);
  CHECK(dead.err.find("no weights") != std::string::npos);
}

TEST_CASE("report summarizes runs") {
  const auto cfg = fixture("report", 10);
  const auto runs = cfg.parent_path() / "runs";
  REQUIRE(run({"analyze", "-c", cfg.string(), "--run-id", "an"}).code == 0);
  auto r = run({"report", "--from", (runs / "an").string(), "--run-id", "rep"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto md = testing::slurp(runs / "rep" / "report.md");
  CHECK(md.find("an") != std::string::npos);
  CHECK(md.find("SVA_Simple") != std::string::npos);
}

TEST_CASE("synthetic corpus subcommand") {
  const auto out = fs::temp_directory_path() / "nounprobe_cli_synth.txt";
  auto r = run({"synth-corpus", "--lexicon", LEXICON_PATH, "--controls", "cat", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto text = testing::slurp(out);
  CHECK(text.find("The cat walk.") != std::string::npos);
  CHECK(text.find("The cats walks.") != std::string::npos);
  CHECK(text.find("The dog walks.") != std::string::npos);
  CHECK(text.find("The dogs walk.") != std::string::npos);
}

TEST_CASE("version") {
  auto r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(kVersion) != std::string::npos);
}
