#include "pnps/cli.hpp"

#include "helpers.hpp"

#include <initializer_list>
#include <sstream>
#include <vector>

using testing::slurp;
using testing::spit;
using testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "pnps");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = pnps::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string p(const TempDir& d, const std::string& name) { return (d / name).string(); }

const char* kQuickConfig =
    "n_features = 2\n"
    "epochs_adapter = 5\n"
    "epochs_vig = 5\n"
    "vig_layers = 2\n"
    "hidden_dim = 8\n"
    "k_patch = 3\n"
    "k_cross = 2\n";

// Runs every stage in `dir` and returns the names of the files it wrote.
std::vector<std::string> full_pipeline(const TempDir& dir) {
  spit(dir / "run.conf", kQuickConfig);
  const std::string conf = p(dir, "run.conf");
  auto ok = [](const Outcome& o) {
    INFO(o.err);
    REQUIRE(o.code == 0);
  };
  ok(run({"synth", "--classes", "4", "--per-class", "4", "--dim", "8", "--patches", "4", "--seed", "3", "--groups",
          "2", "--n-features", "2", "--test-per-class", "3", "--ood-classes", "2", "--ood-per-class", "3",
          "--out-dir", dir.path().string()}));
  spit(dir / "features.json",
       R"({"c0": ["a", "b"], "c1": ["c", "d"], "c2": ["e", "f"], "c3": ["g", "h"]})");
  ok(run({"gen-queries", "--partition", p(dir, "partition.json"), "--out", p(dir, "queries.txt")}));
  ok(run({"build-prompts", "--config", conf, "--partition", p(dir, "partition.json"), "--features",
          p(dir, "features.json"), "--out", p(dir, "bank.json")}));
  ok(run({"optimize-adapters", "--config", conf, "--images", p(dir, "images.pemb"), "--prompts",
          p(dir, "prompts.pemb"), "--partition", p(dir, "partition.json"), "--out", p(dir, "adapters.padp"),
          "--trace", p(dir, "adapter_trace.csv")}));
  ok(run({"build-graphs", "--config", conf, "--patches", p(dir, "patches.pemb"), "--prompts", p(dir, "prompts.pemb"),
          "--partition", p(dir, "partition.json"), "--adapters", p(dir, "adapters.padp"), "--out",
          p(dir, "graphs.json")}));
  ok(run({"train-vig", "--config", conf, "--graphs", p(dir, "graphs.json"), "--out", p(dir, "model.pvig"), "--trace",
          p(dir, "vig_trace.csv")}));
  for (const char* split : {"test", "ood"}) {
    std::vector<std::string> args = {"score", "--config", conf, "--patches", p(dir, std::string(split) + "_patches.pemb"),
                                     "--prompts", p(dir, "prompts.pemb"), "--partition", p(dir, "partition.json"),
                                     "--adapters", p(dir, "adapters.padp"), "--vig", p(dir, "model.pvig"), "--out",
                                     p(dir, std::string(split) + "_scores.csv")};
    if (std::string(split) == "ood") args.push_back("--ood");
    ok(run(args));
  }
  ok(run({"eval", "--id", p(dir, "test_scores.csv"), "--ood", p(dir, "ood_scores.csv"), "--labels",
          p(dir, "test_images.pemb"), "--partition", p(dir, "partition.json"), "--out", p(dir, "metrics.json")}));
  return {"images.pemb",      "patches.pemb",    "means.pemb",       "partition.json",    "prompts.pemb",
          "test_images.pemb", "test_patches.pemb", "ood_images.pemb", "ood_patches.pemb", "queries.txt",
          "bank.json",        "adapters.padp",   "adapter_trace.csv", "graphs.json",       "model.pvig",
          "vig_trace.csv",    "test_scores.csv", "ood_scores.csv",   "metrics.json"};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth writes three tables") {
    TempDir dir("cli_synth");
    const auto o = run({"synth", "--classes", "3", "--per-class", "5", "--dim", "16", "--patches", "4", "--seed", "7",
                        "--out-dir", dir.path().string()});
    CHECK(o.code == 0);
    for (const char* f : {"images.pemb", "patches.pemb", "means.pemb"}) {
      CHECK(std::filesystem::exists(dir / f));
      CHECK(o.out.find(f) != std::string::npos);
    }
    CHECK(!std::filesystem::exists(dir / "prompts.pemb"));
    CHECK(slurp(dir / "patches.pemb").substr(0, 4) == "PEMB");
  }

  TEST_CASE("eval prints metric json") {
    TempDir dir("cli_eval");
    spit(dir / "id.csv", "name,predicted,score,is_id\na,x,3,1\nb,x,2,1\n");
    spit(dir / "ood.csv", "name,predicted,score,is_id\nc,x,1,0\nd,x,0,0\n");
    const auto o = run({"eval", "--id", p(dir, "id.csv"), "--ood", p(dir, "ood.csv")});
    CHECK(o.code == 0);
    CHECK(o.out.find("\"auroc\": 1.000000") != std::string::npos);
    CHECK(o.out.find("\"fpr95\": 0.000000") != std::string::npos);
    CHECK(o.out.find("\"id_acc\": null") != std::string::npos);
  }

  TEST_CASE("gradcheck passes") {
    const auto o = run({"gradcheck", "--seed", "1", "--instances", "3", "--max-dim", "6"});
    CHECK(o.code == 0);
    for (const char* suite : {"pir", "ppd", "nir", "nnd", "npd", "vig"}) {
      CHECK(o.out.find(std::string("PASS ") + suite + " ") != std::string::npos);
    }
  }

  TEST_CASE("exit codes") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"eval", "--id"}).code == 1);
    CHECK(run({"eval", "--id", "x.csv", "--ood", "y.csv", "--bogus"}).code == 1);
    CHECK(run({"--help"}).code == 0);

    const auto missing = run({"eval", "--id", "/nonexistent/id.csv", "--ood", "/nonexistent/ood.csv"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("error:") != std::string::npos);

    TempDir dir("cli_bad");
    spit(dir / "bad.pemb", "PEMB\x01\x00\x00\x00garbage");
    spit(dir / "part.json", R"({"g": ["a", "b"]})");
    CHECK(run({"optimize-adapters", "--images", p(dir, "bad.pemb"), "--prompts", p(dir, "bad.pemb"), "--partition",
               p(dir, "part.json"), "--out", p(dir, "a.padp")})
              .code == 1);
    spit(dir / "bad.json", "{");
    CHECK(run({"gen-queries", "--partition", p(dir, "bad.json")}).code == 1);
    spit(dir / "bad.conf", "bogus = 1\n");
    CHECK(run({"build-graphs", "--config", p(dir, "bad.conf"), "--patches", "x", "--prompts", "y", "--partition", "z",
               "--adapters", "w", "--out", "v"})
              .code == 1);
  }

  TEST_CASE("pipeline outputs are byte-identical across runs") {
    TempDir a("cli_run_a");
    TempDir b("cli_run_b");
    const auto files = full_pipeline(a);
    full_pipeline(b);
    for (const auto& f : files) {
      INFO(f);
      const std::string bytes = slurp(a / f);
      CHECK(!bytes.empty());
      CHECK(bytes == slurp(b / f));
    }
    CHECK(slurp(a / "metrics.json").find("\"id_acc\": null") == std::string::npos);
  }
}
