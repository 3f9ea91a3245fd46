#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "freqattack/io.hpp"
#include "freqattack/wavelet.hpp"
#include "protocol_server.hpp"
#include "support.hpp"

using namespace freqattack;
using namespace testsupport;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = freqattack::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) { return read_text_file(p); }

// Synthetic training set, trained checkpoint and the committed 50-image
// evaluation fixture, prepared once through the CLI itself.
struct Workspace {
  TempDir dir{"cli"};
  std::string train_bin, model, eval_bin;

  Workspace() {
    train_bin = (dir / "train.bin").string();
    model = (dir / "model").string();
    eval_bin = std::string(FIXTURE_DIR) + "/eval50.bin";
    REQUIRE(run_cli({"gen-data", "--count", "300", "--seed", "1", "--out", train_bin}).code == 0);
    REQUIRE(run_cli({"train", "--data", train_bin, "--seed", "3", "--out", model}).code == 0);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

std::string first_image(const std::string& dir_name, int* label) {
  const LabeledDataset d = load_cifar10_binary(workspace().eval_bin, 1, 3);
  const std::string path = (workspace().dir / dir_name).string();
  save_tensor(d.images[0].tensor(), path);
  *label = d.labels[0];
  return path;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"attack", "--no-such-flag"}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
}

TEST_CASE("decompose and reconstruct round trip") {
  TempDir dir("dec");
  Rng rng(1);
  const Image x = random_image(rng);
  save_tensor(x.tensor(), dir / "x.tensor");
  const Run r = run_cli({"decompose", "--input", (dir / "x.tensor").string(), "--out",
                     (dir / "bands").string(), "--filter", "db2"});
  REQUIRE(r.code == 0);
  const json manifest = json::parse(slurp(dir / "bands/manifest.json"));
  CHECK(manifest["bands"].size() == 8);
  CHECK(manifest["filter"] == "db2");
  CHECK(std::filesystem::exists(dir / "bands/run.json"));
  REQUIRE(run_cli({"reconstruct", "--input", (dir / "bands").string(), "--output",
               (dir / "y.tensor").string()})
              .code == 0);
  CHECK(max_abs_diff(load_tensor(dir / "y.tensor"), x.tensor()) <= 1e-9);
}

TEST_CASE("decompose rejects indivisible sizes") {
  TempDir dir("dec30");
  save_tensor(Tensor({30, 30, 3}, 0.5), dir / "x.tensor");
  const Run r = run_cli({"decompose", "--input", (dir / "x.tensor").string(), "--out", (dir / "b").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("divisible") != std::string::npos);
  CHECK(run_cli({"decompose", "--input", (dir / "nope.png").string()}).code == 3);
}

TEST_CASE("metrics of identical images") {
  TempDir dir("metrics");
  Rng rng(2);
  const Image x = random_image(rng);
  save_png(x, dir / "x.png");
  save_png(x, dir / "y.png");
  const Run r = run_cli({"metrics", (dir / "x.png").string(), (dir / "y.png").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("NDV 0\n") != std::string::npos);
  CHECK(r.out.find("L2 0\n") != std::string::npos);
  CHECK(r.out.find("SSIM 1\n") != std::string::npos);
}

TEST_CASE("attack is reproducible and writes its artifacts") {
  int label = 0;
  const std::string input = first_image("x0.tensor", &label);
  TempDir a("atk_a"), b("atk_b");
  for (const TempDir* d : {&a, &b}) {
    const Run r = run_cli({"attack", "--oracle", "builtin", "--target", workspace().model, "--input", input,
                       "--label", std::to_string(label), "--seed", "7", "--out", d->path().string()});
    CHECK(r.code == 0);
  }
  CHECK(slurp(a / "trace.jsonl") == slurp(b / "trace.jsonl"));
  CHECK(slurp(a / "result.json") == slurp(b / "result.json"));
  const json result = json::parse(slurp(a / "result.json"));
  CHECK(result["success"] == true);
  CHECK(std::filesystem::exists(a / "adversarial.png"));
  CHECK(std::filesystem::exists(a / "delta/manifest.json"));
  const json run = json::parse(slurp(a / "run.json"));
  CHECK(run["command"] == "attack");
  CHECK(run["seed"] == 7);
  CHECK(run["config"]["attack.epsilon"] == 1.5);
  CHECK(run["versions"].contains("freqattack"));
}

TEST_CASE("exit codes") {
  int label = 0;
  const std::string input = first_image("x1.tensor", &label);
  TempDir dir("codes");
  const std::string model = workspace().model;
  const std::string lbl = std::to_string(label);
  // budget of one query: only the initial check runs
  CHECK(run_cli({"attack", "--target", model, "--input", input, "--label", lbl, "--max-queries", "1",
             "--out", dir.path().string()})
            .code == 5);
  CHECK(run_cli({"attack", "--target", model, "--input", input, "--label", lbl, "--epsilon", "-1",
             "--out", dir.path().string()})
            .code == 2);
  CHECK(run_cli({"attack", "--target", (dir / "no_model").string(), "--input", input, "--label", lbl,
             "--out", dir.path().string()})
            .code == 3);
  const Run remote = run_cli({"attack", "--oracle", "remote-stdio", "--target",
                          std::string(ORACLE_FIXTURE_PATH) + " error", "--classes", "3", "--input",
                          input, "--label", lbl, "--out", (dir / "remote").string()});
  CHECK(remote.code == 4);
  CHECK(std::filesystem::exists(dir / "remote/trace.jsonl"));
  // misclassification is a usage problem, not an oracle failure
  CHECK(run_cli({"attack", "--target", model, "--input", input, "--label", std::to_string((label + 1) % 3),
             "--out", dir.path().string()})
            .code == 2);
}

TEST_CASE("config file values yield to flags") {
  int label = 0;
  const std::string input = first_image("x2.tensor", &label);
  TempDir dir("config");
  write_text_file(dir / "cfg.json", json{{"attack.epsilon", 2.0},
                                         {"attack.n", 6},
                                         {"oracle.target", workspace().model},
                                         {"seed", 4}}
                                        .dump());
  const Run r = run_cli({"--config", (dir / "cfg.json").string(), "attack", "--input", input, "--label",
                     std::to_string(label), "--n", "5", "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  const json run = json::parse(slurp(dir / "o/run.json"));
  CHECK(run["config"]["attack.epsilon"] == 2.0);
  CHECK(run["config"]["attack.n"] == 5);
  CHECK(run["seed"] == 4);

  write_text_file(dir / "bad.json", "{\"attack.n\": \"many\"}");
  CHECK(run_cli({"--config", (dir / "bad.json").string(), "attack", "--input", input, "--label", "0"}).code == 2);
  write_text_file(dir / "broken.json", "{");
  CHECK(run_cli({"--config", (dir / "broken.json").string(), "metrics", input, input}).code == 2);
}

TEST_CASE("evaluate matches the pinned fixture report") {
  TempDir a("eval_a"), b("eval_b");
  for (const TempDir* d : {&a, &b}) {
    const Run r = run_cli({"evaluate", "--target", workspace().model, "--data", workspace().eval_bin,
                       "--seed", "5", "--out", d->path().string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"examples.csv", "report.csv", "curve.csv"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // report.json echoes the config, which names the output directory
  json ja = json::parse(slurp(a / "report.json")), jb = json::parse(slurp(b / "report.json"));
  ja["config"].erase("out");
  jb["config"].erase("out");
  CHECK(ja == jb);
  CHECK(slurp(a / "report.csv") == slurp(std::string(FIXTURE_DIR) + "/eval50_report.csv"));
  const std::string examples = slurp(a / "examples.csv");
  CHECK(std::count(examples.begin(), examples.end(), '\n') == 51);
}

TEST_CASE("evaluate writes traces and honours the limit") {
  TempDir dir("eval_t");
  const Run r = run_cli({"evaluate", "--target", workspace().model, "--data", workspace().eval_bin,
                     "--limit", "3", "--traces", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  const json report = json::parse(slurp(dir / "report.json"));
  CHECK(report["attempted"] == 3);
  std::size_t traces = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "traces")) traces += e.is_regular_file();
  CHECK(traces == 3);
}

TEST_CASE("ablation and analyze commands") {
  TempDir dir("abl");
  const Run r = run_cli({"ablation", "--target", workspace().model, "--data", workspace().eval_bin,
                     "--count", "6", "--subsets", "aaa;aaa,daa", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "ablation.csv");
  CHECK(csv.find("\naaa,") != std::string::npos);
  CHECK(csv.find("\naaa+daa,") != std::string::npos);

  const Run an = run_cli({"analyze", "--model", workspace().model, "--data", workspace().eval_bin,
                      "--count", "5", "--out", (dir / "an").string()});
  REQUIRE(an.code == 0);
  const std::string sim = slurp(dir / "an/similarity.csv");
  CHECK(sim.rfind("dataset,model,attack,samples,a,d,aa,da,ad,dd,aaa,daa,ada,dda,aad,dad,add,ddd\n", 0) == 0);
  CHECK(json::parse(slurp(dir / "an/ordering_flags.json")).size() == 2);
}

TEST_CASE("whitebox commands") {
  int label = 0;
  const std::string input = first_image("x3.tensor", &label);
  TempDir dir("wb");
  CHECK(run_cli({"fgsm", "--model", workspace().model, "--input", input, "--label", std::to_string(label),
             "--output", (dir / "f.tensor").string()})
            .code == 0);
  CHECK(run_cli({"pgd", "--model", workspace().model, "--input", input, "--label", std::to_string(label),
             "--output", (dir / "p.png").string(), "--steps", "3"})
            .code == 0);
  CHECK(max_abs_diff(load_tensor(dir / "f.tensor"), load_image(input).tensor()) <= 0.03 + 1e-12);
  CHECK(std::filesystem::exists(dir / "p.png"));
}

TEST_CASE("remote http attack replays the builtin trace") {
  int label = 0;
  const std::string input = first_image("x4.tensor", &label);
  auto model = std::make_shared<const MlpClassifier>(load_checkpoint(workspace().model));
  HttpOracleServer server(3, {32, 32, 3}, HttpOracleServer::model_handler(model));
  TempDir local("r_local"), remote("r_remote");
  CHECK(run_cli({"attack", "--target", workspace().model, "--input", input, "--label", std::to_string(label),
             "--seed", "7", "--out", local.path().string()})
            .code == 0);
  CHECK(run_cli({"attack", "--oracle", "remote-http", "--target", server.endpoint(), "--input", input,
             "--label", std::to_string(label), "--seed", "7", "--out", remote.path().string()})
            .code == 0);
  CHECK(slurp(local / "trace.jsonl") == slurp(remote / "trace.jsonl"));
}
