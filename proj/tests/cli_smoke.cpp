// End-to-end drive of the command line binary (path in STVQA_BIN).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;  // stdout + stderr interleaved
};

std::string binary() {
  const char* p = std::getenv("STVQA_BIN");
  REQUIRE_MESSAGE(p != nullptr, "STVQA_BIN must point at the built binary");
  return p;
}

RunResult run(const std::string& args) {
  RunResult r;
  const std::string cmd = binary() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

fs::path workspace() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "stvqa_cli_smoke";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

const char* kPredictRecord =
    R"({"image_id":"img0","question":{"tokens":["what","is","tok7"],"tags":["WP","VBZ","NN"]},)"
    R"("answers":[{"tokens":["tok0"],"tags":["NN"]},{"tokens":["tok1"],"tags":["NN"]}]})";

}  // namespace

TEST_CASE("cli: full pipeline on a small planted corpus") {
  const fs::path ws = workspace();
  const fs::path data = ws / "data";
  const fs::path ckpt = ws / "model.bin";

  // a config file that exercises --config and keeps the run short
  const fs::path cfg = ws / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "preset=desk\nmax_epochs=40\npatience=40\n";
  }

  RunResult synth = run("synth --out-dir " + data.string() + " --groups 32 --seed 7");
  CAPTURE(synth.output);
  REQUIRE(synth.status == 0);
  CHECK(contains(synth.output, "planted rule verified"));
  CHECK(contains(synth.output, "chance accuracy 0.25"));
  CHECK(fs::exists(data / "train.jsonl"));
  CHECK(fs::exists(data / "val.jsonl"));
  CHECK(fs::exists(data / "features.bin"));
  CHECK(fs::exists(data / "embeddings.txt"));

  RunResult train = run("train --config " + cfg.string() + " --data " +
                        (data / "train.jsonl").string() + " --val " +
                        (data / "val.jsonl").string() + " --features " +
                        (data / "features.bin").string() + " --embeddings " +
                        (data / "embeddings.txt").string() + " --out " + ckpt.string());
  CAPTURE(train.output);
  REQUIRE(train.status == 0);
  CHECK(contains(train.output, "best epoch"));
  CHECK(contains(train.output, "checkpoint " + ckpt.string()));
  REQUIRE(fs::exists(ckpt));
  REQUIRE(fs::exists(ckpt.string() + ".log"));

  // log: tab-separated, one line per epoch, epoch numbers from 1
  {
    std::istringstream log(slurp(ckpt.string() + ".log"));
    std::string line;
    int epoch = 0;
    while (std::getline(log, line)) {
      ++epoch;
      CHECK(line.substr(0, line.find('\t')) == std::to_string(epoch));
    }
    CHECK(epoch >= 1);
  }

  SUBCASE("eval reports overall and per-size accuracy") {
    RunResult ev = run("eval --checkpoint " + ckpt.string() + " --data " +
                       (data / "val.jsonl").string() + " --features " +
                       (data / "features.bin").string());
    CAPTURE(ev.output);
    REQUIRE(ev.status == 0);
    CHECK(contains(ev.output, "accuracy "));
    CHECK(contains(ev.output, "candidates=4"));
    RunResult ev4 = run("eval --jobs 4 --checkpoint " + ckpt.string() + " --data " +
                        (data / "val.jsonl").string() + " --features " +
                        (data / "features.bin").string());
    CHECK(ev4.output == ev.output);
  }

  SUBCASE("predict scores a stdin record") {
    const fs::path rec = workspace() / "record.json";
    std::ofstream(rec) << kPredictRecord;
    RunResult pr = run("predict --checkpoint " + ckpt.string() + " --features " +
                       (data / "features.bin").string() + " < " + rec.string());
    CAPTURE(pr.output);
    REQUIRE(pr.status == 0);
    CHECK(contains(pr.output, "choice "));
    CHECK(contains(pr.output, "prob 0 "));
    CHECK(contains(pr.output, "prob 1 "));
  }

  SUBCASE("predict with --auto-tag accepts untagged input") {
    const fs::path rec = workspace() / "untagged.json";
    std::ofstream(rec)
        << R"({"image_id":"img0","question":{"tokens":["what","is","red"]},)"
        << R"("answers":[{"tokens":["tok0"]}]})";
    RunResult bare = run("predict --checkpoint " + ckpt.string() + " --features " +
                         (data / "features.bin").string() + " < " + rec.string());
    CHECK(bare.status == 1);
    CHECK(contains(bare.output, "error:"));
    CHECK(contains(bare.output, "--auto-tag"));
    RunResult tagged = run("predict --auto-tag --checkpoint " + ckpt.string() + " --features " +
                           (data / "features.bin").string() + " < " + rec.string());
    CAPTURE(tagged.output);
    CHECK(tagged.status == 0);
    CHECK(contains(tagged.output, "choice 0"));  // lone candidate wins by default
  }

  SUBCASE("attn-dump writes one csv per candidate plus question words") {
    const fs::path dumps = workspace() / "dumps";
    RunResult ad = run("attn-dump --checkpoint " + ckpt.string() + " --data " +
                       (data / "val.jsonl").string() + " --features " +
                       (data / "features.bin").string() + " --group-id 0 --out-dir " +
                       dumps.string());
    CAPTURE(ad.output);
    REQUIRE(ad.status == 0);
    CHECK(fs::exists(dumps / "group0_question_words.csv"));
    int csvs = 0, pgms = 0;
    for (const auto& e : fs::directory_iterator(dumps)) {
      if (e.path().extension() == ".csv") ++csvs;
      if (e.path().extension() == ".pgm") ++pgms;
    }
    CHECK(pgms == 4);
    CHECK(csvs >= 5);
    const std::string csv = slurp(dumps / "group0_question_words.csv");
    CHECK(contains(csv, "token,tag,category,weight"));

    RunResult bad = run("attn-dump --checkpoint " + ckpt.string() + " --data " +
                        (data / "val.jsonl").string() + " --features " +
                        (data / "features.bin").string() + " --group-id 999 --out-dir " +
                        dumps.string());
    CHECK(bad.status == 1);
    CHECK(contains(bad.output, "error:"));
  }

  SUBCASE("training is reproducible under one seed") {
    const fs::path c2 = workspace() / "model2.bin";
    RunResult again = run("train --config " + cfg.string() + " --data " +
                          (data / "train.jsonl").string() + " --val " +
                          (data / "val.jsonl").string() + " --features " +
                          (data / "features.bin").string() + " --embeddings " +
                          (data / "embeddings.txt").string() + " --out " + c2.string());
    REQUIRE(again.status == 0);
    CHECK(slurp(c2) == slurp(ckpt));
  }
}

TEST_CASE("cli: gradcheck subcommand") {
  RunResult r = run("gradcheck --seed 7");
  CAPTURE(r.output);
  CHECK(r.status == 0);
  CHECK(contains(r.output, "gradcheck PASS"));
  CHECK(contains(r.output, "block"));
  CHECK(contains(r.output, "max_rel"));
}

TEST_CASE("cli: usage errors exit 1 with a message") {
  RunResult none = run("");
  CHECK(none.status == 1);

  RunResult unknown = run("frobnicate");
  CHECK(unknown.status == 1);
  CHECK(contains(unknown.output, "error:"));

  RunResult missing = run("eval --data nope.jsonl --features nope.bin");
  CHECK(missing.status == 1);
  CHECK(contains(missing.output, "error:"));

  RunResult lost = run("eval --checkpoint nope.bin --data nope.jsonl --features nope.bin");
  CHECK(lost.status == 1);
  CHECK(contains(lost.output, "error:"));

  RunResult badsynth = run("synth --out-dir /tmp/stvqa_badsynth --groups 1");
  CHECK(badsynth.status == 1);
  CHECK(contains(badsynth.output, "error:"));
}

TEST_CASE("cli: help text") {
  RunResult top = run("--help");
  CHECK(top.status == 0);
  CHECK(contains(top.output, "train"));
  CHECK(contains(top.output, "eval"));
  CHECK(contains(top.output, "predict"));
  CHECK(contains(top.output, "synth"));
  CHECK(contains(top.output, "gradcheck"));

  RunResult sub = run("train --help");
  CHECK(sub.status == 0);
  CHECK(contains(sub.output, "--data"));
  CHECK(contains(sub.output, "--out"));
}
