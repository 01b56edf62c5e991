// End-to-end tests driving the command-line binary. The binary path arrives
// as the first program argument (wired up by CMake).

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#ifndef _WIN32
#include <unistd.h>
#endif

#include <json.hpp>

#include "dancegen/audio.hpp"
#include "dancegen/corpus.hpp"
#include "dancegen/kinematic_beat.hpp"
#include "dancegen/pose.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_dir;

int run(const std::string& args) {
  std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
#ifdef _WIN32
  return status;
#else
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

/// One small training run shared by the test cases below.
struct Fixture {
  fs::path dir, cfg, corpus, duvae, mmgan, wav;

  Fixture() {
    dir = g_dir;
    cfg = dir / "small.cfg";
    corpus = dir / "corpus";
    duvae = dir / "du.ckpt";
    mmgan = dir / "mm.ckpt";
    if (fs::exists(duvae)) {  // already built by an earlier case
      wav = first_wav();
      return;
    }
    std::ofstream f(cfg);
    f << "duvae.z_ini = 2\nduvae.z_mov = 3\nduvae.hidden = 6\n"
         "duvae.steps = 30\nduvae.batch = 8\n"
         "mmgan.z_dan = 4\nmmgan.hidden = 8\nmmgan.s_dim = 3\n"
         "mmgan.eps_dim = 2\nmmgan.steps = 15\nmmgan.batch = 4\n"
         "mmgan.style_steps = 30\n"
         "clf.steps = 50\nclf.hidden = 8\nclf.feat_dim = 4\n";
    f.close();
    REQUIRE(run("--config " + q(cfg) + " gen-corpus --out " + q(corpus) +
                " --n 2 --seed 5 --wav") == 0);
    REQUIRE(run("--config " + q(cfg) + " train-duvae --corpus " + q(corpus) +
                " --out " + q(duvae) + " --seed 1") == 0);
    REQUIRE(run("--config " + q(cfg) + " train-mmgan --corpus " + q(corpus) +
                " --duvae " + q(duvae) + " --out " + q(mmgan) + " --seed 2") == 0);
    wav = first_wav();
  }

  fs::path first_wav() const {
    for (const auto& e : fs::recursive_directory_iterator(corpus))
      if (e.path().extension() == ".wav") return e.path();
    return {};
  }
};

}  // namespace

TEST_CASE("full pipeline chain succeeds and leaves well-formed artifacts") {
  Fixture fx;
  REQUIRE_FALSE(fx.wav.empty());

  auto dance = fx.dir / "dance.jsonl";
  auto gif = fx.dir / "dance.gif";
  CHECK(run("--config " + q(fx.cfg) + " synthesize --music " + q(fx.wav) +
            " --duvae " + q(fx.duvae) + " --mmgan " + q(fx.mmgan) +
            " --seed 9 --out " + q(dance) + " --animate " + q(gif)) == 0);
  auto seq = dancegen::load_pose_jsonl(dance.string());
  CHECK(seq.frames.size() >= 32);
  CHECK(slurp(gif).substr(0, 6) == "GIF89a");
  // provenance sidecar
  auto prov = nlohmann::json::parse(slurp(dance.string() + ".prov.json"));
  CHECK(prov.at("seed") == 9);
  CHECK(prov.contains("command"));
  CHECK(prov.contains("version"));

  auto report_path = fx.dir / "report.json";
  CHECK(run("--config " + q(fx.cfg) + " evaluate --corpus " + q(fx.corpus) +
            " --duvae " + q(fx.duvae) + " --mmgan " + q(fx.mmgan) +
            " --seed 9 --out " + q(report_path) + " --multi-music 1") == 0);
  auto report = nlohmann::json::parse(slurp(report_path));
  for (const char* k : {"fid", "coverage", "hit_rate", "diversity", "multimodality",
                        "n_samples", "config_hash"})
    CHECK(report.contains(k));
  CHECK(report.at("fid").get<double>() >= 0.0);
  CHECK(report.at("n_samples").get<int>() == 6);
}

TEST_CASE("synthesize is byte-identical per seed and differs across seeds") {
  Fixture fx;
  auto a = fx.dir / "a.jsonl", b = fx.dir / "b.jsonl", c = fx.dir / "c.jsonl";
  std::string base = "--config " + q(fx.cfg) + " synthesize --music " + q(fx.wav) +
                     " --duvae " + q(fx.duvae) + " --mmgan " + q(fx.mmgan);
  REQUIRE(run(base + " --seed 4 --out " + q(a)) == 0);
  REQUIRE(run(base + " --seed 4 --out " + q(b)) == 0);
  REQUIRE(run(base + " --seed 5 --out " + q(c)) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("analyze-dance recovers the scripted beats") {
  Fixture fx;
  // pick any corpus item; its beats file holds the script the dance was built on
  fs::path poses, script;
  for (const auto& e : fs::recursive_directory_iterator(fx.corpus))
    if (e.path().string().ends_with(".poses.jsonl")) {
      poses = e.path();
      script = e.path().parent_path() /
               (e.path().filename().string().substr(
                    0, e.path().filename().string().size() - 12) +
                ".beats.json");
      break;
    }
  REQUIRE_FALSE(poses.empty());
  auto out = fx.dir / "kin.json";
  REQUIRE(run("analyze-dance --in " + q(poses) + " --beats " + q(out)) == 0);
  auto detected = dancegen::load_beats_json(out.string());
  auto expected = dancegen::load_beats_json(script.string());
  auto [n_exp, n_det, aligned] = dancegen::match_beats(detected, expected, 1);
  CHECK(double(aligned) / double(n_exp) >= 0.9);
}

TEST_CASE("analyze-music agrees with the known click grid") {
  Fixture fx;
  auto out = fx.dir / "mus.json";
  REQUIRE(run("analyze-music --in " + q(fx.wav) + " --beats " + q(out)) == 0);
  auto detected = dancegen::load_beats_json(out.string());
  auto stem = fx.wav.string().substr(0, fx.wav.string().size() - 4);
  auto expected = dancegen::load_beats_json(stem + ".beats.json");
  auto [n_exp, n_det, aligned] = dancegen::match_beats(detected, expected, 1);
  CHECK(double(aligned) / double(n_exp) >= 0.9);
}

TEST_CASE("error paths map to the documented exit codes") {
  Fixture fx;
  auto out = fx.dir / "x.jsonl";
  // usage errors
  CHECK(run("no-such-subcommand") == 2);
  CHECK(run("synthesize") == 2);  // missing required flags
  CHECK(run("--help") == 0);
  // bad input: file does not exist
  CHECK(run("analyze-music --in /nonexistent.wav --beats " + q(out)) == 3);
  CHECK(run("animate --poses /nonexistent.jsonl --out " + q(out)) == 3);
  // insufficient: a clip with no beat grid
  dancegen::AudioClip clip;
  clip.sample_rate = 22050;
  clip.samples.assign(22050, 0.0);
  auto quiet = fx.dir / "quiet.wav";
  dancegen::save_wav(clip, quiet.string());
  CHECK(run("--config " + q(fx.cfg) + " synthesize --music " + q(quiet) +
            " --duvae " + q(fx.duvae) + " --mmgan " + q(fx.mmgan) + " --seed 1 --out " +
            q(out)) == 4);
  // incompatible: checkpoints trained with different movement-code dimensions
  auto cfg2 = fx.dir / "wide.cfg";
  {
    std::ofstream f(cfg2);
    f << slurp(fx.cfg) << "duvae.z_mov = 4\n";
  }
  auto du2 = fx.dir / "du2.ckpt";
  REQUIRE(run("--config " + q(cfg2) + " train-duvae --corpus " + q(fx.corpus) +
              " --out " + q(du2) + " --seed 3 --steps 5") == 0);
  CHECK(run("--config " + q(fx.cfg) + " synthesize --music " + q(fx.wav) + " --duvae " +
            q(du2) + " --mmgan " + q(fx.mmgan) + " --seed 1 --out " + q(out)) == 5);
}

TEST_CASE("training subcommands emit loss logs") {
  Fixture fx;
  auto du_log = slurp(fx.dir / "du.ckpt.loss.csv");
  CHECK(du_log.rfind("step,total,recon", 0) == 0);
  CHECK(std::count(du_log.begin(), du_log.end(), '\n') == 31);  // header + 30 steps
  auto mm_log = slurp(fx.dir / "mm.ckpt.loss.csv");
  CHECK(mm_log.rfind("step,gen_total", 0) == 0);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-cli> [catch args...]\n");
    return 2;
  }
  g_cli = argv[1];
  auto stamp = fs::temp_directory_path() / ("dancegen-cli-test-" + std::to_string(::getpid()));
  fs::remove_all(stamp);
  fs::create_directories(stamp);
  g_dir = stamp;
  int rc = Catch::Session().run(argc - 1, argv + 1);
  fs::remove_all(stamp);
  return rc;
}
