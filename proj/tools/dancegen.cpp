// dancegen: command-line front end for the music-to-dance pipeline.
//
// Exit codes:
//   0  success
//   2  usage error (unknown flag, missing required option)
//   3  bad input (malformed or unreadable file, out-of-range argument)
//   4  insufficient data (too few beats, frames, or samples)
//   5  incompatible checkpoint or configuration
//   6  internal contract violation
//   1  any other failure

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dancegen/corpus.hpp"
#include "dancegen/evaluation.hpp"
#include "dancegen/gif.hpp"
#include "dancegen/pipeline.hpp"
#include "dancegen/synthesis.hpp"

namespace {

using namespace dancegen;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Flat key=value config file; flags override file values.

using ConfigMap = std::map<std::string, std::string>;

ConfigMap load_config(const std::string& path) {
  ConfigMap cfg;
  if (path.empty()) return cfg;
  std::ifstream f(path);
  if (!f) throw bad_input_error("cannot read config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw bad_input_error("config line " + std::to_string(lineno) +
                            ": expected key=value");
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

double cfg_num(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw bad_input_error("config key " + key + ": not a number: " + it->second);
  }
}

DuVaeConfig duvae_config(const ConfigMap& cfg) {
  DuVaeConfig c;
  c.z_ini = int(cfg_num(cfg, "duvae.z_ini", c.z_ini));
  c.z_mov = int(cfg_num(cfg, "duvae.z_mov", c.z_mov));
  c.hidden = int(cfg_num(cfg, "duvae.hidden", c.hidden));
  c.lambda_kl = cfg_num(cfg, "duvae.lambda_kl", c.lambda_kl);
  c.lambda_shift = cfg_num(cfg, "duvae.lambda_shift", c.lambda_shift);
  c.lr = cfg_num(cfg, "duvae.lr", c.lr);
  c.beta1 = cfg_num(cfg, "duvae.beta1", c.beta1);
  c.beta2 = cfg_num(cfg, "duvae.beta2", c.beta2);
  c.steps = int(cfg_num(cfg, "duvae.steps", c.steps));
  c.batch = int(cfg_num(cfg, "duvae.batch", c.batch));
  c.shift_range = cfg_num(cfg, "duvae.shift_range", c.shift_range);
  return c;
}

MmGanConfig mmgan_config(const ConfigMap& cfg) {
  MmGanConfig c;
  c.z_mov = int(cfg_num(cfg, "mmgan.z_mov", c.z_mov));
  c.z_dan = int(cfg_num(cfg, "mmgan.z_dan", c.z_dan));
  c.hidden = int(cfg_num(cfg, "mmgan.hidden", c.hidden));
  c.s_dim = int(cfg_num(cfg, "mmgan.s_dim", c.s_dim));
  c.eps_dim = int(cfg_num(cfg, "mmgan.eps_dim", c.eps_dim));
  c.n_min = int(cfg_num(cfg, "mmgan.n_min", c.n_min));
  c.n_max = int(cfg_num(cfg, "mmgan.n_max", c.n_max));
  c.lambda_recon_s = cfg_num(cfg, "mmgan.lambda_recon_s", c.lambda_recon_s);
  c.lambda_adv = cfg_num(cfg, "mmgan.lambda_adv", c.lambda_adv);
  c.lambda_kl = cfg_num(cfg, "mmgan.lambda_kl", c.lambda_kl);
  c.lr = cfg_num(cfg, "mmgan.lr", c.lr);
  c.beta1 = cfg_num(cfg, "mmgan.beta1", c.beta1);
  c.beta2 = cfg_num(cfg, "mmgan.beta2", c.beta2);
  c.steps = int(cfg_num(cfg, "mmgan.steps", c.steps));
  c.batch = int(cfg_num(cfg, "mmgan.batch", c.batch));
  c.style_steps = int(cfg_num(cfg, "mmgan.style_steps", c.style_steps));
  c.style_lr = cfg_num(cfg, "mmgan.style_lr", c.style_lr);
  return c;
}

ActionClassifierConfig clf_config(const ConfigMap& cfg) {
  ActionClassifierConfig c;
  c.hidden = int(cfg_num(cfg, "clf.hidden", c.hidden));
  c.feat_dim = int(cfg_num(cfg, "clf.feat_dim", c.feat_dim));
  c.window = int(cfg_num(cfg, "clf.window", c.window));
  c.lr = cfg_num(cfg, "clf.lr", c.lr);
  c.steps = int(cfg_num(cfg, "clf.steps", c.steps));
  c.batch = int(cfg_num(cfg, "clf.batch", c.batch));
  return c;
}

KinematicBeatConfig kin_config(const ConfigMap& cfg) {
  KinematicBeatConfig c;
  if (cfg.count("kin.tau")) c.tau = cfg_num(cfg, "kin.tau", 0.0);
  c.tau_scale = cfg_num(cfg, "kin.tau_scale", c.tau_scale);
  c.suppress_w = int(cfg_num(cfg, "kin.suppress_w", c.suppress_w));
  return c;
}

// ---------------------------------------------------------------------------

std::string g_cmdline;

void write_provenance(const std::string& artifact_path, std::uint64_t seed,
                      const ConfigMap& cfg, nlohmann::json extra = {}) {
  nlohmann::json j{{"command", g_cmdline},
                   {"seed", seed},
                   {"version", kVersion},
                   {"config_hash", config_hash(nlohmann::json(cfg))}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream f(artifact_path + ".prov.json");
  if (!f) throw bad_input_error("cannot write provenance for " + artifact_path);
  f << j.dump(2) << "\n";
}

void write_loss_csv(const std::string& path, const std::vector<std::string>& cols,
                    const std::vector<const std::vector<double>*>& series) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  f << "step";
  for (const auto& c : cols) f << "," << c;
  f << "\n";
  std::size_t n = series.empty() ? 0 : series[0]->size();
  for (std::size_t i = 0; i < n; ++i) {
    f << i;
    for (const auto* s : series) f << "," << (i < s->size() ? (*s)[i] : 0.0);
    f << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i) g_cmdline += " ";
    g_cmdline += argv[i];
  }

  CLI::App app{"dancegen: music-conditioned dance synthesis toolkit"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 2 usage, 3 bad input, 4 insufficient data,\n"
      "5 incompatible checkpoint, 6 contract violation, 1 other.\n"
      "Config file: flat key=value lines (duvae.*, mmgan.*, clf.*, kin.*, eval.tol).");

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file; flags override");

  // ---- gen-corpus ----
  auto* gen = app.add_subcommand("gen-corpus", "generate the 3-style synthetic corpus");
  std::string gc_out = "corpus";
  int gc_n = 100;
  std::uint64_t gc_seed = 0;
  bool gc_wav = false;
  gen->add_option("--out", gc_out, "output directory");
  gen->add_option("--n", gc_n, "pairs per style")->required();
  gen->add_option("--seed", gc_seed, "master seed");
  gen->add_flag("--wav", gc_wav, "also write the raw audio as {id}.wav");
  gen->callback([&] {
    auto cfg = load_config(config_path);
    auto entries = gen_corpus(gc_out, gc_n, gc_seed, CorpusConfig{}, gc_wav);
    write_provenance((fs::path(gc_out) / "manifest.json").string(), gc_seed, cfg,
                     {{"entries", entries.size()}});
    std::cout << "wrote " << entries.size() << " pairs to " << gc_out << "\n";
  });

  // ---- analyze-music ----
  auto* amus = app.add_subcommand("analyze-music", "track beats / extract features from a wav");
  std::string am_in, am_beats, am_afeat;
  int am_fps = kDefaultFps;
  amus->add_option("--in", am_in, "input wav (22050 Hz mono/stereo PCM)")->required();
  amus->add_option("--beats", am_beats, "output musical-beat JSON")->required();
  amus->add_option("--afeat", am_afeat, "optional output feature JSON");
  amus->add_option("--fps", am_fps, "video frame rate");
  amus->callback([&] {
    auto cfg = load_config(config_path);
    auto clip = load_wav(am_in);
    auto beats = track_music_beats(onset_envelope_at_fps(clip, am_fps), am_fps);
    save_beats_json(beats, am_beats);
    write_provenance(am_beats, 0, cfg, {{"input", am_in}});
    if (!am_afeat.empty()) {
      save_afeat_json(extract_features(clip, am_fps), am_afeat);
      write_provenance(am_afeat, 0, cfg, {{"input", am_in}});
    }
    std::cout << beats.beats.size() << " musical beats\n";
  });

  // ---- analyze-dance ----
  auto* adan = app.add_subcommand("analyze-dance", "detect kinematic beats in a pose file");
  std::string ad_in, ad_beats, ad_ddiff;
  adan->add_option("--in", ad_in, "input pose JSONL")->required();
  adan->add_option("--beats", ad_beats, "output kinematic-beat JSON")->required();
  adan->add_option("--ddiff", ad_ddiff, "optional CSV dump of the motion-angle difference");
  adan->callback([&] {
    auto cfg = load_config(config_path);
    auto seq = load_pose_jsonl(ad_in);
    auto m = motion_angle_matrix(seq, int(cfg_num(cfg, "kin.n_bins", 8)));
    auto beats = kinematic_beats(m, seq.fps, kin_config(cfg));
    save_beats_json(beats, ad_beats);
    write_provenance(ad_beats, 0, cfg, {{"input", ad_in}});
    if (!ad_ddiff.empty()) save_ddiff_csv(m, ad_ddiff);
    std::cout << beats.beats.size() << " kinematic beats\n";
  });

  // ---- segment ----
  auto* seg = app.add_subcommand("segment", "normalize a dance into 32-frame units");
  std::string sg_poses, sg_beats, sg_out;
  seg->add_option("--poses", sg_poses, "input pose JSONL")->required();
  seg->add_option("--beats", sg_beats, "kinematic-beat JSON")->required();
  seg->add_option("--out", sg_out, "output unit JSONL")->required();
  seg->callback([&] {
    auto cfg = load_config(config_path);
    auto seq = load_pose_jsonl(sg_poses);
    auto beats = load_beats_json(sg_beats);
    auto units = segment(seq, beats);
    save_units_jsonl(units, sg_poses, sg_out);
    write_provenance(sg_out, 0, cfg, {{"input", sg_poses}});
    std::cout << units.size() << " units\n";
  });

  // ---- train-duvae ----
  auto* tdv = app.add_subcommand("train-duvae", "train the decomposition model");
  std::string td_corpus, td_out;
  std::uint64_t td_seed = 0;
  int td_steps = -1;
  tdv->add_option("--corpus", td_corpus, "corpus directory")->required();
  tdv->add_option("--out", td_out, "output checkpoint")->required();
  tdv->add_option("--seed", td_seed, "training seed");
  tdv->add_option("--steps", td_steps, "override training steps");
  tdv->callback([&] {
    auto cfg = load_config(config_path);
    auto dcfg = duvae_config(cfg);
    dcfg.seed = td_seed;
    if (td_steps > 0) dcfg.steps = td_steps;
    auto units = units_from_corpus(load_corpus(td_corpus));
    if (units.empty()) throw insufficient_error("corpus yields no dance units");
    DuVae model(dcfg, td_seed);
    auto stats = train_duvae(model, units);
    model.save(td_out, {{"units", units.size()}, {"final_loss", stats.loss_curve.back()}});
    write_loss_csv(td_out + ".loss.csv", {"total", "recon"},
                   {&stats.loss_curve, &stats.recon_curve});
    write_provenance(td_out, td_seed, cfg, {{"units", units.size()}});
    std::cout << "trained on " << units.size() << " units, final loss "
              << stats.loss_curve.back() << "\n";
  });

  // ---- train-mmgan ----
  auto* tmm = app.add_subcommand("train-mmgan", "train the composition model");
  std::string tm_corpus, tm_duvae, tm_out;
  std::uint64_t tm_seed = 0;
  int tm_steps = -1;
  tmm->add_option("--corpus", tm_corpus, "corpus directory")->required();
  tmm->add_option("--duvae", tm_duvae, "frozen decomposition checkpoint")->required();
  tmm->add_option("--out", tm_out, "output checkpoint")->required();
  tmm->add_option("--seed", tm_seed, "training seed");
  tmm->add_option("--steps", tm_steps, "override training steps");
  tmm->callback([&] {
    auto cfg = load_config(config_path);
    auto mcfg = mmgan_config(cfg);
    mcfg.seed = tm_seed;
    if (tm_steps > 0) mcfg.steps = tm_steps;
    auto duvae = DuVae::load(tm_duvae);
    mcfg.z_mov = duvae.config().z_mov;
    auto paired = paired_from_corpus(load_corpus(tm_corpus), mcfg.n_min, mcfg.n_max);
    if (paired.empty())
      throw insufficient_error("corpus yields no unit sequences of length >= " +
                               std::to_string(mcfg.n_min));
    MmGan model(mcfg, tm_seed);
    auto stats = train_mmgan(model, duvae, paired);
    model.save(tm_out, {{"sequences", paired.size()},
                        {"style_accuracy", stats.style_accuracy}});
    write_loss_csv(tm_out + ".loss.csv",
                   {"gen_total", "recon_m", "adv_m", "adv_d", "kl_d", "recon_s", "disc_total"},
                   {&stats.gen_total, &stats.recon_m, &stats.adv_m, &stats.adv_d,
                    &stats.kl_d, &stats.recon_s, &stats.disc_total});
    write_provenance(tm_out, tm_seed, cfg,
                     {{"sequences", paired.size()}, {"duvae", tm_duvae}});
    std::cout << "trained on " << paired.size() << " sequences, style accuracy "
              << stats.style_accuracy << "\n";
  });

  // ---- synthesize ----
  auto* syn = app.add_subcommand("synthesize", "generate a dance for a piece of music");
  std::string sy_music, sy_duvae, sy_mmgan, sy_out, sy_gif;
  std::uint64_t sy_seed = 0;
  syn->add_option("--music", sy_music, "input wav")->required();
  syn->add_option("--duvae", sy_duvae, "decomposition checkpoint")->required();
  syn->add_option("--mmgan", sy_mmgan, "composition checkpoint")->required();
  syn->add_option("--seed", sy_seed, "generation seed");
  syn->add_option("--out", sy_out, "output pose JSONL")->required();
  syn->add_option("--animate", sy_gif, "optional stick-figure GIF");
  syn->callback([&] {
    auto cfg = load_config(config_path);
    auto clip = load_wav(sy_music);
    auto duvae = DuVae::load(sy_duvae);
    auto mmgan = MmGan::load(sy_mmgan);
    auto r = synthesize(clip, duvae, mmgan, sy_seed, sy_duvae, sy_mmgan);
    save_pose_jsonl(r.dance, sy_out);
    write_provenance(sy_out, sy_seed, cfg, r.provenance);
    if (!sy_gif.empty()) gif::animate_poses(r.dance, sy_gif);
    std::cout << r.units.size() << " units, " << r.dance.frames.size() << " frames\n";
  });

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "metric report for trained checkpoints");
  std::string ev_corpus, ev_duvae, ev_mmgan, ev_out;
  std::uint64_t ev_seed = 0;
  int ev_multi_music = 5;
  ev->add_option("--corpus", ev_corpus, "corpus directory (real dances)")->required();
  ev->add_option("--duvae", ev_duvae, "decomposition checkpoint")->required();
  ev->add_option("--mmgan", ev_mmgan, "composition checkpoint")->required();
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--out", ev_out, "output report JSON")->required();
  ev->add_option("--multi-music", ev_multi_music, "musics for the multimodality metric");
  ev->callback([&] {
    auto cfg = load_config(config_path);
    auto items = load_corpus(ev_corpus);
    auto duvae = DuVae::load(ev_duvae);
    auto mmgan = MmGan::load(ev_mmgan);

    auto ccfg = clf_config(cfg);
    ccfg.seed = ev_seed;
    ActionClassifier clf(ccfg, ev_seed + 1);
    auto cstats = train_feature_extractor(clf, labeled_from_corpus(items));

    std::vector<std::vector<double>> real_feats, gen_feats;
    std::vector<std::pair<BeatList, PoseSequence>> score_pairs;
    std::size_t idx = 0;
    for (const auto& it : items) {
      real_feats.push_back(clf.features(it.dance));
      if (int(it.beats.beats.size()) < 4) {
        ++idx;
        continue;
      }
      auto r = synthesize_from_features(it.afeat, it.beats, duvae, mmgan,
                                        ev_seed + 1000 + idx);
      gen_feats.push_back(clf.features(r.dance));
      score_pairs.push_back({r.beats, r.dance});
      ++idx;
    }
    int tol = int(cfg_num(cfg, "eval.tol", 2));
    auto scores = beat_scores(score_pairs, tol);
    double div = diversity(gen_feats, 200, ev_seed);

    std::vector<std::vector<std::vector<double>>> groups;
    for (int m = 0; m < ev_multi_music && m < int(items.size()); ++m) {
      const auto& it = items[std::size_t(m)];
      if (int(it.beats.beats.size()) < 4) continue;
      std::vector<std::vector<double>> g;
      for (int k = 0; k < 5; ++k) {
        auto r = synthesize_from_features(it.afeat, it.beats, duvae, mmgan,
                                          ev_seed + 5000 + std::uint64_t(m) * 5 +
                                              std::uint64_t(k));
        g.push_back(clf.features(r.dance));
      }
      groups.push_back(std::move(g));
    }

    nlohmann::json report;
    report["fid"] = fid(real_feats, gen_feats);
    if (scores.coverage_defined) report["coverage"] = scores.coverage;
    else report["coverage"] = nullptr;
    if (scores.hit_rate_defined) report["hit_rate"] = scores.hit_rate;
    else report["hit_rate"] = nullptr;
    report["diversity"] = div;
    if (groups.empty()) report["multimodality"] = nullptr;
    else report["multimodality"] = multimodality(groups);
    report["n_samples"] = gen_feats.size();
    report["classifier_accuracy"] = cstats.train_accuracy;
    report["config_hash"] = config_hash(nlohmann::json(cfg));
    std::ofstream f(ev_out);
    if (!f) throw bad_input_error("cannot open for writing: " + ev_out);
    f << report.dump(2) << "\n";
    write_provenance(ev_out, ev_seed, cfg,
                     {{"duvae", ev_duvae}, {"mmgan", ev_mmgan}});
    std::cout << report.dump(2) << "\n";
  });

  // ---- animate ----
  auto* an = app.add_subcommand("animate", "render a pose file as a stick-figure GIF");
  std::string an_in, an_out;
  int an_size = 256;
  an->add_option("--poses", an_in, "input pose JSONL")->required();
  an->add_option("--out", an_out, "output GIF")->required();
  an->add_option("--size", an_size, "canvas size in pixels");
  an->callback([&] {
    auto seq = load_pose_jsonl(an_in);
    gif::animate_poses(seq, an_out, an_size);
    std::cout << seq.frames.size() << " frames -> " << an_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help, --version
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error " << int(e.code()) << ": " << e.what() << "\n";
    return int(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error 1: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
