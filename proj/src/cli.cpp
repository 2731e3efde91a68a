// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

#include "dacg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "dacg/ablation.hpp"
#include "dacg/checkpoint.hpp"
#include "dacg/errors.hpp"
#include "dacg/evaluate.hpp"
#include "dacg/gradcheck_suite.hpp"
#include "dacg/ops.hpp"
#include "dacg/train.hpp"

namespace dacg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

// Writes to two streams at once.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const bool ok = a_->sputc(char(c)) != EOF && b_->sputc(char(c)) != EOF;
    return ok ? c : EOF;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    a_->sputn(s, n);
    b_->sputn(s, n);
    return n;
  }
  int sync() override { return a_->pubsync() | b_->pubsync(); }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

json load_config_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(f)), {});
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(path.string() + ": top level must be a JSON object");
    static const std::set<std::string> known{"size", "model", "train", "data", "precision"};
    for (const auto& [key, v] : j.items()) {
      if (known.count(key) == 0) throw ConfigError(path.string() + ": unknown key '" + key + "'");
    }
    return j;
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(at), '\n');
    const auto nl = text.rfind('\n', at == 0 ? 0 : at - 1);
    const auto col = at - (nl == std::string::npos ? 0 : nl + 1) + 1;
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": invalid JSON: " + e.what());
  }
}

// Reads a typed field, naming it on failure.
template <class V>
V field(const json& obj, const std::string& section, const std::string& key) {
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + section + "." + key + "': " + e.what());
  }
}

DegradationKind task_kind(const std::string& task) {
  static const std::map<std::string, DegradationKind> names{
      {"denoise", DegradationKind::gaussian_noise}, {"noise", DegradationKind::gaussian_noise},
      {"derain", DegradationKind::rain_streak},     {"rain", DegradationKind::rain_streak},
      {"dehaze", DegradationKind::haze},            {"haze", DegradationKind::haze},
      {"lowlight", DegradationKind::lowlight},      {"enhance", DegradationKind::lowlight},
  };
  const auto it = names.find(task);
  if (it != names.end()) return it->second;
  const auto kind = degradation_kind_from_string(task);
  if (kind == DegradationKind::composite) throw ConfigError("composite specs need a config file");
  return kind;
}

// Flags describing one degradation; shared by train and make-data.
struct DegradeFlags {
  std::string task = "denoise";
  double sigma = 25.0;
  double t = 0.6;
  double airlight = 0.9;
  int streaks = 40;
  double gamma = 2.0;
  double gain = 0.5;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts = {app->add_option("--task", task, "denoise, derain, dehaze or lowlight")->capture_default_str(),
            app->add_option("--sigma", sigma, "noise std in 8-bit units")->capture_default_str(),
            app->add_option("--t", t, "haze transmission")->capture_default_str(),
            app->add_option("--airlight", airlight, "haze airlight")->capture_default_str(),
            app->add_option("--streaks", streaks, "rain streak count")->capture_default_str(),
            app->add_option("--gamma", gamma, "low-light gamma")->capture_default_str(),
            app->add_option("--gain", gain, "low-light gain")->capture_default_str()};
  }

  DegradationSpec apply(DegradationSpec s) const {
    if (given(opts[0])) s.kind = task_kind(task);
    if (given(opts[1])) s.sigma = sigma;
    if (given(opts[2])) s.haze.transmission = t;
    if (given(opts[3])) s.haze.airlight = airlight;
    if (given(opts[4])) s.rain.num_streaks = streaks;
    if (given(opts[5])) s.lowlight.gamma = gamma;
    if (given(opts[6])) s.lowlight.gain = gain;
    s.validate();
    return s;
  }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---- train ----

struct TrainFlags {
  std::string size = "tiny";
  int steps = 500;
  int batch = 4;
  double lr0 = 2e-4;
  double lr_min = 1e-6;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
  int pairs = 64;
  int patch = 32;
  int eval_pairs = 16;
  int precision = 32;
  std::string data;
  std::string out;
  std::string config;
  std::string resume;
  DegradeFlags degrade;
  std::map<std::string, CLI::Option*> o;
};

struct TrainPlan {
  ModelConfig model;
  TrainConfig train;
  DegradationSpec spec;
  std::string data_dir;
  int pairs = 64;
  int patch = 32;
  int eval_pairs = 16;
  int precision = 32;
};

TrainPlan resolve_plan(const TrainFlags& f, const json& cfg);

TrainPlan resolve(const TrainFlags& f) {
  const json cfg = f.config.empty() ? json::object() : load_config_file(f.config);
  try {
    return resolve_plan(f, cfg);
  } catch (const ConfigError& e) {
    if (f.config.empty()) throw;
    throw ConfigError(f.config + ": " + e.what());
  }
}

TrainPlan resolve_plan(const TrainFlags& f, const json& cfg) {
  TrainPlan p;
  std::string size = cfg.contains("size") ? field<std::string>(cfg, "", "size") : "tiny";
  if (given(f.o.at("size"))) size = f.size;
  p.model = ModelConfig::preset(size);
  if (cfg.contains("model")) p.model = model_config_from_json(cfg["model"], p.model);
  if (cfg.contains("train")) p.train = train_config_from_json(cfg["train"], p.train);
  if (cfg.contains("precision")) p.precision = field<int>(cfg, "", "precision");

  DegradationSpec spec = DegradationSpec::gaussian(25.0);
  if (cfg.contains("data")) {
    const json& d = cfg["data"];
    if (!d.is_object()) throw ConfigError("config field 'data' must be an object");
    for (const auto& [key, v] : d.items()) {
      if (key == "dir") p.data_dir = field<std::string>(d, "data", key);
      else if (key == "pairs") p.pairs = field<int>(d, "data", key);
      else if (key == "patch") p.patch = field<int>(d, "data", key);
      else if (key == "eval_pairs") p.eval_pairs = field<int>(d, "data", key);
      else if (key == "degradation") spec = degradation_spec_from_json(v);
      else throw ConfigError("config: unknown key 'data." + key + "'");
    }
  }
  p.spec = f.degrade.apply(spec);

  auto& t = p.train;
  if (given(f.o.at("steps"))) t.steps = f.steps;
  if (given(f.o.at("batch"))) t.batch = f.batch;
  if (given(f.o.at("lr0"))) t.lr0 = f.lr0;
  if (given(f.o.at("lr-min"))) t.lr_min = f.lr_min;
  if (given(f.o.at("lambda"))) t.lambda_fourier = f.lambda;
  if (given(f.o.at("seed"))) t.seed = p.model.seed = f.seed;
  if (given(f.o.at("checkpoint-every"))) t.checkpoint_every = f.checkpoint_every;
  if (given(f.o.at("pairs"))) p.pairs = f.pairs;
  if (given(f.o.at("patch"))) p.patch = f.patch;
  if (given(f.o.at("eval-pairs"))) p.eval_pairs = f.eval_pairs;
  if (given(f.o.at("precision"))) p.precision = f.precision;
  if (given(f.o.at("data"))) p.data_dir = f.data;

  t.validate();
  p.model.validate();
  if (p.precision != 32 && p.precision != 64) throw ConfigError("precision must be 32 or 64");
  if (p.pairs < 1) throw ConfigError("pairs must be >= 1");
  if (p.eval_pairs < 0) throw ConfigError("eval_pairs must be >= 0");
  if (p.patch < 8 || p.patch % 8 != 0) throw ConfigError("patch must be a positive multiple of 8");
  return p;
}

template <class T>
int train_with(const TrainPlan& p, const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const fs::path dir = f.out;
  fs::create_directories(dir);
  {
    json resolved = {{"model", to_json(p.model)},
                     {"train", to_json(p.train)},
                     {"data",
                      {{"dir", p.data_dir},
                       {"pairs", p.pairs},
                       {"patch", p.patch},
                       {"eval_pairs", p.eval_pairs},
                       {"degradation", to_json(p.spec)}}},
                     {"precision", p.precision}};
    std::ofstream(dir / "config.json") << resolved.dump(2) << "\n";
  }
  const auto pairs = make_patch_set(p.data_dir, p.spec, p.patch, p.pairs, p.train.seed);
  Model<T> model(p.model);
  err << "training " << p.model.name << " (" << model.param_count() << " parameters) on " << pairs.size()
      << " pairs for " << p.train.steps << " steps\n";

  std::ofstream report_file(dir / "report.jsonl");
  TeeBuf tee(report_file.rdbuf(), out.rdbuf());
  std::ostream report(&tee);
  TrainOptions opts;
  opts.out_dir = dir;
  opts.report = &report;
  if (!f.resume.empty()) opts.resume_from = f.resume;
  const auto result = train_loop(model, pairs, p.train, opts);
  report.flush();

  json summary = {{"final_checkpoint", (dir / "final.json").string()},
                  {"steps", result.records.empty() ? 0 : result.records.back().step},
                  {"wall_ms", result.wall_ms}};
  if (p.eval_pairs > 0) {
    const auto held_out = make_patch_set(p.data_dir, p.spec, p.patch, p.eval_pairs, Rng::mix(p.train.seed, 0x5eed));
    const auto ev = evaluate_pairs(model, held_out);
    summary["eval"] = {{"pairs", ev.count},
                       {"psnr_input", ev.psnr_input},
                       {"psnr_output", ev.psnr_output},
                       {"ssim_input", ev.ssim_input},
                       {"ssim_output", ev.ssim_output}};
  }
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  err << "summary " << summary.dump() << "\n";
  return kExitOk;
}

// ---- restore ----

struct RestoreFlags {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string reference;
  std::string size;
  std::string config;
  int precision = 32;
};

template <class T>
Model<T> restore_model(const RestoreFlags& f) {
  if (f.size.empty() && f.config.empty()) return load_model<T>(f.checkpoint);
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  ModelConfig mc = ModelConfig::preset(f.size.empty() ? "tiny" : f.size);
  if (!f.config.empty()) {
    const json cfg = load_config_file(f.config);
    if (f.size.empty() && cfg.contains("size")) mc = ModelConfig::preset(field<std::string>(cfg, "", "size"));
    if (cfg.contains("model")) mc = model_config_from_json(cfg["model"], mc);
  }
  Model<T> model(mc);
  restore_tensors(model.params(), ckpt);
  return model;
}

template <class T>
int restore_with(const RestoreFlags& f, std::ostream& out, std::ostream& err) {
  const Model<T> model = restore_model<T>(f);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  std::vector<fs::path> refs;
  const bool batch = fs::is_directory(f.input);
  if (batch) {
    fs::create_directories(f.output);
    for (const auto& in : list_ppm(f.input)) {
      jobs.emplace_back(in, fs::path(f.output) / in.filename());
      if (!f.reference.empty()) refs.push_back(fs::path(f.reference) / in.filename());
    }
    if (jobs.empty()) throw DataError("no .ppm files in " + f.input);
  } else {
    jobs.emplace_back(f.input, f.output);
    if (!f.reference.empty()) refs.push_back(f.reference);
  }

  out << (refs.empty() ? "input\toutput\n" : "input\toutput\tpsnr\tssim\n");
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const ImageBuffer in = load_ppm(jobs[i].first);
    const ImageBuffer restored = restore_image(model, in);
    if (jobs[i].second.has_parent_path()) fs::create_directories(jobs[i].second.parent_path());
    save_ppm(jobs[i].second, restored);
    out << jobs[i].first.string() << "\t" << jobs[i].second.string();
    if (!refs.empty()) {
      // Scored on the file as written, so the numbers match `metrics`.
      const ImageBuffer saved = load_ppm(jobs[i].second);
      const ImageBuffer ref = load_ppm(refs[i]);
      if (ref.height != saved.height || ref.width != saved.width) {
        throw ConfigError("reference " + refs[i].string() + " is " + std::to_string(ref.height) + "x" +
                          std::to_string(ref.width) + ", input is " + std::to_string(saved.height) + "x" +
                          std::to_string(saved.width));
      }
      out << "\t" << fmt(psnr(saved, ref), 10) << "\t" << fmt(ssim(saved, ref), 8);
    }
    out << "\n";
  }
  err << "restored " << jobs.size() << " image(s)\n";
  return kExitOk;
}

// ---- metrics ----

int run_metrics(const std::string& clean, const std::string& restored, std::ostream& out, std::ostream& err) {
  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (!fs::is_directory(clean) && !fs::is_directory(restored)) {
    pairs.emplace_back(clean, restored);
  } else {
    if (!fs::is_directory(clean) || !fs::is_directory(restored)) {
      throw DataError("metrics needs two directories or two files");
    }
    std::map<std::string, fs::path> a, b;
    for (const auto& p : list_ppm(clean)) a[p.filename().string()] = p;
    for (const auto& p : list_ppm(restored)) b[p.filename().string()] = p;
    std::vector<std::string> orphans;
    for (const auto& [name, path] : a) {
      if (b.count(name) == 0) orphans.push_back(path.string());
      else pairs.emplace_back(path, b[name]);
    }
    for (const auto& [name, path] : b) {
      if (a.count(name) == 0) orphans.push_back(path.string());
    }
    if (!orphans.empty()) {
      std::string msg = "unpaired files:";
      for (const auto& o : orphans) msg += "\n  " + o;
      throw DataError(msg);
    }
    if (pairs.empty()) throw DataError("no .ppm files to compare");
  }

  out << "file\tpsnr\tssim\n";
  double sum_p = 0.0, sum_s = 0.0;
  for (const auto& [pa, pb] : pairs) {
    const ImageBuffer ia = load_ppm(pa), ib = load_ppm(pb);
    if (ia.height != ib.height || ia.width != ib.width) {
      throw DataError("size mismatch between " + pa.string() + " and " + pb.string());
    }
    const double p = psnr(ia, ib), s = ssim(ia, ib);
    sum_p += p;
    sum_s += s;
    out << pa.filename().string() << "\t" << fmt(p, 10) << "\t" << fmt(s, 8) << "\n";
  }
  const double n = static_cast<double>(pairs.size());
  out << "mean\t" << fmt(sum_p / n, 10) << "\t" << fmt(sum_s / n, 8) << "\n";
  err << "compared " << pairs.size() << " pair(s)\n";
  return kExitOk;
}

// ---- make-data ----

struct MakeDataFlags {
  std::string out;
  std::string clean;
  int count = 8;
  int size = 64;
  std::uint64_t seed = 1;
  DegradeFlags degrade;
};

int run_make_data(const MakeDataFlags& f, std::ostream& out, std::ostream& err) {
  if (f.count < 1) throw ConfigError("--count must be >= 1");
  if (f.size < 8) throw ConfigError("--size must be >= 8");
  DegradationSpec spec = f.degrade.apply(DegradationSpec::gaussian(25.0));
  spec.seed = f.seed;
  const auto pairs = make_patch_set(f.clean, spec, f.size, f.count, f.seed);
  const std::string tag = spec_tag(spec);
  const fs::path root = f.out, clean_dir = root / "clean", deg_dir = root / "degraded" / tag;
  fs::create_directories(clean_dir);
  fs::create_directories(deg_dir);
  std::ofstream(deg_dir / "spec.json") << to_json(spec).dump(2) << "\n";
  out << "clean\tdegraded\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".ppm";
    save_ppm(clean_dir / name.str(), pairs[i].clean);
    save_ppm(deg_dir / name.str(), pairs[i].degraded);
    out << (clean_dir / name.str()).string() << "\t" << (deg_dir / name.str()).string() << "\n";
  }
  err << "wrote " << pairs.size() << " pairs, degradation tag " << tag << "\n";
  return kExitOk;
}

int usage_error(CLI::App& app, const std::string& msg, std::ostream& err) {
  err << "error: " << msg << "\n\n";
  const auto subs = app.get_subcommands();
  err << (subs.empty() ? app.help() : subs.front()->help());
  return kExitConfig;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"All-in-one image restoration: training, restoration and verification tools", "dacg"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train a model; writes report.jsonl and checkpoints to --out");
  tf.o["size"] = train->add_option("--size", tf.size, "tiny, small or full")->capture_default_str();
  tf.o["steps"] = train->add_option("--steps", tf.steps, "optimizer steps")->capture_default_str();
  tf.o["batch"] = train->add_option("--batch", tf.batch, "batch size")->capture_default_str();
  tf.o["lr0"] = train->add_option("--lr0", tf.lr0, "initial learning rate")->capture_default_str();
  tf.o["lr-min"] = train->add_option("--lr-min", tf.lr_min, "cosine floor")->capture_default_str();
  tf.o["lambda"] = train->add_option("--lambda", tf.lambda, "Fourier loss weight")->capture_default_str();
  tf.o["seed"] = train->add_option("--seed", tf.seed, "seed for weights, data and batches")->capture_default_str();
  tf.o["checkpoint-every"] =
      train->add_option("--checkpoint-every", tf.checkpoint_every, "0: final checkpoint only")->capture_default_str();
  tf.o["pairs"] = train->add_option("--pairs", tf.pairs, "training pairs")->capture_default_str();
  tf.o["patch"] = train->add_option("--patch", tf.patch, "patch size (multiple of 8)")->capture_default_str();
  tf.o["eval-pairs"] = train->add_option("--eval-pairs", tf.eval_pairs, "held-out pairs scored after training")
                           ->capture_default_str();
  tf.o["precision"] = train->add_option("--precision", tf.precision, "32 or 64")->capture_default_str();
  tf.o["data"] = train->add_option("--data", tf.data, "directory of clean .ppm images (default: procedural)");
  train->add_option("--out", tf.out, "output directory")->required();
  train->add_option("--config", tf.config, "JSON config (flags take precedence)");
  train->add_option("--resume", tf.resume, "checkpoint to resume from");
  tf.degrade.attach(train);

  RestoreFlags rf;
  auto* restore = app.add_subcommand("restore", "Restore a .ppm image or a directory of them");
  restore->add_option("--checkpoint", rf.checkpoint, "checkpoint (.json or .bin)")->required();
  restore->add_option("--input", rf.input, "input .ppm file or directory")->required();
  restore->add_option("--output", rf.output, "output .ppm file or directory")->required();
  restore->add_option("--reference", rf.reference, "clean .ppm file or directory; prints PSNR and SSIM");
  restore->add_option("--size", rf.size, "expected architecture preset (default: the checkpoint's own)");
  restore->add_option("--config", rf.config, "JSON config giving the expected architecture");
  restore->add_option("--precision", rf.precision, "32 or 64")->capture_default_str();

  GradCheckSuiteOptions gf;
  std::string fault;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every primitive and module");
  grad->add_option("--only", gf.only, "restrict to a group (primitives, dam, caga, cgdm, agf, model) or op name");
  grad->add_option("--seeds", gf.seeds, "seeds per target")->capture_default_str();
  grad->add_option("--seed", gf.base_seed, "first seed")->capture_default_str();
  grad->add_option("--samples", gf.model_samples, "parameters sampled in the model check")->capture_default_str();
  grad->add_option("--inject-fault", fault, "corrupt the backward pass of this op (self-test)");

  AblationOptions af;
  std::string ablate_size = "tiny";
  auto* ablate = app.add_subcommand("ablate", "Build and exercise all ablation variants");
  ablate->add_flag("--dry-run", af.dry_run, "parameter counts and one forward/backward only");
  ablate->add_option("--size", ablate_size, "base preset")->capture_default_str();
  ablate->add_option("--steps", af.steps, "training steps per variant")->capture_default_str();
  ablate->add_option("--lr0", af.lr0, "learning rate per variant")->capture_default_str();
  ablate->add_option("--pairs", af.train_pairs, "training pairs")->capture_default_str();
  ablate->add_option("--eval-pairs", af.eval_pairs, "held-out pairs")->capture_default_str();
  ablate->add_option("--seed", af.seed, "seed")->capture_default_str();

  std::string m_clean, m_restored;
  auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM of same-named .ppm files in two directories");
  metrics->add_option("--clean", m_clean, "reference directory or file")->required();
  metrics->add_option("--restored", m_restored, "test directory or file")->required();

  MakeDataFlags mf;
  auto* make = app.add_subcommand("make-data", "Write procedural clean/degraded .ppm pairs");
  make->add_option("--out", mf.out, "root directory")->required();
  make->add_option("--clean", mf.clean, "crop from these clean .ppm images instead of procedural ones");
  make->add_option("--count", mf.count, "number of pairs")->capture_default_str();
  make->add_option("--size", mf.size, "image side in pixels")->capture_default_str();
  make->add_option("--seed", mf.seed, "seed")->capture_default_str();
  mf.degrade.attach(make);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return usage_error(app, e.what(), err);
  }

  try {
    if (train->parsed()) {
      const TrainPlan plan = resolve(tf);
      return plan.precision == 64 ? train_with<double>(plan, tf, out, err) : train_with<float>(plan, tf, out, err);
    }
    if (restore->parsed()) {
      if (rf.precision != 32 && rf.precision != 64) throw ConfigError("precision must be 32 or 64");
      return rf.precision == 64 ? restore_with<double>(rf, out, err) : restore_with<float>(rf, out, err);
    }
    if (grad->parsed()) {
      debug::inject_fault(fault);
      std::vector<GradCheckResult> failed;
      bool header = false;
      try {
        run_grad_check_suite(gf, [&](const GradCheckResult& r) {
          if (!std::exchange(header, true)) out << "group\ttarget\tmax_rel_error\tthreshold\tchecked\tstatus\n";
          out << r.group << "\t" << r.name << "\t" << fmt(r.max_rel_error, 3) << "\t" << fmt(r.threshold, 3) << "\t"
              << r.checked << "\t" << (r.passed() ? "ok" : "FAIL") << "\n"
              << std::flush;
          if (!r.passed()) failed.push_back(r);
        });
      } catch (...) {
        debug::inject_fault("");
        throw;
      }
      debug::inject_fault("");
      for (const auto& r : failed) {
        err << "grad-check failed: " << r.name << " max_rel_error " << fmt(r.max_rel_error, 3) << " > "
            << fmt(r.threshold, 3) << "\n";
      }
      return failed.empty() ? kExitOk : kExitGradCheck;
    }
    if (ablate->parsed()) {
      af.base = ModelConfig::preset(ablate_size);
      out << (af.dry_run ? "variant\tparams\tdescription\n" : "variant\tparams\tfinal_loss\tpsnr\tdescription\n");
      run_ablation(af, [&](const AblationRow& r) {
        out << r.label << "\t" << r.params;
        if (!af.dry_run) out << "\t" << fmt(*r.final_loss) << "\t" << fmt(*r.psnr);
        out << "\t" << r.description << "\n" << std::flush;
      });
      return kExitOk;
    }
    if (metrics->parsed()) return run_metrics(m_clean, m_restored, out, err);
    if (make->parsed()) return run_make_data(mf, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return usage_error(app, "no subcommand", err);
}

}  // namespace dacg
