// Copyright (c) 2026, dacg contributors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dacg/ablation.hpp"
#include "dacg/agf.hpp"
#include "dacg/caga.hpp"
#include "dacg/cgdm.hpp"
#include "dacg/checkpoint.hpp"
#include "dacg/dam.hpp"
#include "dacg/evaluate.hpp"
#include "dacg/gradcheck_suite.hpp"
#include "dacg/image.hpp"
#include "dacg/ops.hpp"
#include "dacg/train.hpp"

using namespace dacg;
namespace fs = std::filesystem;
using D = Tensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates sub-checks; the first failure is kept for the report.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      failure_ = what;
    }
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome done() const { return {pass_, pass_ ? notes_ : failure_ + (notes_.empty() ? "" : " [" + notes_ + "]")}; }

 private:
  bool pass_ = true;
  std::string failure_;
  std::string notes_;
};

std::string num(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class T = double>
Tensor<T> uniform(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(s, std::move(v));
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m / std::max(max_abs(b), 1e-300);
}

// ---- 1 ----

Outcome gradient_soundness() {
  Checks c;
  const auto t0 = Clock::now();
  GradCheckSuiteOptions opts;  // five seeds, 128 sampled model parameters
  std::set<std::string> groups;
  double worst_module = 0.0, model_err = 0.0;
  std::size_t model_checked = 0;
  for (const auto& r : run_grad_check_suite(opts)) {
    groups.insert(r.group);
    c.expect(r.passed(), r.name + " max rel error " + num(r.max_rel_error) + " > " + num(r.threshold));
    if (r.group == "model") {
      model_err = r.max_rel_error;
      model_checked = r.checked;
    } else {
      worst_module = std::max(worst_module, r.max_rel_error);
    }
  }
  const double secs = seconds_since(t0);
  c.expect(groups == std::set<std::string>{"primitives", "dam", "caga", "cgdm", "agf", "model"}, "missing group");
  c.expect(model_checked >= 100, "model check sampled fewer than 100 parameters");
  c.expect(secs <= 300.0, "runtime " + num(secs) + " s exceeds 5 min");
  c.note("worst primitive/module " + num(worst_module) + ", model " + num(model_err) + " on " +
         std::to_string(model_checked) + " params, " + num(secs) + " s");
  return c.done();
}

// ---- 2 ----

Outcome spectral_correctness() {
  Checks c;
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (auto [h, w] : {std::pair{6, 10}, std::pair{7, 7}}) {
    const D x = uniform(Shape{2, 3, h, w}, 11 + h);
    const auto z = fft2d(x);
    worst_rt = std::max(worst_rt, rel_diff(ifft2d(z).values(), x.values()));
    long double time_energy = 0, freq_energy = 0;
    for (double v : x.values()) time_energy += (long double)v * v;
    for (std::size_t i = 0; i < z.real.numel(); ++i) {
      freq_energy += (long double)z.real.values()[i] * z.real.values()[i] +
                     (long double)z.imag.values()[i] * z.imag.values()[i];
    }
    freq_energy /= (long double)(h * w);
    worst_parseval = std::max(worst_parseval, double(std::abs(freq_energy - time_energy) / time_energy));
  }
  c.expect(worst_rt <= 1e-6, "FFT round trip rel error " + num(worst_rt));
  c.expect(worst_parseval <= 1e-6, "Parseval rel error " + num(worst_parseval));

  ParamStore<double> ps(3);
  Cgdm<double> m(ps, "cgdm", CgdmConfig{6, 10});
  const D p = uniform(Shape{2, 10, 1, 1}, 4);
  double worst_add = 0.0, worst_hom = 0.0;
  for (auto [h, w] : {std::pair{6, 10}, std::pair{7, 7}}) {
    const D a = uniform(Shape{2, 6, h, w}, 5), b = uniform(Shape{2, 6, h, w}, 6);
    const auto fa = m.freq_branch(a, p), fb = m.freq_branch(b, p);
    worst_add = std::max(worst_add, rel_diff(m.freq_branch(add(a, b), p).values(), add(fa, fb).values()));
    for (double alpha : {-2.5, 0.3, 7.0}) {
      worst_hom = std::max(worst_hom, rel_diff(m.freq_branch(scale(a, alpha), p).values(), scale(fa, alpha).values()));
    }
  }
  c.expect(worst_add <= 1e-6, "CGDM spectral additivity " + num(worst_add));
  c.expect(worst_hom <= 1e-6, "CGDM spectral homogeneity " + num(worst_hom));
  c.note("round trip " + num(worst_rt) + ", Parseval " + num(worst_parseval) + ", additivity " + num(worst_add) +
         ", homogeneity " + num(worst_hom));
  return c.done();
}

// ---- 3 ----

struct GateStats {
  std::size_t samples = 0;
  double lo = 1.0, hi = 0.0;
  bool inside = true;
  bool attenuates = true;

  void add(const D& gated_input, const D& mask, const D& gated) {
    const auto& m = mask.values();
    for (double v : m) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      inside = inside && v > 0.0 && v < 1.0;
    }
    samples += m.size();
    const auto& x = gated_input.values();
    const auto& y = gated.values();
    for (std::size_t i = 0; i < y.size(); ++i) attenuates = attenuates && std::abs(y[i]) <= std::abs(x[i]);
  }
};

Outcome gating_invariants() {
  Checks c;
  constexpr std::size_t kSamples = 10000;
  std::map<std::string, GateStats> stats;

  ParamStore<double> dam_ps(1);
  Dam<double> dam(dam_ps, "dam", DamConfig::for_width(4, 8));
  ParamStore<double> agf_ps(2);
  AgfConfig acfg;
  acfg.channels = 8;
  AgfFusion<double> agf(agf_ps, "agf", acfg);
  ParamStore<double> caga_ps(3);
  CagaConfig ccfg;
  ccfg.channels = 8;
  ccfg.heads = 2;
  ccfg.prompt_dim = 6;
  CagaAttention<double> attn(caga_ps, "caga", ccfg);
  ParamStore<double> cgdm_ps(4);
  Cgdm<double> cgdm(cgdm_ps, "cgdm", CgdmConfig{4, 6});

  for (std::uint64_t s = 0; stats["DAM"].samples < kSamples || stats["AGF"].samples < kSamples ||
                            stats["CAGA"].samples < kSamples || stats["CGDM"].samples < kSamples;
       ++s) {
    const double spread = 1.0 + double(s % 4);  // inputs up to +-4
    {
      D fused, mask;
      const D gated = dam.fuse_and_gate(dam.multi_scale_extract(uniform(Shape{2, 4, 8, 8}, 100 + s, -spread, spread)),
                                        &fused, &mask);
      stats["DAM"].add(fused, mask, gated);
    }
    {
      const D enc = uniform(Shape{2, 8, 8, 8}, 200 + s, -spread, spread);
      const D dec = uniform(Shape{2, 8, 8, 8}, 300 + s, -spread, spread);
      const D a = agf.mask(enc, dec);
      stats["AGF"].add(enc, a, mul(enc, a));
    }
    {
      AttentionTrace<double> tr;
      const D p = uniform(Shape{16, 6, 1, 1}, 400 + s, -spread, spread);
      const D out = attn(uniform(Shape{16, 8, 4, 4}, 500 + s, -spread, spread), &p, &tr);
      stats["CAGA"].add(tr.output, tr.gate, mul(tr.output, tr.gate));
    }
    {
      const D f = uniform(Shape{16, 4, 6, 5}, 600 + s, -spread, spread);
      const D p = uniform(Shape{16, 6, 1, 1}, 700 + s, -spread, spread);
      D m;
      cgdm.freq_branch(f, p, &m);
      const auto z = fft2d(f);
      const D mixed = cgdm.spectral_mix(concat_channels<double>({z.real, z.imag}));
      stats["CGDM"].add(mixed, m, mul(mixed, m));
    }
  }
  std::string summary;
  for (const auto& [name, st] : stats) {
    c.expect(st.inside, name + " mask leaves (0,1): range [" + num(st.lo, 17) + ", " + num(st.hi, 17) + "]");
    c.expect(st.attenuates, name + " gating amplifies some element");
    summary += (summary.empty() ? "" : ", ") + name + " " + std::to_string(st.samples) + " in [" + num(st.lo) +
               ", " + num(st.hi) + "]";
  }
  c.note(summary);
  return c.done();
}

// ---- 4 ----

long double entropy(const std::vector<double>& p) {
  long double h = 0;
  for (double v : p)
    if (v > 0) h -= (long double)v * std::log((long double)v);
  return h;
}

Outcome attention_contracts() {
  Checks c;
  double worst_row = 0.0;
  std::size_t rows = 0;
  for (int heads : {1, 2, 4}) {
    for (bool t : {false, true}) {
      ParamStore<double> ps(10 + heads);
      CagaConfig cfg;
      cfg.channels = 8;
      cfg.heads = heads;
      cfg.prompt_dim = 5;
      cfg.adaptive_temperature = t;
      CagaAttention<double> attn(ps, "a", cfg);
      if (t) attn.theta_base.values().assign(heads, 0.7);
      for (std::uint64_t s = 0; s < 5; ++s) {
        AttentionTrace<double> tr;
        const D p = uniform(Shape{3, 5, 1, 1}, 20 + s, -2.0, 2.0);
        attn(uniform(Shape{3, 8, 5, 6}, 30 + s, -3.0, 3.0), &p, &tr);
        const int d = tr.attention.shape().w;
        const auto& a = tr.attention.values();
        for (std::size_t r = 0; r < a.size() / d; ++r) {
          double sum = 0.0;
          for (int j = 0; j < d; ++j) sum += a[r * d + j];
          worst_row = std::max(worst_row, std::abs(sum - 1.0));
          ++rows;
        }
      }
    }
  }
  c.expect(worst_row <= 1e-6, "attention row sum off by " + num(worst_row));

  int monotone_sets = 0;
  for (std::uint64_t s = 0; s < 12; ++s) {
    const D logits = uniform(Shape{1, 1, 1, 9}, 40 + s, -4.0, 4.0);
    long double prev = -1;
    bool ok = true;
    for (double tau : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const long double h = entropy(softmax(scale(logits, 1.0 / tau)).values());
      ok = ok && h >= prev;
      prev = h;
    }
    monotone_sets += ok;
  }
  c.expect(monotone_sets == 12, "entropy not monotone in tau for " + std::to_string(12 - monotone_sets) + " sets");

  ParamStore<double> ps(50);
  CagaConfig cfg;
  cfg.channels = 8;
  cfg.heads = 4;
  cfg.prompt_dim = 6;
  CagaAttention<double> attn(ps, "a", cfg);
  attn.temperature_proj.zero();
  bool unit = true;
  for (double tau : attn.compute_temperature(uniform(Shape{5, 6, 1, 1}, 51, -5.0, 5.0)).values()) unit &= tau == 1.0;
  c.expect(unit, "temperature differs from 1 with zero theta and projection");
  c.note(std::to_string(rows) + " rows, worst |sum - 1| " + num(worst_row) + "; entropy monotone on " +
         std::to_string(monotone_sets) + " logit sets; tau == 1 exactly");
  return c.done();
}

// ---- 5 ----

Outcome structural_fidelity() {
  Checks c;
  const ModelConfig full = ModelConfig::preset("full"), small = ModelConfig::preset("small");
  c.expect(full.enc_blocks == std::array<int, 4>{4, 6, 6, 8}, "full preset blocks");
  c.expect(full.base_channels == 48 && small.base_channels == 32, "preset widths");
  c.expect(full.refinement_blocks == 4 && small.refinement_blocks == 4, "refinement blocks");

  std::map<std::string, std::size_t> counts;
  for (const auto& [cfg, target] : {std::pair{full, 30.86e6}, std::pair{small, 13.85e6}}) {
    Model<float> m(cfg);
    {
      NoGradGuard guard;
      const auto x = uniform<float>(Shape{1, 3, 16, 16}, 1, 0.0, 1.0);
      c.expect(m(x).shape() == x.shape(), cfg.name + " forward shape");
    }
    const double n = double(m.param_count());
    counts[cfg.name] = m.param_count();
    c.expect(std::abs(n - target) <= 0.2 * target,
             cfg.name + " has " + num(n / 1e6, 4) + "M params, target " + num(target / 1e6, 4) + "M");
  }
  ModelConfig concat = full;
  concat.toggles.use_agf = false;
  const double base = double(Model<float>(concat).param_count());
  const double overhead = (double(counts["full"]) - base) / base;
  c.expect(overhead > 0.0 && overhead <= 0.02, "AGF overhead " + num(100 * overhead) + "%");
  c.note("full " + num(counts["full"] / 1e6, 4) + "M (" + num(100.0 * (counts["full"] / 30.86e6 - 1.0), 3) +
         "%), small " + num(counts["small"] / 1e6, 4) + "M (" + num(100.0 * (counts["small"] / 13.85e6 - 1.0), 3) +
         "%), AGF adds " + num((counts["full"] - base) / 1e6, 4) + "M on " + num(base / 1e6, 4) + "M (" +
         num(100 * overhead, 3) + "%)");
  return c.done();
}

// ---- 6 ----

Outcome ablation_matrix() {
  Checks c;
  const auto t0 = Clock::now();
  AblationOptions opts;
  opts.dry_run = true;  // one forward/backward on 1x3x32x32 per variant
  const auto rows = run_ablation(opts);
  const double secs = seconds_since(t0);
  const auto variants = ablation_variants();
  c.expect(rows.size() == 11, std::to_string(rows.size()) + " variants");
  std::set<std::string> labels;
  for (const auto& r : rows) {
    labels.insert(r.label);
    c.expect(r.grad_l1 > 0.0 && std::isfinite(r.grad_l1), r.label + " produced no usable gradient");
  }
  c.expect(labels.size() == rows.size(), "duplicate labels");
  const auto structure = [](const ModelConfig& m) {
    return std::tuple{m.toggles.use_agf, m.toggles.use_cgdm, m.adaptive_temperature(), m.gated_output()};
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const bool same = structure(variants[i].config) == structure(variants[j].config);
      c.expect(same == (rows[i].params == rows[j].params),
               rows[i].label + " vs " + rows[j].label + ": parameter counts do not track structure");
    }
  }
  c.expect(secs <= 120.0, "runtime " + num(secs) + " s");
  c.note(std::to_string(rows.size()) + " variants, " + num(secs) + " s");
  return c.done();
}

// ---- 7 ----

Outcome tiny_learning() {
  Checks c;
  const auto t0 = Clock::now();
  const auto train = make_patch_set("", DegradationSpec::gaussian(25.0), 32, 64, 1);
  const auto held_out = make_patch_set("", DegradationSpec::gaussian(25.0), 32, 16, 2);
  const ModelConfig cfg = ModelConfig::preset("tiny");
  c.expect(cfg.base_channels == 8 && cfg.enc_blocks == std::array<int, 4>{1, 1, 1, 1} &&
               cfg.heads == std::array<int, 4>{1, 1, 2, 2},
           "tiny preset drifted");
  Model<float> model(cfg);
  TrainConfig tc;
  tc.steps = 500;
  tc.batch = 4;
  tc.lr0 = 2e-3;
  const auto report = train_loop(model, train, tc);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 50; ++i) {
    first += report.records[i].loss / 50.0;
    last += report.records[450 + i].loss / 50.0;
  }
  const auto ev = evaluate_pairs(model, held_out);
  const double secs = seconds_since(t0);
  const double gain = ev.psnr_output - ev.psnr_input;
  c.expect(last <= 0.5 * first, "loss ratio " + num(last / first));
  c.expect(gain >= 1.5, "PSNR gain " + num(gain) + " dB");
  c.expect(secs <= 600.0, "runtime " + num(secs) + " s");
  c.note("loss " + num(first, 4) + " -> " + num(last, 4) + " (ratio " + num(last / first) + "), PSNR " +
         num(ev.psnr_input, 4) + " -> " + num(ev.psnr_output, 4) + " dB (+" + num(gain) + "), " + num(secs) + " s");
  return c.done();
}

// ---- 8 ----

long double oracle_psnr(const ImageBuffer& a, const ImageBuffer& b) {
  long double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const long double d = (long double)a.pixels[i] - (long double)b.pixels[i];
    se += d * d;
  }
  return 10.0L * std::log10(1.0L / (se / (long double)a.pixels.size()));
}

// Every valid 11x11 window, weights summed directly in two dimensions.
long double oracle_ssim(const ImageBuffer& a, const ImageBuffer& b) {
  long double w[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0L * 1.5L * 1.5L));
      total += w[i][j];
    }
  const long double c1 = 0.01L * 0.01L, c2 = 0.03L * 0.03L;
  long double acc = 0;
  long count = 0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y + 11 <= a.height; ++y) {
      for (int x = 0; x + 11 <= a.width; ++x) {
        long double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const long double k = w[i][j] / total, va = a.at(y + i, x + j, ch), vb = b.at(y + i, x + j, ch);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        const long double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return acc / count;
}

Outcome metric_oracles() {
  Checks c;
  double worst_psnr = 0.0, worst_ssim = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const ImageBuffer clean = procedural_image(24 + 8 * int(s), 30, s);
    const ImageBuffer noisy = degrade(clean, DegradationSpec::gaussian(5.0 + 15.0 * double(s), s));
    worst_psnr = std::max(worst_psnr, double(std::abs(psnr(noisy, clean) - oracle_psnr(noisy, clean))));
    worst_ssim = std::max(worst_ssim, double(std::abs(ssim(noisy, clean) - oracle_ssim(noisy, clean))));
  }
  c.expect(worst_psnr <= 1e-9, "PSNR differs from oracle by " + num(worst_psnr) + " dB");
  c.expect(worst_ssim <= 1e-4, "SSIM differs from oracle by " + num(worst_ssim));

  ImageBuffer mid(64, 64, 0.5f);
  double mean_db = 0.0;
  for (std::uint64_t s = 0; s < 8; ++s) mean_db += psnr(degrade(mid, DegradationSpec::gaussian(25.0, s)), mid) / 8.0;
  const double analytic = 10.0 * std::log10(255.0 * 255.0 / (25.0 * 25.0));
  c.expect(std::abs(mean_db - 20.2) <= 0.5, "sigma 25 measures " + num(mean_db, 4) + " dB");
  c.note("PSNR |diff| " + num(worst_psnr) + " dB, SSIM |diff| " + num(worst_ssim) + ", sigma 25 on mid-tone " +
         num(mean_db, 4) + " dB (analytic " + num(analytic, 4) + ")");
  return c.done();
}

// ---- 9 ----

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

Outcome determinism() {
  Checks c;
  const fs::path root = fs::temp_directory_path() / "dacg_acceptance";
  fs::remove_all(root);
  const auto pairs = make_patch_set("", DegradationSpec::gaussian(25.0), 16, 8, 9);
  TrainConfig tc;
  tc.steps = 6;
  tc.batch = 2;
  tc.lr0 = 1e-3;
  tc.checkpoint_every = 3;

  std::vector<std::vector<double>> curves;
  for (const char* run : {"a", "b"}) {
    Model<double> m(ModelConfig::preset("tiny"));
    TrainOptions o;
    o.out_dir = root / run;
    std::vector<double> curve;
    for (const auto& r : train_loop(m, pairs, tc, o).records) curve.push_back(r.loss);
    curves.push_back(curve);
  }
  c.expect(curves[0] == curves[1], "64-bit loss curves differ between identical runs");
  for (const char* f : {"step_3.bin", "step_3.json", "final.bin", "final.json"}) {
    c.expect(slurp(root / "a" / f) == slurp(root / "b" / f), std::string("checkpoint file ") + f + " differs");
  }

  Model<float> trained(ModelConfig::preset("tiny"));
  train_loop(trained, pairs, TrainConfig{.lr0 = 1e-3, .batch = 2, .steps = 3});
  save_checkpoint(root / "roundtrip", make_checkpoint(trained));
  const Model<float> loaded = load_model<float>(root / "roundtrip.json");
  const auto x = uniform<float>(Shape{2, 3, 16, 24}, 3, 0.0, 1.0);
  {
    NoGradGuard guard;
    c.expect(trained(x).values() == loaded(x).values(), "forward after save/load is not bit-identical");
  }

  double resume_gap = 0.0;
  {
    Model<double> m(ModelConfig::preset("tiny"));
    TrainOptions o;
    o.resume_from = root / "a" / "step_3";
    const auto tail = train_loop(m, pairs, tc, o).records;
    c.expect(tail.size() == 3, "resume ran " + std::to_string(tail.size()) + " steps");
    for (std::size_t i = 0; i < tail.size(); ++i) resume_gap = std::max(resume_gap, std::abs(tail[i].loss - curves[0][3 + i]));
  }
  c.expect(resume_gap <= 1e-6, "resumed 64-bit trajectory off by " + num(resume_gap));
  fs::remove_all(root);
  c.note("identical 64-bit curves and checkpoints; save/load forward bit-identical; resume gap " + num(resume_gap));
  return c.done();
}

// ---- 10 ----

Outcome residual_identities() {
  Checks c;
  std::size_t blocks = 0;
  for (const char* preset : {"tiny", "small"}) {
    ModelConfig cfg = ModelConfig::preset(preset);
    Model<double> m(cfg);
    m.zero_output_projections();
    NoGradGuard guard;
    auto check_blocks = [&](const std::vector<TransformerBlock<double>>& level, int channels, std::uint64_t seed) {
      for (const auto& b : level) {
        const D x = uniform(Shape{1, channels, 8, 8}, seed++, -2.0, 2.0);
        const D p = uniform(Shape{1, b.attn.config().prompt_dim, 1, 1}, seed++);
        c.expect(b(x, &p).values() == x.values(), std::string(preset) + ": transformer block is not the identity");
        ++blocks;
      }
    };
    for (int l = 0; l < 4; ++l) check_blocks(m.encoder[l], cfg.width(l), 100 * l);
    for (int l = 0; l < 3; ++l) check_blocks(m.decoder[l], cfg.width(l), 500 + 100 * l);
    check_blocks(m.refinement, cfg.width(0), 900);

    const int latent = cfg.width(3);
    const D f = uniform(Shape{2, latent, 4, 6}, 7, -3.0, 3.0);
    const D pg = uniform(Shape{2, cfg.global_dim, 1, 1}, 8);
    c.expect((*m.cgdm)(f, pg).values() == f.values(), std::string(preset) + ": CGDM does not return its input");

    const D img = uniform(Shape{2, 3, 16, 24}, 9, 0.0, 1.0);
    c.expect(m(img).values() == img.values(), std::string(preset) + ": model does not return its input");
  }
  c.note(std::to_string(blocks) + " blocks, CGDM and whole model exact identities (tiny, small)");
  return c.done();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient soundness", gradient_soundness}, {"spectral correctness", spectral_correctness},
      {"gating invariants", gating_invariants},   {"attention contracts", attention_contracts},
      {"structural fidelity", structural_fidelity}, {"ablation matrix", ablation_matrix},
      {"tiny learning check", tiny_learning},     {"metric oracles", metric_oracles},
      {"determinism and persistence", determinism}, {"residual identities", residual_identities},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && only.count(id) == 0) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %-28s %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
