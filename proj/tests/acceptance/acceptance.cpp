// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include "cli_util.hpp"
#include "graspdec/graspdec.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace graspdec;
namespace fs = std::filesystem;

namespace {

std::uint64_t seed_for(const std::string& name) { return derive_seed(2026, "acceptance/" + name); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double max_offdiag(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd o = m;
  o.diagonal().setZero();
  return max_abs(o);
}

bool in_band(double acc, std::pair<double, double> band) { return acc >= band.first && acc <= band.second; }

std::string band_str(std::pair<double, double> band) {
  return "[" + num(band.first, "%.3f") + ", " + num(band.second, "%.3f") + "]";
}

CvOptions cv_for(const std::string& name) {
  CvOptions o;
  o.seed = seed_for(name + "/cv");
  return o;
}

SourceSpec oscillator(const ChannelMontage& montage, BandName band, std::optional<Phase> phase,
                      std::array<double, 3> amps, const char* focus) {
  SourceSpec s;
  s.band = band;
  s.phase = phase;
  s.amplitude = amps;
  s.pattern = focal_pattern(montage, focus, 0.5);
  return s;
}

SynthConfig base_config(const std::string& name, std::vector<Label> classes, std::size_t per_class) {
  SynthConfig cfg;
  cfg.classes = std::move(classes);
  cfg.trials_per_class = per_class;
  cfg.noise_rms = 1.0;
  cfg.seed = seed_for(name);
  return cfg;
}

double cv_accuracy(const Dataset& ds, std::vector<BandSpec> bands, Phase phase, const Scenario& sc,
                   const CvOptions& cv) {
  const auto table = compute_stats_table(ds, std::move(bands), TrialWindow::of(phase), default_pad_len(ds.sample_rate));
  return kfold_cv_fbcsp(ds, table, sc, cv).mean_accuracy;
}

// ---------------------------------------------------------------------------

Outcome csp_algebra() {
  Rng rng(seed_for("csp-algebra"));
  double whiten = 0.0, off = 0.0, sum = 0.0, recon = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd s1 = oracle::random_spd(rng, 16), s2 = oracle::random_spd(rng, 16);
    const Eigen::MatrixXd composite = s1 + s2;
    const Eigen::MatrixXd p = whitening_transform(composite);
    whiten = std::max(whiten, max_abs(p * composite * p.transpose() - Eigen::MatrixXd::Identity(16, 16)));
    const CspModel m = fit_csp_from_means(s1, s2);
    const Eigen::MatrixXd d1 = m.filters.transpose() * s1 * m.filters;
    const Eigen::MatrixXd d2 = m.filters.transpose() * s2 * m.filters;
    off = std::max({off, max_offdiag(d1), max_offdiag(d2)});
    sum = std::max(sum, (d1.diagonal() + d2.diagonal() - Eigen::VectorXd::Ones(16)).cwiseAbs().maxCoeff());
    for (const Eigen::MatrixXd* s : {&s1, &s2, &composite}) {
      const auto e = eigh(*s);
      recon = std::max(recon, max_abs(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - *s));
    }
  }
  return {whiten < 1e-8 && off < 1e-8 && sum < 1e-8 && recon < 1e-9,
          "whitening " + num(whiten) + ", off-diagonal " + num(off) + ", eigenvalue sum " + num(sum) +
              ", eigh reconstruction " + num(recon)};
}

// Jury criterion for z^2 + a1 z + a2.
bool jury_stable(const Biquad& s) { return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2; }

Outcome filter_suite() {
  constexpr double fs = 256.0;
  const std::vector<BandName> all{BandName::delta, BandName::theta,         BandName::alpha,       BandName::beta,
                                  BandName::gamma, BandName::broad_preproc, BandName::mrcp_lowpass};
  bool stable = true;
  double worst_edge = 0.0, worst_sym = 0.0;
  int worst_lag = 0;
  Rng rng(seed_for("filters"));

  std::vector<double> sym(1001);
  for (std::size_t i = 0; i <= 500; ++i) sym[i] = sym[1000 - i] = rng.gaussian();
  std::vector<double> raw(4096);
  for (auto& v : raw) v = rng.gaussian();

  for (auto name : all) {
    const BandSpec b = default_band(name);
    const IirFilter f = design_filter(b, fs);
    for (const auto& s : f.sections) stable = stable && jury_stable(s);
    stable = stable && f.stable();

    if (!b.is_lowpass()) {
      const double peak = f.magnitude(std::sqrt(b.low_hz * b.high_hz));
      for (double edge : {b.low_hz, b.high_hz}) {
        worst_edge = std::max(worst_edge, std::abs(20.0 * std::log10(f.magnitude(edge) / peak) + 3.0103));
      }
    } else {
      worst_edge = std::max(worst_edge, std::abs(20.0 * std::log10(f.magnitude(b.high_hz)) + 3.0103));
    }

    const auto y = filtfilt(sym, f, 8 * default_pad_len(fs));
    for (std::size_t i = 0; i < y.size(); ++i) worst_sym = std::max(worst_sym, std::abs(y[i] - y[y.size() - 1 - i]));

    const auto x = filtfilt(raw, f, default_pad_len(fs));
    const auto z = filtfilt(x, f, default_pad_len(fs));
    int best_lag = 0;
    double best = -1e300;
    for (int lag = -64; lag <= 64; ++lag) {
      double acc = 0.0;
      for (int i = 512; i < 3584; ++i) acc += x[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i + lag)];
      if (acc > best) best = acc, best_lag = lag;
    }
    worst_lag = std::max(worst_lag, std::abs(best_lag));
  }
  return {stable && worst_edge < 0.5 && worst_lag == 0 && worst_sym < 1e-9,
          std::string(stable ? "all stable" : "UNSTABLE") + ", edge error " + num(worst_edge) + " dB, xcorr peak lag " +
              std::to_string(worst_lag) + ", symmetry " + num(worst_sym)};
}

Outcome svm_oracle() {
  Rng rng(seed_for("svm"));
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto n = static_cast<Eigen::Index>(4 + rng.uniform_below(37));
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_below(5));
    const double grid[] = {0.01, 0.1, 1.0, 10.0};
    const double c = grid[rng.uniform_below(4)];
    Eigen::MatrixXd x = oracle::random_matrix(rng, n, d);
    std::vector<int> y;
    const double shift = 2.0 * rng.uniform01();
    for (Eigen::Index i = 0; i < n; ++i) {
      y.push_back(i % 2 ? 1 : -1);
      x(i, 0) += shift * y.back();
    }
    const double ref = oracle::svm_dual_objective_pg(x, y, c);
    worst = std::max(worst, std::abs(solve_svm_dual(x, y, c).dual - ref) / std::abs(ref));
  }
  Eigen::MatrixXd x(2, 1);
  x << -1, 1;
  const auto analytic = solve_svm_dual(x, std::vector<int>{-1, 1}, 1e6);
  const double err = std::max(std::abs(analytic.w(0) - 1.0), std::abs(analytic.b));
  return {worst <= 1e-4 && err <= 1e-6, "worst relative dual gap to oracle " + num(worst) + ", analytic error " + num(err)};
}

Outcome no_leakage() {
  auto cfg = base_config("leakage", {Label::pen, Label::bottle}, 60);
  cfg.sources = {oscillator(cfg.montage, BandName::theta, Phase::planning, {1.0, 0.0, 0.0}, "Fz")};
  const Dataset ds = generate_dataset(cfg).dataset;
  const auto sc = Scenario::pair(Label::pen, Label::bottle);
  const auto pad = default_pad_len(ds.sample_rate);
  auto opt = cv_for("leakage");
  opt.keep_fold_models = true;
  auto table_of = [&](const Dataset& d) {
    return compute_stats_table(d, default_filter_bank(), TrialWindow::of(Phase::planning), pad);
  };
  const auto base = kfold_cv_fbcsp(ds, table_of(ds), sc, opt);
  const auto view = scenario_view(ds, sc);
  int identical = 0;
  for (std::size_t f = 0; f < base.folds.size(); ++f) {
    Dataset perturbed = ds;
    Rng rng(seed_for("leakage/perturb/" + std::to_string(f)));
    for (auto r : base.folds[f].validation) {
      auto& data = perturbed.trials[view.trials[r]].data;
      for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = static_cast<float>(10.0 * rng.gaussian());
    }
    const auto again = kfold_cv_fbcsp(perturbed, table_of(perturbed), sc, opt);
    const bool same = again.artifacts[f].csp == base.artifacts[f].csp &&
                      again.artifacts[f].svm_by_c == base.artifacts[f].svm_by_c;
    identical += same;
  }
  return {identical == 10 && base.folds.size() == 10,
          std::to_string(identical) + "/" + std::to_string(base.folds.size()) +
              " folds with bit-identical CSP, scaler and SVM"};
}

Outcome signature_a() {
  auto cfg = base_config("signature-a", {Label::pen, Label::bottle}, 60);
  cfg.sources = {oscillator(cfg.montage, BandName::theta, Phase::planning, {1.0, 0.0, 0.0}, "Fz")};
  const Dataset ds = generate_dataset(cfg).dataset;
  const auto sc = Scenario::pair(Label::pen, Label::bottle);
  const auto cv = cv_for("signature-a");
  const double theta = cv_accuracy(ds, {default_band(BandName::theta)}, Phase::planning, sc, cv);
  const double gamma = cv_accuracy(ds, {default_band(BandName::gamma)}, Phase::planning, sc, cv);
  const auto band = chance_band(120, 2, 0.05);
  return {theta >= 0.90 && in_band(gamma, band),
          "theta planning " + num(theta, "%.3f") + " (>= 0.90), gamma planning " + num(gamma, "%.3f") + " in " +
              band_str(band)};
}

Outcome signature_b() {
  auto cfg = base_config("signature-b", {Label::pen, Label::bottle, Label::empty}, 60);
  cfg.sources = {oscillator(cfg.montage, BandName::beta, Phase::movement, {1.0, 1.0, 0.0}, "C3")};
  const Dataset ds = generate_dataset(cfg).dataset;
  const auto cv = cv_for("signature-b");
  const auto band = chance_band(120, 2, 0.05);
  const std::vector<BandSpec> beta{default_band(BandName::beta)};
  bool pass = true;
  std::string detail;
  for (auto grasp : {Label::pen, Label::bottle}) {
    const auto sc = Scenario::pair(grasp, Label::empty);
    const double move = cv_accuracy(ds, beta, Phase::movement, sc, cv);
    const double plan = cv_accuracy(ds, beta, Phase::planning, sc, cv);
    pass = pass && move >= 0.90 && in_band(plan, band);
    detail += sc.name() + " beta movement " + num(move, "%.3f") + ", planning " + num(plan, "%.3f") + "; ";
  }
  const auto curve = temporal_evolution(ds, beta, Scenario::pair(Label::pen, Label::empty), 0.5, cv,
                                        default_pad_len(ds.sample_rate));
  const auto pc = phase_contrast(curve, 3.0);
  pass = pass && pc.post_mean > pc.pre_mean && pc.test.p < 0.05 && in_band(pc.pre_mean, band);
  detail += "temporal pre-onset " + num(pc.pre_mean, "%.3f") + " vs post-onset " + num(pc.post_mean, "%.3f") +
            " (p=" + num(pc.test.p, "%.2g") + "); chance " + band_str(band);
  return {pass, detail};
}

Outcome broadband_mixture() {
  auto cfg = base_config("broadband", {Label::pen, Label::bottle}, 60);
  cfg.sources = {oscillator(cfg.montage, BandName::theta, Phase::planning, {0.2, 0.0, 0.0}, "Fz"),
                 oscillator(cfg.montage, BandName::beta, Phase::planning, {0.0, 0.2, 0.0}, "C4")};
  const Dataset ds = generate_dataset(cfg).dataset;
  const auto sc = Scenario::pair(Label::pen, Label::bottle);
  const auto cv = cv_for("broadband");
  const auto pad = default_pad_len(ds.sample_rate);
  const auto tables = compute_stats_tables(ds, default_filter_bank(),
                                           std::vector<TrialWindow>{TrialWindow::of(Phase::planning)}, pad);
  const StatsTable& all = tables.front();
  double best = 0.0;
  std::string best_name;
  for (std::size_t b = 0; b < all.bands.size(); ++b) {
    const StatsTable one{{all.bands[b]}, all.window, {all.per_band[b]}};
    const double acc = kfold_cv_fbcsp(ds, one, sc, cv).mean_accuracy;
    if (acc > best) best = acc, best_name = band_name(all.bands[b].name);
  }
  const double broad = kfold_cv_fbcsp(ds, all, sc, cv).mean_accuracy;
  return {broad >= best - 0.03,
          "broadband " + num(broad, "%.3f") + " vs best single band " + best_name + " " + num(best, "%.3f")};
}

Outcome mrcp_contrast() {
  const auto band = chance_band(120, 2, 0.05);
  const auto sc = Scenario::pair(Label::pen, Label::empty);
  const auto cv = cv_for("mrcp");

  auto slow = base_config("mrcp/slow", {Label::pen, Label::empty}, 60);
  SourceSpec sp;
  sp.kind = SourceKind::slow_potential;
  sp.amplitude = {1.0, 0.0, 0.0};
  sp.pattern = focal_pattern(slow.montage, "Cz", 0.6);
  sp.latency_jitter_s = 0.05;
  slow.sources = {sp};
  const Dataset slow_ds = generate_dataset(slow).dataset;
  const double mrcp_slow =
      kfold_cv_mrcp(slow_ds, compute_mrcp_table(slow_ds, default_pad_len(slow_ds.sample_rate)), sc, cv).mean_accuracy;

  // beta-band (13-30 Hz) source, spectrally centred near 20 Hz
  auto fast = base_config("mrcp/beta", {Label::pen, Label::empty}, 60);
  fast.sources = {oscillator(fast.montage, BandName::beta, Phase::movement, {1.0, 0.0, 0.0}, "C3")};
  const Dataset fast_ds = generate_dataset(fast).dataset;
  const double mrcp_fast =
      kfold_cv_mrcp(fast_ds, compute_mrcp_table(fast_ds, default_pad_len(fast_ds.sample_rate)), sc, cv).mean_accuracy;
  const double fbcsp_fast = cv_accuracy(fast_ds, {default_band(BandName::beta)}, Phase::movement, sc, cv);

  return {mrcp_slow >= 0.80 && in_band(mrcp_fast, band) && fbcsp_fast >= 0.90,
          "slow potential MRCP " + num(mrcp_slow, "%.3f") + " (>= 0.80); beta dataset MRCP " + num(mrcp_fast, "%.3f") +
              " in " + band_str(band) + ", beta FBCSP " + num(fbcsp_fast, "%.3f") + " (>= 0.90)"};
}

// ---------------------------------------------------------------------------
// Full CLI pipeline

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

struct PipelineRun {
  bool ok = true;
  std::string failure;
  double seconds = 0.0;
  std::map<std::string, std::string> manifest_hash;  // step -> sha256 of its run.json
  fs::path root;
};

PipelineRun run_pipeline(const fs::path& root, const std::string& seed) {
  PipelineRun r;
  r.root = root;
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = [&](const std::string& rel) { return (root / rel).string(); };
  const std::vector<std::pair<std::string, std::vector<std::string>>> steps{
      {"synth", {"synth", "--seed", seed, "--out", s("synth")}},
      {"split", {"split", "--data", s("synth"), "--seed", seed, "--out", s("split")}},
      {"train", {"train", "--data", s("split/train"), "--seed", seed, "--out", s("train")}},
      {"eval", {"eval", "--data", s("split/test"), "--models", s("train"), "--out", s("eval")}},
      {"mrcp",
       {"mrcp", "--data", s("split/train"), "--test", s("split/test"), "--seed", seed, "--out", s("mrcp")}},
      {"temporal",
       {"temporal", "--data", s("split/train"), "--band", "beta", "--scenario", "pen-vs-empty", "--seed", seed,
        "--out", s("temporal")}},
      {"importance", {"importance", "--models", s("train/models"), "--out", s("importance")}},
      {"trajectory",
       {"trajectory", "--data", s("split/train"), "--models", s("train/models/multiclass_theta_planning.json"),
        "--out", s("trajectory")}},
      {"topomap",
       {"topomap", "--models", s("train/models/pen-vs-bottle_theta_planning.json"), "--out", s("topomap")}},
  };
  fs::create_directories(root);
  for (const auto& [name, args] : steps) {
    auto full = args;
    full.insert(full.begin() + 1, {"--jobs", "1"});
    const auto res = testutil::run_cli(full, root);
    if (res.code != 0) {
      r.ok = false;
      r.failure = name + " exited " + std::to_string(res.code) + ": " + res.err;
      return r;
    }
    r.manifest_hash[name] = sha256_hex(testutil::slurp(root / name / "run.json"));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Outcome dimensions(const PipelineRun& run) {
  bool pass = true;
  std::string detail;
  auto check = [&](bool ok, const std::string& what) {
    pass = pass && ok;
    detail += (detail.empty() ? "" : ", ") + what + (ok ? "" : " (WRONG)");
  };

  auto cfg = base_config("dimensions", {Label::pen, Label::bottle, Label::empty}, 75);
  cfg.sources = {oscillator(cfg.montage, BandName::theta, Phase::planning, {1.0, 0.0, 0.5}, "Fz")};
  const Dataset ds = generate_dataset(cfg).dataset;
  const auto split = split_train_test(ds, 15, seed_for("dimensions/split"));
  const auto pad = default_pad_len(ds.sample_rate);
  CvOptions cv = cv_for("dimensions");
  cv.c_grid = {1.0};
  const auto table = compute_stats_table(split.train, default_filter_bank(), TrialWindow::of(Phase::planning), pad);

  const auto clf = train_fbcsp_binary(split.train, table, Scenario::pair(Label::pen, Label::bottle), cv);
  std::map<BandName, CspModel> models;
  for (const auto& m : clf.csp) models.emplace(m.band, m);
  const auto fs_set = extract_fbcsp(split.test.trials.front(), clf.window, models, clf.bands, ds.sample_rate, pad);
  bool per_band_ok = fs_set.per_band.size() == 5;
  for (const auto& [name, v] : fs_set.per_band) per_band_ok = per_band_ok && v.size() == 16;
  check(per_band_ok, "per-band 1x16");
  check(fs_set.broadband.size() == 80, "broadband 1x" + std::to_string(fs_set.broadband.size()));

  const auto ovr = train_ovr_fbcsp(split.train, table, cv);
  bool multi_ok = split.test.trials.size() == 45 && ovr.members.size() == 3;
  for (const auto& member : ovr.members) {
    std::map<BandName, CspModel> mm;
    for (const auto& m : member.csp) mm.emplace(m.band, m);
    std::map<BandName, Eigen::MatrixXd> mats;
    for (std::size_t i = 0; i < split.test.trials.size(); ++i) {
      const auto f = extract_fbcsp(split.test.trials[i], member.window, mm, member.bands, ds.sample_rate, pad);
      for (const auto& [name, v] : f.per_band) {
        auto& x = mats[name];
        if (x.size() == 0) x.resize(static_cast<Eigen::Index>(split.test.trials.size()), v.size());
        x.row(static_cast<Eigen::Index>(i)) = v.transpose();
      }
    }
    for (const auto& [name, x] : mats) multi_ok = multi_ok && x.rows() == 45 && x.cols() == 16;
    multi_ok = multi_ok && mats.size() == 5;
  }
  check(multi_ok, "multiclass test matrices 45x16 for 3 scenarios x 5 bands");

  const auto mrcp = extract_mrcp(split.test.trials.front(), ds.sample_rate, pad);
  check(mrcp.values.rows() == 16 && mrcp.values.cols() == 7,
        "MRCP " + std::to_string(mrcp.values.rows()) + "x" + std::to_string(mrcp.values.cols()));

  int band_specific = 0;
  if (run.ok) {
    for (const auto& e : fs::directory_iterator(run.root / "train" / "models")) {
      const auto f = e.path().filename().string();
      if (!f.starts_with("multiclass") && f.find("broadband") == std::string::npos) ++band_specific;
    }
  }
  check(band_specific == 30, "sweep " + std::to_string(band_specific) + " band-specific binary bundles");
  return {pass, detail};
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  if (!a.ok) return {false, "first run failed: " + a.failure};
  if (!b.ok) return {false, "second run failed: " + b.failure};
  int same = 0;
  for (const auto& [step, hash] : a.manifest_hash) same += b.manifest_hash.at(step) == hash;
  const bool fast = a.seconds < 300.0 && b.seconds < 300.0;
  const auto total = a.manifest_hash.size();
  return {same == static_cast<int>(total) && fast,
          std::to_string(same) + "/" + std::to_string(total) + " run manifests identical (train " +
              a.manifest_hash.at("train").substr(0, 16) + "...), pipeline " + num(a.seconds, "%.1f") + " s and " +
              num(b.seconds, "%.1f") + " s on one core (< 300 s)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* title, double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = num(secs, "%.2f") + " s";
    if (limit_s > 0.0) {
      timing += " (limit " + num(limit_s, "%.0f") + " s)";
      if (secs >= limit_s) {
        o.pass = false;
        timing += " TOO SLOW";
      }
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << ": " << o.detail << "  [" << timing
              << "]" << std::endl;
  };

  report(1, "CSP algebra", 5, csp_algebra);
  report(2, "filter suite", 5, filter_suite);
  report(3, "SVM oracle equivalence", 30, svm_oracle);
  report(4, "no leakage", 0, no_leakage);
  report(5, "theta planning signature", 60, signature_a);
  report(6, "beta movement signature", 0, signature_b);
  report(7, "broadband vs single band", 0, broadband_mixture);
  report(8, "MRCP baseline contrast", 0, mrcp_contrast);

  testutil::TempDir work;
  const auto seed = std::to_string(seed_for("pipeline") % 1000000007ULL);
  const PipelineRun first = run_pipeline(work / "run1", seed);
  const PipelineRun second = run_pipeline(work / "run2", seed);
  report(9, "dimensional conformance", 0, [&] { return dimensions(first); });
  report(10, "determinism", 0, [&] { return determinism(first, second); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
