// graspdec: command-line front end for the grasp decoding pipeline.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "graspdec/graspdec.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace graspdec;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

// Effective settings: config file values overridden by flags given on the
// command line.
class Settings {
 public:
  json values = json::object();

  bool has(const std::string& key) const { return values.contains(key) && !values.at(key).is_null(); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return values.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config value '" + key + "' has the wrong type");
    }
  }

  std::string require_path(const std::string& key) const {
    if (!has(key)) throw ConfigError("--" + key + " is required");
    const auto p = get<std::string>(key, "");
    if (!fs::exists(p)) throw ConfigError(key + " path does not exist: " + p);
    return p;
  }

  std::vector<std::string> list(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values.at(key);
    if (v.is_string()) return {v.get<std::string>()};
    return get<std::vector<std::string>>(key, fallback);
  }
};

// Writes output files atomically and records their hashes for run.json.
class Run {
 public:
  Run(fs::path out, std::string command) : out_(std::move(out)), command_(std::move(command)) {
    fs::create_directories(out_);
  }

  const fs::path& out() const { return out_; }

  void write(const std::string& rel, const std::string& contents) {
    io::write_file_atomic(out_ / rel, contents);
    files_[rel] = sha256_hex(contents);
  }

  void write_json(const std::string& rel, const json& doc) { write(rel, doc.dump(2) + "\n"); }

  void record(const std::string& rel) { files_[rel] = sha256_hex(io::read_file(out_ / rel)); }

  void input(const std::string& role, const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
    inputs_.push_back({{"role", role}, {"sha256", sha256_hex(io::read_file(file))}});
  }

  void finish(const Settings& settings) {
    json files = json::array();
    for (const auto& [path, hash] : files_) files.push_back({{"path", path}, {"sha256", hash}});
    json shown = settings.values;
    for (const char* k : {"config", "out", "data", "test", "models", "jobs"}) shown.erase(k);
    io::write_json(out_ / "run.json", {{"command", command_}, {"settings", shown}, {"inputs", inputs_}, {"files", files}});
  }

 private:
  fs::path out_;
  std::string command_;
  std::map<std::string, std::string> files_;
  json inputs_ = json::array();
};

std::uint64_t top_seed(const Settings& s) { return s.get<std::uint64_t>("seed", 0); }

std::size_t jobs_of(const Settings& s) {
  const long long j = s.get<long long>("jobs", static_cast<long long>(default_jobs()));
  if (j < 1) throw ConfigError("--jobs must be at least 1");
  return static_cast<std::size_t>(j);
}

Dataset load_data(const Settings& s, const std::string& key, Run& run) {
  const auto path = s.require_path(key);
  Dataset ds = load_dataset(path);
  ds.validate();
  run.input(key, path);
  return ds;
}

std::size_t pad_of(const Dataset& ds) { return default_pad_len(ds.sample_rate); }

CvOptions cv_options(const Settings& s) {
  CvOptions o;
  o.k = s.get<int>("k", 10);
  if (o.k < 2) throw ConfigError("k must be at least 2");
  o.seed = derive_seed(top_seed(s), "cv");
  o.c_grid = s.get<std::vector<double>>("c_grid", o.c_grid);
  if (o.c_grid.empty()) throw ConfigError("empty C grid");
  for (double c : o.c_grid) {
    if (!(c > 0.0)) throw ConfigError("C values must be positive");
  }
  return o;
}

std::vector<BandSpec> bands_of(const Settings& s) {
  std::vector<BandSpec> out;
  for (const auto& name : s.list("bands", {"delta", "theta", "alpha", "beta", "gamma"})) {
    const BandName b = band_from_name(name);
    if (std::find(kFilterBankBands.begin(), kFilterBankBands.end(), b) == kFilterBankBands.end()) {
      throw ConfigError("band '" + name + "' is not part of the filter bank");
    }
    out.push_back(default_band(b));
  }
  if (out.empty()) throw ConfigError("no bands selected");
  sort_canonical(out);
  return out;
}

std::vector<Phase> phases_of(const Settings& s) {
  std::vector<Phase> out;
  for (const auto& p : s.list("phases", {"planning", "movement"})) out.push_back(phase_from_name(p));
  if (out.empty()) throw ConfigError("no phases selected");
  return out;
}

struct ScenarioChoice {
  std::vector<Scenario> pairs;
  bool multiclass = false;
};

Scenario parse_pair(const std::string& name) {
  const auto sep = name.find("-vs-");
  if (sep == std::string::npos) throw ConfigError("unknown scenario '" + name + "'");
  const Label a = label_from_name(name.substr(0, sep)), b = label_from_name(name.substr(sep + 4));
  if (a == b) throw ConfigError("scenario compares a class with itself");
  return Scenario::pair(a, b);
}

ScenarioChoice scenarios_of(const Settings& s, const Dataset& ds) {
  const auto present = ds.present_labels();
  auto has = [&](Label l) { return std::find(present.begin(), present.end(), l) != present.end(); };
  ScenarioChoice c;
  if (s.has("scenarios")) {
    for (const auto& name : s.list("scenarios", {})) {
      if (name == "multiclass") {
        if (present.size() < 2) throw DataError("multiclass needs at least two classes");
        c.multiclass = true;
        continue;
      }
      const Scenario sc = parse_pair(name);
      if (!has(sc.class_a.front()) || !has(sc.class_b.front())) {
        throw DataError("scenario " + name + ": class missing from dataset");
      }
      c.pairs.push_back(sc);
    }
    return c;
  }
  for (auto [a, b] : {std::pair{Label::pen, Label::bottle}, {Label::pen, Label::empty}, {Label::bottle, Label::empty}}) {
    if (has(a) && has(b)) c.pairs.push_back(Scenario::pair(a, b));
  }
  c.multiclass = present.size() == kNumLabels;
  if (c.pairs.empty() && !c.multiclass) throw DataError("dataset has fewer than two classes");
  return c;
}

std::string band_tag(const std::vector<BandSpec>& bands) {
  return bands.size() == 1 ? std::string(band_name(bands.front().name)) : "broadband";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Settings& s, Run& run) {
  json cfg_json = s.has("synth") ? s.values.at("synth") : default_synth_config_json();
  if (s.has("trials_per_class")) cfg_json["trials_per_class"] = s.values.at("trials_per_class");
  cfg_json["seed"] = derive_seed(top_seed(s), "synth");
  const SynthConfig cfg = synth_config_from_json(cfg_json);
  const SynthResult result = generate_dataset(cfg, jobs_of(s));

  for (const auto& rel : save_dataset(result.dataset, run.out())) run.record(rel);
  run.write_json("groundtruth.json", to_json(result.truth));
  run.write_json("synth_config.json", to_json(cfg));

  const auto counts = result.dataset.class_counts();
  std::cout << "synth: " << result.dataset.trials.size() << " trials (";
  for (int c = 0; c < kNumLabels; ++c) {
    std::cout << (c ? ", " : "") << label_name(static_cast<Label>(c)) << " " << counts[static_cast<std::size_t>(c)];
  }
  std::cout << "), " << cfg.montage.size() << " channels, " << cfg.sample_rate << " Hz\n";
  for (const auto& src : cfg.sources) {
    const double peak = *std::max_element(src.amplitude.begin(), src.amplitude.end());
    std::cout << "  source "
              << (src.kind == SourceKind::oscillatory ? std::string(band_name(src.band)) : "slow_potential") << " / "
              << (src.phase ? std::string(phase_name(*src.phase)) : "both") << "  SNR "
              << fmt("%.2f", peak / cfg.noise_rms) << "\n";
  }
  if (cfg.sources.empty()) std::cout << "  no sources (noise only)\n";
  return 0;
}

int cmd_split(const Settings& s, Run& run) {
  const Dataset ds = load_data(s, "data", run);
  const long long per_class = s.get<long long>("test_per_class", 15);
  if (per_class < 1) throw ConfigError("test_per_class must be at least 1");
  const auto split = split_train_test(ds, static_cast<std::size_t>(per_class), derive_seed(top_seed(s), "split"));
  for (const auto& rel : save_dataset(split.train, run.out() / "train")) run.record("train/" + rel);
  for (const auto& rel : save_dataset(split.test, run.out() / "test")) run.record("test/" + rel);
  std::cout << "split: " << split.train.trials.size() << " train, " << split.test.trials.size() << " test\n";
  return 0;
}

struct TrainTask {
  std::string name;
  std::size_t table = 0;  // index into the stats tables
  std::optional<Scenario> pair;  // empty: one-vs-rest
};

int cmd_train(const Settings& s, Run& run) {
  const Dataset ds = load_data(s, "data", run);
  const auto bands = bands_of(s);
  const auto phases = phases_of(s);
  const auto scen = scenarios_of(s, ds);
  const CvOptions cv = cv_options(s);
  const bool broadband = s.get<bool>("broadband", true) && bands.size() > 1;
  const std::size_t jobs = jobs_of(s);
  const std::size_t pad = pad_of(ds);

  std::vector<TrialWindow> windows;
  for (auto p : phases) windows.push_back(TrialWindow::of(p));
  std::vector<std::vector<BandTrialStats>> per_band(bands.size());
  parallel_for(bands.size(), jobs, [&](std::size_t b) {
    per_band[b] = compute_band_stats(ds.trials, bands[b], windows, ds.sample_rate, pad);
  });

  // tables: for each phase, one per band then (optionally) broadband
  std::vector<StatsTable> tables;
  for (std::size_t w = 0; w < phases.size(); ++w) {
    for (std::size_t b = 0; b < bands.size(); ++b) tables.push_back({{bands[b]}, windows[w], {per_band[b][w]}});
    if (broadband) {
      StatsTable all{bands, windows[w], {}};
      for (std::size_t b = 0; b < bands.size(); ++b) all.per_band.push_back(per_band[b][w]);
      tables.push_back(std::move(all));
    }
  }

  std::vector<TrainTask> tasks;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const std::string suffix = "_" + band_tag(tables[t].bands) + "_" + tables[t].window.tag();
    for (const auto& sc : scen.pairs) tasks.push_back({sc.name() + suffix, t, sc});
    if (scen.multiclass) tasks.push_back({"multiclass" + suffix, t, std::nullopt});
  }

  std::vector<ModelBundle> bundles(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const auto& task = tasks[i];
    bundles[i] = task.pair ? ModelBundle::binary(train_fbcsp_binary(ds, tables[task.table], *task.pair, cv))
                           : ModelBundle::ovr(train_ovr_fbcsp(ds, tables[task.table], cv));
  });

  std::string summary = "scenario,band,phase,mean_accuracy,std_accuracy,chosen_C\n";
  std::cout << "train: " << tasks.size() << " bundles (" << ds.trials.size() << " trials, k=" << cv.k << ")\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    const auto& b = bundles[i];
    run.write_json("models/" + task.name + ".json", to_json(b));
    const std::string scenario = task.pair ? task.pair->name() : "multiclass";
    const std::string band = band_tag(tables[task.table].bands);
    const std::string phase = tables[task.table].window.tag();
    if (task.pair) {
      const auto& r = b.members.front().cv;
      run.write_json("reports/" + task.name + ".cv.json", to_json(r));
      run.write("reports/" + task.name + ".cv.csv", cv_report_csv(r));
      summary += scenario + "," + band + "," + phase + "," + io::format_double(r.mean_accuracy) + "," +
                 io::format_double(r.std_accuracy) + "," + io::format_double(r.chosen_c) + "\n";
      std::cout << "  " << task.name << "  cv " << fmt("%.3f", r.mean_accuracy) << " +/- "
                << fmt("%.3f", r.std_accuracy) << "  C=" << io::format_double(r.chosen_c) << "\n";
    } else {
      json members = json::array();
      for (const auto& m : b.members) members.push_back({{"scenario", m.scenario.name()}, {"cv", to_json(m.cv)}});
      run.write_json("reports/" + task.name + ".cv.json", {{"members", members}});
      for (const auto& m : b.members) {
        summary += m.scenario.name() + "," + band + "," + phase + "," + io::format_double(m.cv.mean_accuracy) + "," +
                   io::format_double(m.cv.std_accuracy) + "," + io::format_double(m.cv.chosen_c) + "\n";
      }
      std::cout << "  " << task.name << "  " << b.members.size() << " one-vs-rest members\n";
    }
  }
  run.write("cv_summary.csv", summary);
  return 0;
}

// Bundle files named on the command line, or all *.json in named directories.
std::vector<fs::path> bundle_files(const Settings& s) {
  std::vector<fs::path> out;
  const auto entries = s.list("models", {});
  if (entries.empty()) throw ConfigError("--models is required");
  for (const auto& e : entries) {
    if (!fs::exists(e)) throw ConfigError("models path does not exist: " + e);
    if (fs::is_directory(e)) {
      const fs::path dir = fs::is_directory(fs::path(e) / "models") ? fs::path(e) / "models" : fs::path(e);
      std::vector<fs::path> found;
      for (const auto& f : fs::directory_iterator(dir)) {
        if (f.path().extension() == ".json") found.push_back(f.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(e);
    }
  }
  if (out.empty()) throw DataError("no model bundles found");
  return out;
}

std::string bundle_band(const ModelBundle& b) {
  const auto& m = b.members.front();
  if (m.kind == FeatureKind::mrcp) return "mrcp";
  return band_tag(m.bands);
}

std::string bundle_window(const ModelBundle& b) {
  const auto& m = b.members.front();
  return m.kind == FeatureKind::mrcp ? "woi" : m.window.tag();
}

struct Evaluation {
  std::vector<int> truth, predicted;    // label indices
  std::vector<std::string> subject;
  Eigen::MatrixXi confusion;            // over bundle classes, rows = truth
  double accuracy = 0.0;
  std::map<std::string, double> per_subject;
};

Evaluation evaluate(const ModelBundle& b, const Dataset& test) {
  Evaluation ev;
  const std::size_t pad = pad_of(test);
  auto class_pos = [&](Label l) -> int {
    for (std::size_t i = 0; i < b.classes.size(); ++i)
      if (b.classes[i] == l) return static_cast<int>(i);
    return -1;
  };
  const OvrModel ovr = b.one_vs_rest ? b.as_ovr() : OvrModel{};
  std::vector<int> truth_pos, pred_pos;
  for (const auto& t : test.trials) {
    if (class_pos(t.label) < 0) continue;
    Label p;
    if (b.one_vs_rest) {
      p = predict_ovr(ovr, t, test.sample_rate, pad);
    } else {
      const auto& m = b.members.front();
      p = m.decision_value(t, test.sample_rate, pad) >= 0.0 ? m.scenario.class_a.front() : m.scenario.class_b.front();
    }
    ev.truth.push_back(index_of(t.label));
    ev.predicted.push_back(index_of(p));
    ev.subject.push_back(t.subject_id);
    truth_pos.push_back(class_pos(t.label));
    pred_pos.push_back(class_pos(p));
  }
  if (ev.truth.empty()) throw DataError("test set has no trials of the bundle's classes");
  ev.confusion = confusion(pred_pos, truth_pos, static_cast<int>(b.classes.size()));
  ev.accuracy = accuracy(ev.predicted, ev.truth);
  std::map<std::string, std::pair<int, int>> hits;
  for (std::size_t i = 0; i < ev.truth.size(); ++i) {
    auto& h = hits[ev.subject[i]];
    h.first += ev.truth[i] == ev.predicted[i];
    h.second += 1;
  }
  for (const auto& [subject, h] : hits) ev.per_subject[subject] = static_cast<double>(h.first) / h.second;
  return ev;
}

json confusion_json(const Eigen::MatrixXi& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

int cmd_eval(const Settings& s, Run& run) {
  const Dataset test = load_data(s, "data", run);
  const auto files = bundle_files(s);
  json results = json::array();
  // (scenario, band) -> window -> per-subject accuracies
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<double>>> table;
  std::cout << "eval: " << files.size() << " bundles on " << test.trials.size() << " test trials\n";
  for (const auto& f : files) {
    const ModelBundle b = bundle_from_json(io::read_json(f));
    const Evaluation ev = evaluate(b, test);
    const std::string scenario = b.one_vs_rest ? "multiclass" : b.members.front().scenario.name();
    json classes = json::array();
    for (auto l : b.classes) classes.push_back(std::string(label_name(l)));
    results.push_back({{"bundle", f.stem().string()},
                       {"scenario", scenario},
                       {"band", bundle_band(b)},
                       {"window", bundle_window(b)},
                       {"n", ev.truth.size()},
                       {"accuracy", ev.accuracy},
                       {"classes", classes},
                       {"confusion", confusion_json(ev.confusion)},
                       {"per_subject", ev.per_subject},
                       {"truth", ev.truth},
                       {"predicted", ev.predicted}});
    auto& cell = table[{scenario, bundle_band(b)}][bundle_window(b)];
    for (const auto& [subject, acc] : ev.per_subject) cell.push_back(acc);
    std::cout << "  " << f.stem().string() << "  " << fmt("%.3f", ev.accuracy) << "  (n=" << ev.truth.size()
              << ")\n";
  }
  run.write_json("eval.json", {{"results", results}});

  // One row per scenario and band, mean and std across subjects per window.
  std::string csv = "scenario,band,window,mean_accuracy,std_accuracy,subjects\n";
  for (const auto& [key, windows] : table) {
    for (const auto& [window, accs] : windows) {
      csv += key.first + "," + key.second + "," + window + "," + io::format_double(mean_of(accs)) + "," +
             io::format_double(sample_std(accs)) + "," + std::to_string(accs.size()) + "\n";
    }
  }
  run.write("eval_table.csv", csv);
  return 0;
}

int cmd_mrcp(const Settings& s, Run& run) {
  const Dataset ds = load_data(s, "data", run);
  std::optional<Dataset> test;
  if (s.has("test")) test = load_data(s, "test", run);
  const auto scen = scenarios_of(s, ds);
  const CvOptions cv = cv_options(s);
  const std::size_t jobs = jobs_of(s);
  const std::size_t pad = pad_of(ds);
  const MrcpTable table = compute_mrcp_table(ds, pad);

  std::vector<std::optional<Scenario>> tasks;
  for (const auto& sc : scen.pairs) tasks.emplace_back(sc);
  if (scen.multiclass) tasks.emplace_back(std::nullopt);
  std::vector<ModelBundle> bundles(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    bundles[i] = tasks[i] ? ModelBundle::binary(train_mrcp_binary(ds, table, *tasks[i], cv))
                          : ModelBundle::ovr(train_ovr_mrcp(ds, table, cv));
  });

  json results = json::array();
  std::cout << "mrcp: " << ds.trials.size() << " trials\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& b = bundles[i];
    const std::string name = tasks[i] ? tasks[i]->name() : "multiclass";
    run.write_json("models/mrcp_" + name + ".json", to_json(b));
    json r = {{"scenario", name}};
    if (tasks[i]) {
      r["cv"] = to_json(b.members.front().cv);
      std::cout << "  " << name << "  cv " << fmt("%.3f", b.members.front().cv.mean_accuracy);
    } else {
      json members = json::array();
      for (const auto& m : b.members) members.push_back({{"scenario", m.scenario.name()}, {"cv", to_json(m.cv)}});
      r["members"] = members;
      std::cout << "  " << name;
    }
    if (test) {
      const Evaluation ev = evaluate(b, *test);
      r["test"] = {{"accuracy", ev.accuracy}, {"n", ev.truth.size()}, {"confusion", confusion_json(ev.confusion)},
                   {"per_subject", ev.per_subject}};
      std::cout << "  test " << fmt("%.3f", ev.accuracy);
    }
    std::cout << "\n";
    results.push_back(r);
  }
  run.write_json("mrcp.json", {{"results", results}});

  const std::size_t onset = ds.trials.front().movement_onset;
  std::string csv = "channel,class,sample,t,value\n";
  for (const auto& ch : s.list("channels", {"C3", "Cz", "C4"})) {
    const std::size_t c = ds.montage.index_of(ch);
    std::vector<std::pair<Label, Eigen::VectorXd>> waves;
    for (auto label : ds.present_labels()) {
      std::vector<Trial> members;
      for (const auto& t : ds.trials) {
        if (t.label == label) members.push_back(t);
      }
      waves.emplace_back(label, grand_average_mrcp(members, c, ds.sample_rate, pad));
    }
    for (const auto& [label, w] : waves) {
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        csv += ch + "," + std::string(label_name(label)) + "," + std::to_string(k) + "," +
               io::format_double((static_cast<double>(k) - static_cast<double>(onset)) / ds.sample_rate) + "," +
               io::format_double(w(k)) + "\n";
      }
    }
    run.write("mrcp_" + ch + ".svg", mrcp_waveform_svg(ch, ds.sample_rate, onset, waves));
  }
  run.write("mrcp_waveforms.csv", csv);
  return 0;
}

int cmd_temporal(const Settings& s, Run& run) {
  const Dataset ds = load_data(s, "data", run);
  const auto band = s.get<std::string>("band", "theta");
  std::vector<BandSpec> bands;
  if (band == "broadband") {
    bands = default_filter_bank();
  } else {
    Settings one;
    one.values["bands"] = json::array({band});
    bands = bands_of(one);
  }
  const Scenario sc = parse_pair(s.get<std::string>("scenario", "pen-vs-bottle"));
  const double step = s.get<double>("step", 0.5);
  const CvOptions cv = cv_options(s);
  const TemporalCurve curve = temporal_evolution(ds, bands, sc, step, cv, pad_of(ds), jobs_of(s));
  const double onset_s = static_cast<double>(ds.trials.front().movement_onset) / ds.sample_rate;
  const PhaseContrast pc = phase_contrast(curve, onset_s);
  const std::string stem = "temporal_" + sc.name() + "_" + curve.band;
  run.write(stem + ".csv", temporal_curve_csv(curve));
  run.write(stem + ".svg", temporal_curve_svg(curve, onset_s, 0.5));
  run.write_json(stem + ".json", {{"scenario", sc.name()},
                                  {"band", curve.band},
                                  {"time_s", curve.time_s},
                                  {"mean_accuracy", curve.mean_accuracy},
                                  {"std_accuracy", curve.std_accuracy},
                                  {"fold_accuracy", curve.fold_accuracy},
                                  {"onset_s", onset_s},
                                  {"pre_mean", pc.pre_mean},
                                  {"post_mean", pc.post_mean},
                                  {"t", pc.test.t},
                                  {"p", pc.test.p}});
  std::cout << "temporal: " << sc.name() << " " << curve.band << ", " << curve.time_s.size() << " points\n";
  for (std::size_t i = 0; i < curve.time_s.size(); ++i) {
    std::cout << "  t=" << fmt("%.2f", curve.time_s[i]) << "  " << fmt("%.3f", curve.mean_accuracy[i]) << "\n";
  }
  std::cout << "  planning " << fmt("%.3f", pc.pre_mean) << " vs movement " << fmt("%.3f", pc.post_mean)
            << "  p=" << fmt("%.3g", pc.test.p) << "\n";
  return 0;
}

int cmd_importance(const Settings& s, Run& run) {
  std::vector<LinearSvmModel> models;
  std::vector<BandSpec> bands;
  for (const auto& f : bundle_files(s)) {
    const ModelBundle b = bundle_from_json(io::read_json(f));
    if (b.one_vs_rest || b.members.front().kind != FeatureKind::fbcsp) continue;
    const auto& m = b.members.front();
    if (m.bands.size() < 2) continue;
    if (s.has("scenario") && m.scenario.name() != s.get<std::string>("scenario", "")) continue;
    if (m.window.tag() != s.get<std::string>("phase", "planning")) continue;
    if (!bands.empty() && !(bands == m.bands)) throw DataError("bundles use different filter banks");
    bands = m.bands;
    models.push_back(m.svm);
    run.input("model", f);
  }
  if (models.empty()) throw DataError("no broadband binary bundles match");
  const ImportanceProfile p = feature_importance(models, bands);
  run.write("importance.csv", importance_csv(p));
  run.write("importance.svg", importance_svg(p));
  std::cout << "importance: " << models.size() << " models\n";
  for (std::size_t b = 0; b < bands.size(); ++b) {
    std::cout << "  " << band_name(bands[b].name) << "  " << fmt("%.4f", p.band_mean(static_cast<Eigen::Index>(b)))
              << "\n";
  }
  return 0;
}

std::vector<std::size_t> components_of(const Settings& s, std::vector<int> fallback) {
  std::vector<std::size_t> out;
  for (int c : s.get<std::vector<int>>("components", fallback)) {
    if (c < 1) throw ConfigError("component indices start at 1");
    out.push_back(static_cast<std::size_t>(c - 1));
  }
  return out;
}

ModelBundle single_bundle(const Settings& s, Run& run) {
  const auto files = bundle_files(s);
  if (files.size() != 1) throw ConfigError("expected exactly one model bundle, got " + std::to_string(files.size()));
  run.input("model", files.front());
  return bundle_from_json(io::read_json(files.front()));
}

int cmd_trajectory(const Settings& s, Run& run) {
  const Dataset ds = load_data(s, "data", run);
  const ModelBundle b = single_bundle(s, run);
  if (!b.one_vs_rest || b.members.front().kind != FeatureKind::fbcsp) {
    throw ConfigError("trajectory needs a one-vs-rest FBCSP bundle");
  }
  const BandName band = band_from_name(s.get<std::string>("band", "theta"));
  const auto comps = components_of(s, {1, 2, 3});
  const TrialWindow window = b.members.front().window;
  const auto paths = csp_trajectory(ds, b.as_ovr(), band, window, comps, pad_of(ds));
  run.write("trajectory.csv", trajectory_csv(paths, ds.sample_rate));
  run.write("trajectory.svg", trajectory_svg(paths));
  std::cout << "trajectory: " << paths.size() << " classes, " << comps.size() << " components, "
            << (paths.empty() ? 0 : paths.front().path.cols()) << " samples\n";
  return 0;
}

int cmd_topomap(const Settings& s, Run& run) {
  const ModelBundle b = single_bundle(s, run);
  const auto member = s.get<std::size_t>("member", 0);
  if (member >= b.members.size()) throw ConfigError("member index out of range");
  const auto& m = b.members[member];
  const BandName band = band_from_name(s.get<std::string>("band", "theta"));
  const CspModel* csp = nullptr;
  for (const auto& c : m.csp) {
    if (c.band == band) csp = &c;
  }
  if (csp == nullptr) throw ConfigError("bundle has no CSP filters for band " + std::string(band_name(band)));
  ChannelMontage montage = ChannelMontage::standard16();
  if (s.has("data")) montage = load_data(s, "data", run).montage;
  if (montage.size() != csp->channels()) throw DataError("montage does not match the CSP model");
  const Eigen::MatrixXd patterns = csp_patterns(*csp);
  std::cout << "topomap: " << m.scenario.name() << " " << band_name(band) << "\n";
  for (auto c : components_of(s, {1})) {
    if (static_cast<Eigen::Index>(c) >= patterns.cols()) throw ConfigError("CSP component out of range");
    const std::string stem = "topomap_" + m.scenario.name() + "_" + std::string(band_name(band)) + "_c" +
                             std::to_string(c + 1);
    const Eigen::VectorXd pattern = patterns.col(static_cast<Eigen::Index>(c));
    run.write(stem + ".svg", topomap_svg(pattern, montage, stem));
    run.write(stem + ".csv", topomap_csv(pattern, montage));
    std::cout << "  " << stem << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG grasp decoding: FBCSP + linear SVM with an MRCP baseline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  long long jobs = 0;
  std::string out;
  std::vector<std::string> data, test, models, bands, scenarios, phases, channels;
  std::vector<double> c_grid;
  std::vector<int> components;
  std::string band, scenario, phase;
  long long k = 0, test_per_class = 0, trials_per_class = 0, member = 0;
  double step = 0.0;
  bool no_broadband = false;

  std::vector<std::pair<std::string, CLI::Option*>> opts;
  opts.emplace_back("config", app.add_option("--config", config_path, "JSON config file"));
  opts.emplace_back("seed", app.add_option("--seed", seed, "top-level random seed"));
  opts.emplace_back("jobs", app.add_option("--jobs", jobs, "worker threads (default: all processors)"));
  opts.emplace_back("out", app.add_option("--out", out, "output directory"));

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Settings&, Run&);
  };
  const std::vector<Command> commands{
      {"synth", "generate a synthetic dataset", cmd_synth},
      {"split", "hold out a per-class test set", cmd_split},
      {"train", "cross-validate and fit FBCSP bundles", cmd_train},
      {"eval", "score model bundles on a held-out set", cmd_eval},
      {"mrcp", "MRCP baseline: CV, held-out metrics, waveforms", cmd_mrcp},
      {"temporal", "expanding-window accuracy curve", cmd_temporal},
      {"importance", "mean |SVM coefficient| per feature", cmd_importance},
      {"trajectory", "class paths in CSP space", cmd_trajectory},
      {"topomap", "scalp maps of CSP patterns", cmd_topomap},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto add = [&](const char* key, const char* flag, auto& target, const char* help) {
      opts.emplace_back(key, sub->add_option(flag, target, help));
      return opts.back().second;
    };
    const std::string n = c.name;
    if (n == "synth") add("trials_per_class", "--trials-per-class", trials_per_class, "trials per class");
    if (n == "split") add("test_per_class", "--test-per-class", test_per_class, "held-out trials per class");
    if (n != "synth" && n != "importance") add("data", "--data", data, "dataset directory")->expected(1);
    if (n == "mrcp") add("test", "--test", test, "held-out dataset directory")->expected(1);
    if (n == "eval" || n == "importance" || n == "trajectory" || n == "topomap") {
      add("models", "--models", models, "model bundle files or directories")->delimiter(',');
    }
    if (n == "train") {
      add("bands", "--bands", bands, "filter bank bands")->delimiter(',');
      add("phases", "--phases", phases, "task phases")->delimiter(',');
      opts.emplace_back("broadband", sub->add_flag("--no-broadband", no_broadband, "skip the 80-feature bundles"));
    }
    if (n == "train" || n == "mrcp") add("scenarios", "--scenarios", scenarios, "scenarios")->delimiter(',');
    if (n == "train" || n == "mrcp" || n == "temporal") {
      add("k", "--k", k, "cross-validation folds");
      add("c_grid", "--c-grid", c_grid, "SVM C values")->delimiter(',');
    }
    if (n == "mrcp") add("channels", "--channels", channels, "waveform channels")->delimiter(',');
    if (n == "temporal" || n == "trajectory" || n == "topomap") add("band", "--band", band, "band name");
    if (n == "temporal" || n == "importance") add("scenario", "--scenario", scenario, "binary scenario");
    if (n == "temporal") add("step", "--step", step, "endpoint spacing in seconds");
    if (n == "importance") add("phase", "--phase", phase, "phase of the bundles to use");
    if (n == "trajectory" || n == "topomap") {
      add("components", "--components", components, "CSP components, 1-based")->delimiter(',');
    }
    if (n == "topomap") add("member", "--member", member, "bundle member index");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    Settings settings;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
      try {
        settings.values = json::parse(io::read_file(config_path));
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      if (!settings.values.is_object()) throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      if (key == "config") continue;
      if (key == "seed") settings.values[key] = seed;
      else if (key == "jobs") settings.values[key] = jobs;
      else if (key == "out") settings.values[key] = out;
      else if (key == "data") settings.values[key] = data.front();
      else if (key == "test") settings.values[key] = test.front();
      else if (key == "models") settings.values[key] = models;
      else if (key == "bands") settings.values[key] = bands;
      else if (key == "phases") settings.values[key] = phases;
      else if (key == "scenarios") settings.values[key] = scenarios;
      else if (key == "channels") settings.values[key] = channels;
      else if (key == "c_grid") settings.values[key] = c_grid;
      else if (key == "components") settings.values[key] = components;
      else if (key == "band") settings.values[key] = band;
      else if (key == "scenario") settings.values[key] = scenario;
      else if (key == "phase") settings.values[key] = phase;
      else if (key == "k") settings.values[key] = k;
      else if (key == "test_per_class") settings.values[key] = test_per_class;
      else if (key == "trials_per_class") settings.values[key] = trials_per_class;
      else if (key == "member") settings.values[key] = member;
      else if (key == "step") settings.values[key] = step;
      else if (key == "broadband") settings.values[key] = !no_broadband;
    }

    for (const auto& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      Run run(settings.get<std::string>("out", "out"), c.name);
      const int code = c.run(settings, run);
      run.finish(settings);
      return code;
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
