// deepf0 command-line tool: synthesis of oracle datasets, training,
// prediction, evaluation, noise mixing and architecture inspection.
//
// Exit codes: 0 success, 2 config error, 3 data/format error,
// 4 numeric/training error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "deepf0/config_file.hpp"
#include "deepf0/dataset.hpp"
#include "deepf0/metrics.hpp"
#include "deepf0/model.hpp"
#include "deepf0/noise.hpp"
#include "deepf0/pitch.hpp"
#include "deepf0/resample.hpp"
#include "deepf0/synth.hpp"
#include "deepf0/trainer.hpp"
#include "deepf0/weights_io.hpp"

namespace {

using namespace deepf0;
namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string config_path;
  std::size_t threads = 0;  // 0 = hardware concurrency

  std::size_t effective_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "deterministic seed");
  cmd->add_option("--config", opts.config_path, "key=value config file");
  cmd->add_option("--threads", opts.threads,
                  "worker threads (0 = all cores)");
}

// Effective model + training configuration: defaults, then config file.
std::pair<DeepF0Config, TrainConfig> resolve_config(const CommonOpts& opts) {
  DeepF0Config model;
  TrainConfig train;
  if (!opts.config_path.empty()) {
    apply_config(load_config_file(opts.config_path), model, train);
  }
  model.validate();
  train.seed = opts.seed;
  train.threads = opts.effective_threads();
  return {model, train};
}

json config_snapshot(const DeepF0Config& m, const TrainConfig& t) {
  json j;
  j["frame_length"] = m.frame_length;
  j["channels"] = m.channels;
  j["first_kernel"] = m.first_kernel;
  j["block_kernel"] = m.block_kernel;
  j["dilations"] = m.dilations;
  j["pool"] = m.pool;
  j["bins"] = m.bins;
  j["use_residual"] = m.use_residual;
  j["use_dropout"] = m.use_dropout;
  j["dropout_rate"] = m.dropout_rate;
  j["lr"] = t.lr;
  j["patience_epochs"] = t.patience_epochs;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  return j;
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, std::uint64_t seed)
      : command_(std::move(command)),
        seed_(seed),
        start_(std::chrono::steady_clock::now()) {}

  void set_config(json snapshot) { config_ = std::move(snapshot); }
  void add_input(const std::string& p) { inputs_.push_back(p); }
  void add_output(const std::string& p) { outputs_.push_back(p); }
  void add_note(const std::string& key, json value) { notes_[key] = value; }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command_;
    j["tool_version"] = kToolVersion;
    j["seed"] = seed_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    for (auto it = notes_.begin(); it != notes_.end(); ++it) {
      j[it.key()] = it.value();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    j["wall_clock_s"] = wall;
    std::ofstream os(path);
    if (!os) throw FormatError("manifest: cannot write " + path.string());
    os << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  json config_ = json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  json notes_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

// Write-to-temp-then-rename so partially written outputs never appear.
template <typename Fn>
void write_atomic(const fs::path& path, Fn&& writer) {
  fs::path tmp = path;
  tmp += ".tmp";
  writer(tmp.string());
  fs::rename(tmp, path);
}

std::vector<AudioClip> load_noise_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ConfigError("noise dir has no .wav files: " + dir);
  }
  std::vector<AudioClip> clips;
  for (const auto& f : files) clips.push_back(resample_16k(load_wav(f.string())));
  return clips;
}

ChannelSelect parse_channel(const std::string& name) {
  if (name == "mix") return ChannelSelect::kMix;
  if (name == "left") return ChannelSelect::kLeft;
  if (name == "right") return ChannelSelect::kRight;
  throw ConfigError("unknown channel selection '" + name + "'");
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const CommonOpts& opts, const std::string& spec_path,
              const std::string& out_dir) {
  ManifestWriter manifest("synth", opts.seed);
  manifest.add_input(spec_path);

  std::ifstream is(spec_path);
  if (!is) throw ConfigError("synth: cannot open spec: " + spec_path);
  const auto specs = parse_synth_spec(is, spec_path);
  if (specs.empty()) throw ConfigError("synth: spec lists no tracks");

  fs::create_directories(out_dir);
  std::vector<std::pair<std::string, std::string>> file_groups;
  std::vector<std::string> groups;
  for (const auto& spec : specs) {
    auto [clip, labels] = synth_track(spec);
    write_track(out_dir, spec.name, clip, labels);
    file_groups.emplace_back(spec.name, spec.group);
    if (std::find(groups.begin(), groups.end(), spec.group) == groups.end()) {
      groups.push_back(spec.group);
    }
    manifest.add_output((fs::path(out_dir) / (spec.name + ".wav")).string());
    manifest.add_output(
        (fs::path(out_dir) / (spec.name + ".f0.csv")).string());
  }
  write_groups_csv(out_dir, file_groups);
  manifest.add_output((fs::path(out_dir) / "groups.csv").string());
  manifest.add_note("groups", groups);
  manifest.write(fs::path(out_dir) / "manifest.json");
  std::cout << "synth: wrote " << specs.size() << " tracks, "
            << groups.size() << " groups to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const CommonOpts& opts, const std::string& weights_path,
                const std::string& audio_path, const std::string& out_csv,
                const std::string& channel) {
  ManifestWriter manifest("predict", opts.seed);
  manifest.add_input(weights_path);
  manifest.add_input(audio_path);

  ModelParams<float> params = load_weights(weights_path);
  AudioClip clip =
      resample_16k(load_wav(audio_path, parse_channel(channel)));
  FrameSeries series = frame_clip(clip);

  const CentsGrid grid;
  std::vector<PitchEstimate> estimates(series.frames.size());
  parallel_for(series.frames.size(), opts.effective_threads(),
               [&](std::size_t i) {
                 estimates[i] = decode(forward(params, series.frames[i]), grid);
               });

  write_atomic(out_csv, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    if (!os) throw FormatError("predict: cannot write " + out_csv);
    os << "time_sec,f0_hz,confidence\n";
    char buf[96];
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", series.centers_s[i],
                    estimates[i].hz, estimates[i].confidence);
      os << buf;
    }
  });
  manifest.add_output(out_csv);
  manifest.set_config(config_snapshot(params.config, TrainConfig{}));
  manifest.write(out_csv + ".manifest.json");
  std::cout << "predict: " << estimates.size() << " frames -> " << out_csv
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

std::vector<const Track*> tracks_in_split(const Dataset& ds,
                                          const std::map<std::string, Split>& fold,
                                          Split which) {
  std::vector<const Track*> out;
  for (const auto& t : ds.tracks) {
    if (fold.at(t.group) == which) out.push_back(&t);
  }
  return out;
}

std::vector<std::pair<std::string, std::size_t>> group_frame_counts(
    const Dataset& ds) {
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (const auto& t : ds.tracks) {
    auto it = std::find_if(counts.begin(), counts.end(),
                           [&](const auto& g) { return g.first == t.group; });
    if (it == counts.end()) {
      counts.emplace_back(t.group, t.frames.frames.size());
    } else {
      it->second += t.frames.frames.size();
    }
  }
  return counts;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir,
              const std::string& out_dir, std::size_t folds,
              const std::vector<double>& snr_levels,
              const std::string& noise_dir, const std::string& channel) {
  auto [model_cfg, train_cfg] = resolve_config(opts);
  ManifestWriter manifest("train", opts.seed);
  manifest.add_input(data_dir);
  manifest.set_config(config_snapshot(model_cfg, train_cfg));

  Dataset ds = load_dataset(data_dir, parse_channel(channel));
  if (!snr_levels.empty()) {
    if (noise_dir.empty()) {
      throw ConfigError("train: --snr requires --noise-dir");
    }
    auto noise = load_noise_dir(noise_dir);
    manifest.add_input(noise_dir);
    // One SNR trains at that level; several pool levels across tracks.
    Rng pick(opts.seed ^ 0x5caff01dULL);
    for (std::size_t i = 0; i < ds.tracks.size(); ++i) {
      const double snr_db =
          snr_levels[snr_levels.size() == 1
                         ? 0
                         : static_cast<std::size_t>(pick.below(snr_levels.size()))];
      SnrSpec spec{snr_db, opts.seed + i};
      Track& t = ds.tracks[i];
      AudioClip mixed;
      mixed.sample_rate = t.clip.sample_rate;
      mixed.samples =
          mix_at_snr(t.clip.samples, noise[i % noise.size()].samples, spec);
      t.clip = std::move(mixed);
    }
  }
  frame_tracks(ds);

  const auto counts = group_frame_counts(ds);
  if (folds != 1 && folds != 5) {
    throw ConfigError("train: --folds must be 1 or 5");
  }
  if (folds == 5 && counts.size() < 5) {
    throw ConfigError("train: 5-fold split needs at least 5 groups, got " +
                      std::to_string(counts.size()));
  }

  std::vector<std::map<std::string, Split>> fold_plans;
  if (folds == 5) {
    fold_plans = make_folds(counts, opts.seed).folds;
  } else {
    fold_plans.push_back(make_single_split(counts, opts.seed));
  }

  fs::create_directories(out_dir);
  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  summary << "fold,epochs,best_epoch,stopped_early,best_val_rpa,test_rpa,"
             "test_rca\n";

  for (std::size_t f = 0; f < fold_plans.size(); ++f) {
    const auto& fold = fold_plans[f];
    auto train_tracks = tracks_in_split(ds, fold, Split::kTrain);
    auto val_tracks = tracks_in_split(ds, fold, Split::kVal);
    auto test_tracks = tracks_in_split(ds, fold, Split::kTest);

    auto train_frames = collect_voiced_frames(train_tracks);
    auto val_frames = collect_voiced_frames(val_tracks);

    TrainConfig fold_cfg = train_cfg;
    fold_cfg.seed = opts.seed + f;
    ModelParams<float> params = build<float>(model_cfg, fold_cfg.seed);
    TrainHistory history = train(params, train_frames, val_frames, fold_cfg);
    EvalResult test = evaluate(params, test_tracks, fold_cfg.threads);

    const std::string weights_name = "fold" + std::to_string(f) + ".df0w";
    write_atomic(fs::path(out_dir) / weights_name,
                 [&](const std::string& tmp) { save_weights(params, tmp); });
    const std::string history_name =
        "fold" + std::to_string(f) + "_history.csv";
    write_history_csv(history, (fs::path(out_dir) / history_name).string());
    manifest.add_output((fs::path(out_dir) / weights_name).string());
    manifest.add_output((fs::path(out_dir) / history_name).string());

    const double best_val =
        history.best_epoch > 0
            ? history.epochs[history.best_epoch - 1].val_rpa
            : 0.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%d,%.6f,%.6f,%.6f\n", f,
                  history.epochs.size(), history.best_epoch,
                  history.stopped_early ? 1 : 0, best_val, test.rpa, test.rca);
    summary << buf;
    std::cout << "fold " << f << ": epochs=" << history.epochs.size()
              << " best_epoch=" << history.best_epoch
              << " stopped_early=" << (history.stopped_early ? "yes" : "no")
              << " val_rpa=" << best_val << " test_rpa=" << test.rpa
              << " test_rca=" << test.rca << "\n";
  }
  summary.close();
  manifest.add_output((fs::path(out_dir) / "summary.csv").string());
  manifest.write(fs::path(out_dir) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const CommonOpts& opts, const std::string& weights_path,
             const std::string& data_dir, const std::string& out_dir,
             const std::vector<double>& snr_levels,
             const std::string& noise_dir, bool oracle,
             const std::string& channel) {
  ManifestWriter manifest("eval", opts.seed);
  manifest.add_input(data_dir);

  Dataset ds = load_dataset(data_dir, parse_channel(channel));

  double measured_snr_mean = 0.0;
  bool mixed_inputs = false;
  if (!snr_levels.empty()) {
    if (snr_levels.size() != 1) {
      throw ConfigError("eval: exactly one --snr level");
    }
    if (noise_dir.empty()) throw ConfigError("eval: --snr requires --noise-dir");
    auto noise = load_noise_dir(noise_dir);
    manifest.add_input(noise_dir);
    double acc = 0.0;
    for (std::size_t i = 0; i < ds.tracks.size(); ++i) {
      Track& t = ds.tracks[i];
      SnrSpec spec{snr_levels[0], opts.seed + i};
      std::vector<float> mixed =
          mix_at_snr(t.clip.samples, noise[i % noise.size()].samples, spec);
      acc += measure_snr(t.clip.samples, mixed);
      t.clip.samples = std::move(mixed);
    }
    measured_snr_mean = acc / static_cast<double>(ds.tracks.size());
    mixed_inputs = true;
    std::cout << "eval: measured SNR " << measured_snr_mean << " dB (target "
              << snr_levels[0] << " dB)\n";
    manifest.add_note("measured_snr_db", measured_snr_mean);
  }
  frame_tracks(ds);

  std::vector<const Track*> tracks;
  for (const auto& t : ds.tracks) tracks.push_back(&t);

  EvalResult result;
  std::string model_name;
  if (oracle) {
    // Plumbing check: the estimate is the reference itself.
    model_name = "oracle";
    EvalPair pooled;
    for (const auto* t : tracks) {
      EvalPair pair;
      for (std::size_t i = 0; i < t->frames.frames.size(); ++i) {
        if (!t->frames.has_label[i]) continue;
        const bool voiced = t->frames.label_f0[i] > 0.0;
        const double cents =
            voiced ? hz_to_cents(t->frames.label_f0[i]) : 0.0;
        pair.ref_voiced.push_back(voiced);
        pair.ref_cents.push_back(cents);
        pair.est_cents.push_back(cents);
        pooled.ref_voiced.push_back(voiced);
        pooled.ref_cents.push_back(cents);
        pooled.est_cents.push_back(cents);
      }
      const auto voiced_count = static_cast<std::size_t>(std::count(
          pair.ref_voiced.begin(), pair.ref_voiced.end(), true));
      if (voiced_count > 0) {
        result.per_track.push_back({t->name, raw_pitch_accuracy(pair),
                                    raw_chroma_accuracy(pair), voiced_count});
      }
    }
    result.rpa = raw_pitch_accuracy(pooled);
    result.rca = raw_chroma_accuracy(pooled);
  } else {
    manifest.add_input(weights_path);
    ModelParams<float> params = load_weights(weights_path);
    manifest.set_config(config_snapshot(params.config, TrainConfig{}));
    model_name = fs::path(weights_path).filename().string();
    result = evaluate(params, tracks, opts.effective_threads());
  }

  const std::string dataset_name = fs::path(data_dir).filename().string();
  std::cout << "model=" << model_name << " dataset=" << dataset_name
            << (mixed_inputs ? " (noisy)" : " (clean)") << "\n";
  for (const auto& m : result.per_track) {
    std::printf("  %-24s rpa=%.4f rca=%.4f (%zu voiced frames)\n",
                m.name.c_str(), m.rpa, m.rca, m.voiced_frames);
  }
  std::printf("  RPA %.4f +/- %.4f  RCA %.4f +/- %.4f  (pooled %.4f / %.4f)\n",
              result.rpa_mean(), result.rpa_std(), result.rca_mean(),
              result.rca_std(), result.rpa, result.rca);

  fs::create_directories(out_dir);
  const fs::path report = fs::path(out_dir) / "report.csv";
  write_atomic(report, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << "model,dataset,rpa_mean,rpa_std,rca_mean,rca_std\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f\n",
                  model_name.c_str(), dataset_name.c_str(), result.rpa_mean(),
                  result.rpa_std(), result.rca_mean(), result.rca_std());
    os << buf;
  });
  const fs::path tracks_csv = fs::path(out_dir) / "report_tracks.csv";
  write_atomic(tracks_csv, [&](const std::string& tmp) {
    std::ofstream os(tmp);
    os << "track,rpa,rca,voiced_frames\n";
    char buf[192];
    for (const auto& m : result.per_track) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%zu\n", m.name.c_str(),
                    m.rpa, m.rca, m.voiced_frames);
      os << buf;
    }
  });
  manifest.add_output(report.string());
  manifest.add_output(tracks_csv.string());
  manifest.write(fs::path(out_dir) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// inspect

int cmd_inspect(const CommonOpts& opts, const std::string& out_dir) {
  auto [model_cfg, train_cfg] = resolve_config(opts);

  std::ostringstream report;
  report << "frame_length " << model_cfg.frame_length << ", channels "
         << model_cfg.channels << ", bins " << model_cfg.bins << "\n";
  report << "layer shapes:\n";
  auto conv_line = [&](const std::string& name, std::size_t ic, std::size_t oc,
                       std::size_t k, std::size_t d) {
    report << "  " << name << ": v(" << oc << "," << ic << "," << k << ") g("
           << oc << ") b(" << oc << ") dilation=" << d << "\n";
  };
  conv_line("first_conv", 1, model_cfg.channels, model_cfg.first_kernel, 1);
  for (std::size_t i = 0; i < model_cfg.dilations.size(); ++i) {
    conv_line("block" + std::to_string(i) + ".dilated", model_cfg.channels,
              model_cfg.channels, model_cfg.block_kernel,
              model_cfg.dilations[i]);
    conv_line("block" + std::to_string(i) + ".pointwise", model_cfg.channels,
              model_cfg.channels, 1, 1);
  }
  report << "  dense: W(" << model_cfg.bins << "," << model_cfg.dense_in()
         << ") b(" << model_cfg.bins << ")\n";

  const std::size_t params = param_count(model_cfg);
  const std::size_t rf = receptive_field(model_cfg);
  constexpr double kReferenceParams = 22.2e6;
  const double reduction =
      100.0 * (kReferenceParams - static_cast<double>(params)) /
      kReferenceParams;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "total parameters: %zu\nreceptive field: %zu samples\n"
                "parameter reduction vs 22.2M baseline: %.1f%%\n",
                params, rf, reduction);
  report << buf;

  std::cout << report.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "inspect.txt");
    os << report.str();
    ManifestWriter manifest("inspect", opts.seed);
    manifest.set_config(config_snapshot(model_cfg, train_cfg));
    manifest.add_output((fs::path(out_dir) / "inspect.txt").string());
    manifest.write(fs::path(out_dir) / "manifest.json");
  }

  if (rf > model_cfg.frame_length) {
    std::cerr << "inspect: receptive field " << rf
              << " exceeds frame length " << model_cfg.frame_length << "\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(const CommonOpts& opts, const std::string& data_dir,
               const std::string& out_dir, std::size_t epochs,
               const std::string& channel) {
  auto [base_cfg, train_cfg] = resolve_config(opts);
  // Equal epoch budget for every variant: early stopping disabled by a
  // patience at least as long as the budget.
  train_cfg.max_epochs = epochs;
  train_cfg.patience_epochs = std::max(train_cfg.patience_epochs, epochs);

  ManifestWriter manifest("ablate", opts.seed);
  manifest.add_input(data_dir);
  manifest.set_config(config_snapshot(base_cfg, train_cfg));

  Dataset ds = load_dataset(data_dir, parse_channel(channel));
  frame_tracks(ds);
  const auto counts = group_frame_counts(ds);
  const auto split = make_single_split(counts, opts.seed);

  auto train_tracks = tracks_in_split(ds, split, Split::kTrain);
  auto val_tracks = tracks_in_split(ds, split, Split::kVal);
  auto test_tracks = tracks_in_split(ds, split, Split::kTest);
  auto train_frames = collect_voiced_frames(train_tracks);
  auto val_frames = collect_voiced_frames(val_tracks);

  auto run_variant = [&](const DeepF0Config& cfg) {
    ModelParams<float> params = build<float>(cfg, opts.seed);
    TrainConfig cfg_t = train_cfg;
    train(params, train_frames, val_frames, cfg_t);
    return evaluate(params, test_tracks, train_cfg.threads);
  };

  const std::vector<std::vector<std::size_t>> dilation_sets = {
      {1}, {1, 2}, {1, 2, 4}, {1, 2, 4, 8}, {1, 2, 4, 8, 16}};

  fs::create_directories(out_dir);
  std::ofstream sweep(fs::path(out_dir) / "dilation_sweep.csv");
  sweep << "dilations,rpa,rca\n";
  double baseline_rpa = 0.0, baseline_rca = 0.0;
  for (const auto& dset : dilation_sets) {
    DeepF0Config cfg = base_cfg;
    cfg.dilations = dset;
    EvalResult r = run_variant(cfg);
    std::string name;
    for (std::size_t i = 0; i < dset.size(); ++i) {
      name += (i ? "-" : "") + std::to_string(dset[i]);
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", name.c_str(), r.rpa,
                  r.rca);
    sweep << buf;
    std::cout << "dilations [" << name << "]: rpa=" << r.rpa
              << " rca=" << r.rca << "\n";
    if (dset == base_cfg.dilations) {
      baseline_rpa = r.rpa;
      baseline_rca = r.rca;
    }
  }
  sweep.close();

  std::ofstream table(fs::path(out_dir) / "ablation.csv");
  table << "variant,rpa,rca\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "baseline,%.6f,%.6f\n", baseline_rpa,
                baseline_rca);
  table << buf;

  DeepF0Config no_res = base_cfg;
  no_res.use_residual = false;
  EvalResult r_nores = run_variant(no_res);
  std::snprintf(buf, sizeof(buf), "no_residual,%.6f,%.6f\n", r_nores.rpa,
                r_nores.rca);
  table << buf;
  std::cout << "no_residual: rpa=" << r_nores.rpa << " rca=" << r_nores.rca
            << "\n";

  DeepF0Config with_dropout = base_cfg;
  with_dropout.use_dropout = true;
  EvalResult r_drop = run_variant(with_dropout);
  std::snprintf(buf, sizeof(buf), "dropout,%.6f,%.6f\n", r_drop.rpa,
                r_drop.rca);
  table << buf;
  std::cout << "dropout: rpa=" << r_drop.rpa << " rca=" << r_drop.rca << "\n";
  table.close();

  manifest.add_output((fs::path(out_dir) / "dilation_sweep.csv").string());
  manifest.add_output((fs::path(out_dir) / "ablation.csv").string());
  manifest.write(fs::path(out_dir) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// mix-noise

int cmd_mix_noise(const CommonOpts& opts, const std::string& signal_path,
                  const std::string& noise_path, double snr_db,
                  const std::string& out_wav) {
  ManifestWriter manifest("mix-noise", opts.seed);
  manifest.add_input(signal_path);
  manifest.add_input(noise_path);

  AudioClip signal = resample_16k(load_wav(signal_path));
  AudioClip noise = resample_16k(load_wav(noise_path));
  SnrSpec spec{snr_db, opts.seed};
  AudioClip mixed;
  mixed.sample_rate = signal.sample_rate;
  mixed.samples = mix_at_snr(signal.samples, noise.samples, spec);
  const double measured = measure_snr(signal.samples, mixed.samples);
  std::cout << "mix-noise: target " << snr_db << " dB, measured " << measured
            << " dB\n";

  std::size_t clipped = 0;
  write_atomic(out_wav, [&](const std::string& tmp) {
    clipped = save_wav_pcm16(mixed, tmp);
  });
  if (clipped > 0) {
    std::cerr << "mix-noise: warning: " << clipped
              << " samples clipped on export\n";
  }
  manifest.add_output(out_wav);
  manifest.add_note("target_snr_db", snr_db);
  manifest.add_note("measured_snr_db", measured);
  manifest.add_note("clipped_samples", clipped);
  manifest.write(out_wav + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepF0 pitch estimation pipeline"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonOpts opts;

  // synth
  auto* synth = app.add_subcommand("synth", "generate an oracle dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "track spec CSV")->required();
  synth->add_option("--out", synth_out, "output dataset dir")->required();
  add_common(synth, opts);

  // predict
  auto* predict = app.add_subcommand("predict", "estimate pitch from audio");
  std::string pr_weights, pr_audio, pr_out, pr_channel = "mix";
  predict->add_option("--weights", pr_weights)->required();
  predict->add_option("--audio", pr_audio)->required();
  predict->add_option("--out", pr_out, "output CSV")->required();
  predict->add_option("--channel", pr_channel, "mix|left|right");
  add_common(predict, opts);

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a dataset dir");
  std::string tr_data, tr_out, tr_noise_dir, tr_channel = "mix";
  std::size_t tr_folds = 1;
  std::vector<double> tr_snr;
  train_cmd->add_option("--data", tr_data)->required();
  train_cmd->add_option("--out", tr_out)->required();
  train_cmd->add_option("--folds", tr_folds, "1 (single split) or 5");
  train_cmd->add_option("--snr", tr_snr,
                        "train on noise-corrupted audio at these dB levels");
  train_cmd->add_option("--noise-dir", tr_noise_dir);
  train_cmd->add_option("--channel", tr_channel, "mix|left|right");
  add_common(train_cmd, opts);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a model on a dataset");
  std::string ev_weights, ev_data, ev_out, ev_noise_dir, ev_channel = "mix";
  std::vector<double> ev_snr;
  bool ev_oracle = false;
  eval_cmd->add_option("--weights", ev_weights);
  eval_cmd->add_option("--data", ev_data)->required();
  eval_cmd->add_option("--out", ev_out)->required();
  eval_cmd->add_option("--snr", ev_snr, "corrupt inputs at this dB level");
  eval_cmd->add_option("--noise-dir", ev_noise_dir);
  eval_cmd->add_flag("--oracle", ev_oracle,
                     "score the reference against itself (plumbing check)");
  eval_cmd->add_option("--channel", ev_channel, "mix|left|right");
  add_common(eval_cmd, opts);

  // inspect
  auto* inspect = app.add_subcommand("inspect", "report the architecture");
  std::string in_out;
  inspect->add_option("--out", in_out, "optional report dir");
  add_common(inspect, opts);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "dilation sweep and toggles");
  std::string ab_data, ab_out, ab_channel = "mix";
  std::size_t ab_epochs = 8;
  ablate->add_option("--data", ab_data)->required();
  ablate->add_option("--out", ab_out)->required();
  ablate->add_option("--epochs", ab_epochs, "fixed epoch budget per variant");
  ablate->add_option("--channel", ab_channel, "mix|left|right");
  add_common(ablate, opts);

  // mix-noise
  auto* mix = app.add_subcommand("mix-noise", "mix noise at an exact SNR");
  std::string mx_signal, mx_noise, mx_out;
  double mx_snr = 0.0;
  mix->add_option("--signal", mx_signal)->required();
  mix->add_option("--noise", mx_noise)->required();
  mix->add_option("--snr", mx_snr)->required();
  mix->add_option("--out", mx_out)->required();
  add_common(mix, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts, synth_spec, synth_out);
    if (predict->parsed()) {
      return cmd_predict(opts, pr_weights, pr_audio, pr_out, pr_channel);
    }
    if (train_cmd->parsed()) {
      return cmd_train(opts, tr_data, tr_out, tr_folds, tr_snr, tr_noise_dir,
                       tr_channel);
    }
    if (eval_cmd->parsed()) {
      if (!ev_oracle && ev_weights.empty()) {
        throw ConfigError("eval: --weights required unless --oracle");
      }
      return cmd_eval(opts, ev_weights, ev_data, ev_out, ev_snr, ev_noise_dir,
                      ev_oracle, ev_channel);
    }
    if (inspect->parsed()) return cmd_inspect(opts, in_out);
    if (ablate->parsed()) {
      return cmd_ablate(opts, ab_data, ab_out, ab_epochs, ab_channel);
    }
    if (mix->parsed()) {
      return cmd_mix_noise(opts, mx_signal, mx_noise, mx_snr, mx_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
