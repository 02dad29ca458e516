// Training orchestration: group-disjoint 5-fold splits, mini-batch BCE +
// Adam training with early stopping on validation pitch accuracy, and
// evaluation against reference tracks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "deepf0/dataset.hpp"
#include "deepf0/errors.hpp"
#include "deepf0/metrics.hpp"
#include "deepf0/model.hpp"
#include "deepf0/pitch.hpp"
#include "deepf0/rng.hpp"

namespace deepf0 {

// ---------------------------------------------------------------------------
// Parallel helper: static stripes, results keyed by index, so the outcome is
// independent of scheduling.

inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Fold planning

enum class Split { kTrain, kVal, kTest };

struct SplitPlan {
  // folds[f] maps group id -> split
  std::vector<std::map<std::string, Split>> folds;
};

// Greedy frame-count balancing: groups are dealt into 5 buckets of roughly
// equal frame mass (largest first onto the lightest bucket); fold f tests on
// bucket f, validates on bucket f+1 and trains on the rest, which lands near
// the 60/20/20 target. No group ever appears in two splits of one fold.
inline SplitPlan make_folds(
    const std::vector<std::pair<std::string, std::size_t>>& group_frames,
    std::uint64_t seed) {
  constexpr std::size_t kFolds = 5;
  if (group_frames.size() < kFolds) {
    throw ConfigError("make_folds: need at least 5 groups, got " +
                      std::to_string(group_frames.size()));
  }

  std::vector<std::size_t> order(group_frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  // stable sort by frame count descending; the shuffle breaks ties
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return group_frames[a].second > group_frames[b].second;
                   });

  std::vector<std::vector<std::size_t>> buckets(kFolds);
  std::vector<std::size_t> load(kFolds, 0);
  for (std::size_t idx : order) {
    std::size_t lightest = 0;
    for (std::size_t b = 1; b < kFolds; ++b) {
      if (load[b] < load[lightest]) lightest = b;
    }
    buckets[lightest].push_back(idx);
    load[lightest] += group_frames[idx].second;
  }

  SplitPlan plan;
  plan.folds.resize(kFolds);
  for (std::size_t f = 0; f < kFolds; ++f) {
    for (std::size_t b = 0; b < kFolds; ++b) {
      Split s = Split::kTrain;
      if (b == f) {
        s = Split::kTest;
      } else if (b == (f + 1) % kFolds) {
        s = Split::kVal;
      }
      for (std::size_t idx : buckets[b]) {
        plan.folds[f][group_frames[idx].first] = s;
      }
    }
  }
  return plan;
}

// One train/val/test partition balanced toward 60/20/20 by frame count;
// every group lands in exactly one split.
inline std::map<std::string, Split> make_single_split(
    const std::vector<std::pair<std::string, std::size_t>>& group_frames,
    std::uint64_t seed) {
  if (group_frames.size() < 3) {
    throw ConfigError("make_single_split: need at least 3 groups, got " +
                      std::to_string(group_frames.size()));
  }
  std::vector<std::size_t> order(group_frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return group_frames[a].second > group_frames[b].second;
                   });

  double total = 0.0;
  for (const auto& g : group_frames) total += static_cast<double>(g.second);
  const double target[3] = {0.6 * total, 0.2 * total, 0.2 * total};
  double assigned[3] = {0.0, 0.0, 0.0};
  constexpr Split kSplits[3] = {Split::kTrain, Split::kVal, Split::kTest};

  std::map<std::string, Split> plan;
  for (std::size_t idx : order) {
    std::size_t best = 0;
    double best_deficit = target[0] - assigned[0];
    for (std::size_t s = 1; s < 3; ++s) {
      const double deficit = target[s] - assigned[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    plan[group_frames[idx].first] = kSplits[best];
    assigned[best] += static_cast<double>(group_frames[idx].second);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Early stopping

// Strict-improvement automaton over a validation-accuracy sequence
// (1-indexed epochs). Stop at the first epoch with no improvement for
// `patience` consecutive epochs; best epoch is the earliest maximum.
struct EarlyStopTracker {
  std::size_t patience;
  std::size_t best_epoch = 0;
  double best_value = -1.0;
  std::size_t epochs_seen = 0;

  explicit EarlyStopTracker(std::size_t patience_epochs)
      : patience(patience_epochs) {}

  // Feed one epoch's accuracy; returns true if this epoch set a new best.
  bool observe(double value) {
    ++epochs_seen;
    if (value > best_value) {
      best_value = value;
      best_epoch = epochs_seen;
      return true;
    }
    return false;
  }

  bool should_stop() const {
    return best_epoch > 0 && epochs_seen - best_epoch >= patience;
  }
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr = 2e-4;
  std::size_t patience_epochs = 32;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 256;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-indexed
  double train_loss = 0.0;
  double val_rpa = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  long optimizer_steps = 0;
};

// A voiced, labeled frame ready for the loss.
struct TrainFrame {
  const std::vector<float>* samples;
  double f0_hz;
};

// Collects voiced labeled frames from the given tracks.
inline std::vector<TrainFrame> collect_voiced_frames(
    const std::vector<const Track*>& tracks) {
  std::vector<TrainFrame> out;
  for (const Track* t : tracks) {
    for (std::size_t i = 0; i < t->frames.frames.size(); ++i) {
      if (t->frames.has_label[i] && t->frames.label_f0[i] > 0.0) {
        out.push_back({&t->frames.frames[i], t->frames.label_f0[i]});
      }
    }
  }
  return out;
}

namespace detail {

// Deterministic per-frame dropout stream independent of thread scheduling.
inline std::uint64_t dropout_seed(std::uint64_t base, std::size_t epoch,
                                  std::size_t frame_index) {
  std::uint64_t h = base ^ 0x6a09e667f3bcc909ULL;
  h ^= (epoch + 1) * 0x9e3779b97f4a7c15ULL;
  h ^= (frame_index + 1) * 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 31;
  return h;
}

// Validation RPA via decode over every voiced labeled frame.
template <typename T>
double validation_rpa(const ModelParams<T>& params,
                      const std::vector<TrainFrame>& val_frames,
                      const CentsGrid& grid, std::size_t threads) {
  if (val_frames.empty()) {
    throw ConfigError("train: validation set has no voiced frames");
  }
  std::vector<double> est(val_frames.size());
  parallel_for(val_frames.size(), threads, [&](std::size_t i) {
    std::vector<T> frame(val_frames[i].samples->begin(),
                         val_frames[i].samples->end());
    est[i] = decode(forward(params, frame), grid).cents;
  });
  EvalPair pair;
  for (std::size_t i = 0; i < val_frames.size(); ++i) {
    pair.ref_cents.push_back(hz_to_cents(val_frames[i].f0_hz));
    pair.ref_voiced.push_back(true);
    pair.est_cents.push_back(est[i]);
  }
  return raw_pitch_accuracy(pair);
}

}  // namespace detail

// Mini-batch BCE training with Adam and best-epoch checkpointing. Gradients
// are computed per frame and reduced in frame order, so results do not
// depend on the thread count.
template <typename T>
TrainHistory train(ModelParams<T>& params,
                   const std::vector<TrainFrame>& train_frames,
                   const std::vector<TrainFrame>& val_frames,
                   const TrainConfig& cfg) {
  if (train_frames.empty()) {
    throw ConfigError("train: training set has no voiced frames");
  }
  if (cfg.max_epochs == 0 || cfg.batch_size == 0) {
    throw ConfigError("train: max_epochs and batch_size must be positive");
  }
  const CentsGrid grid;
  AdamConfig<T> adam_cfg;
  adam_cfg.lr = static_cast<T>(cfg.lr);
  ModelAdam<T> opt(params, adam_cfg);

  Rng shuffle_rng(cfg.seed);
  EarlyStopTracker stopper(cfg.patience_epochs);
  TrainHistory history;
  ModelParams<T> best_params = params;

  std::vector<std::size_t> indices(train_frames.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  // Targets are fixed per frame; build them once.
  std::vector<std::vector<T>> targets(train_frames.size());
  for (std::size_t i = 0; i < train_frames.size(); ++i) {
    targets[i] = make_target<T>(train_frames[i].f0_hz, grid);
  }

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(indices);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < indices.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(start + cfg.batch_size, indices.size());
      const std::size_t bsize = end - start;

      std::vector<ModelGrads<T>> frame_grads(bsize, ModelGrads<T>(params));
      std::vector<double> frame_loss(bsize, 0.0);
      parallel_for(bsize, cfg.threads, [&](std::size_t b) {
        const std::size_t fi = indices[start + b];
        const TrainFrame& tf = train_frames[fi];
        std::vector<T> frame(tf.samples->begin(), tf.samples->end());
        ForwardCache<T> cache;
        std::optional<Rng> mask_rng;
        Rng* rng_ptr = nullptr;
        if (params.config.use_dropout) {
          mask_rng.emplace(detail::dropout_seed(cfg.seed, epoch, fi));
          rng_ptr = &*mask_rng;
        }
        std::vector<T> probs = forward_cached(params, frame, cache, rng_ptr);
        frame_loss[b] = static_cast<double>(bce_loss(probs, targets[fi]));
        std::vector<T> grad = bce_loss_grad(probs, targets[fi]);
        backward(params, cache, grad, frame_grads[b]);
      });

      // Ordered reduction, then mean over the batch.
      ModelGrads<T>& batch_grads = frame_grads[0];
      for (std::size_t b = 1; b < bsize; ++b) {
        add_grads(batch_grads, frame_grads[b]);
      }
      scale_grads(batch_grads, T(1) / static_cast<T>(bsize));

      double batch_loss = 0.0;
      for (double l : frame_loss) batch_loss += l;
      epoch_loss += batch_loss;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      model_adam_step(params, batch_grads, opt);
    }
    epoch_loss /= static_cast<double>(indices.size());

    const double val_rpa =
        detail::validation_rpa(params, val_frames, grid, cfg.threads);
    history.epochs.push_back({epoch, epoch_loss, val_rpa});
    if (stopper.observe(val_rpa)) {
      best_params = params;
    }
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch;
  history.optimizer_steps = opt.step_count;
  params = std::move(best_params);  // roll back to the best checkpoint
  return history;
}

// ---------------------------------------------------------------------------
// Evaluation

struct TrackMetrics {
  std::string name;
  double rpa = 0.0;
  double rca = 0.0;
  std::size_t voiced_frames = 0;
};

struct FrameEstimate {
  double time_s = 0.0;
  double f0_hz = 0.0;
  double confidence = 0.0;
};

struct EvalResult {
  double rpa = 0.0;  // pooled over all voiced frames
  double rca = 0.0;
  std::vector<TrackMetrics> per_track;
  std::vector<std::vector<FrameEstimate>> estimates;  // parallel to tracks

  double rpa_mean() const { return mean([](const TrackMetrics& m) { return m.rpa; }); }
  double rpa_std() const { return stddev([](const TrackMetrics& m) { return m.rpa; }); }
  double rca_mean() const { return mean([](const TrackMetrics& m) { return m.rca; }); }
  double rca_std() const { return stddev([](const TrackMetrics& m) { return m.rca; }); }

 private:
  template <typename F>
  double mean(F&& get) const {
    if (per_track.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& m : per_track) acc += get(m);
    return acc / static_cast<double>(per_track.size());
  }
  template <typename F>
  double stddev(F&& get) const {
    if (per_track.size() < 2) return 0.0;
    const double mu = mean(get);
    double acc = 0.0;
    for (const auto& m : per_track) {
      const double d = get(m) - mu;
      acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(per_track.size()));
  }
};

// Runs forward + decode on every frame of every track and scores voiced
// reference frames. Tracks without voiced frames carry no per-track entry.
template <typename T>
EvalResult evaluate(const ModelParams<T>& params,
                    const std::vector<const Track*>& tracks,
                    std::size_t threads = 1) {
  const CentsGrid grid;
  EvalResult result;
  EvalPair pooled;

  for (const Track* track : tracks) {
    const FrameSeries& fs = track->frames;
    std::vector<FrameEstimate> ests(fs.frames.size());
    parallel_for(fs.frames.size(), threads, [&](std::size_t i) {
      std::vector<T> frame(fs.frames[i].begin(), fs.frames[i].end());
      PitchEstimate pe = decode(forward(params, frame), grid);
      ests[i] = {fs.centers_s[i], pe.hz, pe.confidence};
    });

    EvalPair pair;
    for (std::size_t i = 0; i < fs.frames.size(); ++i) {
      if (!fs.has_label[i]) continue;
      const bool voiced = fs.label_f0[i] > 0.0;
      pair.ref_voiced.push_back(voiced);
      pair.ref_cents.push_back(voiced ? hz_to_cents(fs.label_f0[i]) : 0.0);
      pair.est_cents.push_back(hz_to_cents(ests[i].f0_hz));
      pooled.ref_voiced.push_back(voiced);
      pooled.ref_cents.push_back(pair.ref_cents.back());
      pooled.est_cents.push_back(pair.est_cents.back());
    }
    result.estimates.push_back(std::move(ests));

    const std::size_t voiced_count = static_cast<std::size_t>(
        std::count(pair.ref_voiced.begin(), pair.ref_voiced.end(), true));
    if (voiced_count > 0) {
      result.per_track.push_back({track->name, raw_pitch_accuracy(pair),
                                  raw_chroma_accuracy(pair), voiced_count});
    }
  }

  if (pooled.ref_cents.empty() ||
      std::count(pooled.ref_voiced.begin(), pooled.ref_voiced.end(), true) ==
          0) {
    throw DomainError("evaluate: no voiced labeled frames in the test set");
  }
  result.rpa = raw_pitch_accuracy(pooled);
  result.rca = raw_chroma_accuracy(pooled);
  return result;
}

// History sidecar: epoch, train_loss, val_rpa.
inline void write_history_csv(const TrainHistory& history,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("history: cannot open for writing: " + path);
  os << "epoch,train_loss,val_rpa\n";
  char buf[96];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", e.epoch, e.train_loss,
                  e.val_rpa);
    os << buf;
  }
}

}  // namespace deepf0
