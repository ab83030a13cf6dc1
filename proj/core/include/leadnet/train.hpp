#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "leadnet/dataset.hpp"
#include "leadnet/metrics.hpp"
#include "leadnet/model.hpp"

namespace leadnet {

struct TrainConfig {
    int epochs = 2;
    int batch_size = 4;
    int grad_accum = 4;  // effective batch = batch_size * grad_accum
    double weight_decay = 0.01;
    double lr_encoder = 1e-5;
    double lr_attention = 1e-5;
    double lr_classifier = 1e-3;  // also covers the embedding tables
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    double validate_every = 0.25;  // fraction of an epoch, rounded up in optimizer steps
    bool track_perm = true;
    bool freeze_encoder = false;
    int max_steps = 0;  // when > 0, stop after this many optimizer steps instead of epochs
};

/// Decoupled-weight-decay Adam with per-group learning rates. Decay scales
/// the parameter directly; it never enters the moment estimates. Frozen
/// tensors (requires_grad == false) are skipped entirely.
class AdamW {
public:
    AdamW(const std::vector<NamedParam>& registry, const TrainConfig& cfg);

    /// Apply one update from the accumulated gradients, then zero them.
    /// Throws NumericError when any gradient is non-finite.
    void step(const std::vector<NamedParam>& registry);

    double lr_for(ParamGroup group) const;

    long long step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

private:
    TrainConfig cfg_;
};

/// Self-contained training state: configs, parameter tensors, optimizer
/// moments and the generator state needed to resume bit-exactly.
struct Checkpoint {
    static constexpr int kVersion = 1;

    ModelConfig model_cfg;
    MelConfig mel_cfg;
    TrainConfig train_cfg;
    std::vector<std::string> names;
    std::vector<std::vector<std::int64_t>> shapes;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<double>> opt_m;
    std::vector<std::vector<double>> opt_v;
    long long step = 0;
    std::array<std::uint64_t, 4> rng_state{};
    double best_val_f1 = -1.0;
};

/// Rebuild parameter tensors from checkpoint data (registry order matches
/// ModelParams::init for the stored config).
ModelParams build_params(const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct ValRecord {
    long long step = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double inst_macro_f1 = 0.0;
};

struct TrainResult {
    Checkpoint best;   // highest validation instrument-level macro-F1
    Checkpoint final;  // state when training stopped
    std::vector<double> loss_curve;  // mean cross-entropy per optimizer step
    std::vector<ValRecord> val_history;
};

/// Run the optimization loop: per-sample permutation augmentation (training
/// only), gradient accumulation, quarter-epoch validation, best-checkpoint
/// retention. Deterministic for a fixed seed; pass `resume` to continue a
/// run with an identical trajectory.
TrainResult train(const std::vector<ClipSample>& train_clips,
                  const std::vector<ClipSample>& valid_clips, const ModelConfig& model_cfg,
                  const MelConfig& mel_cfg, const TrainConfig& cfg,
                  const std::string& log_path = "", const Checkpoint* resume = nullptr);

}  // namespace leadnet
