#pragma once

#include "saber/augment.hpp"
#include "saber/flow.hpp"
#include "saber/synth.hpp"

#include <functional>
#include <optional>

namespace saber {

struct TrainConfig {
  int k_min = 0;
  int k_max = 3;
  RatioMixture ratio_mixture = RatioMixture::standard();
  AugmentConfig augment;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global-norm clip, 0 disables
  int batch_size = 4;
  int steps = 100;
  std::uint64_t seed = 0;

  std::vector<ShapeKind> mask_types{kAllShapeKinds.begin(), kAllShapeKinds.end()};
  std::optional<double> fixed_ratio;
  bool disable_augment = false;
  bool disable_attn_mask = false;
  double caption_dropout = 0.1;
  /// Reuse the step-0 batch seeds at every step.
  bool fixed_batch = false;
  /// Re-check every batch (exact counts, containment, clean references) before use.
  bool validate_batches = false;

  CodecConfig codec;
  ModelConfig model;
  std::uint64_t text_seed = 7;

  void validate() const;
};

/// A training example plus the pixel-space material it was built from.
struct BuiltExample {
  TrainingExample example;
  std::vector<int> frame_indices;
  std::vector<int> target_counts;
  std::vector<ShapeKind> mask_kinds;
  std::vector<MaskedReference> references;
  std::string caption;  // empty when dropped
};

/// Training-time collaborators shared by every example.
struct TrainContext {
  VideoCodec codec;
  TextEncoder text;

  explicit TrainContext(const TrainConfig& cfg) : codec(cfg.codec), text(cfg.model.text_dim, cfg.text_seed) {}
};

BuiltExample build_training_example(const SyntheticSample& sample, const TrainConfig& cfg,
                                    const TrainContext& ctx, Rng& rng);

/// Throws ContractViolation on the first broken batch invariant.
void validate_example(const BuiltExample& built, const TrainConfig& cfg, const TrainContext& ctx);

struct LossRecord {
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  ToyDiT<float> model;
  std::vector<LossRecord> trace;
};

using StepCallback = std::function<void(const LossRecord&)>;

/// AdamW over fm_loss; throws NonFiniteLoss naming the step and batch seed.
TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset,
                  const StepCallback& on_step = {});
/// Continue from existing parameters (optimizer moments restart at zero).
TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset, ToyDiT<float> model,
                  const StepCallback& on_step = {});

/// Mean fm_loss over `draws` fixed (example, t, eps) draws per sample.
double evaluate_loss(const ToyDiT<float>& model, const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset,
                     int draws, std::uint64_t seed);

std::uint64_t batch_seed(std::uint64_t seed, int step, int index);

}  // namespace saber
