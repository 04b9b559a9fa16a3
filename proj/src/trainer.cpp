#include "saber/trainer.hpp"

#include <cmath>
#include <sstream>

namespace saber {

void TrainConfig::validate() const {
  if (k_min < 0 || k_max < k_min || k_max > 8) throw ConfigurationError("reference count range must lie within [0, 8]");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigurationError("learning rate must be finite and non-negative");
  if (weight_decay < 0) throw ConfigurationError("weight decay must be non-negative");
  if (batch_size < 1) throw ConfigurationError("batch size must be at least 1");
  if (steps < 0) throw ConfigurationError("step count must be non-negative");
  if (mask_types.empty()) throw ConfigurationError("at least one mask type is required");
  if (fixed_ratio && !(*fixed_ratio >= 0 && *fixed_ratio <= 1)) throw ConfigurationError("fixed ratio must lie in [0, 1]");
  if (!(caption_dropout >= 0 && caption_dropout <= 1)) throw ConfigurationError("caption dropout must lie in [0, 1]");
  augment.validate();
  codec.validate();
  model.validate();
  if (model.latent_dim != codec.latent_dim())
    throw ConfigurationError("model latent_dim " + std::to_string(model.latent_dim) + " does not match codec latent_dim " +
                             std::to_string(codec.latent_dim()));
}

std::uint64_t batch_seed(std::uint64_t seed, int step, int index) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(step)), static_cast<std::uint64_t>(index));
}

namespace {

BinaryMask training_mask(const TrainConfig& cfg, int height, int width, Rng& rng, int& target, ShapeKind& kind) {
  constexpr int kAttempts = 16;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    MaskSpec spec;
    spec.kind = sample_shape_kind(cfg.mask_types, rng);
    spec.height = height;
    spec.width = width;
    spec.target_ratio = cfg.fixed_ratio ? *cfg.fixed_ratio : sample_ratio(cfg.ratio_mixture, rng);
    spec.seed = rng();
    try {
      BinaryMask mask = generate_mask(spec);
      target = spec.target_count();
      kind = spec.kind;
      return mask;
    } catch (const GenerationFailure&) {
    }
  }
  throw GenerationFailure("could not generate a training mask after repeated resampling");
}

}  // namespace

BuiltExample build_training_example(const SyntheticSample& sample, const TrainConfig& cfg,
                                    const TrainContext& ctx, Rng& rng) {
  require(!sample.video.empty(), "training video is empty");
  const int F = static_cast<int>(sample.video.size());
  const int H = sample.video.front().height;
  const int W = sample.video.front().width;
  const AugmentConfig augment = cfg.disable_augment ? AugmentConfig::disabled() : cfg.augment;

  BuiltExample out;
  TrainingExample& ex = out.example;
  ex.z0 = ctx.codec.encode_video(sample.video);
  const int h = ex.z0.height;
  const int w = ex.z0.width;

  const int K = uniform_int(rng, cfg.k_min, cfg.k_max);
  for (int k = 0; k < K; ++k) {
    const int frame = uniform_int(rng, 0, F - 1);
    int target = 0;
    ShapeKind kind{};
    const BinaryMask mask = training_mask(cfg, H, W, rng, target, kind);
    MaskedReference ref = make_masked_reference(sample.video[frame], mask, augment, rng);
    ex.refs.push_back(ctx.codec.encode_reference(ref.masked_frame));
    ex.ref_masks.push_back(resize_mask_to_latent(ref.mask, h, w));
    out.frame_indices.push_back(frame);
    out.target_counts.push_back(target);
    out.mask_kinds.push_back(kind);
    out.references.push_back(std::move(ref));
  }
  ex.z_zero = ctx.codec.zero_latent(F, H, W);
  out.caption = uniform(rng, 0.0, 1.0) < cfg.caption_dropout ? std::string() : sample.caption;
  ex.text = ctx.text.encode(out.caption).data;
  ex.attention = cfg.disable_attn_mask ? permissive_attention_mask(ex.z0.frames, h, w, K)
                                       : build_attention_mask(ex.z0.frames, h, w, ex.ref_masks);
  if (cfg.validate_batches) validate_example(out, cfg, ctx);
  return out;
}

void validate_example(const BuiltExample& built, const TrainConfig& cfg, const TrainContext& ctx) {
  const TrainingExample& ex = built.example;
  const std::size_t K = built.references.size();
  require(ex.refs.size() == K && ex.ref_masks.size() == K && built.target_counts.size() == K,
          "reference lists disagree in length");
  require(static_cast<int>(K) >= cfg.k_min && static_cast<int>(K) <= cfg.k_max, "reference count outside range");
  for (std::size_t k = 0; k < K; ++k) {
    const MaskedReference& ref = built.references[k];
    // the affine warp may resample the mask, so the exact count is checked on identity transforms only
    if (ref.params.is_identity()) {
      require(ref.mask.foreground_count() == built.target_counts[k], "reference mask count is not exact");
    } else {
      require(strictly_inside(ref.mask), "augmented mask touches the frame border");
    }
    for (int r = 0; r < ref.mask.height(); ++r) {
      for (int c = 0; c < ref.mask.width(); ++c) {
        if (ref.mask.at(r, c)) continue;
        for (int ch = 0; ch < 3; ++ch) require(ref.masked_frame.at(r, c, ch) == 0.0f, "masked frame leaks off-mask");
      }
    }
    const VideoLatent clean = ctx.codec.encode_reference(ref.masked_frame);
    require(clean.tokens == ex.refs[k].tokens, "reference latent is not the clean encoding");
  }
  require(ex.z_zero.tokens.isZero(0.0f), "zero-frame latent is not zero");
  const AssembledInput in = ex.assemble(ex.z0);
  require(in.total_tokens() == ex.attention.total_tokens(), "attention mask size mismatch");
  if (!cfg.disable_attn_mask) {
    for (std::size_t k = 0; k < K; ++k) {
      for (int cell = 0; cell < ex.ref_masks[k].height * ex.ref_masks[k].width; ++cell) {
        const int token = static_cast<int>(k) * ex.ref_masks[k].height * ex.ref_masks[k].width + cell;
        require(ex.attention.ref_valid(token) == ex.ref_masks[k].valid(cell), "attention mask disagrees with latent mask");
      }
    }
  }
}

TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset, const StepCallback& on_step) {
  cfg.validate();
  return train(cfg, dataset, ToyDiT<float>(cfg.model), on_step);
}

TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset, ToyDiT<float> model,
                  const StepCallback& on_step) {
  cfg.validate();
  require(!dataset.empty(), "training dataset is empty");
  if (!(model.config() == cfg.model)) throw ConfigurationError("model configuration does not match the training config");
  const TrainContext ctx(cfg);

  TrainResult result{std::move(model), {}};
  Vec<float>& params = result.model.parameters();
  const Eigen::Index n = params.size();
  Vec<double> m = Vec<double>::Zero(n);
  Vec<double> v = Vec<double>::Zero(n);
  Vec<float> grad(n);

  for (int step = 0; step < cfg.steps; ++step) {
    grad.setZero();
    double loss = 0.0;
    const int batch_step = cfg.fixed_batch ? 0 : step;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::uint64_t seed = batch_seed(cfg.seed, batch_step, b);
      Rng rng(seed);
      const SyntheticSample& sample = dataset[uniform_int(rng, 0, static_cast<int>(dataset.size()) - 1)];
      const BuiltExample built = build_training_example(sample, cfg, ctx, rng);
      const auto draw = draw_flow<float>(rng, built.example.z0.tokens.rows(), built.example.z0.tokens.cols());
      const float l = fm_loss_and_gradient(result.model, built.example, draw, grad, 1.0f / cfg.batch_size);
      if (!std::isfinite(l) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " (batch seed " << seed << ")";
        throw NonFiniteLoss(msg.str());
      }
      loss += l / cfg.batch_size;
    }

    const LossRecord record{step, loss};
    result.trace.push_back(record);
    if (on_step) on_step(record);

    if (cfg.lr == 0) continue;
    double scale = 1.0;
    if (cfg.grad_clip > 0) {
      const double norm = grad.cast<double>().norm();
      if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, step + 1);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = scale * grad[i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps) + cfg.weight_decay * params[i];
      params[i] = static_cast<float>(params[i] - cfg.lr * update);
    }
  }
  return result;
}

double evaluate_loss(const ToyDiT<float>& model, const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset,
                     int draws, std::uint64_t seed) {
  const TrainContext ctx(cfg);
  TrainConfig eval_cfg = cfg;
  eval_cfg.caption_dropout = 0.0;
  double total = 0.0;
  int count = 0;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    for (int d = 0; d < draws; ++d) {
      Rng rng(batch_seed(seed, static_cast<int>(s), d));
      const BuiltExample built = build_training_example(dataset[s], eval_cfg, ctx, rng);
      total += fm_loss(model, built.example, rng);
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

}  // namespace saber
