#pragma once

#include "saber/augment.hpp"
#include "saber/flow.hpp"

#include <functional>
#include <optional>

namespace saber {

enum class ReferenceMode { Subject, BackgroundScene };

struct ReferenceInput {
  Image image;  // values in [-1, 1]
  ReferenceMode mode = ReferenceMode::Subject;
  std::optional<BinaryMask> mask;
};

struct SamplerConfig {
  int steps = 50;
  double guidance_scale = 5.0;
  std::uint64_t seed = 0;
  void validate() const;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual BinaryMask segment(const Image& image) const = 0;
};

/// Returns a mask prepared elsewhere (e.g. loaded from a file) verbatim.
class SuppliedMaskSegmenter : public Segmenter {
 public:
  explicit SuppliedMaskSegmenter(BinaryMask mask) : mask_(std::move(mask)) {}
  BinaryMask segment(const Image& image) const override;

 private:
  BinaryMask mask_;
};

/// Foreground = pixels whose color distance to the border-median color exceeds half the maximum
/// distance. Meant for solid backgrounds.
class ChromaSegmenter : public Segmenter {
 public:
  explicit ChromaSegmenter(double min_contrast = 0.2) : min_contrast_(min_contrast) {}
  BinaryMask segment(const Image& image) const override;

 private:
  double min_contrast_;
};

/// Throws SegmentationError when nothing is found.
BinaryMask segment_subject(const Image& image, const Segmenter& segmenter);

struct PreparedReference {
  Image image;
  BinaryMask mask;
};

/// Aspect-preserving fit into (height, width): background zeroed, bilinear image / nearest mask
/// resize to round(s * H_k) x round(s * W_k) with s = min(H / H_k, W / W_k), centered, zero padding.
PreparedReference resize_and_pad(const Image& image, const BinaryMask& mask, int height, int width);

/// Segments (Subject mode, unless a mask is supplied) or uses an all-ones mask (BackgroundScene), then resize_and_pad.
PreparedReference prepare_reference(const ReferenceInput& ref, int height, int width, const Segmenter& segmenter);

/// Uniform grid t_i = 1 - i / steps.
std::vector<double> timestep_grid(int steps);

template <typename Scalar>
struct SamplerInputs {
  std::vector<VideoLatentT<Scalar>> refs;
  std::vector<LatentMask> ref_masks;
  VideoLatentT<Scalar> z_zero;
  Mat<Scalar> text;         // conditional prompt
  Mat<Scalar> null_text;    // empty prompt for the unconditional branch
  AttentionMask attention;
  int frames = 0;           // latent frames
  int height = 0;
  int width = 0;
  int latent_dim = 0;
  int source_frames = 0;
};

template <typename Scalar>
using SamplerObserver = std::function<void(int step, Scalar t, const AssembledInputT<Scalar>& input)>;

/// Euler integration of the learned flow from t = 1 to t = 0 with classifier-free guidance
/// v = v_u + s (v_c - v_u). The unconditional branch keeps the references and drops only the text;
/// it is skipped when s == 1.
template <VelocityModel M>
VideoLatentT<typename M::Scalar> sample_latent(const M& model, const SamplerInputs<typename M::Scalar>& in,
                                               const SamplerConfig& cfg,
                                               const SamplerObserver<typename M::Scalar>& observe = {}) {
  using S = typename M::Scalar;
  cfg.validate();
  VideoLatentT<S> z{in.frames, in.height, in.width, in.source_frames,
                    Mat<S>(static_cast<Eigen::Index>(in.frames) * in.height * in.width, in.latent_dim)};
  Rng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index j = 0; j < z.tokens.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.tokens.rows(); ++i) z.tokens(i, j) = static_cast<S>(gauss(rng));
  }

  const std::vector<double> grid = timestep_grid(cfg.steps);
  const S guidance = static_cast<S>(cfg.guidance_scale);
  for (int i = 0; i < cfg.steps; ++i) {
    const S t = static_cast<S>(grid[i]);
    const S dt = static_cast<S>(grid[i] - grid[i + 1]);
    const AssembledInputT<S> input = assemble_input<S>(z, in.refs, in.ref_masks, in.z_zero);
    if (observe) observe(i, t, input);
    Mat<S> v = model.predict(input, Conditioning<S>{in.text, t}, in.attention);
    if (cfg.guidance_scale != 1.0) {
      const Mat<S> v_u = model.predict(input, Conditioning<S>{in.null_text, t}, in.attention);
      v = v_u + guidance * (v - v_u);
    }
    z.tokens += dt * v;
  }
  return z;
}

struct GenerationResult {
  Video video;
  VideoLatent latent;
  std::vector<PreparedReference> references;
};

/// Full zero-shot pipeline: prepare references, encode them, sample, decode.
GenerationResult sample_video(const ToyDiT<float>& model, const VideoCodec& codec, const TextEncoder& text,
                              const std::vector<ReferenceInput>& refs, const std::string& prompt, int frames,
                              int height, int width, const SamplerConfig& cfg, const Segmenter& segmenter);

/// Tiles images row-major into a contact sheet separated by `gap` pixels of `fill`.
Image make_grid(const std::vector<Image>& images, int columns, int gap = 1, float fill = 1.0f);

}  // namespace saber
