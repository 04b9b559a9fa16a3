#pragma once

#include "saber/image.hpp"
#include "saber/mask.hpp"

#include <map>
#include <mutex>
#include <string_view>
#include <tuple>

namespace saber {

inline constexpr int kTemporalCompression = 4;

/// floor((F - 1) / 4) + 1
constexpr int latent_frame_count(int frames) { return (frames - 1) / kTemporalCompression + 1; }

struct CodecConfig {
  int spatial_patch = 2;
  std::uint64_t projection_seed = 0x5ABE5EEDULL;

  /// 3 channels x 4 frames x p x p.
  int latent_dim() const { return 3 * kTemporalCompression * spatial_patch * spatial_patch; }
  void validate() const;
};

/// Latent video stored token-major: row (f * h + i) * w + j holds the d channels of cell (i, j) in latent frame f.
template <typename Scalar>
struct VideoLatentT {
  int frames = 0;
  int height = 0;
  int width = 0;
  int source_frames = 0;  // pixel-space frame count this latent decodes to
  Mat<Scalar> tokens;

  int channels() const { return static_cast<int>(tokens.cols()); }
  int cells() const { return height * width; }
  int token_count() const { return frames * height * width; }

  static VideoLatentT zeros(int frames, int height, int width, int channels) {
    return {frames, height, width, (frames - 1) * kTemporalCompression + 1,
            Mat<Scalar>::Zero(frames * height * width, channels)};
  }

  template <typename Other>
  VideoLatentT<Other> cast() const {
    return {frames, height, width, source_frames, tokens.template cast<Other>()};
  }

  bool same_shape(const VideoLatentT& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels() == o.channels();
  }
};

using VideoLatent = VideoLatentT<float>;

/// Latent-resolution reference mask, replicated over 4 channels.
struct LatentMask {
  int height = 0;
  int width = 0;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 4, Eigen::RowMajor> cells;

  static LatentMask zeros(int height, int width) {
    return {height, width, decltype(cells)::Zero(height * width, 4)};
  }
  bool valid(int cell) const { return cells(cell, 0) != 0; }
  int valid_count() const { return static_cast<int>((cells.col(0) != 0).count()); }
};

/// Stand-in for a video VAE: first-frame padding to a multiple of 4 frames, space-to-depth over
/// (4 frames x p x p x 3) blocks, then a fixed seeded orthonormal projection. Exactly invertible.
class VideoCodec {
 public:
  explicit VideoCodec(CodecConfig config = {});

  const CodecConfig& config() const { return config_; }
  int latent_dim() const { return config_.latent_dim(); }
  const Eigen::MatrixXf& projection() const { return projection_; }

  VideoLatent encode_video(const Video& frames) const;
  /// Output clamped to [-1, 1]; drops the padding frames recorded in source_frames.
  Video decode_video(const VideoLatent& latent) const;
  VideoLatent encode_reference(const Image& image) const;
  Image decode_reference(const VideoLatent& latent) const;
  /// Encoded all-zero video of the given size; computed once per size.
  const VideoLatent& zero_latent(int frames, int height, int width) const;

 private:
  CodecConfig config_;
  Eigen::MatrixXf projection_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::tuple<int, int, int>, VideoLatent> zero_cache_;
};

/// A latent cell is 1 iff any pixel of its receptive field is foreground.
LatentMask resize_mask_to_latent(const BinaryMask& mask, int height, int width);

struct TextFeatures {
  Mat<float> data;  // tokens x dim
  int tokens() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
};

/// Whitespace tokenizer with a seeded 4096-row embedding table; row 0 is the null (empty prompt) embedding.
class TextEncoder {
 public:
  static constexpr int kTableRows = 4096;

  TextEncoder(int dim, std::uint64_t vocab_seed);

  int dim() const { return static_cast<int>(table_.cols()); }
  std::uint64_t vocab_seed() const { return seed_; }
  TextFeatures encode(std::string_view prompt) const;
  static int token_row(std::string_view token);

 private:
  std::uint64_t seed_;
  Mat<float> table_;
};

TextFeatures encode_text(std::string_view prompt, int dim, std::uint64_t vocab_seed);

}  // namespace saber
