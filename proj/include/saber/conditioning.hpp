#pragma once

#include "saber/codec.hpp"

#include <span>
#include <vector>

namespace saber {

/// (1 - t) * z0 + t * eps
template <typename Scalar>
VideoLatentT<Scalar> noise_latent(const VideoLatentT<Scalar>& z0, Scalar t, const Mat<Scalar>& eps);

/// Transformer input: temporal slots [video (F) | references (K)] x channel groups
/// [noised-or-reference latent (d) | mask (4) | zero-or-reference latent (d)].
template <typename Scalar>
struct AssembledInputT {
  int video_frames = 0;
  int ref_frames = 0;
  int height = 0;
  int width = 0;
  int latent_dim = 0;
  Mat<Scalar> tokens;  // ((F + K) * h * w) x (2d + 4)

  int cells() const { return height * width; }
  int channels() const { return 2 * latent_dim + 4; }
  int video_tokens() const { return video_frames * cells(); }
  int ref_tokens() const { return ref_frames * cells(); }
  int total_tokens() const { return video_tokens() + ref_tokens(); }
  int mask_offset() const { return latent_dim; }
  int aux_offset() const { return latent_dim + 4; }
};

using AssembledInput = AssembledInputT<float>;

template <typename Scalar>
AssembledInputT<Scalar> assemble_input(const VideoLatentT<Scalar>& z_t,
                                       std::span<const VideoLatentT<Scalar>> z_refs,
                                       std::span<const LatentMask> m_refs,
                                       const VideoLatentT<Scalar>& z_zero,
                                       std::span<const LatentMask> m_zero);

/// Convenience overload that builds the all-zero video masks itself.
template <typename Scalar>
AssembledInputT<Scalar> assemble_input(const VideoLatentT<Scalar>& z_t,
                                       std::span<const VideoLatentT<Scalar>> z_refs,
                                       std::span<const LatentMask> m_refs,
                                       const VideoLatentT<Scalar>& z_zero);

// Slicing inverses of assemble_input.
template <typename Scalar>
VideoLatentT<Scalar> extract_video(const AssembledInputT<Scalar>& in);
template <typename Scalar>
VideoLatentT<Scalar> extract_zero_latent(const AssembledInputT<Scalar>& in);
template <typename Scalar>
std::vector<LatentMask> extract_zero_masks(const AssembledInputT<Scalar>& in);
/// Reference latents from channel group 1 (aux = false) or group 3 (aux = true).
template <typename Scalar>
std::vector<VideoLatentT<Scalar>> extract_refs(const AssembledInputT<Scalar>& in, bool aux = false);
template <typename Scalar>
std::vector<LatentMask> extract_ref_masks(const AssembledInputT<Scalar>& in);

/// Key admissibility over [video tokens | reference tokens].
///   video  -> video: always
///   video  -> ref:   iff the key is valid
///   valid ref -> video: always
///   valid ref -> ref:   iff the key is valid (any reference)
///   invalid ref -> only itself
class AttentionMask {
 public:
  struct RuleCounts {
    long video_to_video = 0;
    long video_to_ref = 0;
    long ref_to_video = 0;
    long ref_to_ref = 0;
    long invalid_self = 0;
  };

  AttentionMask() = default;
  AttentionMask(int video_tokens, std::vector<std::uint8_t> ref_valid);

  int video_tokens() const { return video_tokens_; }
  int ref_tokens() const { return static_cast<int>(ref_valid_.size()); }
  int total_tokens() const { return video_tokens_ + ref_tokens(); }
  bool ref_valid(int ref_token) const { return ref_valid_[ref_token] != 0; }
  /// Video tokens and valid reference tokens.
  bool active(int token) const { return token < video_tokens_ || ref_valid(token - video_tokens_); }
  bool admits(int query, int key) const;
  int admissible_count(int query) const;
  RuleCounts rule_counts() const;

  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> dense() const;
  /// Transposed additive bias, entry (key, query): 0 where admissible, -inf elsewhere.
  template <typename Scalar>
  Mat<Scalar> key_query_bias() const;
  /// 1 for active tokens, 0 for invalid reference tokens.
  template <typename Scalar>
  Vec<Scalar> active_gate() const;

 private:
  int video_tokens_ = 0;
  std::vector<std::uint8_t> ref_valid_;
};

AttentionMask build_attention_mask(int video_frames, int height, int width,
                                   std::span<const LatentMask> m_refs);
/// Every reference token admitted everywhere (the no-attention-mask ablation).
AttentionMask permissive_attention_mask(int video_frames, int height, int width, int ref_frames);

/// Scaled dot-product attention, softmax over admissible keys only.
template <typename Scalar>
Mat<Scalar> masked_attention(const Mat<Scalar>& queries, const Mat<Scalar>& keys,
                             const Mat<Scalar>& values, const AttentionMask& mask);

/// Attention probabilities laid out keys x queries (each column sums to 1).
/// `bias`, when non-null, is a key_query_bias() of matching size.
template <typename Scalar>
Mat<Scalar> attention_weights(const Eigen::Ref<const Mat<Scalar>>& queries,
                              const Eigen::Ref<const Mat<Scalar>>& keys, const Mat<Scalar>* bias);

/// Column-wise softmax in place; a column without any finite entry is a contract violation.
template <typename Scalar>
void softmax_columns(Mat<Scalar>& logits);

}  // namespace saber
