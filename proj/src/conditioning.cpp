#include "saber/conditioning.hpp"

#include <cmath>
#include <limits>

namespace saber {

template <typename Scalar>
VideoLatentT<Scalar> noise_latent(const VideoLatentT<Scalar>& z0, Scalar t, const Mat<Scalar>& eps) {
  require(eps.rows() == z0.tokens.rows() && eps.cols() == z0.tokens.cols(),
          "noise shape does not match the latent");
  require(t >= Scalar(0) && t <= Scalar(1), "timestep must lie in [0, 1]");
  VideoLatentT<Scalar> out = z0;
  out.tokens = (Scalar(1) - t) * z0.tokens + t * eps;
  return out;
}

namespace {

void check_mask_shape(const LatentMask& m, int h, int w) {
  require(m.height == h && m.width == w && m.cells.rows() == h * w, "latent mask size mismatch");
  require((m.cells <= 1).all(), "latent masks must be binary");
}

}  // namespace

template <typename Scalar>
AssembledInputT<Scalar> assemble_input(const VideoLatentT<Scalar>& z_t,
                                       std::span<const VideoLatentT<Scalar>> z_refs,
                                       std::span<const LatentMask> m_refs,
                                       const VideoLatentT<Scalar>& z_zero,
                                       std::span<const LatentMask> m_zero) {
  const int h = z_t.height;
  const int w = z_t.width;
  const int d = z_t.channels();
  const int cells = h * w;
  require(z_t.tokens.rows() == z_t.token_count(), "noised latent is inconsistent");
  require(z_zero.same_shape(z_t), "zero-video latent must match the noised latent");
  require(z_refs.size() == m_refs.size(), "each reference needs exactly one latent mask");
  require(static_cast<int>(m_zero.size()) == z_t.frames, "one zero mask per video latent frame");
  for (const LatentMask& m : m_zero) {
    check_mask_shape(m, h, w);
    require((m.cells == 0).all(), "video-slot masks must be all zero");
  }

  AssembledInputT<Scalar> in;
  in.video_frames = z_t.frames;
  in.ref_frames = static_cast<int>(z_refs.size());
  in.height = h;
  in.width = w;
  in.latent_dim = d;
  in.tokens = Mat<Scalar>::Zero(in.total_tokens(), in.channels());

  const int nv = in.video_tokens();
  in.tokens.topLeftCorner(nv, d) = z_t.tokens;
  in.tokens.block(0, in.aux_offset(), nv, d) = z_zero.tokens;
  // m_zero occupies the mask group of the video slots and is already zero.

  for (std::size_t k = 0; k < z_refs.size(); ++k) {
    const VideoLatentT<Scalar>& ref = z_refs[k];
    require(ref.frames == 1 && ref.height == h && ref.width == w && ref.channels() == d,
            "reference latent must be a single frame matching the video latent grid");
    check_mask_shape(m_refs[k], h, w);
    const int row0 = nv + static_cast<int>(k) * cells;
    in.tokens.block(row0, 0, cells, d) = ref.tokens;
    in.tokens.block(row0, in.mask_offset(), cells, 4) = m_refs[k].cells.template cast<Scalar>().matrix();
    in.tokens.block(row0, in.aux_offset(), cells, d) = ref.tokens;
  }
  return in;
}

template <typename Scalar>
AssembledInputT<Scalar> assemble_input(const VideoLatentT<Scalar>& z_t,
                                       std::span<const VideoLatentT<Scalar>> z_refs,
                                       std::span<const LatentMask> m_refs,
                                       const VideoLatentT<Scalar>& z_zero) {
  const std::vector<LatentMask> m_zero(z_t.frames, LatentMask::zeros(z_t.height, z_t.width));
  return assemble_input<Scalar>(z_t, z_refs, m_refs, z_zero, m_zero);
}

template <typename Scalar>
VideoLatentT<Scalar> extract_video(const AssembledInputT<Scalar>& in) {
  VideoLatentT<Scalar> out{in.video_frames, in.height, in.width,
                           (in.video_frames - 1) * kTemporalCompression + 1,
                           in.tokens.topLeftCorner(in.video_tokens(), in.latent_dim)};
  return out;
}

template <typename Scalar>
VideoLatentT<Scalar> extract_zero_latent(const AssembledInputT<Scalar>& in) {
  VideoLatentT<Scalar> out{in.video_frames, in.height, in.width,
                           (in.video_frames - 1) * kTemporalCompression + 1,
                           in.tokens.block(0, in.aux_offset(), in.video_tokens(), in.latent_dim)};
  return out;
}

namespace {

template <typename Scalar>
LatentMask mask_from_block(const AssembledInputT<Scalar>& in, int row0) {
  LatentMask m = LatentMask::zeros(in.height, in.width);
  const auto block = in.tokens.block(row0, in.mask_offset(), in.cells(), 4);
  for (int i = 0; i < in.cells(); ++i) {
    for (int c = 0; c < 4; ++c) m.cells(i, c) = block(i, c) != Scalar(0) ? 1 : 0;
  }
  return m;
}

}  // namespace

template <typename Scalar>
std::vector<LatentMask> extract_zero_masks(const AssembledInputT<Scalar>& in) {
  std::vector<LatentMask> out;
  for (int f = 0; f < in.video_frames; ++f) out.push_back(mask_from_block(in, f * in.cells()));
  return out;
}

template <typename Scalar>
std::vector<VideoLatentT<Scalar>> extract_refs(const AssembledInputT<Scalar>& in, bool aux) {
  std::vector<VideoLatentT<Scalar>> out;
  const int col = aux ? in.aux_offset() : 0;
  for (int k = 0; k < in.ref_frames; ++k) {
    const int row0 = in.video_tokens() + k * in.cells();
    out.push_back({1, in.height, in.width, 1, in.tokens.block(row0, col, in.cells(), in.latent_dim)});
  }
  return out;
}

template <typename Scalar>
std::vector<LatentMask> extract_ref_masks(const AssembledInputT<Scalar>& in) {
  std::vector<LatentMask> out;
  for (int k = 0; k < in.ref_frames; ++k) {
    out.push_back(mask_from_block(in, in.video_tokens() + k * in.cells()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention mask

AttentionMask::AttentionMask(int video_tokens, std::vector<std::uint8_t> ref_valid)
    : video_tokens_(video_tokens), ref_valid_(std::move(ref_valid)) {
  require(video_tokens_ > 0, "attention needs at least one video token");
}

bool AttentionMask::admits(int query, int key) const {
  const bool key_video = key < video_tokens_;
  if (query < video_tokens_ || ref_valid(query - video_tokens_)) {
    return key_video || ref_valid(key - video_tokens_);
  }
  return query == key;
}

int AttentionMask::admissible_count(int query) const {
  int count = 0;
  for (int k = 0; k < total_tokens(); ++k) count += admits(query, k) ? 1 : 0;
  return count;
}

AttentionMask::RuleCounts AttentionMask::rule_counts() const {
  RuleCounts rc;
  long valid = 0;
  for (std::uint8_t v : ref_valid_) valid += v ? 1 : 0;
  const long nv = video_tokens_;
  const long invalid = ref_tokens() - valid;
  rc.video_to_video = nv * nv;
  rc.video_to_ref = nv * valid;
  rc.ref_to_video = valid * nv;
  rc.ref_to_ref = valid * valid;
  rc.invalid_self = invalid;
  return rc;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> AttentionMask::dense() const {
  const int n = total_tokens();
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> out(n, n);
  for (int q = 0; q < n; ++q) {
    for (int k = 0; k < n; ++k) out(q, k) = admits(q, k);
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> AttentionMask::key_query_bias() const {
  const int n = total_tokens();
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  Mat<Scalar> bias(n, n);
  for (int q = 0; q < n; ++q) {
    const bool query_active = active(q);
    for (int k = 0; k < n; ++k) {
      const bool allowed = query_active ? active(k) : (q == k);
      bias(k, q) = allowed ? Scalar(0) : neg_inf;
    }
  }
  return bias;
}

template <typename Scalar>
Vec<Scalar> AttentionMask::active_gate() const {
  Vec<Scalar> gate(total_tokens());
  for (int i = 0; i < total_tokens(); ++i) gate[i] = active(i) ? Scalar(1) : Scalar(0);
  return gate;
}

AttentionMask build_attention_mask(int video_frames, int height, int width,
                                   std::span<const LatentMask> m_refs) {
  const int cells = height * width;
  std::vector<std::uint8_t> valid;
  valid.reserve(m_refs.size() * cells);
  for (const LatentMask& m : m_refs) {
    check_mask_shape(m, height, width);
    for (int i = 0; i < cells; ++i) valid.push_back(m.valid(i) ? 1 : 0);
  }
  return AttentionMask(video_frames * cells, std::move(valid));
}

AttentionMask permissive_attention_mask(int video_frames, int height, int width, int ref_frames) {
  const int cells = height * width;
  return AttentionMask(video_frames * cells, std::vector<std::uint8_t>(ref_frames * cells, 1));
}

template <typename Scalar>
void softmax_columns(Mat<Scalar>& logits) {
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto col = logits.col(c);
    const Scalar peak = col.maxCoeff();
    require(peak != -std::numeric_limits<Scalar>::infinity(), "attention query has no admissible key");
    col = (col.array() - peak).exp();
    col /= col.sum();
  }
}

template <typename Scalar>
Mat<Scalar> attention_weights(const Eigen::Ref<const Mat<Scalar>>& queries,
                              const Eigen::Ref<const Mat<Scalar>>& keys, const Mat<Scalar>* bias) {
  require(queries.cols() == keys.cols(), "query and key widths differ");
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(queries.cols()));
  Mat<Scalar> logits(keys.rows(), queries.rows());
  logits.noalias() = (keys * queries.transpose()) * scale;
  if (bias != nullptr) {
    require(bias->rows() == keys.rows() && bias->cols() == queries.rows(), "bias size mismatch");
    logits += *bias;
  }
  softmax_columns(logits);
  return logits;
}

template <typename Scalar>
Mat<Scalar> masked_attention(const Mat<Scalar>& queries, const Mat<Scalar>& keys,
                             const Mat<Scalar>& values, const AttentionMask& mask) {
  const int n = mask.total_tokens();
  require(queries.rows() == n && keys.rows() == n && values.rows() == n,
          "sequence length must equal video + reference tokens");
  const Mat<Scalar> bias = mask.key_query_bias<Scalar>();
  const Mat<Scalar> weights = attention_weights<Scalar>(queries, keys, &bias);
  return weights.transpose() * values;
}

#define SABER_INSTANTIATE(S)                                                                        \
  template VideoLatentT<S> noise_latent(const VideoLatentT<S>&, S, const Mat<S>&);                  \
  template AssembledInputT<S> assemble_input(const VideoLatentT<S>&, std::span<const VideoLatentT<S>>, \
                                             std::span<const LatentMask>, const VideoLatentT<S>&,   \
                                             std::span<const LatentMask>);                          \
  template AssembledInputT<S> assemble_input(const VideoLatentT<S>&, std::span<const VideoLatentT<S>>, \
                                             std::span<const LatentMask>, const VideoLatentT<S>&);  \
  template VideoLatentT<S> extract_video(const AssembledInputT<S>&);                                \
  template VideoLatentT<S> extract_zero_latent(const AssembledInputT<S>&);                          \
  template std::vector<LatentMask> extract_zero_masks(const AssembledInputT<S>&);                   \
  template std::vector<VideoLatentT<S>> extract_refs(const AssembledInputT<S>&, bool);              \
  template std::vector<LatentMask> extract_ref_masks(const AssembledInputT<S>&);                    \
  template Mat<S> AttentionMask::key_query_bias<S>() const;                                         \
  template Vec<S> AttentionMask::active_gate<S>() const;                                            \
  template void softmax_columns(Mat<S>&);                                                           \
  template Mat<S> attention_weights(const Eigen::Ref<const Mat<S>>&, const Eigen::Ref<const Mat<S>>&, \
                                    const Mat<S>*);                                                 \
  template Mat<S> masked_attention(const Mat<S>&, const Mat<S>&, const Mat<S>&, const AttentionMask&);

SABER_INSTANTIATE(float)
SABER_INSTANTIATE(double)
#undef SABER_INSTANTIATE

}  // namespace saber
