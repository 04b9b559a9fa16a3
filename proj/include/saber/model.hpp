#pragma once

#include "saber/conditioning.hpp"

#include <string>
#include <vector>

namespace saber {

struct ModelConfig {
  int blocks = 4;
  int model_dim = 128;
  int heads = 4;
  int text_dim = 32;
  int latent_dim = 48;
  int ffn_mult = 4;
  int time_dim = 64;
  std::uint64_t init_seed = 1;

  int in_channels() const { return 2 * latent_dim + 4; }
  int head_dim() const { return model_dim / heads; }
  int ffn_dim() const { return ffn_mult * model_dim; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Per-call conditioning: text features and the flow timestep. References travel inside the
/// assembled input itself.
template <typename Scalar>
struct Conditioning {
  Mat<Scalar> text;  // tokens x text_dim
  Scalar timestep = 0;
};

/// Sinusoidal embedding of t in [0, 1] (t is scaled by 1000 first).
template <typename Scalar>
RowVec<Scalar> timestep_embedding(Scalar t, int dim);

/// 3D sinusoidal (frame, row, col) encoding; every reference slot shares one frame coordinate.
template <typename Scalar>
Mat<Scalar> positional_encoding(int video_frames, int ref_frames, int height, int width, int dim);

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;
  Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
};

/// Velocity-prediction diffusion transformer. Each block: masked self-attention, text
/// cross-attention, and an FFN whose input is modulated by a timestep-derived scale/shift.
/// Invalid reference tokens are zeroed at every block input. All parameters live in one
/// flat vector; each tensor is a row-major view into it.
template <typename Scalar_>
class ToyDiT {
 public:
  using Scalar = Scalar_;
  using ParamMap = Eigen::Map<MatRM<Scalar>>;
  using ConstParamMap = Eigen::Map<const MatRM<Scalar>>;

  struct BlockCache {
    Mat<Scalar> x_in, ln1, q, k, v, attn_out;
    Vec<Scalar> inv1;
    std::vector<Mat<Scalar>> probs;  // per head, keys x queries
    Mat<Scalar> x1, ln2, qc, kc, vc, cross_out;
    Vec<Scalar> inv2;
    std::vector<Mat<Scalar>> cross_probs;
    Mat<Scalar> x2, ln3, modulated, pre_act, act;
    Vec<Scalar> inv3;
    RowVec<Scalar> gamma, beta;
  };

  struct Cache {
    Mat<Scalar> input;  // z_in tokens
    Mat<Scalar> text;
    Vec<Scalar> gate;
    Mat<Scalar> bias;  // keys x queries
    RowVec<Scalar> t_embed, t_pre, t_hidden, t_vec, t_cond;
    std::vector<BlockCache> blocks;
    Mat<Scalar> final_ln;
    Vec<Scalar> final_inv;
    int video_tokens = 0;
  };

  explicit ToyDiT(ModelConfig config = {});

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  Vec<Scalar>& parameters() { return params_; }
  const Vec<Scalar>& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  ParamMap tensor(std::size_t id) { return {params_.data() + tensors_[id].offset, tensors_[id].rows, tensors_[id].cols}; }
  ConstParamMap tensor(std::size_t id) const {
    return {params_.data() + tensors_[id].offset, tensors_[id].rows, tensors_[id].cols};
  }
  std::size_t tensor_id(const std::string& name) const;

  /// Velocity for the video tokens, (F * h * w) x d.
  Mat<Scalar> forward(const AssembledInputT<Scalar>& input, const Conditioning<Scalar>& cond,
                      const AttentionMask& mask) const;
  Mat<Scalar> forward(const AssembledInputT<Scalar>& input, const Conditioning<Scalar>& cond,
                      const AttentionMask& mask, Cache& cache) const;
  Mat<Scalar> predict(const AssembledInputT<Scalar>& input, const Conditioning<Scalar>& cond,
                      const AttentionMask& mask) const {
    return forward(input, cond, mask);
  }

  /// Accumulates dLoss/dParams into `grad` (same layout as parameters()).
  void backward(const Cache& cache, const Mat<Scalar>& d_out, Vec<Scalar>& grad) const;

  template <typename Other>
  ToyDiT<Other> cast() const {
    ToyDiT<Other> out(config_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

 private:
  struct BlockIds {
    std::size_t q, k, v, o, cq, ck, cv, co, mod_w, mod_b, w1, b1, w2, b2;
  };

  std::size_t add_tensor(const std::string& name, int rows, int cols);
  void initialize();

  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  Vec<Scalar> params_;
  std::size_t in_w_, in_b_, t_w1_, t_b1_, t_w2_, t_b2_, out_w_, out_b_;
  std::vector<BlockIds> block_ids_;
};

extern template class ToyDiT<float>;
extern template class ToyDiT<double>;

}  // namespace saber
