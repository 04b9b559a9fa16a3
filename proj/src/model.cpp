#include "saber/model.hpp"

#include <cmath>

namespace saber {

void ModelConfig::validate() const {
  if (blocks < 1) throw ConfigurationError("model needs at least one block");
  if (model_dim < 1 || heads < 1 || model_dim % heads != 0)
    throw ConfigurationError("model_dim must be a positive multiple of heads");
  if (text_dim < 1 || latent_dim < 1 || ffn_mult < 1) throw ConfigurationError("model dimensions must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw ConfigurationError("time_dim must be even and at least 2");
}

template <typename Scalar>
RowVec<Scalar> timestep_embedding(Scalar t, int dim) {
  const int half = dim / 2;
  RowVec<Scalar> out(dim);
  const double x = 1000.0 * static_cast<double>(t);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    out[k] = static_cast<Scalar>(std::sin(x * freq));
    out[half + k] = static_cast<Scalar>(std::cos(x * freq));
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> positional_encoding(int video_frames, int ref_frames, int height, int width, int dim) {
  const int freqs = dim / 6;
  const int cells = height * width;
  Mat<Scalar> pe = Mat<Scalar>::Zero(static_cast<Eigen::Index>(video_frames + ref_frames) * cells, dim);
  if (freqs == 0) return pe;
  for (int slot = 0; slot < video_frames + ref_frames; ++slot) {
    const double frame = slot < video_frames ? slot : -1.0;
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) {
        const Eigen::Index row = static_cast<Eigen::Index>(slot) * cells + i * width + j;
        const double coord[3] = {frame, static_cast<double>(i), static_cast<double>(j)};
        for (int axis = 0; axis < 3; ++axis) {
          for (int k = 0; k < freqs; ++k) {
            const double freq = std::exp(-std::log(100.0) * k / freqs);
            pe(row, axis * 2 * freqs + k) = static_cast<Scalar>(std::sin(coord[axis] * freq));
            pe(row, axis * 2 * freqs + freqs + k) = static_cast<Scalar>(std::cos(coord[axis] * freq));
          }
        }
      }
    }
  }
  return pe;
}

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
Mat<Scalar> layer_norm(const Mat<Scalar>& x, Vec<Scalar>& inv) {
  const Vec<Scalar> mean = x.rowwise().mean();
  Mat<Scalar> centered = x.colwise() - mean;
  const Vec<Scalar> var = centered.array().square().rowwise().mean().matrix();
  inv = (var.array() + Scalar(kLayerNormEps)).rsqrt().matrix();
  centered.array().colwise() *= inv.array();
  return centered;
}

template <typename Scalar>
Mat<Scalar> layer_norm_backward(const Mat<Scalar>& dy, const Mat<Scalar>& y, const Vec<Scalar>& inv) {
  const Vec<Scalar> mean_dy = dy.rowwise().mean();
  const Vec<Scalar> mean_dyy = dy.cwiseProduct(y).rowwise().mean();
  Mat<Scalar> dx = (dy.colwise() - mean_dy) - (y.array().colwise() * mean_dyy.array()).matrix();
  dx.array().colwise() *= inv.array();
  return dx;
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(1) / (S(1) + (-x).exp());
}

template <typename Derived>
typename Derived::PlainObject silu(const Eigen::MatrixBase<Derived>& x) {
  return (x.array() * sigmoid(x.array())).matrix();
}

template <typename Derived>
typename Derived::PlainObject silu_grad(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  const auto s = sigmoid(x.array()).eval();
  return (s * (S(1) + x.array() * (S(1) - s))).matrix();
}

/// Multi-head attention over pre-projected q (n_q x D), k, v (n_k x D).
template <typename Scalar>
Mat<Scalar> multi_head(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v, int heads,
                       const Mat<Scalar>* bias, std::vector<Mat<Scalar>>& probs) {
  const int dh = static_cast<int>(q.cols()) / heads;
  Mat<Scalar> out(q.rows(), q.cols());
  probs.resize(heads);
  for (int h = 0; h < heads; ++h) {
    probs[h] = attention_weights<Scalar>(q.middleCols(h * dh, dh), k.middleCols(h * dh, dh), bias);
    out.middleCols(h * dh, dh).noalias() = probs[h].transpose() * v.middleCols(h * dh, dh);
  }
  return out;
}

template <typename Scalar>
void multi_head_backward(const Mat<Scalar>& d_out, const Mat<Scalar>& q, const Mat<Scalar>& k,
                         const Mat<Scalar>& v, const std::vector<Mat<Scalar>>& probs, Mat<Scalar>& dq,
                         Mat<Scalar>& dk, Mat<Scalar>& dv) {
  const int heads = static_cast<int>(probs.size());
  const int dh = static_cast<int>(q.cols()) / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  dq.setZero(q.rows(), q.cols());
  dk.setZero(k.rows(), k.cols());
  dv.setZero(v.rows(), v.cols());
  for (int h = 0; h < heads; ++h) {
    const Mat<Scalar>& w = probs[h];
    const auto d_o = d_out.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = w * d_o;
    Mat<Scalar> dw = v.middleCols(h * dh, dh) * d_o.transpose();
    const RowVec<Scalar> inner = w.cwiseProduct(dw).colwise().sum();
    Mat<Scalar> dl = w.cwiseProduct(dw.rowwise() - inner);
    dk.middleCols(h * dh, dh).noalias() = scale * (dl * q.middleCols(h * dh, dh));
    dq.middleCols(h * dh, dh).noalias() = scale * (dl.transpose() * k.middleCols(h * dh, dh));
  }
}

}  // namespace

template <typename S>
ToyDiT<S>::ToyDiT(ModelConfig config) : config_(config) {
  config_.validate();
  const int D = config_.model_dim;
  const int T = config_.text_dim;
  const int Fd = config_.ffn_dim();
  in_w_ = add_tensor("in.w", config_.in_channels(), D);
  in_b_ = add_tensor("in.b", 1, D);
  t_w1_ = add_tensor("time.w1", config_.time_dim, D);
  t_b1_ = add_tensor("time.b1", 1, D);
  t_w2_ = add_tensor("time.w2", D, D);
  t_b2_ = add_tensor("time.b2", 1, D);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockIds ids{};
    ids.q = add_tensor(p + "attn.q", D, D);
    ids.k = add_tensor(p + "attn.k", D, D);
    ids.v = add_tensor(p + "attn.v", D, D);
    ids.o = add_tensor(p + "attn.o", D, D);
    ids.cq = add_tensor(p + "cross.q", D, D);
    ids.ck = add_tensor(p + "cross.k", T, D);
    ids.cv = add_tensor(p + "cross.v", T, D);
    ids.co = add_tensor(p + "cross.o", D, D);
    ids.mod_w = add_tensor(p + "mod.w", D, 2 * D);
    ids.mod_b = add_tensor(p + "mod.b", 1, 2 * D);
    ids.w1 = add_tensor(p + "ffn.w1", D, Fd);
    ids.b1 = add_tensor(p + "ffn.b1", 1, Fd);
    ids.w2 = add_tensor(p + "ffn.w2", Fd, D);
    ids.b2 = add_tensor(p + "ffn.b2", 1, D);
    block_ids_.push_back(ids);
  }
  out_w_ = add_tensor("out.w", D, config_.latent_dim);
  out_b_ = add_tensor("out.b", 1, config_.latent_dim);
  params_ = Vec<S>::Zero(tensors_.back().offset + tensors_.back().size());
  initialize();
}

template <typename S>
std::size_t ToyDiT<S>::add_tensor(const std::string& name, int rows, int cols) {
  const Eigen::Index offset = tensors_.empty() ? 0 : tensors_.back().offset + tensors_.back().size();
  tensors_.push_back({name, rows, cols, offset});
  return tensors_.size() - 1;
}

template <typename S>
std::size_t ToyDiT<S>::tensor_id(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  throw ContractViolation("unknown tensor: " + name);
}

template <typename S>
void ToyDiT<S>::initialize() {
  Rng rng(config_.init_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const TensorInfo& t : tensors_) {
    const bool bias = t.rows == 1;
    const bool zero = bias || t.name.ends_with("mod.w");
    if (zero) continue;
    double stddev = 1.0 / std::sqrt(static_cast<double>(t.rows));
    if (t.name == "out.w" || t.name.ends_with("ffn.w2") || t.name.ends_with(".o")) stddev *= 0.1;
    S* data = params_.data() + t.offset;
    for (Eigen::Index i = 0; i < t.size(); ++i) data[i] = static_cast<S>(stddev * gauss(rng));
  }
}

template <typename S>
Mat<S> ToyDiT<S>::forward(const AssembledInputT<S>& input, const Conditioning<S>& cond,
                          const AttentionMask& mask) const {
  Cache cache;
  return forward(input, cond, mask, cache);
}

template <typename S>
Mat<S> ToyDiT<S>::forward(const AssembledInputT<S>& input, const Conditioning<S>& cond, const AttentionMask& mask,
                          Cache& c) const {
  const int n = input.total_tokens();
  require(input.tokens.rows() == n && input.tokens.cols() == config_.in_channels(),
          "assembled input does not match the model's channel layout");
  require(input.latent_dim == config_.latent_dim, "latent dimension does not match the model");
  require(mask.total_tokens() == n && mask.video_tokens() == input.video_tokens(),
          "attention mask does not match the token layout");
  require(cond.text.cols() == config_.text_dim && cond.text.rows() >= 1, "text features have the wrong width");

  const int D = config_.model_dim;
  const int heads = config_.heads;
  c.input = input.tokens;
  c.text = cond.text;
  c.gate = mask.active_gate<S>();
  c.bias = mask.key_query_bias<S>();
  c.video_tokens = input.video_tokens();

  c.t_embed = timestep_embedding<S>(cond.timestep, config_.time_dim);
  c.t_pre = c.t_embed * tensor(t_w1_) + tensor(t_b1_);
  c.t_hidden = silu(c.t_pre);
  c.t_vec = c.t_hidden * tensor(t_w2_) + tensor(t_b2_);
  c.t_cond = silu(c.t_vec);

  Mat<S> x = input.tokens * tensor(in_w_);
  x.rowwise() += RowVec<S>(tensor(in_b_));
  x += positional_encoding<S>(input.video_frames, input.ref_frames, input.height, input.width, D);

  c.blocks.resize(config_.blocks);
  for (int b = 0; b < config_.blocks; ++b) {
    const BlockIds& id = block_ids_[b];
    BlockCache& bc = c.blocks[b];
    bc.x_in = x.array().colwise() * c.gate.array();

    bc.ln1 = layer_norm(bc.x_in, bc.inv1);
    bc.q.noalias() = bc.ln1 * tensor(id.q);
    bc.k.noalias() = bc.ln1 * tensor(id.k);
    bc.v.noalias() = bc.ln1 * tensor(id.v);
    bc.attn_out = multi_head(bc.q, bc.k, bc.v, heads, &c.bias, bc.probs);
    bc.x1 = bc.x_in + bc.attn_out * tensor(id.o);

    bc.ln2 = layer_norm(bc.x1, bc.inv2);
    bc.qc.noalias() = bc.ln2 * tensor(id.cq);
    bc.kc.noalias() = c.text * tensor(id.ck);
    bc.vc.noalias() = c.text * tensor(id.cv);
    bc.cross_out = multi_head<S>(bc.qc, bc.kc, bc.vc, heads, nullptr, bc.cross_probs);
    bc.x2 = bc.x1 + bc.cross_out * tensor(id.co);

    const RowVec<S> mod = c.t_cond * tensor(id.mod_w) + tensor(id.mod_b);
    bc.gamma = mod.head(D);
    bc.beta = mod.tail(D);
    bc.ln3 = layer_norm(bc.x2, bc.inv3);
    bc.modulated = (bc.ln3.array().rowwise() * (bc.gamma.array() + S(1))).matrix();
    bc.modulated.rowwise() += bc.beta;
    bc.pre_act = bc.modulated * tensor(id.w1);
    bc.pre_act.rowwise() += RowVec<S>(tensor(id.b1));
    bc.act = silu(bc.pre_act);
    x = bc.x2 + bc.act * tensor(id.w2);
    x.rowwise() += RowVec<S>(tensor(id.b2));
  }

  c.final_ln = layer_norm(x, c.final_inv);
  Mat<S> out = c.final_ln.topRows(c.video_tokens) * tensor(out_w_);
  out.rowwise() += RowVec<S>(tensor(out_b_));
  return out;
}

template <typename S>
void ToyDiT<S>::backward(const Cache& c, const Mat<S>& d_out, Vec<S>& grad) const {
  require(grad.size() == params_.size(), "gradient vector has the wrong size");
  require(d_out.rows() == c.video_tokens && d_out.cols() == config_.latent_dim, "output gradient has the wrong shape");
  auto g = [&](std::size_t id) {
    return ParamMap(grad.data() + tensors_[id].offset, tensors_[id].rows, tensors_[id].cols);
  };
  const int n = static_cast<int>(c.input.rows());
  const int D = config_.model_dim;

  const auto final_top = c.final_ln.topRows(c.video_tokens);
  g(out_w_).noalias() += final_top.transpose() * d_out;
  g(out_b_) += d_out.colwise().sum();
  Mat<S> d_ln = Mat<S>::Zero(n, D);
  d_ln.topRows(c.video_tokens).noalias() = d_out * tensor(out_w_).transpose();
  Mat<S> dx = layer_norm_backward(d_ln, c.final_ln, c.final_inv);

  RowVec<S> d_cond = RowVec<S>::Zero(D);
  Mat<S> dq, dk, dv;
  for (int b = config_.blocks - 1; b >= 0; --b) {
    const BlockIds& id = block_ids_[b];
    const BlockCache& bc = c.blocks[b];

    // FFN
    g(id.w2).noalias() += bc.act.transpose() * dx;
    g(id.b2) += dx.colwise().sum();
    Mat<S> d_pre = (dx * tensor(id.w2).transpose()).cwiseProduct(silu_grad(bc.pre_act));
    g(id.w1).noalias() += bc.modulated.transpose() * d_pre;
    g(id.b1) += d_pre.colwise().sum();
    const Mat<S> d_mod = d_pre * tensor(id.w1).transpose();
    RowVec<S> d_gb(2 * D);
    d_gb.head(D) = d_mod.cwiseProduct(bc.ln3).colwise().sum();
    d_gb.tail(D) = d_mod.colwise().sum();
    g(id.mod_w).noalias() += c.t_cond.transpose() * d_gb;
    g(id.mod_b) += d_gb;
    d_cond.noalias() += d_gb * tensor(id.mod_w).transpose();
    const Mat<S> d_ln3 = (d_mod.array().rowwise() * (bc.gamma.array() + S(1))).matrix();
    dx += layer_norm_backward(d_ln3, bc.ln3, bc.inv3);

    // cross-attention
    g(id.co).noalias() += bc.cross_out.transpose() * dx;
    const Mat<S> d_cross = dx * tensor(id.co).transpose();
    multi_head_backward(d_cross, bc.qc, bc.kc, bc.vc, bc.cross_probs, dq, dk, dv);
    g(id.cq).noalias() += bc.ln2.transpose() * dq;
    g(id.ck).noalias() += c.text.transpose() * dk;
    g(id.cv).noalias() += c.text.transpose() * dv;
    dx += layer_norm_backward<S>(dq * tensor(id.cq).transpose(), bc.ln2, bc.inv2);

    // self-attention
    g(id.o).noalias() += bc.attn_out.transpose() * dx;
    const Mat<S> d_attn = dx * tensor(id.o).transpose();
    multi_head_backward(d_attn, bc.q, bc.k, bc.v, bc.probs, dq, dk, dv);
    g(id.q).noalias() += bc.ln1.transpose() * dq;
    g(id.k).noalias() += bc.ln1.transpose() * dk;
    g(id.v).noalias() += bc.ln1.transpose() * dv;
    Mat<S> d_ln1 = dq * tensor(id.q).transpose();
    d_ln1.noalias() += dk * tensor(id.k).transpose();
    d_ln1.noalias() += dv * tensor(id.v).transpose();
    dx += layer_norm_backward(d_ln1, bc.ln1, bc.inv1);

    dx.array().colwise() *= c.gate.array();
  }

  g(in_w_).noalias() += c.input.transpose() * dx;
  g(in_b_) += dx.colwise().sum();

  const RowVec<S> d_vec = d_cond.cwiseProduct(silu_grad(c.t_vec));
  g(t_w2_).noalias() += c.t_hidden.transpose() * d_vec;
  g(t_b2_) += d_vec;
  const RowVec<S> d_pre = (d_vec * tensor(t_w2_).transpose()).cwiseProduct(silu_grad(c.t_pre));
  g(t_w1_).noalias() += c.t_embed.transpose() * d_pre;
  g(t_b1_) += d_pre;
}

template RowVec<float> timestep_embedding(float, int);
template RowVec<double> timestep_embedding(double, int);
template Mat<float> positional_encoding<float>(int, int, int, int, int);
template Mat<double> positional_encoding<double>(int, int, int, int, int);
template class ToyDiT<float>;
template class ToyDiT<double>;

}  // namespace saber
