#pragma once

#include "saber/model.hpp"

#include <concepts>

namespace saber {

/// Anything that maps (z_in, cond, mask) to a velocity over the video tokens.
template <typename M>
concept VelocityModel = requires(const M& m, const AssembledInputT<typename M::Scalar>& in,
                                 const Conditioning<typename M::Scalar>& c, const AttentionMask& a) {
  { m.predict(in, c, a) } -> std::convertible_to<Mat<typename M::Scalar>>;
};

template <typename Scalar>
struct FlowDraw {
  Scalar t = 0;
  Mat<Scalar> eps;
};

/// t ~ U[0, 1], eps ~ N(0, I) of the given token-major shape.
template <typename Scalar>
FlowDraw<Scalar> draw_flow(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  FlowDraw<Scalar> d;
  d.t = static_cast<Scalar>(uniform(rng, 0.0, 1.0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  d.eps.resize(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) d.eps(i, j) = static_cast<Scalar>(gauss(rng));
  }
  return d;
}

/// Everything needed to evaluate the flow loss for one video except the (t, eps) draw.
template <typename Scalar>
struct TrainingExampleT {
  VideoLatentT<Scalar> z0;
  std::vector<VideoLatentT<Scalar>> refs;
  std::vector<LatentMask> ref_masks;
  VideoLatentT<Scalar> z_zero;
  Mat<Scalar> text;
  AttentionMask attention;

  AssembledInputT<Scalar> assemble(const VideoLatentT<Scalar>& z_t) const {
    return assemble_input<Scalar>(z_t, refs, ref_masks, z_zero);
  }

  template <typename Other>
  TrainingExampleT<Other> cast() const {
    TrainingExampleT<Other> out;
    out.z0 = z0.template cast<Other>();
    for (const auto& r : refs) out.refs.push_back(r.template cast<Other>());
    out.ref_masks = ref_masks;
    out.z_zero = z_zero.template cast<Other>();
    out.text = text.template cast<Other>();
    out.attention = attention;
    return out;
  }
};

using TrainingExample = TrainingExampleT<float>;

template <typename Scalar>
Mat<Scalar> velocity_target(const VideoLatentT<Scalar>& z0, const FlowDraw<Scalar>& draw) {
  return z0.tokens - draw.eps;
}

/// Mean over video-token elements of ((z0 - eps) - prediction)^2.
template <VelocityModel M>
typename M::Scalar fm_loss(const M& model, const TrainingExampleT<typename M::Scalar>& ex,
                           const FlowDraw<typename M::Scalar>& draw) {
  using S = typename M::Scalar;
  const VideoLatentT<S> z_t = noise_latent<S>(ex.z0, draw.t, draw.eps);
  const Mat<S> pred = model.predict(ex.assemble(z_t), Conditioning<S>{ex.text, draw.t}, ex.attention);
  require(pred.rows() == ex.z0.tokens.rows() && pred.cols() == ex.z0.tokens.cols(),
          "velocity prediction has the wrong shape");
  return (velocity_target(ex.z0, draw) - pred).squaredNorm() / static_cast<S>(pred.size());
}

template <VelocityModel M>
typename M::Scalar fm_loss(const M& model, const TrainingExampleT<typename M::Scalar>& ex, Rng& rng) {
  return fm_loss(model, ex, draw_flow<typename M::Scalar>(rng, ex.z0.tokens.rows(), ex.z0.tokens.cols()));
}

/// Loss for one example; adds its gradient (scaled by `weight`) into `grad`.
template <typename Scalar>
Scalar fm_loss_and_gradient(const ToyDiT<Scalar>& model, const TrainingExampleT<Scalar>& ex,
                            const FlowDraw<Scalar>& draw, Vec<Scalar>& grad, Scalar weight = 1) {
  const VideoLatentT<Scalar> z_t = noise_latent<Scalar>(ex.z0, draw.t, draw.eps);
  typename ToyDiT<Scalar>::Cache cache;
  const Mat<Scalar> pred = model.forward(ex.assemble(z_t), Conditioning<Scalar>{ex.text, draw.t}, ex.attention, cache);
  const Mat<Scalar> diff = pred - velocity_target(ex.z0, draw);
  const Scalar n = static_cast<Scalar>(diff.size());
  model.backward(cache, (Scalar(2) * weight / n) * diff, grad);
  return diff.squaredNorm() / n;
}

/// Exact velocity of the linear path toward a known clean latent: (z0 - z_t) / t.
template <typename Scalar_>
class OracleVelocity {
 public:
  using Scalar = Scalar_;

  explicit OracleVelocity(Mat<Scalar> z0) : z0_(std::move(z0)) {}

  Mat<Scalar> predict(const AssembledInputT<Scalar>& in, const Conditioning<Scalar>& cond,
                      const AttentionMask&) const {
    require(cond.timestep > 0, "oracle velocity is undefined at t = 0");
    const auto z_t = in.tokens.topLeftCorner(in.video_tokens(), in.latent_dim);
    require(z_t.rows() == z0_.rows() && z_t.cols() == z0_.cols(), "oracle latent shape mismatch");
    return (z0_ - z_t) / cond.timestep;
  }

 private:
  Mat<Scalar> z0_;
};

}  // namespace saber
