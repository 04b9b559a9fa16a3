// Quick invariant checks behind `saber selftest`.

#include "saber/inference.hpp"
#include "saber/trainer.hpp"

#include <cmath>
#include <functional>
#include <iostream>

using namespace saber;

namespace {

bool masks_exact(std::uint64_t seed) {
  for (ShapeKind kind : kAllShapeKinds) {
    for (int i = 0; i < 20; ++i) {
      Rng rng(mix_seed(mix_seed(seed, 11), i));
      MaskSpec spec{kind, 64, 64, sample_ratio(RatioMixture::standard(), rng), rng()};
      const BinaryMask m = generate_mask(spec);
      if (m.foreground_count() != spec.target_count()) return false;
      if (m.foreground_count() > 0 && count_components(m) != 1) return false;
    }
  }
  return true;
}

bool augment_contained(std::uint64_t seed) {
  for (int i = 0; i < 50; ++i) {
    Rng rng(mix_seed(mix_seed(seed, 12), i));
    const BinaryMask m = generate_mask({ShapeKind::FourierBlob, 32, 32, 0.2, rng()});
    const MaskedReference r = make_masked_reference(Image::filled(32, 32, 0.5f, -0.5f, 0.25f), m, AugmentConfig{}, rng);
    if (!r.params.is_identity() && !strictly_inside(r.mask)) return false;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        if (!r.mask.at(y, x) && (r.masked_frame.at(y, x, 0) != 0 || r.masked_frame.at(y, x, 1) != 0)) return false;
      }
    }
  }
  return true;
}

bool codec_round_trip(std::uint64_t seed) {
  const VideoCodec codec;
  Rng rng(mix_seed(seed, 13));
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Video v(6, Image(8, 12));
  for (Image& f : v) {
    for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data[i] = u(rng);
  }
  const Video back = codec.decode_video(codec.encode_video(v));
  float err = 0;
  for (std::size_t f = 0; f < v.size(); ++f) err = std::max(err, (back[f].data - v[f].data).abs().maxCoeff());
  return back.size() == v.size() && err < 1e-5f;
}

bool layout_round_trip(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 14));
  const int d = 6, h = 3, w = 4;
  auto random_latent = [&](int frames) {
    VideoLatentT<double> z = VideoLatentT<double>::zeros(frames, h, w, d);
    std::normal_distribution<double> g;
    for (Eigen::Index i = 0; i < z.tokens.size(); ++i) z.tokens.data()[i] = g(rng);
    return z;
  };
  const auto z_t = random_latent(2);
  const auto z_zero = random_latent(2);
  std::vector<VideoLatentT<double>> refs{random_latent(1), random_latent(1)};
  std::vector<LatentMask> masks(2, LatentMask::zeros(h, w));
  masks[0].cells.row(5).setOnes();
  const auto in = assemble_input<double>(z_t, refs, masks, z_zero);
  const auto back_refs = extract_refs(in);
  return extract_video(in).tokens == z_t.tokens && extract_zero_latent(in).tokens == z_zero.tokens &&
         back_refs.size() == 2 && back_refs[1].tokens == refs[1].tokens && extract_ref_masks(in)[0].cells.isApprox(masks[0].cells);
}

bool attention_oracle(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 15));
  std::normal_distribution<double> g;
  const int nv = 6, nr = 6;
  std::vector<std::uint8_t> valid{1, 0, 1, 1, 0, 0};
  const AttentionMask mask(nv, valid);
  Mat<double> q(nv + nr, 4), k(nv + nr, 4), v(nv + nr, 3);
  for (auto* m : {&q, &k, &v}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = g(rng);
  }
  const Mat<double> out = masked_attention(q, k, v, mask);
  for (int i = 0; i < nv + nr; ++i) {
    double denom = 0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(3);
    for (int j = 0; j < nv + nr; ++j) {
      if (!mask.admits(i, j)) continue;
      const double e = std::exp(q.row(i).dot(k.row(j)) / 2.0);
      denom += e;
      acc += e * v.row(j);
    }
    if ((out.row(i) - acc / denom).cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

bool gradient_check(std::uint64_t seed) {
  ModelConfig mc;
  mc.blocks = 1;
  mc.model_dim = 8;
  mc.heads = 2;
  mc.text_dim = 4;
  mc.latent_dim = 3;
  mc.time_dim = 4;
  mc.ffn_mult = 2;
  ToyDiT<double> model(mc);
  Rng rng(mix_seed(seed, 16));
  std::normal_distribution<double> g(0.0, 0.3);
  for (Eigen::Index i = 0; i < model.parameter_count(); ++i) model.parameters()[i] = g(rng);
  TrainingExampleT<double> ex;
  ex.z0 = VideoLatentT<double>::zeros(1, 2, 2, 3);
  for (Eigen::Index i = 0; i < ex.z0.tokens.size(); ++i) ex.z0.tokens.data()[i] = g(rng);
  ex.z_zero = VideoLatentT<double>::zeros(1, 2, 2, 3);
  ex.refs = {ex.z0};
  LatentMask m = LatentMask::zeros(2, 2);
  m.cells.row(1).setOnes();
  ex.ref_masks = {m};
  ex.text = Mat<double>(2, 4);
  for (Eigen::Index i = 0; i < ex.text.size(); ++i) ex.text.data()[i] = g(rng);
  ex.attention = build_attention_mask(1, 2, 2, ex.ref_masks);
  const auto draw = draw_flow<double>(rng, 4, 3);
  Vec<double> grad = Vec<double>::Zero(model.parameter_count());
  fm_loss_and_gradient(model, ex, draw, grad);
  for (Eigen::Index i = 0; i < model.parameter_count(); i += 7) {
    const double keep = model.parameters()[i];
    const double h = 1e-5;
    model.parameters()[i] = keep + h;
    const double up = fm_loss(model, ex, draw);
    model.parameters()[i] = keep - h;
    const double down = fm_loss(model, ex, draw);
    model.parameters()[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    if (rel > 1e-3) return false;
  }
  return true;
}

bool sampler_exact(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 17));
  std::normal_distribution<double> g;
  SamplerInputs<double> in;
  in.frames = 2;
  in.height = 2;
  in.width = 2;
  in.latent_dim = 3;
  in.source_frames = 5;
  in.z_zero = VideoLatentT<double>::zeros(2, 2, 2, 3);
  in.text = Mat<double>::Zero(1, 4);
  in.null_text = in.text;
  in.attention = build_attention_mask(2, 2, 2, {});
  Mat<double> z0(8, 3);
  for (Eigen::Index i = 0; i < z0.size(); ++i) z0.data()[i] = g(rng);
  const OracleVelocity<double> oracle(z0);
  for (int steps : {1, 10, 50}) {
    const auto z = sample_latent(oracle, in, SamplerConfig{steps, 5.0, seed});
    if ((z.tokens - z0).cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

}  // namespace

int run_selftest(std::ostream& out, std::uint64_t seed) {
  const std::pair<const char*, std::function<bool(std::uint64_t)>> checks[] = {
      {"mask exact count and connectivity", masks_exact},
      {"augmentation containment", augment_contained},
      {"codec round trip", codec_round_trip},
      {"input layout round trip", layout_round_trip},
      {"masked attention oracle", attention_oracle},
      {"gradient check", gradient_check},
      {"oracle sampler exactness", sampler_exact},
  };
  int failures = 0;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    try {
      ok = check(seed);
    } catch (const std::exception& e) {
      out << "  exception: " << e.what() << "\n";
    }
    out << (ok ? "PASS " : "FAIL ") << name << "\n";
    failures += ok ? 0 : 1;
  }
  return failures;
}
