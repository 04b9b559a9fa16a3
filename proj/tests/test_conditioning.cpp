#include "saber/conditioning.hpp"

#include <doctest.h>

#include <cmath>

using namespace saber;

namespace {

VideoLatentT<double> random_latent(int frames, int h, int w, int d, Rng& rng) {
  std::normal_distribution<double> g;
  VideoLatentT<double> z = VideoLatentT<double>::zeros(frames, h, w, d);
  for (Eigen::Index i = 0; i < z.tokens.size(); ++i) z.tokens.data()[i] = g(rng);
  return z;
}

LatentMask random_mask(int h, int w, double p, Rng& rng) {
  LatentMask m = LatentMask::zeros(h, w);
  for (int i = 0; i < h * w; ++i) {
    if (uniform(rng, 0, 1) < p) m.cells.row(i).setOnes();
  }
  return m;
}

Mat<double> gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> g;
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Softmax over the gathered admissible keys of each query, one row at a time.
Mat<double> gathered_attention(const Mat<double>& q, const Mat<double>& k, const Mat<double>& v,
                               const AttentionMask& mask) {
  Mat<double> out(q.rows(), v.cols());
  for (int i = 0; i < q.rows(); ++i) {
    std::vector<int> keys;
    for (int j = 0; j < k.rows(); ++j) {
      if (mask.admits(i, j)) keys.push_back(j);
    }
    Eigen::VectorXd logits(keys.size());
    for (std::size_t a = 0; a < keys.size(); ++a) logits[a] = q.row(i).dot(k.row(keys[a])) / std::sqrt(double(q.cols()));
    const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    const Eigen::VectorXd p = e / e.sum();
    out.row(i).setZero();
    for (std::size_t a = 0; a < keys.size(); ++a) out.row(i) += p[a] * v.row(keys[a]);
  }
  return out;
}

}  // namespace

TEST_CASE("noise interpolation endpoints") {
  Rng rng(41);
  const auto z0 = random_latent(2, 3, 3, 4, rng);
  const Mat<double> eps = gaussian(18, 4, rng);
  CHECK(noise_latent(z0, 0.0, eps).tokens == z0.tokens);
  CHECK(noise_latent(z0, 1.0, eps).tokens == eps);
  CHECK(noise_latent(z0, 0.25, eps).tokens.isApprox(0.75 * z0.tokens + 0.25 * eps));
  CHECK_THROWS_AS(noise_latent(z0, 1.5, eps), ContractViolation);
}

TEST_CASE("assembled layout for 21 video frames and 2 references") {
  Rng rng(42);
  const int h = 16, w = 16, d = 48;
  const auto z_t = random_latent(21, h, w, d, rng);
  const auto z_zero = random_latent(21, h, w, d, rng);
  const std::vector<VideoLatentT<double>> refs{random_latent(1, h, w, d, rng), random_latent(1, h, w, d, rng)};
  const std::vector<LatentMask> masks{random_mask(h, w, 0.3, rng), random_mask(h, w, 0.6, rng)};
  const auto in = assemble_input<double>(z_t, refs, masks, z_zero);
  CHECK(in.tokens.rows() == (21 + 2) * 16 * 16);
  CHECK(in.tokens.cols() == 100);
  CHECK(extract_video(in).tokens == z_t.tokens);
  CHECK(extract_zero_latent(in).tokens == z_zero.tokens);
  const auto back = extract_refs(in);
  const auto back_aux = extract_refs(in, true);
  const auto back_masks = extract_ref_masks(in);
  for (int k = 0; k < 2; ++k) {
    CHECK(back[k].tokens == refs[k].tokens);
    CHECK(back_aux[k].tokens == refs[k].tokens);
    CHECK((back_masks[k].cells == masks[k].cells).all());
  }
  for (const LatentMask& m : extract_zero_masks(in)) CHECK(m.valid_count() == 0);
}

TEST_CASE("assembly rejects malformed inputs") {
  Rng rng(43);
  const auto z_t = random_latent(2, 3, 3, 4, rng);
  const auto z_zero = random_latent(2, 3, 3, 4, rng);
  std::vector<LatentMask> m_zero(2, LatentMask::zeros(3, 3));
  m_zero[1].cells.row(0).setOnes();
  const std::vector<VideoLatentT<double>> none;
  const std::vector<LatentMask> no_masks;
  CHECK_THROWS_AS(assemble_input<double>(z_t, none, no_masks, z_zero, m_zero), ContractViolation);
  const std::vector<VideoLatentT<double>> wrong{random_latent(1, 3, 4, 4, rng)};
  const std::vector<LatentMask> one{LatentMask::zeros(3, 3)};
  CHECK_THROWS_AS(assemble_input<double>(z_t, wrong, one, z_zero), ContractViolation);
  const std::vector<VideoLatentT<double>> ok{random_latent(1, 3, 3, 4, rng)};
  CHECK_THROWS_AS(assemble_input<double>(z_t, ok, no_masks, z_zero), ContractViolation);
}

TEST_CASE("admissibility rules") {
  // 4 video tokens, references [valid, invalid, valid]
  const AttentionMask m(4, {1, 0, 1});
  for (int q = 0; q < 4; ++q) {
    for (int k = 0; k < 4; ++k) CHECK(m.admits(q, k));
    CHECK(m.admits(q, 4));
    CHECK_FALSE(m.admits(q, 5));
    CHECK(m.admits(q, 6));
  }
  for (int q : {4, 6}) {
    for (int k = 0; k < 4; ++k) CHECK(m.admits(q, k));
    CHECK(m.admits(q, 4));
    CHECK_FALSE(m.admits(q, 5));
    CHECK(m.admits(q, 6));
  }
  for (int k = 0; k < 7; ++k) CHECK(m.admits(5, k) == (k == 5));
  const auto rc = m.rule_counts();
  CHECK(rc.video_to_video == 16);
  CHECK(rc.video_to_ref == 8);
  CHECK(rc.ref_to_video == 8);
  CHECK(rc.ref_to_ref == 4);
  CHECK(rc.invalid_self == 1);
  long total = 0;
  const auto dense = m.dense();
  for (int q = 0; q < 7; ++q) total += m.admissible_count(q);
  CHECK(total == dense.count());
  CHECK(total == rc.video_to_video + rc.video_to_ref + rc.ref_to_video + rc.ref_to_ref + rc.invalid_self);
}

TEST_CASE("half-valid reference: video queries see n_v + n_r / 2 keys") {
  const int h = 4, w = 4;
  LatentMask m = LatentMask::zeros(h, w);
  for (int i = 0; i < 8; ++i) m.cells.row(i).setOnes();
  const std::vector<LatentMask> masks{m};
  const AttentionMask a = build_attention_mask(2, h, w, masks);
  CHECK(a.video_tokens() == 32);
  CHECK(a.ref_tokens() == 16);
  for (int q = 0; q < 32; ++q) CHECK(a.admissible_count(q) == 32 + 8);
  const AttentionMask open = permissive_attention_mask(2, h, w, 1);
  for (int q = 0; q < open.total_tokens(); ++q) CHECK(open.admissible_count(q) == 48);
}

TEST_CASE("bias and gate layouts") {
  const AttentionMask m(2, {0, 1});
  const Mat<double> bias = m.key_query_bias<double>();
  for (int q = 0; q < 4; ++q) {
    for (int k = 0; k < 4; ++k) CHECK((bias(k, q) == 0.0) == m.admits(q, k));
  }
  const Vec<float> gate = m.active_gate<float>();
  CHECK(gate[0] == 1.0f);
  CHECK(gate[2] == 0.0f);
  CHECK(gate[3] == 1.0f);
}

TEST_CASE("masked attention equals gathered softmax") {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const int nv = uniform_int(rng, 1, 16);
    const int nr = uniform_int(rng, 0, 32 - nv);
    std::vector<std::uint8_t> valid(nr);
    for (auto& v : valid) v = uniform(rng, 0, 1) < 0.5;
    const AttentionMask mask(nv, valid);
    const int dk = uniform_int(rng, 1, 8);
    const Mat<double> q = gaussian(nv + nr, dk, rng);
    const Mat<double> k = gaussian(nv + nr, dk, rng);
    const Mat<double> v = gaussian(nv + nr, 3, rng);
    const Mat<double> got = masked_attention(q, k, v, mask);
    CHECK((got - gathered_attention(q, k, v, mask)).cwiseAbs().maxCoeff() < 1e-6);

    const Mat<double> w = attention_weights<double>(q, k, nullptr);
    CHECK((w.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("invalid reference values never leak") {
  Rng rng(45);
  const int nv = 6;
  const std::vector<std::uint8_t> valid{1, 0, 0, 1, 0};
  const AttentionMask mask(nv, valid);
  const Mat<double> q = gaussian(11, 4, rng);
  const Mat<double> k = gaussian(11, 4, rng);
  Mat<double> v = gaussian(11, 4, rng);
  const Mat<double> before = masked_attention(q, k, v, mask);
  Mat<double> k2 = k;
  for (int r : {7, 8, 10}) {
    v.row(r) = gaussian(1, 4, rng);
    k2.row(r) = gaussian(1, 4, rng);
  }
  const Mat<double> after = masked_attention(q, k2, v, mask);
  for (int i = 0; i < 11; ++i) {
    if (mask.active(i)) CHECK((before.row(i) - after.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax needs at least one admissible key") {
  Mat<double> logits = Mat<double>::Constant(3, 2, -std::numeric_limits<double>::infinity());
  logits(1, 0) = 0.0;
  CHECK_THROWS_AS(softmax_columns(logits), ContractViolation);
}
