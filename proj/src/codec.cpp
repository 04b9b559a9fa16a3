#include "saber/codec.hpp"

#include <Eigen/QR>

#include <sstream>

namespace saber {

void CodecConfig::validate() const {
  require(spatial_patch >= 1, "spatial patch must be at least 1");
}

VideoCodec::VideoCodec(CodecConfig config) : config_(config) {
  config_.validate();
  const int d = config_.latent_dim();
  Rng rng(config_.projection_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  projection_ = q.cast<float>();
}

VideoLatent VideoCodec::encode_video(const Video& frames) const {
  require(!frames.empty(), "video must contain at least one frame");
  const int p = config_.spatial_patch;
  const int H = frames.front().height;
  const int W = frames.front().width;
  require(H % p == 0 && W % p == 0, "frame size must be divisible by the spatial patch");
  for (const Image& f : frames) require(f.height == H && f.width == W, "frames differ in size");

  const int F = static_cast<int>(frames.size());
  const int Fl = latent_frame_count(F);
  const int pad = kTemporalCompression * Fl - F;
  const int h = H / p;
  const int w = W / p;
  const int d = latent_dim();

  // Space-to-depth: element order within a block is (frame-in-group, dy, dx, channel).
  Mat<float> blocks(Fl * h * w, d);
  for (int fl = 0; fl < Fl; ++fl) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int row = (fl * h + i) * w + j;
        int k = 0;
        for (int g = 0; g < kTemporalCompression; ++g) {
          const int padded = fl * kTemporalCompression + g;
          const Image& src = frames[std::max(padded - pad, 0)];
          for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) {
              for (int ch = 0; ch < 3; ++ch) blocks(row, k++) = src.at(i * p + dy, j * p + dx, ch);
            }
          }
        }
      }
    }
  }
  VideoLatent out{Fl, h, w, F, Mat<float>()};
  out.tokens.noalias() = blocks * projection_.transpose();
  return out;
}

Video VideoCodec::decode_video(const VideoLatent& latent) const {
  const int d = latent_dim();
  require(latent.channels() == d, "latent channel count does not match the codec");
  require(latent.tokens.rows() == latent.token_count(), "latent token count is inconsistent");
  const int p = config_.spatial_patch;
  const int Fl = latent.frames;
  const int F = latent.source_frames > 0 ? latent.source_frames : kTemporalCompression * (Fl - 1) + 1;
  require(latent_frame_count(F) == Fl, "latent frame count does not match its source frame count");
  const int pad = kTemporalCompression * Fl - F;
  const int h = latent.height;
  const int w = latent.width;

  const Mat<float> blocks = latent.tokens * projection_;
  Video frames(F, Image(h * p, w * p));
  for (int fl = 0; fl < Fl; ++fl) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int row = (fl * h + i) * w + j;
        int k = 0;
        for (int g = 0; g < kTemporalCompression; ++g) {
          const int target = fl * kTemporalCompression + g - pad;
          for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) {
              for (int ch = 0; ch < 3; ++ch, ++k) {
                if (target < 0) continue;
                frames[target].at(i * p + dy, j * p + dx, ch) = std::clamp(blocks(row, k), -1.0f, 1.0f);
              }
            }
          }
        }
      }
    }
  }
  return frames;
}

VideoLatent VideoCodec::encode_reference(const Image& image) const {
  return encode_video(Video{image});
}

Image VideoCodec::decode_reference(const VideoLatent& latent) const {
  require(latent.frames == 1, "reference latents hold exactly one frame");
  VideoLatent single = latent;
  single.source_frames = 1;
  return decode_video(single).front();
}

const VideoLatent& VideoCodec::zero_latent(int frames, int height, int width) const {
  std::lock_guard lock(cache_mutex_);
  const auto key = std::make_tuple(frames, height, width);
  auto it = zero_cache_.find(key);
  if (it == zero_cache_.end()) {
    it = zero_cache_.emplace(key, encode_video(Video(frames, Image(height, width)))).first;
  }
  return it->second;
}

LatentMask resize_mask_to_latent(const BinaryMask& mask, int height, int width) {
  require(height >= 1 && width >= 1 && height <= mask.height() && width <= mask.width(),
          "latent mask must not exceed the pixel mask resolution");
  LatentMask out = LatentMask::zeros(height, width);
  const int H = mask.height();
  const int W = mask.width();
  for (int r = 0; r < H; ++r) {
    const int i = static_cast<int>(static_cast<long>(r) * height / H);
    for (int c = 0; c < W; ++c) {
      if (!mask.at(r, c)) continue;
      const int j = static_cast<int>(static_cast<long>(c) * width / W);
      out.cells.row(i * width + j).setOnes();
    }
  }
  return out;
}

TextEncoder::TextEncoder(int dim, std::uint64_t vocab_seed) : seed_(vocab_seed) {
  require(dim >= 1, "text feature dimension must be positive");
  Rng rng(vocab_seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  table_.resize(kTableRows, dim);
  for (int i = 0; i < kTableRows; ++i) {
    for (int j = 0; j < dim; ++j) table_(i, j) = gauss(rng);
  }
}

int TextEncoder::token_row(std::string_view token) {
  // FNV-1a
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : token) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return 1 + static_cast<int>(hash % (kTableRows - 1));
}

TextFeatures TextEncoder::encode(std::string_view prompt) const {
  std::vector<int> rows;
  std::istringstream in{std::string(prompt)};
  std::string token;
  while (in >> token) rows.push_back(token_row(token));
  if (rows.empty()) rows.push_back(0);

  TextFeatures out{Mat<float>(static_cast<Eigen::Index>(rows.size()), dim())};
  for (std::size_t i = 0; i < rows.size(); ++i) out.data.row(static_cast<Eigen::Index>(i)) = table_.row(rows[i]);
  return out;
}

TextFeatures encode_text(std::string_view prompt, int dim, std::uint64_t vocab_seed) {
  return TextEncoder(dim, vocab_seed).encode(prompt);
}

}  // namespace saber
