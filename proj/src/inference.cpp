#include "saber/inference.hpp"

#include <algorithm>
#include <cmath>

namespace saber {

void SamplerConfig::validate() const {
  if (steps < 1) throw ConfigurationError("sampler needs at least one step");
  if (!(guidance_scale >= 0) || !std::isfinite(guidance_scale))
    throw ConfigurationError("guidance scale must be finite and non-negative");
}

BinaryMask SuppliedMaskSegmenter::segment(const Image& image) const {
  require(mask_.height() == image.height && mask_.width() == image.width, "supplied mask does not match the image size");
  return mask_;
}

BinaryMask ChromaSegmenter::segment(const Image& image) const {
  const int H = image.height;
  const int W = image.width;
  require(H >= 3 && W >= 3, "image too small to segment");
  float bg[3];
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<float> border;
    for (int c = 0; c < W; ++c) {
      border.push_back(image.at(0, c, ch));
      border.push_back(image.at(H - 1, c, ch));
    }
    for (int r = 1; r < H - 1; ++r) {
      border.push_back(image.at(r, 0, ch));
      border.push_back(image.at(r, W - 1, ch));
    }
    auto mid = border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2);
    std::nth_element(border.begin(), mid, border.end());
    bg[ch] = *mid;
  }
  Eigen::ArrayXf dist(H * W);
  for (int i = 0; i < H * W; ++i) {
    float s = 0;
    for (int ch = 0; ch < 3; ++ch) s += (image.data[3 * i + ch] - bg[ch]) * (image.data[3 * i + ch] - bg[ch]);
    dist[i] = std::sqrt(s);
  }
  const float peak = dist.maxCoeff();
  if (!(peak >= min_contrast_))
    throw SegmentationError("no foreground found; use background-scene mode or supply a mask");
  BinaryMask mask(H, W);
  for (int i = 0; i < H * W; ++i) {
    if (dist[i] >= 0.5f * peak) mask.set(i / W, i % W, true);
  }
  return mask;
}

BinaryMask segment_subject(const Image& image, const Segmenter& segmenter) {
  BinaryMask mask = segmenter.segment(image);
  if (mask.empty()) throw SegmentationError("segmentation is empty; use background-scene mode or supply a mask");
  return mask;
}

PreparedReference resize_and_pad(const Image& image, const BinaryMask& mask, int height, int width) {
  require(height >= 1 && width >= 1, "target size must be positive");
  require(mask.height() == image.height && mask.width() == image.width, "mask does not match the image size");
  const int Hk = image.height;
  const int Wk = image.width;
  const double s = std::min(static_cast<double>(height) / Hk, static_cast<double>(width) / Wk);
  const int nh = std::clamp(static_cast<int>(std::lround(s * Hk)), 1, height);
  const int nw = std::clamp(static_cast<int>(std::lround(s * Wk)), 1, width);
  const int top = (height - nh) / 2;
  const int left = (width - nw) / 2;
  const double ry = static_cast<double>(Hk) / nh;
  const double rx = static_cast<double>(Wk) / nw;

  const Image masked = apply_mask(image, mask);
  PreparedReference out{Image(height, width), BinaryMask(height, width)};
  for (int y = 0; y < nh; ++y) {
    const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, Hk - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, Hk - 1);
    const float fy = static_cast<float>(sy - y0);
    const int my = std::min(static_cast<int>((y + 0.5) * ry), Hk - 1);
    for (int x = 0; x < nw; ++x) {
      const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, Wk - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, Wk - 1);
      const float fx = static_cast<float>(sx - x0);
      for (int ch = 0; ch < 3; ++ch) {
        const float top_row = (1 - fx) * masked.at(y0, x0, ch) + fx * masked.at(y0, x1, ch);
        const float bottom_row = (1 - fx) * masked.at(y1, x0, ch) + fx * masked.at(y1, x1, ch);
        out.image.at(top + y, left + x, ch) = (1 - fy) * top_row + fy * bottom_row;
      }
      const int mx = std::min(static_cast<int>((x + 0.5) * rx), Wk - 1);
      if (mask.at(my, mx)) out.mask.set(top + y, left + x, true);
    }
  }
  return out;
}

PreparedReference prepare_reference(const ReferenceInput& ref, int height, int width, const Segmenter& segmenter) {
  require((ref.image.data.abs() <= 1.0f).all(), "reference image values must lie in [-1, 1]");
  BinaryMask mask;
  if (ref.mode == ReferenceMode::BackgroundScene) {
    mask = BinaryMask::full(ref.image.height, ref.image.width);
  } else if (ref.mask) {
    mask = segment_subject(ref.image, SuppliedMaskSegmenter(*ref.mask));
  } else {
    mask = segment_subject(ref.image, segmenter);
  }
  return resize_and_pad(ref.image, mask, height, width);
}

std::vector<double> timestep_grid(int steps) {
  require(steps >= 1, "sampler needs at least one step");
  std::vector<double> grid(steps + 1);
  for (int i = 0; i <= steps; ++i) grid[i] = 1.0 - static_cast<double>(i) / steps;
  grid[steps] = 0.0;
  return grid;
}

GenerationResult sample_video(const ToyDiT<float>& model, const VideoCodec& codec, const TextEncoder& text,
                              const std::vector<ReferenceInput>& refs, const std::string& prompt, int frames,
                              int height, int width, const SamplerConfig& cfg, const Segmenter& segmenter) {
  const ModelConfig& mc = model.config();
  if (mc.latent_dim != codec.latent_dim())
    throw ConfigurationError("checkpoint latent_dim " + std::to_string(mc.latent_dim) + " does not match codec latent_dim " +
                             std::to_string(codec.latent_dim()));
  if (mc.text_dim != text.dim()) throw ConfigurationError("checkpoint text_dim does not match the text encoder");
  const int p = codec.config().spatial_patch;
  require(frames >= 1, "frame count must be at least 1");
  require(height % p == 0 && width % p == 0, "output size must be divisible by the spatial patch");

  GenerationResult out;
  SamplerInputs<float> in;
  in.frames = latent_frame_count(frames);
  in.height = height / p;
  in.width = width / p;
  in.latent_dim = codec.latent_dim();
  in.source_frames = frames;
  for (const ReferenceInput& ref : refs) {
    PreparedReference prepared = prepare_reference(ref, height, width, segmenter);
    in.refs.push_back(codec.encode_reference(prepared.image));
    in.ref_masks.push_back(resize_mask_to_latent(prepared.mask, in.height, in.width));
    out.references.push_back(std::move(prepared));
  }
  in.z_zero = codec.zero_latent(frames, height, width);
  in.text = text.encode(prompt).data;
  in.null_text = text.encode("").data;
  in.attention = build_attention_mask(in.frames, in.height, in.width, in.ref_masks);

  out.latent = sample_latent(model, in, cfg);
  out.video = codec.decode_video(out.latent);
  return out;
}

Image make_grid(const std::vector<Image>& images, int columns, int gap, float fill) {
  require(!images.empty(), "grid needs at least one image");
  require(columns >= 1 && gap >= 0, "grid layout must be positive");
  const int h = images.front().height;
  const int w = images.front().width;
  for (const Image& img : images) require(img.height == h && img.width == w, "grid images differ in size");
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  Image grid = Image::filled(rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, fill, fill, fill);
  for (int k = 0; k < n; ++k) {
    const int r0 = (k / cols) * (h + gap);
    const int c0 = (k % cols) * (w + gap);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        for (int ch = 0; ch < 3; ++ch) grid.at(r0 + r, c0 + c, ch) = images[k].at(r, c, ch);
      }
    }
  }
  return grid;
}

}  // namespace saber
