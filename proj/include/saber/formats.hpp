#pragma once

#include "saber/codec.hpp"
#include "saber/model.hpp"
#include "saber/synth.hpp"

#include <filesystem>

namespace saber {

/// Frame directory: frame_00000.png ... plus meta.txt (frames, size, fps, caption, scene).
void write_video_dir(const std::filesystem::path& dir, const SyntheticSample& sample, double fps = 8.0);
SyntheticSample read_video_dir(const std::filesystem::path& dir);
/// Frames only (frame_*.png in name order).
Video read_frames(const std::filesystem::path& dir);

/// One video directory per sample: video_00000/, video_00001/, ...
void write_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples);
std::vector<SyntheticSample> read_dataset(const std::filesystem::path& dir);

/// Binary latent: nine little-endian int32 header fields
/// (magic, version, frames, height, width, channels, source_frames, seed_lo, seed_hi)
/// followed by token-major float32 data.
void write_latent(const std::filesystem::path& path, const VideoLatent& latent, std::uint64_t seed = 0);
VideoLatent read_latent(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

struct CheckpointMeta {
  CodecConfig codec;
  std::uint64_t text_seed = 7;
  int frames = 0;  // training clip shape, informational
  int height = 0;
  int width = 0;
};

/// Plain-text header (configuration and one "tensor name rows cols" line per tensor) ending in
/// "end_header", then the parameters as little-endian float32.
void write_checkpoint(const std::filesystem::path& path, const ToyDiT<float>& model, const CheckpointMeta& meta);
ToyDiT<float> read_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace saber
