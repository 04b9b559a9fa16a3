#include "saber/formats.hpp"

#include "saber/image_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace saber {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr std::int32_t kLatentMagic = 0x4C524253;  // "SBRL"
constexpr std::int32_t kLatentVersion = 1;

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", i);
  return buf;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

int shape_index(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (to_string(static_cast<ShapeType>(i)) == name) return i;
  }
  throw FormatError("unknown shape type '" + std::string(name) + "'");
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
  if (!out) throw FormatError("failed writing " + path.string());
}

void write_video_dir(const fs::path& dir, const SyntheticSample& sample, double fps) {
  require(!sample.video.empty(), "cannot write an empty video");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < sample.video.size(); ++i) write_png(dir / frame_name(static_cast<int>(i)), sample.video[i]);
  std::ostringstream meta;
  meta.precision(17);
  meta << "frames " << sample.video.size() << "\n"
       << "height " << sample.video.front().height << "\n"
       << "width " << sample.video.front().width << "\n"
       << "fps " << fps << "\n"
       << "caption " << sample.caption << "\n";
  if (!sample.scene.shapes.empty()) {
    meta << "background " << sample.scene.background << "\n";
    for (const MovingShape& s : sample.scene.shapes) {
      meta << "shape " << to_string(s.type) << ' ' << s.color << ' ' << s.radius << ' ' << s.position.x() << ' '
           << s.position.y() << ' ' << s.velocity.x() << ' ' << s.velocity.y() << "\n";
    }
  }
  write_text_file(dir / "meta.txt", meta.str());
}

Video read_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("frame_") && name.ends_with(".png")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("no frame_*.png files in " + dir.string());
  Video video;
  for (const fs::path& f : files) video.push_back(read_png(f));
  for (const Image& img : video) {
    if (!img.same_shape(video.front())) throw FormatError("frames in " + dir.string() + " differ in size");
  }
  return video;
}

SyntheticSample read_video_dir(const fs::path& dir) {
  SyntheticSample sample;
  sample.video = read_frames(dir);
  const fs::path meta_path = dir / "meta.txt";
  if (!fs::exists(meta_path)) return sample;
  auto in = open_in(meta_path);
  std::string line;
  int frames = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "caption") {
      std::getline(ls >> std::ws, sample.caption);
    } else if (key == "frames") {
      ls >> frames;
    } else if (key == "background") {
      ls >> sample.scene.background;
    } else if (key == "shape") {
      MovingShape s;
      std::string type;
      double x, y, vx, vy;
      if (!(ls >> type >> s.color >> s.radius >> x >> y >> vx >> vy)) throw FormatError("malformed shape line in " + meta_path.string());
      s.type = static_cast<ShapeType>(shape_index(type));
      s.position = {x, y};
      s.velocity = {vx, vy};
      sample.scene.shapes.push_back(s);
    }
  }
  if (frames >= 0 && frames != static_cast<int>(sample.video.size()))
    throw FormatError("meta.txt frame count disagrees with the frames in " + dir.string());
  return sample;
}

void write_dataset(const fs::path& dir, const std::vector<SyntheticSample>& samples) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "video_%05zu", i);
    write_video_dir(dir / buf, samples[i]);
  }
}

std::vector<SyntheticSample> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory not found: " + dir.string());
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<SyntheticSample> out;
  for (const fs::path& d : subdirs) out.push_back(read_video_dir(d));
  if (out.empty()) throw FormatError("dataset directory holds no videos: " + dir.string());
  return out;
}

void write_latent(const fs::path& path, const VideoLatent& latent, std::uint64_t seed) {
  require(latent.tokens.rows() == latent.token_count(), "latent token count is inconsistent");
  const std::array<std::int32_t, 9> header = {kLatentMagic,
                                              kLatentVersion,
                                              latent.frames,
                                              latent.height,
                                              latent.width,
                                              latent.channels(),
                                              latent.source_frames,
                                              static_cast<std::int32_t>(seed & 0xffffffffULL),
                                              static_cast<std::int32_t>(seed >> 32)};
  const MatRM<float> data = latent.tokens;
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(header.data()), sizeof(header));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw FormatError("failed writing " + path.string());
}

VideoLatent read_latent(const fs::path& path, std::uint64_t* seed) {
  auto in = open_in(path, std::ios::binary);
  std::array<std::int32_t, 9> header{};
  in.read(reinterpret_cast<char*>(header.data()), sizeof(header));
  if (!in || header[0] != kLatentMagic) throw FormatError(path.string() + " is not a latent file");
  if (header[1] != kLatentVersion) throw FormatError("unsupported latent version in " + path.string());
  const int frames = header[2], h = header[3], w = header[4], d = header[5];
  if (frames < 1 || h < 1 || w < 1 || d < 1) throw FormatError("bad latent shape in " + path.string());
  MatRM<float> data(static_cast<Eigen::Index>(frames) * h * w, d);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw FormatError("truncated latent file " + path.string());
  if (seed) *seed = static_cast<std::uint32_t>(header[7]) | (static_cast<std::uint64_t>(static_cast<std::uint32_t>(header[8])) << 32);
  return {frames, h, w, header[6], data};
}

void write_checkpoint(const fs::path& path, const ToyDiT<float>& model, const CheckpointMeta& meta) {
  const ModelConfig& c = model.config();
  std::ostringstream hdr;
  hdr << "saber-checkpoint\n"
      << "version 1\n"
      << "blocks " << c.blocks << "\n"
      << "model_dim " << c.model_dim << "\n"
      << "heads " << c.heads << "\n"
      << "text_dim " << c.text_dim << "\n"
      << "latent_dim " << c.latent_dim << "\n"
      << "ffn_mult " << c.ffn_mult << "\n"
      << "time_dim " << c.time_dim << "\n"
      << "init_seed " << c.init_seed << "\n"
      << "spatial_patch " << meta.codec.spatial_patch << "\n"
      << "projection_seed " << meta.codec.projection_seed << "\n"
      << "text_seed " << meta.text_seed << "\n"
      << "frames " << meta.frames << "\n"
      << "height " << meta.height << "\n"
      << "width " << meta.width << "\n"
      << "parameters " << model.parameter_count() << "\n";
  for (const TensorInfo& t : model.tensors()) hdr << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << "\n";
  hdr << "end_header\n";
  auto out = open_out(path, std::ios::binary);
  const std::string text = hdr.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(model.parameters().data()),
            static_cast<std::streamsize>(model.parameter_count() * sizeof(float)));
  if (!out) throw FormatError("failed writing " + path.string());
}

ToyDiT<float> read_checkpoint(const fs::path& path, CheckpointMeta* meta_out) {
  auto in = open_in(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || line != "saber-checkpoint") throw FormatError(path.string() + " is not a checkpoint");
  std::map<std::string, std::string> fields;
  std::vector<TensorInfo> tensors;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "tensor") {
      TensorInfo t;
      ls >> t.name >> t.rows >> t.cols;
      tensors.push_back(t);
    } else {
      std::string value;
      ls >> value;
      fields[key] = value;
    }
  }
  if (!ended) throw FormatError("checkpoint header in " + path.string() + " is not terminated");
  auto get = [&](const std::string& key) -> std::uint64_t {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError("checkpoint header lacks '" + key + "'");
    try {
      return std::stoull(it->second);
    } catch (const std::exception&) {
      throw FormatError("checkpoint field '" + key + "' is not a number");
    }
  };
  if (get("version") != 1) throw FormatError("unsupported checkpoint version");

  ModelConfig c;
  c.blocks = static_cast<int>(get("blocks"));
  c.model_dim = static_cast<int>(get("model_dim"));
  c.heads = static_cast<int>(get("heads"));
  c.text_dim = static_cast<int>(get("text_dim"));
  c.latent_dim = static_cast<int>(get("latent_dim"));
  c.ffn_mult = static_cast<int>(get("ffn_mult"));
  c.time_dim = static_cast<int>(get("time_dim"));
  c.init_seed = get("init_seed");
  ToyDiT<float> model(c);
  if (static_cast<Eigen::Index>(get("parameters")) != model.parameter_count() || tensors.size() != model.tensors().size())
    throw FormatError("checkpoint tensor table does not match its configuration");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const TensorInfo& a = tensors[i];
    const TensorInfo& b = model.tensors()[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols)
      throw FormatError("checkpoint tensor '" + a.name + "' does not match the model layout");
  }
  in.read(reinterpret_cast<char*>(model.parameters().data()),
          static_cast<std::streamsize>(model.parameter_count() * sizeof(float)));
  if (!in) throw FormatError("truncated checkpoint " + path.string());

  if (meta_out) {
    meta_out->codec.spatial_patch = static_cast<int>(get("spatial_patch"));
    meta_out->codec.projection_seed = get("projection_seed");
    meta_out->text_seed = get("text_seed");
    meta_out->frames = static_cast<int>(get("frames"));
    meta_out->height = static_cast<int>(get("height"));
    meta_out->width = static_cast<int>(get("width"));
  }
  return model;
}

}  // namespace saber
