// Command-line front end: maskgen, augment, synth-data, inspect-input, train, generate, grid, selftest.

#include "saber/formats.hpp"
#include "saber/image_io.hpp"
#include "saber/inference.hpp"
#include "saber/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace saber;

int run_selftest(std::ostream& out, std::uint64_t seed);

namespace {

struct Size {
  int height = 16;
  int width = 16;
};

Size parse_size(const std::string& s) {
  int h = 0, w = 0;
  char x = 0, extra = 0;
  std::istringstream in(s);
  if (!(in >> h >> x >> w) || (x != 'x' && x != 'X') || (in >> extra) || h < 1 || w < 1)
    throw CLI::ValidationError("--size", "expected HxW with positive integers, got '" + s + "'");
  return {h, w};
}

const CLI::Validator kSizeFormat(
    [](std::string& s) {
      try {
        parse_size(s);
      } catch (const CLI::ValidationError&) {
        return std::string("expected HxW with positive integers");
      }
      return std::string();
    },
    "HxW");

std::vector<ShapeKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<ShapeKind> out;
  for (const std::string& n : names) {
    const auto kind = parse_shape_kind(n);
    if (!kind) throw CLI::ValidationError("--mask-types", "unknown mask type '" + n + "'");
    out.push_back(*kind);
  }
  return out;
}

const CLI::Validator kShapeName(
    [](std::string& s) { return parse_shape_kind(s) ? std::string() : "unknown mask type '" + s + "'"; },
    "ellipse|fourier|convex|concave");

void echo_config(const CLI::App& app, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file(dir / "run_config.txt", app.config_to_str(true, false));
}

std::string numbered(const char* pattern, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, i);
  return buf;
}

struct Options {
  std::uint64_t seed = 0;
  std::string out;

  // maskgen
  std::string shape = "ellipse";
  std::string size = "64x64";
  double ratio = 0.3;
  int count = 1;
  std::string mixture;

  // augment
  std::string image, mask;
  bool no_aug = false;

  // synth-data / train / generate
  int frames = 5;
  std::string data;
  int index = 0;
  int steps = 100;
  double lr = 1e-4;
  int batch = 4;
  std::vector<int> k_range{0, 3};
  std::vector<std::string> mask_types;
  std::optional<double> fixed_ratio;
  bool no_attn_mask = false;
  int blocks = 4, dim = 128, heads = 4;
  double caption_dropout = 0.1;
  std::string ckpt;
  std::string init;
  std::string prompt;
  std::vector<std::string> refs;
  int sample_steps = 50;
  double cfg = 5.0;
  std::vector<std::string> inputs;
  int columns = 8;
};

void cmd_maskgen(const Options& o, const CLI::App& app) {
  const Size size = parse_size(o.size);
  const fs::path out = o.out;
  echo_config(app, out);
  Rng rng(o.seed);
  const std::vector<ShapeKind> all(kAllShapeKinds.begin(), kAllShapeKinds.end());
  std::ostringstream log;
  for (int i = 0; i < o.count; ++i) {
    MaskSpec spec;
    spec.kind = o.shape == "all" ? sample_shape_kind(all, rng) : *parse_shape_kind(o.shape);
    spec.height = size.height;
    spec.width = size.width;
    spec.target_ratio = o.mixture.empty() ? o.ratio : sample_ratio(RatioMixture::standard(), rng);
    spec.seed = mix_seed(o.seed, static_cast<std::uint64_t>(i));
    const BinaryMask mask = generate_mask(spec);
    const std::string name = numbered("mask_%05d.png", i);
    write_mask_png(out / name, mask);
    log << name << '\t' << to_string(spec.kind) << '\t' << spec.target_ratio << '\t' << mask.foreground_count() << '\t'
        << spec.seed << "\n";
  }
  write_text_file(out / "masks.tsv", "file\tkind\tratio\tcount\tseed\n" + log.str());
  std::cout << "wrote " << o.count << " mask(s) to " << out.string() << "\n";
}

void cmd_augment(const Options& o, const CLI::App& app) {
  const fs::path out = o.out;
  const Image image = read_png(o.image);
  const BinaryMask mask = read_mask_png(o.mask);
  if (mask.height() != image.height || mask.width() != image.width)
    throw ContractViolation("mask and image sizes differ");
  echo_config(app, out);
  Rng rng(o.seed);
  const AugmentConfig config = o.no_aug ? AugmentConfig::disabled() : AugmentConfig{};
  const MaskedReference ref = make_masked_reference(image, mask, config, rng);
  write_png(out / "image.png", ref.image);
  write_mask_png(out / "mask.png", ref.mask);
  write_png(out / "masked.png", ref.masked_frame);
  std::ostringstream p;
  p << "rotation_deg " << ref.params.rotation_deg << "\nscale " << ref.params.scale << "\nshear_deg "
    << ref.params.shear_deg << "\ntranslate " << ref.params.translate.x() << ' ' << ref.params.translate.y()
    << "\nhflip " << ref.params.hflip << "\n";
  write_text_file(out / "params.txt", p.str());
  std::cout << p.str();
}

void cmd_synth(const Options& o, const CLI::App& app) {
  const Size size = parse_size(o.size);
  const fs::path out = o.out;
  echo_config(app, out);
  write_dataset(out, synth_dataset(o.count, o.frames, size.height, size.width, o.seed));
  std::cout << "wrote " << o.count << " video(s) to " << out.string() << "\n";
}

TrainConfig train_config(const Options& o) {
  TrainConfig cfg;
  cfg.k_min = o.k_range.at(0);
  cfg.k_max = o.k_range.at(1);
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  cfg.steps = o.steps;
  cfg.seed = o.seed;
  if (!o.mask_types.empty()) cfg.mask_types = parse_kinds(o.mask_types);
  cfg.fixed_ratio = o.fixed_ratio;
  cfg.disable_augment = o.no_aug;
  cfg.disable_attn_mask = o.no_attn_mask;
  cfg.caption_dropout = o.caption_dropout;
  cfg.model.blocks = o.blocks;
  cfg.model.model_dim = o.dim;
  cfg.model.heads = o.heads;
  cfg.model.latent_dim = cfg.codec.latent_dim();
  cfg.validate_batches = true;
  cfg.validate();
  return cfg;
}

void cmd_inspect(const Options& o, const CLI::App& app) {
  const TrainConfig cfg = train_config(o);
  const auto dataset = read_dataset(o.data);
  if (o.index < 0 || o.index >= static_cast<int>(dataset.size())) throw ContractViolation("--index is out of range");
  const fs::path out = o.out;
  echo_config(app, out);
  const TrainContext ctx(cfg);
  Rng rng(o.seed);
  const BuiltExample built = build_training_example(dataset[o.index], cfg, ctx, rng);
  const TrainingExample& ex = built.example;
  const AssembledInput in = ex.assemble(ex.z0);
  std::ostringstream s;
  s << "caption\t" << (built.caption.empty() ? "<dropped>" : built.caption) << "\n"
    << "video_frames\t" << in.video_frames << "\nref_frames\t" << in.ref_frames << "\nlatent_grid\t" << in.height << 'x'
    << in.width << "\nchannels\t" << in.channels() << "\ntokens\t" << in.total_tokens() << "\n";
  const auto rules = ex.attention.rule_counts();
  s << "admissible\tvideo->video " << rules.video_to_video << "\tvideo->ref " << rules.video_to_ref << "\tref->video "
    << rules.ref_to_video << "\tref->ref " << rules.ref_to_ref << "\tinvalid->self " << rules.invalid_self << "\n";
  for (std::size_t k = 0; k < built.references.size(); ++k) {
    const MaskedReference& r = built.references[k];
    s << "ref" << k << "\tframe " << built.frame_indices[k] << "\ttarget " << built.target_counts[k] << "\tcount "
      << r.mask.foreground_count() << "\tvalid_cells " << ex.ref_masks[k].valid_count() << "\tidentity "
      << r.params.is_identity() << "\n";
    write_png(out / numbered("ref_%02d.png", static_cast<int>(k)), r.masked_frame);
    write_mask_png(out / numbered("ref_mask_%02d.png", static_cast<int>(k)), r.mask);
  }
  write_text_file(out / "input.txt", s.str());
  std::cout << s.str();
}

void cmd_train(const Options& o, const CLI::App& app) {
  const TrainConfig cfg = train_config(o);
  const auto dataset = read_dataset(o.data);
  const fs::path ckpt = o.out;
  const fs::path dir = ckpt.has_parent_path() ? ckpt.parent_path() : fs::path(".");
  echo_config(app, dir);
  std::ostringstream trace;
  trace << "step\tloss\n";
  const int report = std::max(1, o.steps / 20);
  auto on_step = [&](const LossRecord& r) {
    trace << r.step << '\t' << r.loss << "\n";
    if (r.step % report == 0 || r.step + 1 == o.steps) std::cout << "step " << r.step << "\tloss " << r.loss << std::endl;
  };
  TrainResult result = o.init.empty() ? train(cfg, dataset, on_step) : train(cfg, dataset, read_checkpoint(o.init), on_step);
  write_text_file(dir / "loss.tsv", trace.str());
  const Image& first = dataset.front().video.front();
  write_checkpoint(ckpt, result.model,
                   {cfg.codec, cfg.text_seed, static_cast<int>(dataset.front().video.size()), first.height, first.width});
  std::cout << "wrote " << ckpt.string() << "\n";
}

ReferenceInput parse_ref(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty() || parts.front().empty()) throw CLI::ValidationError("--ref", "empty reference");
  ReferenceInput ref;
  ref.image = read_png(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "bg") {
      ref.mode = ReferenceMode::BackgroundScene;
    } else {
      ref.mask = read_mask_png(parts[i]);
    }
  }
  return ref;
}

void cmd_generate(const Options& o, const CLI::App& app) {
  const Size size = parse_size(o.size);
  CheckpointMeta meta;
  const ToyDiT<float> model = read_checkpoint(o.ckpt, &meta);
  std::vector<ReferenceInput> refs;
  for (const std::string& r : o.refs) refs.push_back(parse_ref(r));
  const fs::path out = o.out;
  echo_config(app, out);
  const VideoCodec codec(meta.codec);
  const TextEncoder text(model.config().text_dim, meta.text_seed);
  const SamplerConfig cfg{o.sample_steps, o.cfg, o.seed};
  const GenerationResult result =
      sample_video(model, codec, text, refs, o.prompt, o.frames, size.height, size.width, cfg, ChromaSegmenter());
  write_video_dir(out, SyntheticSample{result.video, o.prompt, {}});
  for (std::size_t k = 0; k < result.references.size(); ++k) {
    write_png(out / numbered("ref_%02d.png", static_cast<int>(k)), result.references[k].image);
    write_mask_png(out / numbered("ref_mask_%02d.png", static_cast<int>(k)), result.references[k].mask);
  }
  write_png(out / "grid.png", make_grid(result.video, o.columns));
  std::cout << "wrote " << result.video.size() << " frame(s) to " << out.string() << "\n";
}

void cmd_grid(const Options& o, const CLI::App& app) {
  std::vector<Image> tiles;
  int columns = o.columns;
  for (const std::string& dir : o.inputs) {
    const Video v = read_frames(dir);
    if (o.inputs.size() > 1) columns = static_cast<int>(v.size());
    tiles.insert(tiles.end(), v.begin(), v.end());
  }
  const fs::path out = o.out;
  echo_config(app, out);
  write_png(out / "grid.png", make_grid(tiles, columns));
  std::cout << "wrote " << (out / "grid.png").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-reference video generation toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed")->capture_default_str(); };
  auto add_out = [&](CLI::App* c, const char* what) { c->add_option("--out", o.out, what)->required(); };

  auto* maskgen = app.add_subcommand("maskgen", "Generate exact-area random masks");
  maskgen->add_option("--shape", o.shape, "Shape kind, or 'all' to draw one per mask")
      ->check(kShapeName | CLI::IsMember({"all"}))
      ->capture_default_str();
  maskgen->add_option("--size", o.size, "Mask size HxW")->check(kSizeFormat)->capture_default_str();
  auto* ratio = maskgen->add_option("--ratio", o.ratio, "Foreground area ratio")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  maskgen->add_option("--mixture", o.mixture, "Draw each ratio from the named mixture instead of --ratio")
      ->check(CLI::IsMember({"default"}))
      ->excludes(ratio);
  maskgen->add_option("--count", o.count, "Number of masks")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(maskgen);
  add_out(maskgen, "Output directory");

  auto* augment = app.add_subcommand("augment", "Build one augmented masked reference");
  augment->add_option("--image", o.image, "Input PNG")->required()->check(CLI::ExistingFile);
  augment->add_option("--mask", o.mask, "Mask PNG")->required()->check(CLI::ExistingFile);
  augment->add_flag("--no-aug", o.no_aug, "Identity transform");
  add_seed(augment);
  add_out(augment, "Output directory");

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic moving-shapes dataset");
  synth->add_option("--count", o.count, "Number of videos")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--frames", o.frames, "Frames per video")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--size", o.size, "Frame size HxW")->check(kSizeFormat);
  add_seed(synth);
  add_out(synth, "Dataset directory");

  auto add_train_flags = [&](CLI::App* c) {
    c->add_option("--data", o.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--k-range", o.k_range, "Reference count range MIN MAX")->expected(2)->delimiter(',')->capture_default_str();
    c->add_option("--mask-types", o.mask_types, "Allowed mask types")->delimiter(',')->check(kShapeName);
    c->add_option("--fixed-ratio", o.fixed_ratio, "Use this area ratio for every mask")->check(CLI::Range(0.0, 1.0));
    c->add_flag("--no-aug", o.no_aug, "Disable mask augmentation");
    c->add_flag("--no-attn-mask", o.no_attn_mask, "Let every reference token attend and be attended");
    c->add_option("--caption-dropout", o.caption_dropout, "Probability of an empty prompt")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--blocks", o.blocks, "Transformer blocks")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--dim", o.dim, "Model width")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--heads", o.heads, "Attention heads")->check(CLI::PositiveNumber)->capture_default_str();
    add_seed(c);
  };

  auto* inspect = app.add_subcommand("inspect-input", "Build one training example and describe its layout");
  add_train_flags(inspect);
  inspect->add_option("--index", o.index, "Video index in the dataset")->capture_default_str();
  add_out(inspect, "Output directory");

  auto* trainc = app.add_subcommand("train", "Train the toy model with masked references");
  add_train_flags(trainc);
  trainc->add_option("--steps", o.steps, "Optimizer steps")->check(CLI::NonNegativeNumber)->capture_default_str();
  trainc->add_option("--lr", o.lr, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  trainc->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  trainc->add_option("--init", o.init, "Resume from this checkpoint")->check(CLI::ExistingFile);
  add_out(trainc, "Checkpoint path; loss.tsv and run_config.txt go beside it");

  auto* gen = app.add_subcommand("generate", "Sample a video from a checkpoint");
  gen->add_option("--ckpt", o.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  gen->add_option("--prompt", o.prompt, "Text prompt")->capture_default_str();
  gen->add_option("--ref", o.refs, "Reference IMG[:MASK][:bg], repeatable");
  gen->add_option("--frames", o.frames, "Frame count")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--size", o.size, "Frame size HxW")->check(kSizeFormat);
  gen->add_option("--steps", o.sample_steps, "Euler steps")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--cfg", o.cfg, "Guidance scale")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--columns", o.columns, "Contact-sheet columns")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(gen);
  add_out(gen, "Output directory");

  auto* grid = app.add_subcommand("grid", "Tile frame directories into one contact sheet");
  grid->add_option("--in", o.inputs, "Frame directory, repeatable (one row each)")->required()->check(CLI::ExistingDirectory);
  grid->add_option("--columns", o.columns, "Columns when a single directory is given")->check(CLI::PositiveNumber);
  add_seed(grid);
  add_out(grid, "Output directory");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");
  add_seed(selftest);

  // synth-data and train default to the desk-scale frame size
  synth->preparse_callback([&](std::size_t) { o.size = "16x16"; });
  gen->preparse_callback([&](std::size_t) { o.size = "16x16"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << app.help();
    return 1;
  }

  try {
    if (*maskgen) cmd_maskgen(o, app);
    if (*augment) cmd_augment(o, app);
    if (*synth) cmd_synth(o, app);
    if (*inspect) cmd_inspect(o, app);
    if (*trainc) cmd_train(o, app);
    if (*gen) cmd_generate(o, app);
    if (*grid) cmd_grid(o, app);
    if (*selftest) return run_selftest(std::cout, o.seed) == 0 ? 0 : 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n";
    return 2;
  }
  return 0;
}
