#include "stylid/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "stylid/facegen.hpp"
#include "stylid/identity.hpp"
#include "stylid/lora.hpp"
#include "stylid/pipeline.hpp"

namespace stylid::cli {

namespace fs = std::filesystem;

namespace {

class HelpRequested : public UsageError {
 public:
  using UsageError::UsageError;
};

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* projection_name(ProjectionMode m) { return m == ProjectionMode::kOptimize ? "optimize" : "rerender"; }

ProjectionMode projection_from(const std::string& s) {
  if (s == "rerender") return ProjectionMode::kRerender;
  if (s == "optimize") return ProjectionMode::kOptimize;
  throw UsageError("projection must be 'rerender' or 'optimize', got '" + s + "'");
}

std::vector<double> default_intensities() {
  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

std::size_t default_faces(const std::string& name) {
  if (name == "ablate-order") return 100;
  if (name == "ablate-attention") return 5;
  return 1;
}

std::size_t default_seed_count(const std::string& name) {
  if (name == "ablate-order") return 3;
  if (name == "ablate-attention") return 20;
  return 1;
}

// Config file keys and how each lands in PipelineConfig.
using Setter = std::function<void(PipelineConfig&, const nlohmann::json&)>;

const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = {
      {"guidance_scale", [](PipelineConfig& c, const nlohmann::json& j) { c.guidance_scale = j.get<double>(); }},
      {"subject_guidance", [](PipelineConfig& c, const nlohmann::json& j) { c.subject_guidance = j.get<double>(); }},
      {"style_intensity", [](PipelineConfig& c, const nlohmann::json& j) { c.style_intensity = j.get<double>(); }},
      {"steps", [](PipelineConfig& c, const nlohmann::json& j) { c.steps = j.get<int>(); }},
      {"composition_window", [](PipelineConfig& c, const nlohmann::json& j) { c.composition_window = j.get<int>(); }},
      {"lora_rank", [](PipelineConfig& c, const nlohmann::json& j) { c.lora_rank = j.get<std::size_t>(); }},
      {"lora_alpha", [](PipelineConfig& c, const nlohmann::json& j) { c.lora_alpha = j.get<double>(); }},
      {"seed", [](PipelineConfig& c, const nlohmann::json& j) { c.seed = j.get<std::uint64_t>(); }},
      {"use_diffusion", [](PipelineConfig& c, const nlohmann::json& j) { c.use_diffusion = j.get<bool>(); }},
      {"projection",
       [](PipelineConfig& c, const nlohmann::json& j) { c.projection = projection_from(j.get<std::string>()); }},
      {"image_size", [](PipelineConfig& c, const nlohmann::json& j) { c.image_size = j.get<std::size_t>(); }},
      {"prompt", [](PipelineConfig& c, const nlohmann::json& j) { c.prompt = j.get<std::string>(); }},
      {"train_steps", [](PipelineConfig& c, const nlohmann::json& j) { c.train_steps = j.get<int>(); }},
      {"identity_train_steps",
       [](PipelineConfig& c, const nlohmann::json& j) { c.identity_train_steps = j.get<int>(); }},
      {"lora_steps", [](PipelineConfig& c, const nlohmann::json& j) { c.lora_steps = j.get<int>(); }},
      {"train_faces", [](PipelineConfig& c, const nlohmann::json& j) { c.train_faces = j.get<std::size_t>(); }},
      {"train_batch", [](PipelineConfig& c, const nlohmann::json& j) { c.train_batch = j.get<std::size_t>(); }},
      {"train_lr", [](PipelineConfig& c, const nlohmann::json& j) { c.train_lr = j.get<double>(); }},
  };
  return keys;
}

// Returns true if the file set the seed.
bool load_config(const std::string& path, PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto it = config_keys().find(key);
    if (it == config_keys().end()) throw UsageError("unknown config key '" + key + "' in '" + path + "'");
    try {
      it->second(cfg, value);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
  return doc.contains("seed");
}

std::uint64_t env_seed() {
  const char* v = std::getenv("CRAFT_SEED");
  if (!v) return 0;
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument("trailing characters");
    return s;
  } catch (const std::exception&) {
    throw UsageError(std::string("CRAFT_SEED is not an unsigned integer: '") + v + "'");
  }
}

// Each config flag writes into a scratch PipelineConfig; only flags that
// were actually given are copied over the file/default values.
using Overlays = std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>>;

template <class T>
CLI::Option* config_option(CLI::App& app, Overlays& overlays, PipelineConfig& flags, const char* flag,
                           T PipelineConfig::*member, const char* help) {
  CLI::Option* o = app.add_option(flag, flags.*member, help);
  overlays.emplace_back(o, [&flags, member](PipelineConfig& c) { c.*member = flags.*member; });
  return o;
}

bool takes_faces(const std::string& name) {
  return name == "render" || name == "stylize" || name == "diffuse" || name == "ablate-order" ||
         name == "ablate-attention";
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"render", "stylize",          "diffuse", "train",
                                                 "ablate-order", "ablate-attention", "ffc", "attn-map"};
  return names;
}

Command parse(const std::vector<std::string>& args) {
  CLI::App app{"Identity-preserving stylization toolkit", "stylid"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  const PipelineConfig defaults;
  PipelineConfig flags;
  std::string out_dir = ".", config_path, projection;
  std::size_t jobs = 1, faces = 1, seed_count = 1, face_id = 0;
  std::vector<double> intensities;
  std::vector<std::string> files;
  bool zero_identity = false, record_timing = false;

  Overlays overlays;
  auto cfg_opt = [&](const char* flag, auto member, const char* help) {
    return config_option(app, overlays, flags, flag, member, help);
  };

  CLI::Option* seed_opt = cfg_opt("--seed", &PipelineConfig::seed, "Master seed (fallback: CRAFT_SEED)");
  cfg_opt("--steps", &PipelineConfig::steps, "Diffusion steps T")->check(CLI::PositiveNumber);
  cfg_opt("--window", &PipelineConfig::composition_window, "Leading reverse steps blended toward the guide");
  cfg_opt("--guidance", &PipelineConfig::guidance_scale, "Classifier-free guidance scale");
  cfg_opt("--subject-guidance", &PipelineConfig::subject_guidance, "Blend weight toward the guide");
  cfg_opt("--intensity", &PipelineConfig::style_intensity, "Style intensity in [0, 1]");
  cfg_opt("--lora-rank", &PipelineConfig::lora_rank, "LoRA rank");
  cfg_opt("--lora-alpha", &PipelineConfig::lora_alpha, "LoRA scale alpha");
  cfg_opt("--diffusion", &PipelineConfig::use_diffusion, "Run the denoiser pass (true/false)");
  cfg_opt("--size", &PipelineConfig::image_size, "Image side in pixels");
  cfg_opt("--prompt", &PipelineConfig::prompt, "Text prompt");
  cfg_opt("--train-steps", &PipelineConfig::train_steps, "Base denoiser training steps");
  cfg_opt("--identity-steps", &PipelineConfig::identity_train_steps, "Fine-tuning steps for each attention arm");
  cfg_opt("--lora-steps", &PipelineConfig::lora_steps, "Style adapter training steps");
  cfg_opt("--train-faces", &PipelineConfig::train_faces, "Faces in the training grid");
  cfg_opt("--train-batch", &PipelineConfig::train_batch, "Training batch size");
  cfg_opt("--train-lr", &PipelineConfig::train_lr, "Adam step size");
  CLI::Option* proj_opt = app.add_option("--projection", projection, "rerender or optimize");

  app.add_option("--out-dir", out_dir, "Directory for artifacts");
  CLI::Option* config_opt = app.add_option("--config", config_path, "JSON config file; flags override it");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--record-timing", record_timing, "Write wall times into the ms column");

  std::map<std::string, CLI::App*> subs;
  for (const std::string& name : command_names()) subs[name] = app.add_subcommand(name);
  subs["render"]->description("Render synthetic faces (PPM) and their attributes");
  subs["stylize"]->description("Apply the graffiti operator and measure attribute drift");
  subs["diffuse"]->description("Run the full style-first pipeline with the denoiser pass");
  subs["train"]->description("Train the toy denoiser arms and style adapters");
  subs["ablate-order"]->description("Compare both composition orders over a sweep");
  subs["ablate-attention"]->description("Compare baseline and identity-augmented attention");
  subs["ffc"]->description("Cosine similarity of two embedding files");
  subs["attn-map"]->description("Write the attention maps of both arms as CSV");

  std::map<std::string, CLI::Option*> faces_opts, seeds_opts;
  for (const std::string& name : command_names()) {
    if (!takes_faces(name)) continue;
    faces_opts[name] = subs[name]->add_option("--faces", faces, "Number of faces")->check(CLI::PositiveNumber);
  }
  for (const char* name : {"ablate-order", "ablate-attention"}) {
    seeds_opts[name] =
        subs[name]->add_option("--seeds", seed_count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  }
  CLI::Option* int_opt =
      subs["ablate-order"]->add_option("--intensities", intensities, "Comma-separated style intensities")
          ->delimiter(',');
  subs["ablate-attention"]->add_flag("--zero-identity", zero_identity, "Use an all-zero identity embedding");
  subs["attn-map"]->add_flag("--zero-identity", zero_identity, "Use an all-zero identity embedding");
  subs["attn-map"]->add_option("--face-id", face_id, "Face index in the grid");
  subs["ffc"]->add_option("files", files, "Two embedding files")->required()->expected(2);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  Command cmd;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) cmd.name = name;
  }

  PipelineConfig cfg = defaults;
  bool seed_from_file = false;
  if (config_opt->count()) seed_from_file = load_config(config_path, cfg);
  if (!seed_opt->count() && !seed_from_file) cfg.seed = env_seed();
  for (auto& [opt, apply] : overlays) {
    if (opt->count()) apply(cfg);
  }
  if (proj_opt->count()) cfg.projection = projection_from(projection);
  if (cmd.name == "diffuse") cfg.use_diffusion = true;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  cmd.config = cfg;
  cmd.out_dir = out_dir;
  cmd.config_path = config_path;
  cmd.jobs = jobs;
  cmd.record_timing = record_timing;
  cmd.zero_identity = zero_identity;
  cmd.face_id = face_id;
  cmd.files = files;
  cmd.faces = faces_opts.count(cmd.name) && faces_opts[cmd.name]->count() ? faces : default_faces(cmd.name);
  cmd.seed_count =
      seeds_opts.count(cmd.name) && seeds_opts[cmd.name]->count() ? seed_count : default_seed_count(cmd.name);
  if (cmd.name == "ablate-order") {
    cmd.intensities = int_opt->count() ? intensities : default_intensities();
    for (double s : cmd.intensities) {
      if (!(s >= 0.0 && s <= 1.0)) throw UsageError("intensities must lie in [0, 1]");
    }
  }
  return cmd;
}

Command parse(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse(args);
}

std::vector<std::string> to_args(const Command& cmd) {
  const PipelineConfig& c = cmd.config;
  std::vector<std::string> a = {cmd.name,
                                "--seed", std::to_string(c.seed),
                                "--steps", std::to_string(c.steps),
                                "--window", std::to_string(c.composition_window),
                                "--guidance", num(c.guidance_scale),
                                "--subject-guidance", num(c.subject_guidance),
                                "--intensity", num(c.style_intensity),
                                "--lora-rank", std::to_string(c.lora_rank),
                                "--lora-alpha", num(c.lora_alpha),
                                "--diffusion", c.use_diffusion ? "true" : "false",
                                "--projection", projection_name(c.projection),
                                "--size", std::to_string(c.image_size),
                                "--prompt", c.prompt,
                                "--train-steps", std::to_string(c.train_steps),
                                "--identity-steps", std::to_string(c.identity_train_steps),
                                "--lora-steps", std::to_string(c.lora_steps),
                                "--train-faces", std::to_string(c.train_faces),
                                "--train-batch", std::to_string(c.train_batch),
                                "--train-lr", num(c.train_lr),
                                "--out-dir", cmd.out_dir,
                                "--jobs", std::to_string(cmd.jobs)};
  if (!cmd.config_path.empty()) a.insert(a.end(), {"--config", cmd.config_path});
  if (cmd.record_timing) a.emplace_back("--record-timing");
  if (takes_faces(cmd.name)) {
    a.insert(a.end(), {"--faces", std::to_string(cmd.faces)});
  }
  if (cmd.name == "ablate-order" || cmd.name == "ablate-attention") {
    a.insert(a.end(), {"--seeds", std::to_string(cmd.seed_count)});
  }
  if (cmd.name == "ablate-order") {
    std::string list;
    for (std::size_t i = 0; i < cmd.intensities.size(); ++i) list += (i ? "," : "") + num(cmd.intensities[i]);
    a.insert(a.end(), {"--intensities", list});
  }
  if (cmd.zero_identity) a.emplace_back("--zero-identity");
  if (cmd.name == "attn-map") a.insert(a.end(), {"--face-id", std::to_string(cmd.face_id)});
  for (const std::string& f : cmd.files) a.push_back(f);
  return a;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) {
      os.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
  }
}

std::vector<double> read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream values(text);
  std::vector<double> out;
  std::string tok;
  while (values >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InputError("'" + path + "' contains a non-numeric entry '" + tok + "'");
    }
  }
  if (out.empty()) throw InputError("'" + path + "' holds no numbers");
  return out;
}

namespace {

std::string join_args(const std::vector<std::string>& args) {
  std::string s;
  for (const std::string& a : args) {
    const bool quote = a.empty() || a.find_first_of(" \t\"'") != std::string::npos;
    s += ' ';
    s += quote ? "'" + a + "'" : a;
  }
  return s;
}

std::string out_path(const Command& cmd, const std::string& file) { return (fs::path(cmd.out_dir) / file).string(); }

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, i, ext);
  return buf;
}

std::string matrix_csv(const Tensor& m) {
  std::string s;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) s += (c ? "," : "") + num(m(r, c));
    s += '\n';
  }
  return s;
}

std::vector<std::uint64_t> seed_list(const Command& cmd) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < cmd.seed_count; ++k) seeds.push_back(cmd.config.seed + k);
  return seeds;
}

std::string cmd_render(const Command& cmd) {
  const auto grid = make_face_grid(cmd.faces, cmd.config.seed);
  parallel_for(grid.size(), cmd.jobs, [&](std::size_t i) {
    write_file_atomic(out_path(cmd, indexed("face", i, "ppm")), to_ppm(render_face(grid[i], cmd.config.image_size)));
  });
  std::string csv = "face_id";
  for (std::size_t k = 0; k < kAttributeCount; ++k) csv += "," + std::string(attribute_name(k));
  csv += ",palette_id,background\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += std::to_string(i);
    for (double v : grid[i].attributes.values) csv += "," + num(v);
    csv += "," + std::to_string(grid[i].palette_id) + "," + num(grid[i].background) + "\n";
  }
  write_file_atomic(out_path(cmd, "attributes.csv"), csv);
  return "render faces=" + std::to_string(grid.size());
}

std::string cmd_stylize(const Command& cmd) {
  const auto grid = make_face_grid(cmd.faces, cmd.config.seed);
  StyleOp op;
  op.intensity = cmd.config.style_intensity;
  std::vector<double> drift(grid.size());
  parallel_for(grid.size(), cmd.jobs, [&](std::size_t i) {
    const Tensor img = render_face(grid[i], cmd.config.image_size);
    const Tensor styled = graffiti_stylize(img, op, cell_stream(cmd.config.seed, i).split(0));
    drift[i] = attr_loss(styled, img);
    write_file_atomic(out_path(cmd, indexed("styled", i, "ppm")), to_ppm(styled));
  });
  std::string csv = "face_id,intensity,attr_loss\n";
  double mean = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += std::to_string(i) + "," + num(op.intensity) + "," + num(drift[i]) + "\n";
    mean += drift[i] / static_cast<double>(grid.size());
  }
  write_file_atomic(out_path(cmd, "stylize.csv"), csv);
  return "stylize faces=" + std::to_string(grid.size()) + " mean_attr_loss=" + num(mean);
}

std::string cmd_diffuse(const Command& cmd) {
  const DiffusionStage stage = build_diffusion_stage(cmd.config);
  const auto grid = make_face_grid(cmd.faces, cmd.config.seed);
  ExperimentReport rep;
  rep.rows.resize(grid.size());
  parallel_for(grid.size(), cmd.jobs, [&](std::size_t i) {
    const Tensor img = render_face(grid[i], cmd.config.image_size);
    PipelineResult res = run_style_first(img, cmd.config.prompt, cmd.config, cell_stream(cmd.config.seed, i), &stage);
    res.row.face_id = i;
    write_file_atomic(out_path(cmd, indexed("diffuse", i, "ppm")), to_ppm(res.image));
    rep.rows[i] = std::move(res.row);
  });
  std::ostringstream csv;
  rep.write_csv(csv, cmd.record_timing);
  write_file_atomic(out_path(cmd, "diffuse.csv"), csv.str());
  double mean_ffc = 0.0;
  for (const auto& r : rep.rows) mean_ffc += r.ffc / static_cast<double>(rep.rows.size());
  return "diffuse faces=" + std::to_string(grid.size()) + " mean_ffc=" + num(mean_ffc);
}

std::string cmd_train(const Command& cmd) {
  const DiffusionStage stage = build_diffusion_stage(cmd.config);
  std::ostringstream adapters;
  write_adapters(adapters, stage.adapters);
  write_file_atomic(out_path(cmd, "adapters.csv"), adapters.str());
  const std::string csv = "arm,initial_loss,final_loss\nbaseline," + num(stage.base_loss_initial) + "," +
                          num(stage.base_loss_final) + "\nidentity," + num(stage.identity_loss_initial) + "," +
                          num(stage.identity_loss_final) + "\n";
  write_file_atomic(out_path(cmd, "train.csv"), csv);
  return "train baseline_loss=" + num(stage.base_loss_final) + " identity_loss=" + num(stage.identity_loss_final);
}

std::string cmd_ablate_order(const Command& cmd) {
  const auto grid = make_face_grid(cmd.faces, cmd.config.seed);
  const ExperimentReport rep = ablate_order(grid, cmd.config, cmd.intensities, seed_list(cmd), cmd.jobs);
  std::ostringstream csv;
  rep.write_csv(csv, cmd.record_timing);
  write_file_atomic(out_path(cmd, "ablate_order.csv"), csv.str());
  return "ablate-order " + rep.summary();
}

std::string cmd_ablate_attention(const Command& cmd) {
  const DiffusionStage stage = build_diffusion_stage(cmd.config);
  const auto grid = make_face_grid(cmd.faces, cmd.config.seed);
  AttentionAblationOptions opts;
  opts.seeds = seed_list(cmd);
  opts.zero_identity = cmd.zero_identity;
  opts.jobs = cmd.jobs;
  const AttentionReport rep = ablate_attention(grid, cmd.config, stage, opts);
  std::ostringstream csv;
  rep.write_csv(csv, cmd.record_timing);
  write_file_atomic(out_path(cmd, "ablate_attention.csv"), csv.str());
  return "ablate-attention " + rep.summary();
}

std::string cmd_attn_map(const Command& cmd) {
  const DiffusionStage stage = build_diffusion_stage(cmd.config);
  const FaceParams face = make_face_grid(cmd.face_id + 1, cmd.config.seed)[cmd.face_id];
  const Tensor img = render_face(face, cmd.config.image_size);
  StyleOp op;
  op.intensity = cmd.config.style_intensity;
  const Tensor guide =
      encode(graffiti_stylize(img, op, cell_stream(cmd.config.seed, cmd.face_id).split(0)), stage.codec);
  const DenoiserModel base = baseline_arm(stage);
  const DenoiserModel arm =
      cmd.zero_identity ? zero_identity_arm(stage) : identity_arm(stage, identity_embedding(extract_attributes(img)));
  const Tensor cond = embed_prompt(cmd.config.prompt, base.config().cond_dim);
  const Tensor map_base = base.attention_map_for(guide, cond);
  const Tensor map_id = arm.attention_map_for(guide, cond);
  write_file_atomic(out_path(cmd, "attn_map_baseline.csv"), matrix_csv(map_base));
  write_file_atomic(out_path(cmd, "attn_map_identity.csv"), matrix_csv(map_id));
  return "attn-map face_id=" + std::to_string(cmd.face_id) +
         " face_mass_baseline=" + num(face_attention_mass(map_base, kFaceTokenCount)) +
         " face_mass_identity=" + num(face_attention_mass(map_id, kFaceTokenCount));
}

std::string cmd_ffc(const Command& cmd) {
  if (cmd.files.size() != 2) throw UsageError("ffc takes exactly two embedding files");
  const Tensor u = Tensor::vector(read_vector_file(cmd.files[0]));
  const Tensor v = Tensor::vector(read_vector_file(cmd.files[1]));
  char buf[64];
  std::snprintf(buf, sizeof buf, "ffc %.12f", ffc(u, v));
  return buf;
}

}  // namespace

int execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::string (*)(const Command&)> handlers = {
      {"render", cmd_render},
      {"stylize", cmd_stylize},
      {"diffuse", cmd_diffuse},
      {"train", cmd_train},
      {"ablate-order", cmd_ablate_order},
      {"ablate-attention", cmd_ablate_attention},
      {"ffc", cmd_ffc},
      {"attn-map", cmd_attn_map},
  };
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto it = handlers.find(cmd.name);
    if (it == handlers.end()) throw UsageError("unknown command '" + cmd.name + "'");
    out << "# stylid" << join_args(to_args(cmd)) << '\n';
    if (cmd.name != "ffc") {
      std::error_code ec;
      fs::create_directories(cmd.out_dir, ec);
      if (ec) throw IoError("cannot create output directory '" + cmd.out_dir + "': " + ec.message());
    }
    const std::string summary = it->second(cmd);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    char buf[48];
    std::snprintf(buf, sizeof buf, " wall_ms=%.1f", ms);
    out << summary << buf << '\n';
    return kExitOk;
  } catch (const AssertionFailure& e) {
    err << "assertion failed: " << e.what() << '\n';
    return kExitAssertion;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse(args);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kExitOk;
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  return execute(cmd, out, err);
}

}  // namespace stylid::cli
