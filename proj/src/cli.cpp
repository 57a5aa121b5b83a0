#include "wavestyle/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "wavestyle/audio_io.hpp"
#include "wavestyle/baseline.hpp"
#include "wavestyle/common.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/spectral.hpp"
#include "wavestyle/stylizer.hpp"

namespace wavestyle::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSaltFilters = 1;
constexpr std::uint64_t kSaltInit = 2;
constexpr std::uint64_t kSaltPhase = 3;
constexpr std::size_t kProgressEvery = 50;

json config_to_json(const RunConfig& c) {
  return json{{"content", c.content_path},
              {"style", c.style_path},
              {"output-dir", c.output_dir},
              {"preset", c.preset},
              {"baseline", c.baseline},
              {"n-fft", c.n_fft},
              {"hop", c.hop},
              {"filters", c.filters},
              {"kernel-time", c.kernel_time},
              {"layers", c.layers},
              {"content-weight", c.content_weight},
              {"style-weight", c.style_weight},
              {"iterations", c.iterations},
              {"lr", c.lr},
              {"seed", c.seed},
              {"gl-iterations", c.gl_iterations},
              {"init", c.init}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.content_path = j.at("content").get<std::string>();
  c.style_path = j.at("style").get<std::string>();
  c.output_dir = j.at("output-dir").get<std::string>();
  c.preset = j.at("preset").get<std::string>();
  c.baseline = j.at("baseline").get<bool>();
  c.n_fft = j.at("n-fft").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.filters = j.at("filters").get<std::size_t>();
  c.kernel_time = j.at("kernel-time").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.content_weight = j.at("content-weight").get<double>();
  c.style_weight = j.at("style-weight").get<double>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.gl_iterations = j.at("gl-iterations").get<std::size_t>();
  c.init = j.at("init").get<std::string>();
  return c;
}

[[noreturn]] void fail_stage(const std::string& stage, const std::exception& e) {
  throw Error("stage " + stage + ": " + e.what());
}

template <typename Fn>
auto timed_stage(const std::string& stage, double& seconds, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
    } else {
      auto result = fn();
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
      return result;
    }
  } catch (const std::exception& e) {
    fail_stage(stage, e);
  }
}

void write_file_atomic(const fs::path& final_path, const std::string& bytes) {
  const fs::path tmp = final_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

void rename_into_place(const fs::path& tmp, const fs::path& final_path) {
  fs::rename(tmp, final_path);
}

void export_clip_spectrogram(const audio_io::AudioClip& clip,
                             const spectral::FrontEndConfig& fe,
                             const fs::path& dir, const std::string& stem) {
  const spectral::ComplexSpectra s =
      spectral::dft_forward(spectral::frame_signal(clip, fe));
  const fs::path tmp_base = dir / (stem + ".tmp");
  spectral::export_spectrogram(s, tmp_base.string());
  rename_into_place(tmp_base.string() + ".csv", dir / (stem + ".csv"));
  rename_into_place(tmp_base.string() + ".pgm", dir / (stem + ".pgm"));
}

}  // namespace

std::string sha256_hex_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("sha256: cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("sha256: context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[65536];
  while (in.good()) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string manifest_to_json_text(const RunManifest& m) {
  json j{{"version", m.version},
         {"config", config_to_json(m.config)},
         {"seeds",
          {{"filters", m.seed_filters}, {"init", m.seed_init}, {"phase", m.seed_phase}}},
         {"inputs",
          {{"content", {{"path", m.content.path}, {"sha256", m.content.sha256}}},
           {"style", {{"path", m.style.path}, {"sha256", m.style.sha256}}}}},
         {"stage_seconds",
          {{"load", m.seconds_load},
           {"optimize", m.seconds_optimize},
           {"artifacts", m.seconds_artifacts}}},
         {"outputs", m.outputs}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config = config_from_json(j.at("config"));
    m.seed_filters = j.at("seeds").at("filters").get<std::uint64_t>();
    m.seed_init = j.at("seeds").at("init").get<std::uint64_t>();
    m.seed_phase = j.at("seeds").at("phase").get<std::uint64_t>();
    m.content.path = j.at("inputs").at("content").at("path").get<std::string>();
    m.content.sha256 = j.at("inputs").at("content").at("sha256").get<std::string>();
    m.style.path = j.at("inputs").at("style").at("path").get<std::string>();
    m.style.sha256 = j.at("inputs").at("style").at("sha256").get<std::string>();
    m.seconds_load = j.at("stage_seconds").at("load").get<double>();
    m.seconds_optimize = j.at("stage_seconds").at("optimize").get<double>();
    m.seconds_artifacts = j.at("stage_seconds").at("artifacts").get<double>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

std::optional<RunConfig> parse_args(const std::vector<std::string>& args) {
  RunConfig cfg;
  std::string config_path;

  CLI::App app{"waveform style transfer through differentiable spectral front ends"};
  app.set_help_flag("-h,--help", "print this help and exit");
  app.add_option("--content", cfg.content_path, "content WAV path");
  app.add_option("--style", cfg.style_path, "style WAV path");
  app.add_option("--output-dir", cfg.output_dir, "artifact directory");
  app.add_option("--preset", cfg.preset, "rim-k3 | mag-updiff-k2 | baseline-ulyanov");
  app.add_flag("--baseline", cfg.baseline, "run the magnitude + Griffin-Lim baseline");
  app.add_option("--n-fft", cfg.n_fft, "frame length");
  app.add_option("--hop", cfg.hop, "hop size (n_fft/2 or n_fft/4; 0 = n_fft/4)");
  app.add_option("--filters", cfg.filters, "conv filters per layer (0 = preset value)");
  app.add_option("--kernel-time", cfg.kernel_time, "conv kernel width in frames (0 = preset value)");
  app.add_option("--layers", cfg.layers, "conv layer count (0 = preset value)");
  app.add_option("--content-weight", cfg.content_weight, "content loss weight");
  app.add_option("--style-weight", cfg.style_weight, "style loss weight");
  app.add_option("--iterations", cfg.iterations, "optimization steps");
  app.add_option("--lr", cfg.lr, "Adam learning rate");
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--gl-iterations", cfg.gl_iterations, "Griffin-Lim iterations");
  app.add_option("--config", config_path, "JSON config file (flags win)");
  app.add_option("--init", cfg.init, "noise | content");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw IoError("config: cannot open " + config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    if (j.contains("config") && j["config"].is_object()) j = j["config"];
    if (!j.is_object()) throw ParseError("config: expected a JSON object");

    auto apply = [&](const char* key, const char* flag, auto& field) {
      if (app.count(flag) == 0 && j.contains(key)) {
        try {
          field = j[key].get<std::decay_t<decltype(field)>>();
        } catch (const json::exception& e) {
          throw ParseError(std::string("config: bad value for ") + key + ": " + e.what());
        }
      }
    };
    static const std::vector<std::string> known = {
        "content",       "style",      "output-dir", "preset",
        "baseline",      "n-fft",      "hop",        "filters",
        "kernel-time",   "layers",     "content-weight", "style-weight",
        "iterations",    "lr",         "seed",       "gl-iterations",
        "init"};
    for (const auto& [key, value] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ParseError("config: unknown key \"" + key + "\"");
    }
    apply("content", "--content", cfg.content_path);
    apply("style", "--style", cfg.style_path);
    apply("output-dir", "--output-dir", cfg.output_dir);
    apply("preset", "--preset", cfg.preset);
    apply("baseline", "--baseline", cfg.baseline);
    apply("n-fft", "--n-fft", cfg.n_fft);
    apply("hop", "--hop", cfg.hop);
    apply("filters", "--filters", cfg.filters);
    apply("kernel-time", "--kernel-time", cfg.kernel_time);
    apply("layers", "--layers", cfg.layers);
    apply("content-weight", "--content-weight", cfg.content_weight);
    apply("style-weight", "--style-weight", cfg.style_weight);
    apply("iterations", "--iterations", cfg.iterations);
    apply("lr", "--lr", cfg.lr);
    apply("seed", "--seed", cfg.seed);
    apply("gl-iterations", "--gl-iterations", cfg.gl_iterations);
    apply("init", "--init", cfg.init);
  }

  if (cfg.content_path.empty() || cfg.style_path.empty())
    throw UsageError("--content and --style are required");
  if (cfg.init != "noise" && cfg.init != "content")
    throw UsageError("--init must be \"noise\" or \"content\"");
  return cfg;
}

int run(const RunConfig& cfg) {
  RunManifest manifest;
  manifest.version = kVersion;

  audio_io::AudioClip content, style;
  timed_stage("audio_io", manifest.seconds_load, [&] {
    content = audio_io::load_wav(cfg.content_path);
    style = audio_io::load_wav(cfg.style_path);
    if (content.sample_rate != style.sample_rate)
      throw ValidationError("sample rate mismatch: content " +
                            std::to_string(content.sample_rate) + " Hz vs style " +
                            std::to_string(style.sample_rate) + " Hz");
    manifest.content = {cfg.content_path, sha256_hex_file(cfg.content_path)};
    manifest.style = {cfg.style_path, sha256_hex_file(cfg.style_path)};
  });

  spectral::FrontEndConfig fe;
  network::NetworkConfig net_cfg;
  stylizer::StyleTransferConfig st_cfg;
  baseline::GriffinLimConfig gl_cfg;
  RunConfig resolved = cfg;
  double ignore = 0.0;
  timed_stage("config", ignore, [&] {
    fe.n_fft = cfg.n_fft;
    fe.hop = cfg.resolved_hop();
    fe.validate();

    net_cfg = network::load_preset(cfg.baseline ? "baseline-ulyanov" : cfg.preset);
    const std::size_t n_layers = cfg.layers ? cfg.layers : net_cfg.layers.size();
    if (n_layers != net_cfg.layers.size())
      net_cfg.layers.assign(n_layers, net_cfg.layers[0]);
    for (network::ConvSpec& l : net_cfg.layers) {
      if (cfg.filters) l.filters = cfg.filters;
      if (cfg.kernel_time) l.time_width = cfg.kernel_time;
    }
    if (cfg.layers && !cfg.baseline)
      net_cfg.taps = network::default_taps(net_cfg.variant, n_layers);
    if (cfg.layers && cfg.baseline) {
      net_cfg.taps.clear();
      for (std::size_t i = 0; i < n_layers; ++i) {
        net_cfg.taps.push_back({network::TapPoint::AfterLayer, i, network::TapRole::Content});
        net_cfg.taps.push_back({network::TapPoint::AfterLayer, i, network::TapRole::Style});
      }
    }
    net_cfg.seed = mix_seed(cfg.seed, kSaltFilters);
    net_cfg.validate();

    st_cfg.content_weight = cfg.content_weight;
    st_cfg.style_weight = cfg.style_weight;
    st_cfg.iterations = cfg.iterations;
    st_cfg.learning_rate = cfg.lr;
    st_cfg.init = cfg.init == "content"
                      ? stylizer::StyleTransferConfig::Init::ContentCopy
                      : stylizer::StyleTransferConfig::Init::Noise;
    st_cfg.seed = mix_seed(cfg.seed, kSaltInit);
    st_cfg.validate();

    gl_cfg.iterations = cfg.gl_iterations;
    gl_cfg.seed = mix_seed(cfg.seed, kSaltPhase);

    resolved.hop = fe.hop;
    resolved.preset = net_cfg.preset;
    resolved.layers = n_layers;
    resolved.filters = net_cfg.layers[0].filters;
    resolved.kernel_time = net_cfg.layers[0].time_width;
    manifest.config = resolved;
    manifest.seed_filters = net_cfg.seed;
    manifest.seed_init = st_cfg.seed;
    manifest.seed_phase = gl_cfg.seed;
  });

  const stylizer::ProgressFn progress = [](std::size_t it,
                                           const stylizer::LossReport::Row& row) {
    if (it % kProgressEvery == 0) {
      std::fprintf(stderr, "iter=%zu total=%.9g\n", it, row.total);
      std::fflush(stderr);
    }
  };

  audio_io::AudioClip result;
  stylizer::LossReport report;
  const std::string optimize_stage = cfg.baseline ? "baseline" : "stylizer";
  timed_stage(optimize_stage, manifest.seconds_optimize, [&] {
    if (cfg.baseline) {
      auto [clip, rep] = baseline::ulyanov_stylize(content, style, st_cfg, fe, gl_cfg,
                                                   &net_cfg, progress);
      result = std::move(clip);
      report = std::move(rep);
    } else {
      auto [clip, rep] = stylizer::stylize(content, style, net_cfg, fe, st_cfg, progress);
      result = std::move(clip);
      report = std::move(rep);
    }
  });

  timed_stage("artifacts", manifest.seconds_artifacts, [&] {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    const audio_io::AudioClip out_clip = audio_io::peak_normalize(result, 0.9);
    const fs::path wav_tmp = dir / "out.wav.tmp";
    audio_io::save_wav(out_clip, wav_tmp.string());
    rename_into_place(wav_tmp, dir / "out.wav");

    export_clip_spectrogram(content, fe, dir, "content");
    export_clip_spectrogram(style, fe, dir, "style");
    export_clip_spectrogram(out_clip, fe, dir, "output");

    const fs::path loss_tmp = dir / "loss.csv.tmp";
    report.write_csv(loss_tmp.string());
    rename_into_place(loss_tmp, dir / "loss.csv");

    manifest.outputs = {"out.wav",  "content.csv", "content.pgm",
                        "style.csv", "style.pgm",  "output.csv",
                        "output.pgm", "loss.csv"};
    write_file_atomic(dir / "manifest.json", manifest_to_json_text(manifest));
  });

  return 0;
}

int main_impl(int argc, const char* const* argv) {
  try {
    const auto cfg = parse_args(std::vector<std::string>(argv + 1, argv + argc));
    if (!cfg) return 0;
    return run(*cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wavestyle::cli
