#ifndef WAVESTYLE_CLI_HPP
#define WAVESTYLE_CLI_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wavestyle::cli {

struct RunConfig {
  std::string content_path;
  std::string style_path;
  std::string output_dir = "out";
  std::string preset = "rim-k3";
  bool baseline = false;
  std::size_t n_fft = 2048;
  std::size_t hop = 0;  // 0 -> n_fft/4
  std::size_t filters = 0;  // 0 -> preset value
  std::size_t kernel_time = 0;
  std::size_t layers = 0;
  double content_weight = 1.0;
  double style_weight = 1e-2;
  std::size_t iterations = 1000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t gl_iterations = 100;
  std::string init = "noise";  // or "content"

  std::size_t resolved_hop() const { return hop ? hop : n_fft / 4; }
  bool operator==(const RunConfig&) const = default;
};

struct InputDigest {
  std::string path;
  std::string sha256;
  bool operator==(const InputDigest&) const = default;
};

// Everything needed to reproduce a run byte-identically, plus
// bookkeeping. Serializes to and reparses from JSON losslessly.
struct RunManifest {
  std::string version;
  RunConfig config;  // fully resolved (hop, filters, ... made concrete)
  std::uint64_t seed_filters = 0;
  std::uint64_t seed_init = 0;
  std::uint64_t seed_phase = 0;
  InputDigest content;
  InputDigest style;
  double seconds_load = 0.0;
  double seconds_optimize = 0.0;
  double seconds_artifacts = 0.0;
  std::vector<std::string> outputs;

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json_text(const RunManifest& m);
RunManifest manifest_from_json_text(const std::string& text);

std::string sha256_hex_file(const std::string& path);

// Flags > config-file values > defaults. Returns nullopt when --help
// was requested (help already printed). Usage problems -> UsageError.
std::optional<RunConfig> parse_args(const std::vector<std::string>& args);

// Executes the configured run and writes out.wav, three spectrogram
// CSV/PGM pairs, loss.csv and manifest.json into the output directory.
// Errors carry the failing stage name in their message.
int run(const RunConfig& cfg);

// Full process entry: parse, run, map errors to exit codes
// (0 success, 1 runtime failure, 2 usage error).
int main_impl(int argc, const char* const* argv);

}  // namespace wavestyle::cli

#endif  // WAVESTYLE_CLI_HPP
