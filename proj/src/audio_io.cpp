#include "wavestyle/audio_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "wavestyle/common.hpp"

namespace wavestyle::audio_io {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

float read_f32(const unsigned char* p) {
  std::uint32_t bits = read_u32(p);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

bool clip_valid(const AudioClip& clip) {
  if (clip.samples.empty() || clip.sample_rate <= 0) return false;
  for (double s : clip.samples)
    if (!std::isfinite(s)) return false;
  return true;
}

void require_valid(const AudioClip& clip, const std::string& what) {
  if (clip.samples.empty())
    throw ValidationError(what + ": clip has no samples");
  if (clip.sample_rate <= 0)
    throw ValidationError(what + ": sample rate must be positive");
  for (double s : clip.samples)
    if (!std::isfinite(s))
      throw ValidationError(what + ": clip contains non-finite samples");
}

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_wav: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();

  if (n < 12) throw ParseError("load_wav: truncated RIFF header in " + path);
  if (std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError("load_wav: not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const unsigned char* hdr = p + pos;
    std::uint32_t chunk_len = read_u32(hdr + 4);
    pos += 8;
    if (pos + chunk_len > n)
      throw ParseError("load_wav: truncated chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw ParseError("load_wav: short fmt chunk in " + path);
      format = read_u16(p + pos);
      channels = read_u16(p + pos + 2);
      rate = read_u32(p + pos + 4);
      bits = read_u16(p + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = p + pos;
      data_len = chunk_len;
    }
    pos += chunk_len + (chunk_len & 1);  // chunks are word aligned
  }

  if (!have_fmt || data == nullptr)
    throw ParseError("load_wav: missing fmt or data chunk in " + path);
  if (format != kFormatPcm && format != kFormatFloat)
    throw FormatError("load_wav: unsupported codec (fmt tag " +
                      std::to_string(format) + ") in " + path);
  if (channels < 1 || channels > 2)
    throw FormatError("load_wav: expected 1 or 2 channels, got " +
                      std::to_string(channels) + " in " + path);
  if (format == kFormatPcm && bits != 16)
    throw FormatError("load_wav: PCM must be 16-bit, got " +
                      std::to_string(bits) + "-bit in " + path);
  if (format == kFormatFloat && bits != 32)
    throw FormatError("load_wav: float must be 32-bit, got " +
                      std::to_string(bits) + "-bit in " + path);
  if (rate == 0) throw ParseError("load_wav: zero sample rate in " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (data_len % frame_bytes != 0)
    throw ParseError("load_wav: data chunk not a whole number of frames in " + path);
  const std::size_t frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + f * frame_bytes + c * bytes_per_sample;
      if (format == kFormatPcm) {
        auto v = static_cast<std::int16_t>(read_u16(s));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        acc += static_cast<double>(read_f32(s));
      }
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::string& path) {
  require_valid(clip, "save_wav");

  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_len = n * 4;
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  append_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  append_u32(out, 16);
  append_u16(out, kFormatFloat);
  append_u16(out, 1);  // mono
  append_u32(out, rate);
  append_u32(out, rate * 4);  // byte rate
  append_u16(out, 4);         // block align
  append_u16(out, 32);        // bits per sample
  out.append("data");
  append_u32(out, data_len);
  for (double s : clip.samples) {
    float f = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    append_u32(out, bits);
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_wav: cannot open " + path + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("save_wav: write failed for " + path);
}

AudioClip peak_normalize(const AudioClip& clip, double target_peak) {
  if (!(target_peak > 0.0) || target_peak > 1.0)
    throw ParamError("peak_normalize: target peak must be in (0, 1]");
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  if (peak == 0.0) return clip;
  AudioClip out = clip;
  const double g = target_peak / peak;
  for (double& s : out.samples) s *= g;
  return out;
}

}  // namespace wavestyle::audio_io
