#ifndef WAVESTYLE_AUDIO_IO_HPP
#define WAVESTYLE_AUDIO_IO_HPP

#include <string>
#include <vector>

namespace wavestyle::audio_io {

// Mono waveform, amplitudes nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
};

// True when the clip satisfies the invariants required of anything
// entering an optimization run: non-empty, finite, positive rate.
bool clip_valid(const AudioClip& clip);
void require_valid(const AudioClip& clip, const std::string& what);

// Reads a RIFF/WAVE file. Accepts PCM 16-bit (format 1) and IEEE
// float 32-bit (format 3), 1 or 2 channels. Stereo is downmixed by
// channel averaging; 16-bit samples are scaled by 1/32768.
AudioClip load_wav(const std::string& path);

// Writes mono IEEE float 32-bit WAV. Refuses non-finite samples.
void save_wav(const AudioClip& clip, const std::string& path);

// Rescales so max |sample| == target_peak (target in (0, 1]).
// All-zero clips come back unchanged.
AudioClip peak_normalize(const AudioClip& clip, double target_peak);

}  // namespace wavestyle::audio_io

#endif  // WAVESTYLE_AUDIO_IO_HPP
