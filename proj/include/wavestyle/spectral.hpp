#ifndef WAVESTYLE_SPECTRAL_HPP
#define WAVESTYLE_SPECTRAL_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "wavestyle/audio_io.hpp"
#include "wavestyle/tensor.hpp"

namespace wavestyle::spectral {

enum class FeatureVariant {
  RealImag,
  MagPhase,
  MagPhaseDiff,
  MagUnwrappedPhaseDiff,
  RealImagMag,
  MagOnly,  // log magnitudes, the magnitude-domain baseline input
};

const char* variant_name(FeatureVariant v);
FeatureVariant variant_from_name(const std::string& name);

// How component blocks are stacked along the feature height axis.
//   Blocks:      [r_0..r_B-1, i_0..i_B-1, m_0..m_B-1]
//   Interleaved: [r_0, i_0, m_0, r_1, i_1, m_1, ...]
enum class HeightLayout { Blocks, Interleaved };

struct FrontEndConfig {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;  // must be n_fft/2 or n_fft/4
  FeatureVariant variant = FeatureVariant::RealImagMag;
  double epsilon = 1e-10;
  HeightLayout layout = HeightLayout::Blocks;

  std::size_t bins() const { return n_fft / 2 + 1; }
  void validate() const;
};

// Per-frame spectra of a real signal, bins 0..n_fft/2.
struct ComplexSpectra {
  Tensor real;  // frames x bins
  Tensor imag;  // frames x bins
  std::size_t frames() const { return real.shape().empty() ? 0 : real.dim(0); }
  std::size_t bins() const { return real.rank() < 2 ? 0 : real.dim(1); }
};

// Identifies which rows of an assembled FeatureTensor hold which
// spectral component.
enum class Component { Real, Imag, Magnitude, Phase, PhaseDiff, UnwrappedPhaseDiff, LogMagnitude };

const char* component_name(Component c);

struct FeatureTensor {
  Tensor values;  // frames x height x 1
  struct Block {
    Component component;
    std::size_t index;  // position in the component stack
  };
  std::vector<Block> blocks;
  HeightLayout layout = HeightLayout::Blocks;
  std::size_t bins = 0;

  std::size_t frames() const { return values.dim(0); }
  std::size_t height() const { return values.dim(1); }
  bool has_component(Component c) const;
  // Copies one component back out of the assembled tensor as frames x bins.
  Tensor extract(Component c) const;
};

// Precomputed real-DFT basis for one frame length.
struct DftPlan {
  std::size_t n = 0;
  std::size_t bins = 0;
  std::vector<double> cos_table;  // bins x n, cos(2*pi*b*k/n)
  std::vector<double> sin_table;  // bins x n, sin(2*pi*b*k/n)
  explicit DftPlan(std::size_t n_fft);
};

// Periodic Hann window, w[k] = 0.5*(1 - cos(2*pi*k/n)). n even, >= 2.
std::vector<double> hann_window(std::size_t n);

std::size_t frame_count(std::size_t samples, std::size_t n_fft, std::size_t hop);
std::size_t span_of_frames(std::size_t frames, std::size_t n_fft, std::size_t hop);

// Windowed analysis frames; trailing samples that do not fill a frame
// are dropped.
Tensor frame_signal(const audio_io::AudioClip& clip, const FrontEndConfig& cfg);

ComplexSpectra dft_forward(const Tensor& frames);
ComplexSpectra dft_forward(const Tensor& frames, const DftPlan& plan);

// Least-squares inverse STFT: per-frame inverse DFT, Hann synthesis
// window, overlap-add, division by the accumulated squared window
// (floored at 1e-8).
audio_io::AudioClip inverse_dft_overlap_add(const ComplexSpectra& spectra,
                                            const FrontEndConfig& cfg,
                                            std::size_t out_len,
                                            int sample_rate);

// sqrt(re^2 + im^2 + epsilon); smooth at zero energy.
Tensor magnitude(const ComplexSpectra& spectra, double epsilon);

// atan2(im, re) in (-pi, pi]; phase of (0, 0) is defined as 0.
Tensor phase(const ComplexSpectra& spectra);

// Row f>0 holds phases[f]-phases[f-1]; row 0 passes through unchanged.
Tensor phase_differential(const Tensor& phases);

// Maps every value into (-pi, pi] by adding a multiple of 2*pi.
Tensor unwrap(const Tensor& diffs);

FeatureTensor assemble_features(const ComplexSpectra& spectra, const FrontEndConfig& cfg);

// Which component matrices feed a variant, in stack order.
std::vector<Component> variant_components(FeatureVariant v);

// Writes <base_path>.csv (one row per frame of log magnitudes) and
// <base_path>.pgm (8-bit grayscale, min-max scaled).
void export_spectrogram(const ComplexSpectra& spectra, const std::string& base_path);

// Low-level strided kernels shared by the eager ops above and the
// differentiation graph. Row r of the spectra is (real + r*stride,
// imag + r*stride).
namespace kernels {

void dft_rows(const double* frames, std::size_t n_frames, const DftPlan& plan,
              double* real, double* imag, std::size_t out_stride);
void dft_rows_backward(const double* up_real, const double* up_imag,
                       std::size_t up_stride, std::size_t n_frames,
                       const DftPlan& plan, double* grad_frames);
void idft_rows(const double* real, const double* imag, std::size_t in_stride,
               std::size_t n_frames, const DftPlan& plan, double* frames);

void magnitude_rows(const double* real, const double* imag, std::size_t in_stride,
                    std::size_t frames, std::size_t bins, double eps, double* out);
void magnitude_rows_backward(const double* real, const double* imag,
                             std::size_t in_stride, const double* mag,
                             const double* upstream, std::size_t frames,
                             std::size_t bins, double* grad_real,
                             double* grad_imag, std::size_t grad_stride);

void phase_rows(const double* real, const double* imag, std::size_t in_stride,
                std::size_t frames, std::size_t bins, double* out);
void phase_rows_backward(const double* real, const double* imag,
                         std::size_t in_stride, const double* upstream,
                         std::size_t frames, std::size_t bins, double* grad_real,
                         double* grad_imag, std::size_t grad_stride);

double principal_value(double x);

}  // namespace kernels

}  // namespace wavestyle::spectral

#endif  // WAVESTYLE_SPECTRAL_HPP
