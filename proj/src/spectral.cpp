#include "wavestyle/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "wavestyle/common.hpp"

namespace wavestyle::spectral {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEnvelopeFloor = 1e-8;
}  // namespace

const char* variant_name(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::RealImag: return "real-imag";
    case FeatureVariant::MagPhase: return "mag-phase";
    case FeatureVariant::MagPhaseDiff: return "mag-phasediff";
    case FeatureVariant::MagUnwrappedPhaseDiff: return "mag-unwrapped-phasediff";
    case FeatureVariant::RealImagMag: return "real-imag-mag";
    case FeatureVariant::MagOnly: return "mag-only";
  }
  return "?";
}

FeatureVariant variant_from_name(const std::string& name) {
  for (FeatureVariant v :
       {FeatureVariant::RealImag, FeatureVariant::MagPhase,
        FeatureVariant::MagPhaseDiff, FeatureVariant::MagUnwrappedPhaseDiff,
        FeatureVariant::RealImagMag, FeatureVariant::MagOnly}) {
    if (name == variant_name(v)) return v;
  }
  throw ParamError("unknown feature variant: " + name);
}

const char* component_name(Component c) {
  switch (c) {
    case Component::Real: return "real";
    case Component::Imag: return "imag";
    case Component::Magnitude: return "magnitude";
    case Component::Phase: return "phase";
    case Component::PhaseDiff: return "phase-diff";
    case Component::UnwrappedPhaseDiff: return "unwrapped-phase-diff";
    case Component::LogMagnitude: return "log-magnitude";
  }
  return "?";
}

void FrontEndConfig::validate() const {
  if (n_fft < 2 || n_fft % 2 != 0)
    throw ParamError("front end: n_fft must be even and >= 2");
  if (hop == 0 || (hop * 2 != n_fft && hop * 4 != n_fft))
    throw ParamError("front end: hop must be n_fft/2 or n_fft/4");
  if (!(epsilon > 0.0))
    throw ParamError("front end: epsilon must be positive");
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2 || n % 2 != 0)
    throw ParamError("hann_window: n must be even and >= 2");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n)));
  return w;
}

std::size_t frame_count(std::size_t samples, std::size_t n_fft, std::size_t hop) {
  if (samples < n_fft) return 0;
  return (samples - n_fft) / hop + 1;
}

std::size_t span_of_frames(std::size_t frames, std::size_t n_fft, std::size_t hop) {
  return frames == 0 ? 0 : (frames - 1) * hop + n_fft;
}

DftPlan::DftPlan(std::size_t n_fft) : n(n_fft), bins(n_fft / 2 + 1) {
  if (n_fft < 2 || n_fft % 2 != 0)
    throw ParamError("DftPlan: n_fft must be even and >= 2");
  cos_table.resize(bins * n);
  sin_table.resize(bins * n);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t k = 0; k < n; ++k) {
      const double angle = kTwoPi * static_cast<double>(b) * static_cast<double>(k) /
                           static_cast<double>(n);
      cos_table[b * n + k] = std::cos(angle);
      sin_table[b * n + k] = std::sin(angle);
    }
  }
}

Tensor frame_signal(const audio_io::AudioClip& clip, const FrontEndConfig& cfg) {
  cfg.validate();
  const std::size_t len = clip.samples.size();
  if (len < cfg.n_fft)
    throw ValidationError("frame_signal: input shorter than one frame (" +
                          std::to_string(len) + " < " + std::to_string(cfg.n_fft) + ")");
  const std::size_t n = cfg.n_fft;
  const std::size_t frames = frame_count(len, n, cfg.hop);
  const std::vector<double> w = hann_window(n);
  Tensor out({frames, n});
  const double* x = clip.samples.data();
  double* o = out.data();
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(frames); ++f) {
    const double* src = x + static_cast<std::size_t>(f) * cfg.hop;
    double* dst = o + static_cast<std::size_t>(f) * n;
    for (std::size_t k = 0; k < n; ++k) dst[k] = src[k] * w[k];
  }
  return out;
}

namespace kernels {

void dft_rows(const double* frames, std::size_t n_frames, const DftPlan& plan,
              double* real, double* imag, std::size_t out_stride) {
  const std::size_t n = plan.n;
  const std::size_t bins = plan.bins;
#pragma omp parallel for collapse(2) schedule(static)
  for (long long f = 0; f < static_cast<long long>(n_frames); ++f) {
    for (long long b = 0; b < static_cast<long long>(bins); ++b) {
      const double* x = frames + static_cast<std::size_t>(f) * n;
      const double* ct = plan.cos_table.data() + static_cast<std::size_t>(b) * n;
      const double* st = plan.sin_table.data() + static_cast<std::size_t>(b) * n;
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        re += x[k] * ct[k];
        im -= x[k] * st[k];
      }
      real[static_cast<std::size_t>(f) * out_stride + static_cast<std::size_t>(b)] = re;
      imag[static_cast<std::size_t>(f) * out_stride + static_cast<std::size_t>(b)] = im;
    }
  }
}

void dft_rows_backward(const double* up_real, const double* up_imag,
                       std::size_t up_stride, std::size_t n_frames,
                       const DftPlan& plan, double* grad_frames) {
  const std::size_t n = plan.n;
  const std::size_t bins = plan.bins;
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(n_frames); ++f) {
    double* g = grad_frames + static_cast<std::size_t>(f) * n;
    for (std::size_t b = 0; b < bins; ++b) {
      const double ur = up_real[static_cast<std::size_t>(f) * up_stride + b];
      const double ui = up_imag[static_cast<std::size_t>(f) * up_stride + b];
      const double* ct = plan.cos_table.data() + b * n;
      const double* st = plan.sin_table.data() + b * n;
      for (std::size_t k = 0; k < n; ++k) g[k] += ur * ct[k] - ui * st[k];
    }
  }
}

void idft_rows(const double* real, const double* imag, std::size_t in_stride,
               std::size_t n_frames, const DftPlan& plan, double* frames) {
  const std::size_t n = plan.n;
  const std::size_t bins = plan.bins;
  const double inv_n = 1.0 / static_cast<double>(n);
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(n_frames); ++f) {
    double* out = frames + static_cast<std::size_t>(f) * n;
    std::fill(out, out + n, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
      const double weight = (b == 0 || b == bins - 1) ? 1.0 : 2.0;
      const double re = weight * real[static_cast<std::size_t>(f) * in_stride + b];
      const double im = weight * imag[static_cast<std::size_t>(f) * in_stride + b];
      const double* ct = plan.cos_table.data() + b * n;
      const double* st = plan.sin_table.data() + b * n;
      for (std::size_t k = 0; k < n; ++k) out[k] += re * ct[k] - im * st[k];
    }
    for (std::size_t k = 0; k < n; ++k) out[k] *= inv_n;
  }
}

void magnitude_rows(const double* real, const double* imag, std::size_t in_stride,
                    std::size_t frames, std::size_t bins, double eps, double* out) {
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(frames); ++f) {
    const double* re = real + static_cast<std::size_t>(f) * in_stride;
    const double* im = imag + static_cast<std::size_t>(f) * in_stride;
    double* o = out + static_cast<std::size_t>(f) * bins;
    for (std::size_t b = 0; b < bins; ++b)
      o[b] = std::sqrt(re[b] * re[b] + im[b] * im[b] + eps);
  }
}

void magnitude_rows_backward(const double* real, const double* imag,
                             std::size_t in_stride, const double* mag,
                             const double* upstream, std::size_t frames,
                             std::size_t bins, double* grad_real,
                             double* grad_imag, std::size_t grad_stride) {
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(frames); ++f) {
    const std::size_t fi = static_cast<std::size_t>(f);
    const double* re = real + fi * in_stride;
    const double* im = imag + fi * in_stride;
    const double* m = mag + fi * bins;
    const double* up = upstream + fi * bins;
    double* gr = grad_real + fi * grad_stride;
    double* gi = grad_imag + fi * grad_stride;
    for (std::size_t b = 0; b < bins; ++b) {
      const double s = up[b] / m[b];  // m > 0 because eps > 0
      gr[b] += s * re[b];
      gi[b] += s * im[b];
    }
  }
}

void phase_rows(const double* real, const double* imag, std::size_t in_stride,
                std::size_t frames, std::size_t bins, double* out) {
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(frames); ++f) {
    const double* re = real + static_cast<std::size_t>(f) * in_stride;
    const double* im = imag + static_cast<std::size_t>(f) * in_stride;
    double* o = out + static_cast<std::size_t>(f) * bins;
    for (std::size_t b = 0; b < bins; ++b)
      o[b] = (re[b] == 0.0 && im[b] == 0.0) ? 0.0 : std::atan2(im[b], re[b]);
  }
}

void phase_rows_backward(const double* real, const double* imag,
                         std::size_t in_stride, const double* upstream,
                         std::size_t frames, std::size_t bins, double* grad_real,
                         double* grad_imag, std::size_t grad_stride) {
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < static_cast<long long>(frames); ++f) {
    const std::size_t fi = static_cast<std::size_t>(f);
    const double* re = real + fi * in_stride;
    const double* im = imag + fi * in_stride;
    const double* up = upstream + fi * bins;
    double* gr = grad_real + fi * grad_stride;
    double* gi = grad_imag + fi * grad_stride;
    for (std::size_t b = 0; b < bins; ++b) {
      const double d = re[b] * re[b] + im[b] * im[b];
      if (d == 0.0) continue;  // phase(0,0) := 0 with zero gradient
      gr[b] += up[b] * (-im[b] / d);
      gi[b] += up[b] * (re[b] / d);
    }
  }
}

double principal_value(double x) {
  return x - kTwoPi * std::ceil((x - kPi) / kTwoPi);
}

}  // namespace kernels

ComplexSpectra dft_forward(const Tensor& frames) {
  if (frames.rank() != 2) throw ParamError("dft_forward: expected frames x n matrix");
  DftPlan plan(frames.dim(1));
  return dft_forward(frames, plan);
}

ComplexSpectra dft_forward(const Tensor& frames, const DftPlan& plan) {
  if (frames.rank() != 2 || frames.dim(1) != plan.n)
    throw ParamError("dft_forward: frame width does not match plan");
  const std::size_t nf = frames.dim(0);
  ComplexSpectra s;
  s.real = Tensor({nf, plan.bins});
  s.imag = Tensor({nf, plan.bins});
  kernels::dft_rows(frames.data(), nf, plan, s.real.data(), s.imag.data(), plan.bins);
  return s;
}

audio_io::AudioClip inverse_dft_overlap_add(const ComplexSpectra& spectra,
                                            const FrontEndConfig& cfg,
                                            std::size_t out_len,
                                            int sample_rate) {
  cfg.validate();
  const std::size_t nf = spectra.frames();
  if (nf == 0 || spectra.bins() != cfg.bins())
    throw ParamError("inverse_dft_overlap_add: spectra shape does not match config");
  if (out_len != span_of_frames(nf, cfg.n_fft, cfg.hop))
    throw ParamError("inverse_dft_overlap_add: out_len does not match framing arithmetic");

  const std::size_t n = cfg.n_fft;
  const std::size_t hop = cfg.hop;
  DftPlan plan(n);
  Tensor rec({nf, n});
  kernels::idft_rows(spectra.real.data(), spectra.imag.data(), spectra.bins(), nf,
                     plan, rec.data());

  const std::vector<double> w = hann_window(n);
  audio_io::AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.assign(out_len, 0.0);
  const double* r = rec.data();
  double* y = out.samples.data();
#pragma omp parallel for schedule(static)
  for (long long s = 0; s < static_cast<long long>(out_len); ++s) {
    const std::size_t si = static_cast<std::size_t>(s);
    // frames covering sample si: si - n < f*hop <= si
    std::size_t f_lo = si < n ? 0 : (si - n) / hop + 1;
    const std::size_t f_hi = std::min(si / hop, nf - 1);
    double acc = 0.0, env = 0.0;
    for (std::size_t f = f_lo; f <= f_hi; ++f) {
      const std::size_t k = si - f * hop;
      acc += w[k] * r[f * n + k];
      env += w[k] * w[k];
    }
    y[si] = acc / std::max(env, kEnvelopeFloor);
  }
  return out;
}

Tensor magnitude(const ComplexSpectra& spectra, double epsilon) {
  if (!(epsilon > 0.0)) throw ParamError("magnitude: epsilon must be positive");
  Tensor out({spectra.frames(), spectra.bins()});
  kernels::magnitude_rows(spectra.real.data(), spectra.imag.data(), spectra.bins(),
                          spectra.frames(), spectra.bins(), epsilon, out.data());
  return out;
}

Tensor phase(const ComplexSpectra& spectra) {
  Tensor out({spectra.frames(), spectra.bins()});
  kernels::phase_rows(spectra.real.data(), spectra.imag.data(), spectra.bins(),
                      spectra.frames(), spectra.bins(), out.data());
  return out;
}

Tensor phase_differential(const Tensor& phases) {
  if (phases.rank() != 2 || phases.dim(0) == 0)
    throw ParamError("phase_differential: expected a non-empty frames x bins matrix");
  const std::size_t nf = phases.dim(0);
  const std::size_t nb = phases.dim(1);
  Tensor out({nf, nb});
  for (std::size_t b = 0; b < nb; ++b) out.at(0, b) = phases.at(0, b);
#pragma omp parallel for schedule(static)
  for (long long f = 1; f < static_cast<long long>(nf); ++f)
    for (std::size_t b = 0; b < nb; ++b)
      out.at(static_cast<std::size_t>(f), b) =
          phases.at(static_cast<std::size_t>(f), b) -
          phases.at(static_cast<std::size_t>(f) - 1, b);
  return out;
}

Tensor unwrap(const Tensor& diffs) {
  Tensor out = diffs;
  double* d = out.data();
  const long long n = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) d[i] = kernels::principal_value(d[i]);
  return out;
}

std::vector<Component> variant_components(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::RealImag:
      return {Component::Real, Component::Imag};
    case FeatureVariant::MagPhase:
      return {Component::Magnitude, Component::Phase};
    case FeatureVariant::MagPhaseDiff:
      return {Component::Magnitude, Component::PhaseDiff};
    case FeatureVariant::MagUnwrappedPhaseDiff:
      return {Component::Magnitude, Component::UnwrappedPhaseDiff};
    case FeatureVariant::RealImagMag:
      return {Component::Real, Component::Imag, Component::Magnitude};
    case FeatureVariant::MagOnly:
      return {Component::LogMagnitude};
  }
  throw ParamError("variant_components: bad variant");
}

bool FeatureTensor::has_component(Component c) const {
  for (const Block& b : blocks)
    if (b.component == c) return true;
  return false;
}

Tensor FeatureTensor::extract(Component c) const {
  const std::size_t k = blocks.size();
  const std::size_t nf = frames();
  for (const Block& blk : blocks) {
    if (blk.component != c) continue;
    Tensor out({nf, bins});
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t row = layout == HeightLayout::Blocks
                                    ? blk.index * bins + b
                                    : b * k + blk.index;
        out.at(f, b) = values.at(f, row, 0);
      }
    return out;
  }
  throw ParamError(std::string("feature tensor has no ") + component_name(c) + " block");
}

FeatureTensor assemble_features(const ComplexSpectra& spectra, const FrontEndConfig& cfg) {
  cfg.validate();
  const std::size_t nf = spectra.frames();
  const std::size_t nb = spectra.bins();
  const std::vector<Component> comps = variant_components(cfg.variant);
  const std::size_t k = comps.size();

  // Component matrices, each frames x bins.
  std::vector<Tensor> mats;
  mats.reserve(k);
  Tensor mag;  // shared by derived components
  auto need_mag = [&]() {
    if (mag.size() == 0) mag = magnitude(spectra, cfg.epsilon);
    return mag;
  };
  for (Component c : comps) {
    switch (c) {
      case Component::Real: mats.push_back(spectra.real); break;
      case Component::Imag: mats.push_back(spectra.imag); break;
      case Component::Magnitude: mats.push_back(need_mag()); break;
      case Component::Phase: mats.push_back(phase(spectra)); break;
      case Component::PhaseDiff:
        mats.push_back(phase_differential(phase(spectra)));
        break;
      case Component::UnwrappedPhaseDiff:
        mats.push_back(unwrap(phase_differential(phase(spectra))));
        break;
      case Component::LogMagnitude: {
        Tensor lm = need_mag();
        for (std::size_t i = 0; i < lm.size(); ++i)
          lm[i] = std::log(lm[i] + cfg.epsilon);
        mats.push_back(std::move(lm));
        break;
      }
    }
  }

  FeatureTensor ft;
  ft.layout = cfg.layout;
  ft.bins = nb;
  ft.values = Tensor({nf, k * nb, 1});
  for (std::size_t c = 0; c < k; ++c) {
    ft.blocks.push_back({comps[c], c});
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t row =
            cfg.layout == HeightLayout::Blocks ? c * nb + b : b * k + c;
        ft.values.at(f, row, 0) = mats[c].at(f, b);
      }
  }
  return ft;
}

void export_spectrogram(const ComplexSpectra& spectra, const std::string& base_path) {
  const std::size_t nf = spectra.frames();
  const std::size_t nb = spectra.bins();
  Tensor logmag({nf, nb});
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t b = 0; b < nb; ++b) {
      const double re = spectra.real.at(f, b);
      const double im = spectra.imag.at(f, b);
      logmag.at(f, b) = std::log(std::sqrt(re * re + im * im) + 1e-6);
    }

  {
    std::ofstream csv(base_path + ".csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("export_spectrogram: cannot write " + base_path + ".csv");
    char buf[64];
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t b = 0; b < nb; ++b) {
        std::snprintf(buf, sizeof buf, "%.9g", logmag.at(f, b));
        if (b) csv << ',';
        csv << buf;
      }
      csv << "\r\n";
    }
    if (!csv) throw IoError("export_spectrogram: write failed for " + base_path + ".csv");
  }

  {
    double lo = logmag.size() ? logmag[0] : 0.0, hi = lo;
    for (std::size_t i = 0; i < logmag.size(); ++i) {
      lo = std::min(lo, logmag[i]);
      hi = std::max(hi, logmag[i]);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::ofstream pgm(base_path + ".pgm", std::ios::binary | std::ios::trunc);
    if (!pgm) throw IoError("export_spectrogram: cannot write " + base_path + ".pgm");
    pgm << "P5\n" << nb << " " << nf << "\n255\n";
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t b = 0; b < nb; ++b) {
        const int v = static_cast<int>(std::lround((logmag.at(f, b) - lo) * scale));
        pgm.put(static_cast<char>(std::clamp(v, 0, 255)));
      }
    if (!pgm) throw IoError("export_spectrogram: write failed for " + base_path + ".pgm");
  }
}

}  // namespace wavestyle::spectral
