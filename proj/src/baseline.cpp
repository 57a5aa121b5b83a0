#include "wavestyle/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wavestyle/common.hpp"

namespace wavestyle::baseline {

void GriffinLimConfig::validate() const {
  if (iterations < 1) throw ParamError("griffin_lim: iterations must be >= 1");
}

namespace {

double spectral_distance(const spectral::ComplexSpectra& s, const Tensor& mags) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    const double m = std::sqrt(s.real[i] * s.real[i] + s.imag[i] * s.imag[i]);
    const double d = m - mags[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

spectral::ComplexSpectra project_magnitudes(const spectral::ComplexSpectra& s,
                                            const Tensor& mags) {
  spectral::ComplexSpectra out;
  out.real = Tensor(s.real.shape());
  out.imag = Tensor(s.imag.shape());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    const double m = std::sqrt(s.real[i] * s.real[i] + s.imag[i] * s.imag[i]);
    if (m == 0.0) {
      out.real[i] = mags[i];  // angle(0) := 0
      out.imag[i] = 0.0;
    } else {
      out.real[i] = mags[i] * s.real[i] / m;
      out.imag[i] = mags[i] * s.imag[i] / m;
    }
  }
  return out;
}

}  // namespace

audio_io::AudioClip griffin_lim(const Tensor& target_mags,
                                const spectral::FrontEndConfig& fe,
                                const GriffinLimConfig& gl, int sample_rate,
                                std::vector<double>* objective) {
  fe.validate();
  gl.validate();
  if (sample_rate <= 0) throw ParamError("griffin_lim: sample rate must be positive");
  if (target_mags.rank() != 2 || target_mags.dim(1) != fe.bins())
    throw ParamError("griffin_lim: magnitudes do not match front end config");
  const std::size_t frames = target_mags.dim(0);
  if (frames == 0) throw ParamError("griffin_lim: no frames");
  for (std::size_t i = 0; i < target_mags.size(); ++i)
    if (!std::isfinite(target_mags[i]) || target_mags[i] < 0.0)
      throw ValidationError("griffin_lim: magnitudes must be finite and non-negative");

  const std::size_t out_len = spectral::span_of_frames(frames, fe.n_fft, fe.hop);

  spectral::ComplexSpectra init;
  init.real = Tensor({frames, fe.bins()});
  init.imag = Tensor({frames, fe.bins()});
  if (gl.init_phase == GriffinLimConfig::PhaseInit::Zero) {
    std::copy(target_mags.data(), target_mags.data() + target_mags.size(),
              init.real.data());
  } else {
    Rng rng(mix_seed(gl.seed, 31));
    for (std::size_t i = 0; i < target_mags.size(); ++i) {
      const double phi = (rng.uniform() - 0.5) * 2.0 * std::numbers::pi;
      init.real[i] = target_mags[i] * std::cos(phi);
      init.imag[i] = target_mags[i] * std::sin(phi);
    }
  }
  audio_io::AudioClip x = spectral::inverse_dft_overlap_add(init, fe, out_len, sample_rate);

  double prev = 0.0;
  for (std::size_t t = 0; t <= gl.iterations; ++t) {
    const Tensor framed = spectral::frame_signal(x, fe);
    const spectral::ComplexSpectra s = spectral::dft_forward(framed);
    const double d = spectral_distance(s, target_mags);
    if (objective) objective->push_back(d);
    if (t > 0 && d > prev + 1e-9)
      throw Error("griffin_lim: objective increased at iteration " + std::to_string(t) +
                  " (" + std::to_string(prev) + " -> " + std::to_string(d) + ")");
    prev = d;
    if (t == gl.iterations) break;
    x = spectral::inverse_dft_overlap_add(project_magnitudes(s, target_mags), fe,
                                          out_len, sample_rate);
  }
  return x;
}

std::pair<audio_io::AudioClip, stylizer::LossReport> ulyanov_stylize(
    const audio_io::AudioClip& content, const audio_io::AudioClip& style,
    const stylizer::StyleTransferConfig& cfg, const spectral::FrontEndConfig& fe,
    const GriffinLimConfig& gl, const network::NetworkConfig* net_override,
    const stylizer::ProgressFn& progress) {
  fe.validate();
  cfg.validate();
  gl.validate();
  audio_io::require_valid(content, "content clip");
  audio_io::require_valid(style, "style clip");
  if (content.sample_rate != style.sample_rate)
    throw ParamError("baseline: sample rate mismatch, content " +
                     std::to_string(content.sample_rate) + " Hz vs style " +
                     std::to_string(style.sample_rate) + " Hz");
  if (content.samples.size() < fe.n_fft || style.samples.size() < fe.n_fft)
    throw ValidationError("baseline: clips must span at least one frame");

  network::NetworkConfig net_cfg =
      net_override ? *net_override : network::load_preset("baseline-ulyanov");
  if (!net_cfg.bins_as_channels || net_cfg.variant != spectral::FeatureVariant::MagOnly)
    throw ParamError("baseline: network must consume log magnitudes with bins as channels");

  const std::size_t bins = fe.bins();
  const network::Network net = network::init_filters(net_cfg, bins);
  const stylizer::Targets targets = stylizer::compute_targets(content, style, net, fe);

  const std::size_t frames =
      spectral::frame_count(content.samples.size(), fe.n_fft, fe.hop);
  stylizer::Problem problem(frames, bins, net, targets, cfg.content_weight,
                            cfg.style_weight);

  Tensor f({frames, bins});
  if (cfg.init == stylizer::StyleTransferConfig::Init::ContentCopy) {
    spectral::FrontEndConfig mag_fe = fe;
    mag_fe.variant = spectral::FeatureVariant::MagOnly;
    const spectral::FeatureTensor ft = spectral::assemble_features(
        spectral::dft_forward(spectral::frame_signal(content, mag_fe)), mag_fe);
    std::copy(ft.values.data(), ft.values.data() + ft.values.size(), f.data());
  } else {
    Rng rng(mix_seed(cfg.seed, 7));
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = cfg.init_noise_sigma * rng.normal();
  }

  stylizer::LossReport report = stylizer::run_adam(problem, f, cfg, progress);

  Tensor mags({frames, bins});
  for (std::size_t i = 0; i < f.size(); ++i)
    mags[i] = std::max(std::exp(f[i]) - fe.epsilon, 0.0);

  audio_io::AudioClip out = griffin_lim(mags, fe, gl, content.sample_rate);
  return {std::move(out), std::move(report)};
}

}  // namespace wavestyle::baseline
