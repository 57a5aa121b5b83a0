#include "wavestyle/network.hpp"

#include <algorithm>
#include <cmath>

#include "wavestyle/common.hpp"

namespace wavestyle::network {

void NetworkConfig::validate() const {
  if (layers.empty()) throw ParamError("network: at least one conv layer required");
  for (const ConvSpec& l : layers) {
    if (l.time_width < 1 || l.height_span < 1)
      throw ParamError("network: kernel dims must be >= 1");
    if (l.stride_t < 1 || l.stride_h < 1)
      throw ParamError("network: strides must be >= 1");
    if (l.filters < 1) throw ParamError("network: filters must be >= 1");
  }
  bool content = false, style = false;
  for (const Tap& t : taps) {
    if (t.point == TapPoint::AfterLayer && t.layer >= layers.size())
      throw ParamError("network: tap references layer " + std::to_string(t.layer) +
                       " of " + std::to_string(layers.size()));
    if (t.point == TapPoint::MagnitudeBlock) {
      bool has_mag = false;
      for (spectral::Component c : spectral::variant_components(variant))
        has_mag = has_mag || c == spectral::Component::Magnitude;
      if (!has_mag)
        throw ParamError(std::string("network: variant ") +
                         spectral::variant_name(variant) + " has no magnitude block");
    }
    (t.role == TapRole::Content ? content : style) = true;
  }
  if (!content || !style)
    throw ParamError("network: need at least one content and one style tap");
}

std::vector<Tap> default_taps(spectral::FeatureVariant variant, std::size_t n_layers) {
  bool has_mag = false;
  for (spectral::Component c : spectral::variant_components(variant))
    has_mag = has_mag || c == spectral::Component::Magnitude;
  std::vector<Tap> taps;
  taps.push_back({TapPoint::RawFeatures, 0, TapRole::Content});
  taps.push_back({has_mag ? TapPoint::MagnitudeBlock : TapPoint::RawFeatures, 0,
                  TapRole::Style});
  for (std::size_t i = 0; i < n_layers; ++i) {
    taps.push_back({TapPoint::AfterLayer, i, TapRole::Content});
    taps.push_back({TapPoint::AfterLayer, i, TapRole::Style});
  }
  return taps;
}

Tensor Network::input_for(const spectral::FeatureTensor& features) const {
  const std::size_t frames = features.frames();
  const std::size_t height = features.height();
  std::vector<std::size_t> shape = cfg.bins_as_channels
                                       ? std::vector<std::size_t>{frames, 1, height}
                                       : std::vector<std::size_t>{frames, height, 1};
  Tensor out(shape);
  std::copy(features.values.data(), features.values.data() + features.values.size(),
            out.data());
  return out;
}

Network init_filters(const NetworkConfig& cfg, std::size_t in_channels0) {
  cfg.validate();
  if (in_channels0 < 1) throw ParamError("init_filters: in_channels must be >= 1");
  Network net;
  net.cfg = cfg;
  std::size_t in_c = in_channels0;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const ConvSpec& spec = cfg.layers[i];
    ConvLayer layer;
    layer.stride_t = spec.stride_t;
    layer.stride_h = spec.stride_h;
    layer.relu = spec.relu;
    layer.kernel = Tensor({spec.time_width, spec.height_span, in_c, spec.filters});
    const double sigma = std::sqrt(
        2.0 / (static_cast<double>(spec.time_width) *
               static_cast<double>(spec.height_span) * static_cast<double>(in_c)));
    Rng rng(mix_seed(cfg.seed, 100 + i));
    for (std::size_t k = 0; k < layer.kernel.size(); ++k)
      layer.kernel[k] = sigma * rng.normal();
    net.layers.push_back(std::move(layer));
    in_c = spec.filters;
  }
  return net;
}

namespace kernels {

void conv2d(const double* in, std::size_t T, std::size_t H, std::size_t C,
            const double* kernel, std::size_t KT, std::size_t KH, std::size_t O,
            std::size_t stride_t, std::size_t stride_h, double* out,
            std::size_t Tp, std::size_t Hp) {
  (void)T;
#pragma omp parallel for collapse(2) schedule(static)
  for (long long tp = 0; tp < static_cast<long long>(Tp); ++tp) {
    for (long long hp = 0; hp < static_cast<long long>(Hp); ++hp) {
      const std::size_t t0 = static_cast<std::size_t>(tp) * stride_t;
      const std::size_t h0 = static_cast<std::size_t>(hp) * stride_h;
      double* orow = out + (static_cast<std::size_t>(tp) * Hp +
                            static_cast<std::size_t>(hp)) * O;
      std::fill(orow, orow + O, 0.0);
      for (std::size_t dt = 0; dt < KT; ++dt)
        for (std::size_t dh = 0; dh < KH; ++dh) {
          const double* irow = in + ((t0 + dt) * H + (h0 + dh)) * C;
          const double* krow = kernel + (dt * KH + dh) * C * O;
          for (std::size_t c = 0; c < C; ++c) {
            const double v = irow[c];
            const double* kc = krow + c * O;
            for (std::size_t o = 0; o < O; ++o) orow[o] += v * kc[o];
          }
        }
    }
  }
}

void conv2d_backward_input(const double* upstream, std::size_t Tp, std::size_t Hp,
                           std::size_t O, const double* kernel, std::size_t KT,
                           std::size_t KH, std::size_t C, std::size_t stride_t,
                           std::size_t stride_h, double* grad_in, std::size_t T,
                           std::size_t H) {
#pragma omp parallel for schedule(static)
  for (long long t = 0; t < static_cast<long long>(T); ++t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    for (std::size_t h = 0; h < H; ++h) {
      double* grow = grad_in + (ti * H + h) * C;
      for (std::size_t dt = 0; dt < KT; ++dt) {
        if (ti < dt || (ti - dt) % stride_t != 0) continue;
        const std::size_t tp = (ti - dt) / stride_t;
        if (tp >= Tp) continue;
        for (std::size_t dh = 0; dh < KH; ++dh) {
          if (h < dh || (h - dh) % stride_h != 0) continue;
          const std::size_t hp = (h - dh) / stride_h;
          if (hp >= Hp) continue;
          const double* urow = upstream + (tp * Hp + hp) * O;
          const double* krow = kernel + (dt * KH + dh) * C * O;
          for (std::size_t c = 0; c < C; ++c) {
            const double* kc = krow + c * O;
            double acc = 0.0;
            for (std::size_t o = 0; o < O; ++o) acc += urow[o] * kc[o];
            grow[c] += acc;
          }
        }
      }
    }
  }
}

}  // namespace kernels

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  if (input.rank() != 3)
    throw ParamError("conv2d_forward: expected input {T,H,C}");
  const std::size_t T = input.dim(0), H = input.dim(1), C = input.dim(2);
  const Tensor& k = layer.kernel;
  if (k.rank() != 4 || k.dim(2) != C)
    throw ParamError("conv2d_forward: kernel/input channel mismatch");
  const std::size_t KT = k.dim(0), KH = k.dim(1), O = k.dim(3);
  if (KT > T || KH > H)
    throw ParamError("conv2d_forward: kernel larger than input");
  if (layer.stride_t < 1 || layer.stride_h < 1)
    throw ParamError("conv2d_forward: strides must be >= 1");
  const std::size_t Tp = (T - KT) / layer.stride_t + 1;
  const std::size_t Hp = (H - KH) / layer.stride_h + 1;
  Tensor out({Tp, Hp, O});
  kernels::conv2d(input.data(), T, H, C, k.data(), KT, KH, O, layer.stride_t,
                  layer.stride_h, out.data(), Tp, Hp);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  double* d = out.data();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(out.size()); ++i)
    d[i] = d[i] > 0.0 ? d[i] : 0.0;
  return out;
}

ActivationSet forward_collect(const Tensor& input, const Network& net,
                              const Tensor* magnitude_block) {
  net.cfg.validate();
  std::vector<Tensor> after_layer;
  Tensor cur = input;
  for (const ConvLayer& layer : net.layers) {
    cur = conv2d_forward(cur, layer);
    if (layer.relu) cur = relu(cur);
    after_layer.push_back(cur);
  }
  ActivationSet acts;
  for (const Tap& tap : net.cfg.taps) {
    const Tensor* src = nullptr;
    switch (tap.point) {
      case TapPoint::RawFeatures: src = &input; break;
      case TapPoint::MagnitudeBlock:
        if (!magnitude_block)
          throw ParamError("forward_collect: magnitude block tap without magnitudes");
        src = magnitude_block;
        break;
      case TapPoint::AfterLayer: src = &after_layer[tap.layer]; break;
    }
    (tap.role == TapRole::Content ? acts.content : acts.style).push_back(*src);
  }
  return acts;
}

ActivationSet forward_collect(const spectral::FeatureTensor& features, const Network& net) {
  Tensor mag;
  const Tensor* mag_ptr = nullptr;
  for (const Tap& tap : net.cfg.taps)
    if (tap.point == TapPoint::MagnitudeBlock) {
      mag = features.extract(spectral::Component::Magnitude);
      mag_ptr = &mag;
      break;
    }
  return forward_collect(net.input_for(features), net, mag_ptr);
}

NetworkConfig load_preset(const std::string& name) {
  NetworkConfig cfg;
  cfg.preset = name;
  if (name == "rim-k3") {
    cfg.variant = spectral::FeatureVariant::RealImagMag;
    cfg.layers = {ConvSpec{9, 3, 1, 1, 128, true}};
    cfg.taps = default_taps(cfg.variant, 1);
  } else if (name == "mag-updiff-k2") {
    cfg.variant = spectral::FeatureVariant::MagUnwrappedPhaseDiff;
    cfg.layers = {ConvSpec{9, 2, 1, 1, 128, true}};
    cfg.taps = default_taps(cfg.variant, 1);
  } else if (name == "baseline-ulyanov") {
    cfg.variant = spectral::FeatureVariant::MagOnly;
    cfg.bins_as_channels = true;
    cfg.layers = {ConvSpec{11, 1, 1, 1, 2048, true}};
    cfg.taps = {{TapPoint::AfterLayer, 0, TapRole::Content},
                {TapPoint::AfterLayer, 0, TapRole::Style}};
  } else {
    throw ParamError("unknown preset: " + name);
  }
  return cfg;
}

}  // namespace wavestyle::network
