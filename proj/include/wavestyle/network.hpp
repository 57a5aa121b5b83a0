#ifndef WAVESTYLE_NETWORK_HPP
#define WAVESTYLE_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wavestyle/spectral.hpp"
#include "wavestyle/tensor.hpp"

namespace wavestyle::network {

struct ConvSpec {
  std::size_t time_width = 9;
  std::size_t height_span = 3;
  std::size_t stride_t = 1;
  std::size_t stride_h = 1;
  std::size_t filters = 128;
  bool relu = true;
};

enum class TapRole { Content, Style };
enum class TapPoint { RawFeatures, MagnitudeBlock, AfterLayer };

struct Tap {
  TapPoint point = TapPoint::RawFeatures;
  std::size_t layer = 0;  // meaningful for AfterLayer
  TapRole role = TapRole::Content;
};

struct NetworkConfig {
  spectral::FeatureVariant variant = spectral::FeatureVariant::RealImagMag;
  spectral::HeightLayout layout = spectral::HeightLayout::Blocks;
  bool bins_as_channels = false;  // baseline: features become {frames, 1, bins}
  std::vector<ConvSpec> layers;
  std::uint64_t seed = 0;
  std::vector<Tap> taps;
  std::string preset;

  void validate() const;
};

// Tap layout shared by the time-domain presets: content on the raw
// features, style on the magnitude block (raw features when the variant
// carries no magnitude block), then content + style after each
// nonlinearity.
std::vector<Tap> default_taps(spectral::FeatureVariant variant, std::size_t n_layers);

struct ConvLayer {
  Tensor kernel;  // {time_width, height_span, in_channels, filters}
  std::size_t stride_t = 1;
  std::size_t stride_h = 1;
  bool relu = true;
};

// A realized network: fixed random kernels, never trained.
struct Network {
  NetworkConfig cfg;
  std::vector<ConvLayer> layers;

  // Network input for an assembled feature tensor: {frames, height, 1},
  // or {frames, 1, bins} when bins_as_channels is set.
  Tensor input_for(const spectral::FeatureTensor& features) const;
};

// Draws every kernel i.i.d. normal(0, sigma^2) with
// sigma = sqrt(2 / (time_width * height_span * in_channels)), seeded per
// layer from cfg.seed. in_channels0 is the channel count of the network
// input (1 for height-stacked features, bins for the baseline).
Network init_filters(const NetworkConfig& cfg, std::size_t in_channels0);

// Valid (no padding) cross-correlation of input {T,H,C} with
// layer.kernel {KT,KH,C,O}; output {T',H',O} with
// dim' = floor((dim - k)/stride) + 1.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

Tensor relu(const Tensor& x);

struct ActivationSet {
  std::vector<Tensor> content;  // tap declaration order
  std::vector<Tensor> style;
};

// Runs the layers eagerly and collects tapped tensors. magnitude_block
// backs MagnitudeBlock taps; pass null when no tap needs it.
ActivationSet forward_collect(const Tensor& input, const Network& net,
                              const Tensor* magnitude_block = nullptr);
ActivationSet forward_collect(const spectral::FeatureTensor& features, const Network& net);

// "rim-k3", "mag-updiff-k2", or "baseline-ulyanov".
NetworkConfig load_preset(const std::string& name);

namespace kernels {

void conv2d(const double* in, std::size_t T, std::size_t H, std::size_t C,
            const double* kernel, std::size_t KT, std::size_t KH, std::size_t O,
            std::size_t stride_t, std::size_t stride_h, double* out,
            std::size_t Tp, std::size_t Hp);

// Accumulates d(loss)/d(input) from upstream {Tp,Hp,O}; gathers so
// writes stay disjoint per input element.
void conv2d_backward_input(const double* upstream, std::size_t Tp, std::size_t Hp,
                           std::size_t O, const double* kernel, std::size_t KT,
                           std::size_t KH, std::size_t C, std::size_t stride_t,
                           std::size_t stride_h, double* grad_in, std::size_t T,
                           std::size_t H);

}  // namespace kernels

}  // namespace wavestyle::network

#endif  // WAVESTYLE_NETWORK_HPP
