#ifndef WAVESTYLE_BASELINE_HPP
#define WAVESTYLE_BASELINE_HPP

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "wavestyle/audio_io.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/spectral.hpp"
#include "wavestyle/stylizer.hpp"
#include "wavestyle/tensor.hpp"

namespace wavestyle::baseline {

struct GriffinLimConfig {
  std::size_t iterations = 100;
  enum class PhaseInit { Zero, Random };
  PhaseInit init_phase = PhaseInit::Zero;
  std::uint64_t seed = 0;

  void validate() const;
};

// Alternating-projection phase reconstruction:
// x <- iSTFT(target_mags * e^{i*angle(STFT(x))}). The spectral distance
// d_t = || |STFT(x_t)| - target_mags ||_F is asserted non-increasing
// (1e-9 slack); pass `objective` to receive d_0..d_iterations.
audio_io::AudioClip griffin_lim(const Tensor& target_mags,
                                const spectral::FrontEndConfig& fe,
                                const GriffinLimConfig& gl, int sample_rate,
                                std::vector<double>* objective = nullptr);

// Ulyanov-style baseline: optimizes a log-magnitude matrix under the
// "baseline-ulyanov" preset's losses, exponentiates back to magnitudes
// (minus epsilon, floored at 0), then reconstructs phase with
// griffin_lim. net_override swaps in a smaller network for tests.
std::pair<audio_io::AudioClip, stylizer::LossReport> ulyanov_stylize(
    const audio_io::AudioClip& content, const audio_io::AudioClip& style,
    const stylizer::StyleTransferConfig& cfg, const spectral::FrontEndConfig& fe,
    const GriffinLimConfig& gl,
    const network::NetworkConfig* net_override = nullptr,
    const stylizer::ProgressFn& progress = nullptr);

}  // namespace wavestyle::baseline

#endif  // WAVESTYLE_BASELINE_HPP
