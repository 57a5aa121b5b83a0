#ifndef WAVESTYLE_STYLIZER_HPP
#define WAVESTYLE_STYLIZER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wavestyle/audio_io.hpp"
#include "wavestyle/common.hpp"
#include "wavestyle/graph.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/spectral.hpp"
#include "wavestyle/tensor.hpp"

namespace wavestyle::stylizer {

struct StyleTransferConfig {
  double content_weight = 1.0;
  double style_weight = 1e-2;
  std::size_t iterations = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  enum class Init { Noise, ContentCopy };
  Init init = Init::Noise;
  double init_noise_sigma = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossReport {
  struct Row {
    double total = 0.0;
    double content = 0.0;
    double style = 0.0;
    double seconds = 0.0;
  };
  std::vector<Row> rows;

  void write_csv(const std::string& path) const;
};

// Optimization produced a non-finite loss or gradient; carries how far
// it got.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& msg, std::size_t iteration, LossReport partial)
      : Error(msg), iteration_(iteration), partial_(std::move(partial)) {}
  std::size_t iteration() const { return iteration_; }
  const LossReport& partial_report() const { return partial_; }

 private:
  std::size_t iteration_;
  LossReport partial_;
};

// Activations {..., filters} flattened to a filters x time matrix
// (filters = last axis, everything else folded into time).
Tensor as_filter_time(const Tensor& acts);

// G = A*A^T / (F*T) for a filters x time matrix. Each entry sums its
// products in a canonical sorted order, so the result is bitwise
// invariant under time-column permutation (and exactly symmetric).
Tensor gram(const Tensor& acts);

// Mean squared difference.
double content_loss(const Tensor& x_act, const Tensor& c_act);

// Mean over taps of sum((G_x - G_s)^2) / F^2.
double style_loss(const std::vector<Tensor>& x_acts, const std::vector<Tensor>& s_grams);

struct Targets {
  std::vector<Tensor> content_acts;
  std::vector<Tensor> style_grams;
};

// Runs content/style features through the realized network and stores
// content activations plus style Grams.
Targets compute_targets(const audio_io::AudioClip& content,
                        const audio_io::AudioClip& style,
                        const network::Network& net,
                        const spectral::FrontEndConfig& fe);

// One loss graph, reusable across iterations. The variable is either a
// waveform (time-domain path) or a {frames, bins} matrix (baseline).
class Problem {
 public:
  // waveform -> front end -> network -> alpha*content + beta*style
  Problem(std::size_t n_samples, const spectral::FrontEndConfig& fe,
          const network::Network& net, const Targets& targets,
          double content_weight, double style_weight);
  // matrix input fed straight to the network as {frames, 1, bins}
  Problem(std::size_t frames, std::size_t bins, const network::Network& net,
          const Targets& targets, double content_weight, double style_weight);

  struct Eval {
    double total = 0.0;
    double content = 0.0;
    double style = 0.0;
  };
  Eval loss_and_grad(const Tensor& x, Tensor& grad_out);

  graph::Graph& graph() { return graph_; }

 private:
  void build_net_tail(graph::Node* features, graph::Node* magnitude_block,
                      const network::Network& net, const Targets& targets,
                      double content_weight, double style_weight);

  graph::Graph graph_;
  graph::Node* content_total_ = nullptr;
  graph::Node* style_total_ = nullptr;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::size_t t = 0;
};

// Standard Adam with bias correction; allocates zero state on first use.
void adam_step(Tensor& params, const Tensor& grad, AdamState& state,
               const StyleTransferConfig& cfg);

using ProgressFn =
    std::function<void(std::size_t iteration, const LossReport::Row& row)>;

// Shared optimization loop: evaluates, records, steps. Throws
// NumericalError (with the partial report) on non-finite loss/gradient.
LossReport run_adam(Problem& problem, Tensor& x, const StyleTransferConfig& cfg,
                    const ProgressFn& progress = nullptr);

// Optimizes a waveform so its activations match the content clip and its
// Grams match the style clip. Output length is the content framing span.
std::pair<audio_io::AudioClip, LossReport> stylize(
    const audio_io::AudioClip& content, const audio_io::AudioClip& style,
    const network::NetworkConfig& net_cfg, const spectral::FrontEndConfig& fe,
    const StyleTransferConfig& cfg, const ProgressFn& progress = nullptr);

}  // namespace wavestyle::stylizer

#endif  // WAVESTYLE_STYLIZER_HPP
