#include "wavestyle/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wavestyle/common.hpp"
#include "wavestyle/network.hpp"

namespace wavestyle::graph {

namespace {

using spectral::DftPlan;

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

class InputNode final : public Node {
 public:
  explicit InputNode(std::vector<std::size_t> shape) : Node(std::move(shape), {}) {}
  void forward() override {}
  void backward() override {}
};

class FrameWindowNode final : public Node {
 public:
  FrameWindowNode(Node* samples, std::size_t n_fft, std::size_t hop)
      : Node({spectral::frame_count(samples->shape()[0], n_fft, hop), n_fft},
             {samples}),
        n_(n_fft),
        hop_(hop),
        window_(spectral::hann_window(n_fft)) {}

  void forward() override {
    const double* x = inputs_[0]->value().data();
    double* out = value_.data();
    const std::size_t frames = shape_[0];
#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(frames); ++f) {
      const double* src = x + static_cast<std::size_t>(f) * hop_;
      double* dst = out + static_cast<std::size_t>(f) * n_;
      for (std::size_t k = 0; k < n_; ++k) dst[k] = src[k] * window_[k];
    }
  }

  void backward() override {
    const double* g = grad_.data();
    double* gx = grad_of(inputs_[0]).data();
    const std::size_t frames = shape_[0];
    const std::size_t len = inputs_[0]->shape()[0];
#pragma omp parallel for schedule(static)
    for (long long s = 0; s < static_cast<long long>(len); ++s) {
      const std::size_t si = static_cast<std::size_t>(s);
      const std::size_t f_lo = si < n_ ? 0 : (si - n_) / hop_ + 1;
      if (si / hop_ < f_lo) continue;
      const std::size_t f_hi = std::min(si / hop_, frames - 1);
      double acc = 0.0;
      for (std::size_t f = f_lo; f <= f_hi; ++f) {
        const std::size_t k = si - f * hop_;
        acc += window_[k] * g[f * n_ + k];
      }
      gx[si] += acc;
    }
  }

 private:
  std::size_t n_, hop_;
  std::vector<double> window_;
};

class DftNode final : public Node {
 public:
  explicit DftNode(Node* frames)
      : Node({frames->shape()[0], 2 * (frames->shape()[1] / 2 + 1)}, {frames}),
        plan_(frames->shape()[1]) {}

  void forward() override {
    const std::size_t frames = shape_[0];
    const std::size_t bins = plan_.bins;
    spectral::kernels::dft_rows(inputs_[0]->value().data(), frames, plan_,
                                value_.data(), value_.data() + bins, 2 * bins);
  }

  void backward() override {
    const std::size_t bins = plan_.bins;
    spectral::kernels::dft_rows_backward(grad_.data(), grad_.data() + bins,
                                         2 * bins, shape_[0], plan_,
                                         grad_of(inputs_[0]).data());
  }

 private:
  DftPlan plan_;
};

class MagnitudeNode final : public Node {
 public:
  MagnitudeNode(Node* spectra, double epsilon)
      : Node({spectra->shape()[0], spectra->shape()[1] / 2}, {spectra}),
        eps_(epsilon) {}

  void forward() override {
    const std::size_t bins = shape_[1];
    const double* in = inputs_[0]->value().data();
    spectral::kernels::magnitude_rows(in, in + bins, 2 * bins, shape_[0], bins,
                                      eps_, value_.data());
  }

  void backward() override {
    const std::size_t bins = shape_[1];
    const double* in = inputs_[0]->value().data();
    double* gin = grad_of(inputs_[0]).data();
    spectral::kernels::magnitude_rows_backward(in, in + bins, 2 * bins,
                                               value_.data(), grad_.data(),
                                               shape_[0], bins, gin, gin + bins,
                                               2 * bins);
  }

 private:
  double eps_;
};

class PhaseNode final : public Node {
 public:
  explicit PhaseNode(Node* spectra)
      : Node({spectra->shape()[0], spectra->shape()[1] / 2}, {spectra}) {}

  void forward() override {
    const std::size_t bins = shape_[1];
    const double* in = inputs_[0]->value().data();
    spectral::kernels::phase_rows(in, in + bins, 2 * bins, shape_[0], bins,
                                  value_.data());
  }

  void backward() override {
    const std::size_t bins = shape_[1];
    const double* in = inputs_[0]->value().data();
    double* gin = grad_of(inputs_[0]).data();
    spectral::kernels::phase_rows_backward(in, in + bins, 2 * bins, grad_.data(),
                                           shape_[0], bins, gin, gin + bins,
                                           2 * bins);
  }
};

class PhaseDiffNode final : public Node {
 public:
  explicit PhaseDiffNode(Node* phases) : Node(phases->shape(), {phases}) {}

  void forward() override {
    const std::size_t frames = shape_[0], bins = shape_[1];
    const double* in = inputs_[0]->value().data();
    double* out = value_.data();
    std::copy(in, in + bins, out);
#pragma omp parallel for schedule(static)
    for (long long f = 1; f < static_cast<long long>(frames); ++f)
      for (std::size_t b = 0; b < bins; ++b)
        out[static_cast<std::size_t>(f) * bins + b] =
            in[static_cast<std::size_t>(f) * bins + b] -
            in[(static_cast<std::size_t>(f) - 1) * bins + b];
  }

  void backward() override {
    const std::size_t frames = shape_[0], bins = shape_[1];
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(frames); ++f) {
      const std::size_t fi = static_cast<std::size_t>(f);
      for (std::size_t b = 0; b < bins; ++b) {
        double v = g[fi * bins + b];
        if (fi + 1 < frames) v -= g[(fi + 1) * bins + b];
        gin[fi * bins + b] += v;
      }
    }
  }
};

class UnwrapNode final : public Node {
 public:
  explicit UnwrapNode(Node* diffs) : Node(diffs->shape(), {diffs}) {}

  void forward() override {
    const double* in = inputs_[0]->value().data();
    double* out = value_.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(value_.size()); ++i)
      out[i] = spectral::kernels::principal_value(in[i]);
  }

  // Adding a constant multiple of 2*pi has derivative 1 almost
  // everywhere; the jump set has measure zero.
  void backward() override {
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(grad_.size()); ++i)
      gin[i] += g[i];
  }
};

class SliceColsNode final : public Node {
 public:
  SliceColsNode(Node* x, std::size_t begin, std::size_t end)
      : Node({x->shape()[0], end - begin}, {x}), begin_(begin) {}

  void forward() override {
    const std::size_t rows = shape_[0], cols = shape_[1];
    const std::size_t in_w = inputs_[0]->shape()[1];
    const double* in = inputs_[0]->value().data();
    double* out = value_.data();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r)
      for (std::size_t c = 0; c < cols; ++c)
        out[static_cast<std::size_t>(r) * cols + c] =
            in[static_cast<std::size_t>(r) * in_w + begin_ + c];
  }

  void backward() override {
    const std::size_t rows = shape_[0], cols = shape_[1];
    const std::size_t in_w = inputs_[0]->shape()[1];
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r)
      for (std::size_t c = 0; c < cols; ++c)
        gin[static_cast<std::size_t>(r) * in_w + begin_ + c] +=
            g[static_cast<std::size_t>(r) * cols + c];
  }

 private:
  std::size_t begin_;
};

class LogShiftNode final : public Node {
 public:
  LogShiftNode(Node* x, double epsilon) : Node(x->shape(), {x}), eps_(epsilon) {}

  void forward() override {
    const double* in = inputs_[0]->value().data();
    double* out = value_.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(value_.size()); ++i)
      out[i] = std::log(in[i] + eps_);
  }

  void backward() override {
    const double* in = inputs_[0]->value().data();
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(grad_.size()); ++i)
      gin[i] += g[i] / (in[i] + eps_);
  }

 private:
  double eps_;
};

class ConcatHeightNode final : public Node {
 public:
  ConcatHeightNode(std::vector<Node*> blocks, spectral::HeightLayout layout)
      : Node({blocks[0]->shape()[0], blocks.size() * blocks[0]->shape()[1]},
             blocks),
        layout_(layout) {}

  void forward() override {
    const std::size_t frames = shape_[0];
    const std::size_t k = inputs_.size();
    const std::size_t bins = inputs_[0]->shape()[1];
    double* out = value_.data();
#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(frames); ++f) {
      const std::size_t fi = static_cast<std::size_t>(f);
      for (std::size_t c = 0; c < k; ++c) {
        const double* in = inputs_[c]->value().data() + fi * bins;
        for (std::size_t b = 0; b < bins; ++b) out[fi * shape_[1] + row(c, b, k, bins)] = in[b];
      }
    }
  }

  void backward() override {
    const std::size_t frames = shape_[0];
    const std::size_t k = inputs_.size();
    const std::size_t bins = inputs_[0]->shape()[1];
    const double* g = grad_.data();
#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(frames); ++f) {
      const std::size_t fi = static_cast<std::size_t>(f);
      for (std::size_t c = 0; c < k; ++c) {
        double* gin = grad_of(inputs_[c]).data() + fi * bins;
        for (std::size_t b = 0; b < bins; ++b)
          gin[b] += g[fi * shape_[1] + row(c, b, k, bins)];
      }
    }
  }

 private:
  std::size_t row(std::size_t c, std::size_t b, std::size_t k, std::size_t bins) const {
    return layout_ == spectral::HeightLayout::Blocks ? c * bins + b : b * k + c;
  }
  spectral::HeightLayout layout_;
};

class ReshapeNode final : public Node {
 public:
  ReshapeNode(Node* x, std::vector<std::size_t> shape)
      : Node(std::move(shape), {x}) {}

  void forward() override {
    const double* in = inputs_[0]->value().data();
    std::copy(in, in + value_.size(), value_.data());
  }

  void backward() override {
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
    for (std::size_t i = 0; i < grad_.size(); ++i) gin[i] += g[i];
  }
};

class Conv2dNode final : public Node {
 public:
  Conv2dNode(Node* x, Tensor kernel, std::size_t stride_t, std::size_t stride_h)
      : Node({(x->shape()[0] - kernel.dim(0)) / stride_t + 1,
              (x->shape()[1] - kernel.dim(1)) / stride_h + 1, kernel.dim(3)},
             {x}),
        kernel_(std::move(kernel)),
        st_(stride_t),
        sh_(stride_h) {}

  void forward() override {
    const auto& is = inputs_[0]->shape();
    network::kernels::conv2d(inputs_[0]->value().data(), is[0], is[1], is[2],
                             kernel_.data(), kernel_.dim(0), kernel_.dim(1),
                             kernel_.dim(3), st_, sh_, value_.data(), shape_[0],
                             shape_[1]);
  }

  void backward() override {
    const auto& is = inputs_[0]->shape();
    network::kernels::conv2d_backward_input(
        grad_.data(), shape_[0], shape_[1], kernel_.dim(3), kernel_.data(),
        kernel_.dim(0), kernel_.dim(1), kernel_.dim(2), st_, sh_,
        grad_of(inputs_[0]).data(), is[0], is[1]);
  }

 private:
  Tensor kernel_;
  std::size_t st_, sh_;
};

class ReluNode final : public Node {
 public:
  explicit ReluNode(Node* x) : Node(x->shape(), {x}) {}

  void forward() override {
    const double* in = inputs_[0]->value().data();
    double* out = value_.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(value_.size()); ++i)
      out[i] = in[i] > 0.0 ? in[i] : 0.0;
  }

  // Subgradient at exactly 0 is 0.
  void backward() override {
    const double* in = inputs_[0]->value().data();
    const double* g = grad_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(grad_.size()); ++i)
      if (in[i] > 0.0) gin[i] += g[i];
  }
};

class MseNode final : public Node {
 public:
  MseNode(Node* x, Tensor target)
      : Node({1}, {x}), target_(std::move(target)) {}

  void forward() override {
    const double* x = inputs_[0]->value().data();
    const double* t = target_.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < target_.size(); ++i) {
      const double d = x[i] - t[i];
      acc += d * d;
    }
    value_[0] = acc / static_cast<double>(target_.size());
  }

  void backward() override {
    const double s = grad_[0] * 2.0 / static_cast<double>(target_.size());
    const double* x = inputs_[0]->value().data();
    const double* t = target_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(target_.size()); ++i)
      gin[i] += s * (x[i] - t[i]);
  }

 private:
  Tensor target_;
};

class GramMseNode final : public Node {
 public:
  GramMseNode(Node* x, Tensor target_gram)
      : Node({1}, {x}),
        target_(std::move(target_gram)),
        filters_(x->shape().back()),
        time_(Tensor::count(x->shape()) / x->shape().back()),
        gram_({filters_, filters_}) {}

  void forward() override {
    const double* x = inputs_[0]->value().data();
    const std::size_t F = filters_, T = time_;
    const double norm = 1.0 / (static_cast<double>(F) * static_cast<double>(T));
    double* g = gram_.data();
#pragma omp parallel for schedule(static)
    for (long long li = 0; li < static_cast<long long>(F); ++li) {
      const std::size_t i = static_cast<std::size_t>(li);
      for (std::size_t j = i; j < F; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc += x[t * F + i] * x[t * F + j];
        g[i * F + j] = g[j * F + i] = acc * norm;
      }
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < gram_.size(); ++i) {
      const double d = g[i] - target_[i];
      loss += d * d;
    }
    value_[0] = loss / (static_cast<double>(F) * static_cast<double>(F));
  }

  void backward() override {
    const std::size_t F = filters_, T = time_;
    // d(loss)/dA = 4/(F^3 T) * (G - S) A with A = x viewed time x filters.
    const double s = grad_[0] * 4.0 /
                     (static_cast<double>(F) * static_cast<double>(F) *
                      static_cast<double>(F) * static_cast<double>(T));
    const double* x = inputs_[0]->value().data();
    const double* g = gram_.data();
    const double* tg = target_.data();
    double* gin = grad_of(inputs_[0]).data();
#pragma omp parallel for schedule(static)
    for (long long lt = 0; lt < static_cast<long long>(T); ++lt) {
      const std::size_t t = static_cast<std::size_t>(lt);
      for (std::size_t i = 0; i < F; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < F; ++j)
          acc += (g[i * F + j] - tg[i * F + j]) * x[t * F + j];
        gin[t * F + i] += s * acc;
      }
    }
  }

 private:
  Tensor target_;
  std::size_t filters_, time_;
  Tensor gram_;
};

class WeightedSumNode final : public Node {
 public:
  WeightedSumNode(std::vector<Node*> terms, std::vector<double> weights)
      : Node({1}, std::move(terms)), weights_(std::move(weights)) {}

  void forward() override {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      acc += weights_[i] * inputs_[i]->value()[0];
    value_[0] = acc;
  }

  void backward() override {
    for (std::size_t i = 0; i < inputs_.size(); ++i)
      grad_of(inputs_[i])[0] += weights_[i] * grad_[0];
  }

 private:
  std::vector<double> weights_;
};

}  // namespace

Node* Graph::adopt(std::unique_ptr<Node> node) {
  node->value_ = Tensor(node->shape_);
  node->grad_ = Tensor(node->shape_);
  nodes_.push_back(std::move(node));
  forward_done_ = false;
  return nodes_.back().get();
}

void Graph::require_member(Node* n, const char* where) const {
  if (!n) throw GraphError(std::string(where) + ": null node");
  for (const auto& owned : nodes_)
    if (owned.get() == n) return;
  throw GraphError(std::string(where) + ": node belongs to a different graph");
}

Node* Graph::input(std::vector<std::size_t> shape) {
  if (input_) throw GraphError("graph already has an input node");
  if (Tensor::count(shape) == 0) throw GraphError("input: empty shape");
  input_ = adopt(std::make_unique<InputNode>(std::move(shape)));
  return input_;
}

Node* Graph::frame_window(Node* samples, std::size_t n_fft, std::size_t hop) {
  require_member(samples, "frame_window");
  if (samples->shape().size() != 1)
    throw GraphError("frame_window: expected rank-1 samples, got " +
                     shape_str(samples->shape()));
  if (n_fft < 2 || n_fft % 2 != 0)
    throw ParamError("frame_window: n_fft must be even and >= 2");
  if (hop == 0 || (hop * 2 != n_fft && hop * 4 != n_fft))
    throw ParamError("frame_window: hop must be n_fft/2 or n_fft/4");
  if (samples->shape()[0] < n_fft)
    throw GraphError("frame_window: input shorter than one frame");
  return adopt(std::make_unique<FrameWindowNode>(samples, n_fft, hop));
}

Node* Graph::dft(Node* frames) {
  require_member(frames, "dft");
  if (frames->shape().size() != 2 || frames->shape()[1] < 2 ||
      frames->shape()[1] % 2 != 0)
    throw GraphError("dft: expected {frames, even n}, got " +
                     shape_str(frames->shape()));
  return adopt(std::make_unique<DftNode>(frames));
}

namespace {
void check_packed_spectra(const Node* spectra, const char* where) {
  const auto& s = spectra->shape();
  if (s.size() != 2 || s[1] < 4 || s[1] % 2 != 0)
    throw GraphError(std::string(where) +
                     ": expected packed spectra {frames, 2*bins}, got " +
                     shape_str(s));
}
}  // namespace

Node* Graph::magnitude(Node* spectra, double epsilon) {
  require_member(spectra, "magnitude");
  check_packed_spectra(spectra, "magnitude");
  if (!(epsilon > 0.0)) throw ParamError("magnitude: epsilon must be positive");
  return adopt(std::make_unique<MagnitudeNode>(spectra, epsilon));
}

Node* Graph::phase(Node* spectra) {
  require_member(spectra, "phase");
  check_packed_spectra(spectra, "phase");
  return adopt(std::make_unique<PhaseNode>(spectra));
}

Node* Graph::phase_differential(Node* phases) {
  require_member(phases, "phase_differential");
  if (phases->shape().size() != 2 || phases->shape()[0] == 0)
    throw GraphError("phase_differential: expected non-empty {frames, bins}");
  return adopt(std::make_unique<PhaseDiffNode>(phases));
}

Node* Graph::unwrap(Node* diffs) {
  require_member(diffs, "unwrap");
  return adopt(std::make_unique<UnwrapNode>(diffs));
}

Node* Graph::slice_cols(Node* x, std::size_t begin, std::size_t end) {
  require_member(x, "slice_cols");
  if (x->shape().size() != 2)
    throw GraphError("slice_cols: expected a matrix, got " + shape_str(x->shape()));
  if (begin >= end || end > x->shape()[1])
    throw GraphError("slice_cols: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of width " +
                     std::to_string(x->shape()[1]));
  return adopt(std::make_unique<SliceColsNode>(x, begin, end));
}

Node* Graph::log_shift(Node* x, double epsilon) {
  require_member(x, "log_shift");
  if (!(epsilon > 0.0)) throw ParamError("log_shift: epsilon must be positive");
  return adopt(std::make_unique<LogShiftNode>(x, epsilon));
}

Node* Graph::concat_height(std::vector<Node*> blocks, spectral::HeightLayout layout) {
  if (blocks.empty()) throw GraphError("concat_height: no blocks");
  for (Node* b : blocks) {
    require_member(b, "concat_height");
    if (b->shape().size() != 2 || b->shape() != blocks[0]->shape())
      throw GraphError("concat_height: blocks must share one {frames, bins} shape");
  }
  return adopt(std::make_unique<ConcatHeightNode>(std::move(blocks), layout));
}

Node* Graph::reshape(Node* x, std::vector<std::size_t> shape) {
  require_member(x, "reshape");
  if (Tensor::count(shape) != Tensor::count(x->shape()))
    throw GraphError("reshape: element count mismatch, " + shape_str(x->shape()) +
                     " -> " + shape_str(shape));
  return adopt(std::make_unique<ReshapeNode>(x, std::move(shape)));
}

Node* Graph::conv2d(Node* x, Tensor kernel, std::size_t stride_t, std::size_t stride_h) {
  require_member(x, "conv2d");
  if (x->shape().size() != 3)
    throw GraphError("conv2d: expected input {T,H,C}, got " + shape_str(x->shape()));
  if (kernel.rank() != 4)
    throw GraphError("conv2d: expected kernel {KT,KH,C,O}");
  if (stride_t < 1 || stride_h < 1)
    throw ParamError("conv2d: strides must be >= 1");
  if (kernel.dim(2) != x->shape()[2])
    throw GraphError("conv2d: kernel channels " + std::to_string(kernel.dim(2)) +
                     " but input has " + std::to_string(x->shape()[2]));
  if (kernel.dim(0) > x->shape()[0] || kernel.dim(1) > x->shape()[1])
    throw GraphError("conv2d: kernel larger than input " + shape_str(x->shape()));
  return adopt(std::make_unique<Conv2dNode>(x, std::move(kernel), stride_t, stride_h));
}

Node* Graph::relu(Node* x) {
  require_member(x, "relu");
  return adopt(std::make_unique<ReluNode>(x));
}

Node* Graph::mse(Node* x, Tensor target) {
  require_member(x, "mse");
  if (target.shape() != x->shape())
    throw GraphError("mse: target shape " + shape_str(target.shape()) +
                     " does not match node " + shape_str(x->shape()));
  return adopt(std::make_unique<MseNode>(x, std::move(target)));
}

Node* Graph::gram_mse(Node* x, Tensor target_gram) {
  require_member(x, "gram_mse");
  if (x->shape().size() < 2)
    throw GraphError("gram_mse: need a filters axis and a time axis, got " +
                     shape_str(x->shape()));
  const std::size_t filters = x->shape().back();
  if (target_gram.rank() != 2 || target_gram.dim(0) != filters ||
      target_gram.dim(1) != filters)
    throw GraphError("gram_mse: target must be {" + std::to_string(filters) + "," +
                     std::to_string(filters) + "}");
  return adopt(std::make_unique<GramMseNode>(x, std::move(target_gram)));
}

Node* Graph::weighted_sum(std::vector<std::pair<Node*, double>> terms) {
  if (terms.empty()) throw GraphError("weighted_sum: no terms");
  std::vector<Node*> nodes;
  std::vector<double> weights;
  for (auto& [n, w] : terms) {
    require_member(n, "weighted_sum");
    if (n->value().size() != 1)
      throw GraphError("weighted_sum: terms must be scalar, got " +
                       shape_str(n->shape()));
    nodes.push_back(n);
    weights.push_back(w);
  }
  return adopt(std::make_unique<WeightedSumNode>(std::move(nodes), std::move(weights)));
}

void Graph::set_output(Node* out) {
  require_member(out, "set_output");
  output_ = out;
}

const Tensor& Graph::forward(const Tensor& input_value) {
  if (nodes_.empty() || !output_ || !input_)
    throw GraphError("forward: graph is empty or has no output");
  if (input_value.shape() != input_->shape())
    throw ParamError("forward: input value shape does not match input node");
  input_->value_ = input_value;
  for (auto& n : nodes_)
    if (n.get() != input_) n->forward();
  forward_done_ = true;
  return output_->value_;
}

const Tensor& Graph::backward(const Tensor& upstream) {
  if (!forward_done_) throw StateError("backward called before forward");
  if (upstream.shape() != output_->shape())
    throw ParamError("backward: upstream shape does not match output");
  for (auto& n : nodes_) n->grad_.fill(0.0);
  output_->grad_ = upstream;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
  return input_->grad_;
}

double Graph::gradient_check(const Tensor& input_value, double h,
                             std::size_t n_coords, std::uint64_t seed) {
  if (!(h > 0.0)) throw ParamError("gradient_check: h must be positive");
  forward(input_value);
  Rng rng(mix_seed(seed, 17));
  Tensor upstream(output_->shape());
  for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] = rng.normal();
  const Tensor analytic = backward(upstream);

  std::vector<std::size_t> coords(input_value.size());
  std::iota(coords.begin(), coords.end(), 0);
  if (coords.size() > n_coords) {
    for (std::size_t i = 0; i < n_coords; ++i) {
      const std::size_t j = i + rng.integer() % (coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(n_coords);
  }

  auto objective = [&](const Tensor& x) {
    const Tensor& out = forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += upstream[i] * out[i];
    return acc;
  };

  double max_err = 0.0;
  Tensor probe = input_value;
  for (std::size_t c : coords) {
    const double saved = probe[c];
    probe[c] = saved + h;
    const double jp = objective(probe);
    probe[c] = saved - h;
    const double jm = objective(probe);
    probe[c] = saved;
    const double fd = (jp - jm) / (2.0 * h);
    const double a = analytic[c];
    const double err = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-8});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

bool Graph::values_finite() const {
  for (const auto& n : nodes_)
    if (!n->value_.all_finite()) return false;
  return true;
}

}  // namespace wavestyle::graph
