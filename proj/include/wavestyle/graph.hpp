#ifndef WAVESTYLE_GRAPH_HPP
#define WAVESTYLE_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "wavestyle/spectral.hpp"
#include "wavestyle/tensor.hpp"

// Static reverse-mode differentiation over the fixed pipeline
// waveform -> framing -> DFT -> features -> conv net -> losses.
// Shapes are checked when nodes are wired (GraphError); forward caches
// whatever backward needs; backward accumulates adjoints in creation
// order reversed, with fixed-order reductions so results are
// bit-identical regardless of thread count.
namespace wavestyle::graph {

class Graph;

class Node {
 public:
  virtual ~Node() = default;
  const std::vector<std::size_t>& shape() const { return shape_; }
  const Tensor& value() const { return value_; }
  const Tensor& grad() const { return grad_; }

 protected:
  Node(std::vector<std::size_t> shape, std::vector<Node*> inputs)
      : shape_(std::move(shape)), inputs_(std::move(inputs)) {}
  virtual void forward() = 0;
  virtual void backward() = 0;

  // Subclasses accumulate into their inputs' adjoints through this.
  static Tensor& grad_of(Node* n) { return n->grad_; }

  std::vector<std::size_t> shape_;
  std::vector<Node*> inputs_;
  Tensor value_;
  Tensor grad_;
  friend class Graph;
};

// Complex spectra inside the graph are packed {frames, 2*bins}: row f
// holds real bins then imaginary bins.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // The single optimized variable. Exactly one per graph.
  Node* input(std::vector<std::size_t> shape);

  // {len} -> {frames, n_fft}, Hann-windowed hopped frames.
  Node* frame_window(Node* samples, std::size_t n_fft, std::size_t hop);
  // {frames, n} -> packed spectra {frames, 2*(n/2+1)}.
  Node* dft(Node* frames);
  // packed spectra -> {frames, bins}
  Node* magnitude(Node* spectra, double epsilon);
  Node* phase(Node* spectra);
  // {frames, bins} -> same; row 0 passes through.
  Node* phase_differential(Node* phases);
  // principal value elementwise; gradient is identity.
  Node* unwrap(Node* diffs);
  // {frames, w} -> {frames, end-begin}, columns [begin, end).
  Node* slice_cols(Node* x, std::size_t begin, std::size_t end);
  // log(x + epsilon) elementwise.
  Node* log_shift(Node* x, double epsilon);
  // k blocks {frames, bins} -> {frames, k*bins} under the given layout.
  Node* concat_height(std::vector<Node*> blocks, spectral::HeightLayout layout);
  Node* reshape(Node* x, std::vector<std::size_t> shape);
  // x {T,H,C}, fixed kernel {KT,KH,C,O} -> {T',H',O}; gradient w.r.t. x only.
  Node* conv2d(Node* x, Tensor kernel, std::size_t stride_t, std::size_t stride_h);
  Node* relu(Node* x);
  // Mean squared difference against a fixed target -> scalar.
  Node* mse(Node* x, Tensor target);
  // Gram of x (filters = last axis, time = the rest) vs a fixed target
  // Gram, squared Frobenius / filters^2 -> scalar.
  Node* gram_mse(Node* x, Tensor target_gram);
  // Scalar terms -> scalar weighted sum.
  Node* weighted_sum(std::vector<std::pair<Node*, double>> terms);

  void set_output(Node* out);
  Node* output() const { return output_; }
  Node* input_node() const { return input_; }

  const Tensor& forward(const Tensor& input_value);
  // Adjoint of the whole composition; returns d<upstream, out>/d(input).
  const Tensor& backward(const Tensor& upstream);

  // Central finite differences against backward() on a random upstream,
  // over n_coords random input coordinates (all of them when the input
  // is smaller); returns the max relative error with denominator
  // max(|a|, |b|, 1e-8).
  double gradient_check(const Tensor& input_value, double h,
                        std::size_t n_coords = 64, std::uint64_t seed = 1);

  bool values_finite() const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  Node* adopt(std::unique_ptr<Node> node);
  void require_member(Node* n, const char* where) const;

  std::vector<std::unique_ptr<Node>> nodes_;
  Node* input_ = nullptr;
  Node* output_ = nullptr;
  bool forward_done_ = false;
};

}  // namespace wavestyle::graph

#endif  // WAVESTYLE_GRAPH_HPP
