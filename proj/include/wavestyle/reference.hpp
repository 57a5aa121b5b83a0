#ifndef WAVESTYLE_REFERENCE_HPP
#define WAVESTYLE_REFERENCE_HPP

#include <cstddef>
#include <vector>

#include "wavestyle/spectral.hpp"
#include "wavestyle/tensor.hpp"

// Slow, obviously-correct implementations kept for testing and for the
// kernel benchmark. Nothing here is used on the optimization path.
namespace wavestyle::reference {

// Textbook DFT as a dense complex matrix product.
spectral::ComplexSpectra dense_dft(const Tensor& frames);

// Serial mirror of spectral::kernels::dft_rows.
void dft_rows_serial(const double* frames, std::size_t n_frames,
                     const spectral::DftPlan& plan, double* real, double* imag,
                     std::size_t out_stride);

// Valid cross-correlation, straight quadruple loop over output and
// kernel positions. input {T,H,C}, kernel {KT,KH,C,O} -> {T',H',O}.
Tensor conv2d_naive(const Tensor& input, const Tensor& kernel,
                    std::size_t stride_t, std::size_t stride_h);

// G = A*A^T / (F*T) for a filters x time matrix, double loop.
Tensor gram_naive(const Tensor& acts);

// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
std::vector<double> symmetric_eigenvalues(const Tensor& m);

}  // namespace wavestyle::reference

#endif  // WAVESTYLE_REFERENCE_HPP
