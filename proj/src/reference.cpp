#include "wavestyle/reference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "wavestyle/common.hpp"

namespace wavestyle::reference {

spectral::ComplexSpectra dense_dft(const Tensor& frames) {
  if (frames.rank() != 2) throw ParamError("dense_dft: expected frames x n matrix");
  const std::size_t nf = frames.dim(0);
  const std::size_t n = frames.dim(1);
  const std::size_t bins = n / 2 + 1;
  spectral::ComplexSpectra s;
  s.real = Tensor({nf, bins});
  s.imag = Tensor({nf, bins});
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t b = 0; b < bins; ++b) {
      std::complex<double> acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(b) *
                             static_cast<double>(k) / static_cast<double>(n);
        acc += frames.at(f, k) * std::polar(1.0, angle);
      }
      s.real.at(f, b) = acc.real();
      s.imag.at(f, b) = acc.imag();
    }
  return s;
}

void dft_rows_serial(const double* frames, std::size_t n_frames,
                     const spectral::DftPlan& plan, double* real, double* imag,
                     std::size_t out_stride) {
  for (std::size_t f = 0; f < n_frames; ++f)
    for (std::size_t b = 0; b < plan.bins; ++b) {
      const double* x = frames + f * plan.n;
      const double* ct = plan.cos_table.data() + b * plan.n;
      const double* st = plan.sin_table.data() + b * plan.n;
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < plan.n; ++k) {
        re += x[k] * ct[k];
        im -= x[k] * st[k];
      }
      real[f * out_stride + b] = re;
      imag[f * out_stride + b] = im;
    }
}

Tensor conv2d_naive(const Tensor& input, const Tensor& kernel,
                    std::size_t stride_t, std::size_t stride_h) {
  if (input.rank() != 3 || kernel.rank() != 4)
    throw ParamError("conv2d_naive: expected input {T,H,C}, kernel {KT,KH,C,O}");
  if (stride_t < 1 || stride_h < 1) throw ParamError("conv2d_naive: strides must be >= 1");
  const std::size_t T = input.dim(0), H = input.dim(1), C = input.dim(2);
  const std::size_t KT = kernel.dim(0), KH = kernel.dim(1), O = kernel.dim(3);
  if (kernel.dim(2) != C) throw ParamError("conv2d_naive: channel mismatch");
  if (KT > T || KH > H) throw ParamError("conv2d_naive: kernel larger than input");
  const std::size_t Tp = (T - KT) / stride_t + 1;
  const std::size_t Hp = (H - KH) / stride_h + 1;
  Tensor out({Tp, Hp, O});
  for (std::size_t tp = 0; tp < Tp; ++tp)
    for (std::size_t hp = 0; hp < Hp; ++hp)
      for (std::size_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (std::size_t dt = 0; dt < KT; ++dt)
          for (std::size_t dh = 0; dh < KH; ++dh)
            for (std::size_t c = 0; c < C; ++c)
              acc += input.at(tp * stride_t + dt, hp * stride_h + dh, c) *
                     kernel.data()[((dt * KH + dh) * C + c) * O + o];
        out.at(tp, hp, o) = acc;
      }
  return out;
}

Tensor gram_naive(const Tensor& acts) {
  if (acts.rank() != 2) throw ParamError("gram_naive: expected filters x time matrix");
  const std::size_t F = acts.dim(0), T = acts.dim(1);
  if (T == 0) throw ParamError("gram_naive: need at least one time step");
  Tensor g({F, F});
  for (std::size_t i = 0; i < F; ++i)
    for (std::size_t j = 0; j < F; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += acts.at(i, t) * acts.at(j, t);
      g.at(i, j) = acc / (static_cast<double>(F) * static_cast<double>(T));
    }
  return g;
}

std::vector<double> symmetric_eigenvalues(const Tensor& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1))
    throw ParamError("symmetric_eigenvalues: expected square matrix");
  const std::size_t n = m.dim(0);
  Tensor a = m;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, std::abs(a[i]));
  const double tol = std::max(scale, 1.0) * 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a.at(p, q));
    if (off < tol) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) < tol * 1e-3) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a.at(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace wavestyle::reference
