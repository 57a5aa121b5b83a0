// Times the OpenMP kernels against their serial reference mirrors and
// reports the largest elementwise divergence.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "wavestyle/common.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/reference.hpp"
#include "wavestyle/spectral.hpp"
#include "wavestyle/tensor.hpp"

namespace {

using wavestyle::Tensor;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_tensor(std::vector<std::size_t> shape, wavestyle::Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    f();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void bench_dft(std::size_t frames, std::size_t n_fft, int reps) {
  wavestyle::Rng rng(42);
  Tensor input = random_tensor({frames, n_fft}, rng);
  wavestyle::spectral::DftPlan plan(n_fft);
  std::size_t bins = plan.bins;

  Tensor pr({frames, bins}), pi({frames, bins});
  Tensor sr({frames, bins}), si({frames, bins});

  double t_par = time_best_of(reps, [&] {
    wavestyle::spectral::kernels::dft_rows(input.data(), frames, plan, pr.data(),
                                           pi.data(), bins);
  });
  double t_ser = time_best_of(reps, [&] {
    wavestyle::reference::dft_rows_serial(input.data(), frames, plan, sr.data(),
                                          si.data(), bins);
  });
  double diff = std::max(max_abs_diff(pr, sr), max_abs_diff(pi, si));
  std::printf("dft_rows      %4zux%-5zu  parallel %8.3f ms  serial %8.3f ms  x%.2f  max|diff| %.3g\n",
              frames, n_fft, t_par * 1e3, t_ser * 1e3, t_ser / t_par, diff);
}

void bench_conv(std::size_t T, std::size_t H, std::size_t C, std::size_t KT,
                std::size_t KH, std::size_t O, int reps) {
  wavestyle::Rng rng(7);
  Tensor input = random_tensor({T, H, C}, rng);
  Tensor kernel = random_tensor({KT, KH, C, O}, rng);

  std::size_t Tp = (T - KT) + 1;
  std::size_t Hp = (H - KH) + 1;
  Tensor par({Tp, Hp, O});

  double t_par = time_best_of(reps, [&] {
    wavestyle::network::kernels::conv2d(input.data(), T, H, C, kernel.data(), KT,
                                        KH, O, 1, 1, par.data(), Tp, Hp);
  });
  Tensor ser;
  double t_ser = time_best_of(reps, [&] {
    ser = wavestyle::reference::conv2d_naive(input, kernel, 1, 1);
  });
  double diff = max_abs_diff(par, ser);
  std::printf("conv2d  %3zux%3zux%zu k%zux%zu o%-4zu  parallel %8.3f ms  serial %8.3f ms  x%.2f  max|diff| %.3g\n",
              T, H, C, KT, KH, O, t_par * 1e3, t_ser * 1e3, t_ser / t_par, diff);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 3;
  if (reps < 1) reps = 1;
  std::printf("best of %d runs\n", reps);
  bench_dft(64, 512, reps);
  bench_dft(32, 2048, reps);
  bench_conv(28, 387, 1, 9, 3, 128, reps);
  bench_conv(40, 1, 1025, 11, 1, 256, reps);
  return 0;
}
