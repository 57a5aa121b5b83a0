// Acceptance gate: one test case per criterion, each printing a
// single PASS/FAIL line with the measured numbers behind it.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wavestyle/baseline.hpp"
#include "wavestyle/cli.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/reference.hpp"
#include "wavestyle/spectral.hpp"
#include "wavestyle/stylizer.hpp"

using namespace wavestyle;
using test_util::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

audio_io::AudioClip tone_noise_clip(double freq, int rate, std::size_t n,
                                    double tone_amp, double noise_amp,
                                    std::uint64_t seed) {
  audio_io::AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  Rng rng(seed);
  for (std::size_t t = 0; t < n; ++t)
    clip.samples[t] =
        tone_amp * std::sin(2.0 * 3.14159265358979323846 * freq *
                            static_cast<double>(t) / rate) +
        noise_amp * (2.0 * rng.uniform() - 1.0);
  return clip;
}

std::size_t dominant_bin(const audio_io::AudioClip& clip,
                         const spectral::FrontEndConfig& fe) {
  auto s = spectral::dft_forward(spectral::frame_signal(clip, fe));
  Tensor mags = spectral::magnitude(s, 1e-12);
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t b = 0; b < mags.dim(1); ++b) {
    double acc = 0.0;
    for (std::size_t f = 0; f < mags.dim(0); ++f) acc += mags.at(f, b);
    if (acc > best_v) {
      best_v = acc;
      best = b;
    }
  }
  return best;
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("criterion1_gradient_integrity") {
  const auto t0 = Clock::now();
  const std::size_t n_samples = 512;
  spectral::FrontEndConfig fe;
  fe.n_fft = 64;
  fe.hop = 16;

  auto content = test_util::noise_clip(n_samples, 8000, 1001, 0.5);
  auto style = test_util::noise_clip(n_samples, 8000, 1002, 0.5);
  // Evaluation point chosen away from ReLU kinks: a pre-activation within
  // h of zero makes the central difference straddle the kink, which measures
  // the subgradient mismatch instead of the analytic gradient.
  Tensor x = random_tensor({n_samples}, 1236, 0.4);

  double worst = 0.0;
  std::string worst_case;

  auto check_net = [&](const network::NetworkConfig& net_cfg, const char* label) {
    spectral::FrontEndConfig fe_v = fe;
    fe_v.variant = net_cfg.variant;
    auto net = network::init_filters(net_cfg,
                                     net_cfg.bins_as_channels ? fe_v.bins() : 1);
    auto targets = stylizer::compute_targets(content, style, net, fe_v);
    stylizer::Problem problem(n_samples, fe_v, net, targets, 1.0, 0.01);
    double err = problem.graph().gradient_check(x, 1e-5, 64, 99);
    if (err > worst) {
      worst = err;
      worst_case = label;
    }
  };

  const spectral::FeatureVariant variants[] = {
      spectral::FeatureVariant::RealImag,
      spectral::FeatureVariant::MagPhase,
      spectral::FeatureVariant::MagPhaseDiff,
      spectral::FeatureVariant::MagUnwrappedPhaseDiff,
      spectral::FeatureVariant::RealImagMag,
      spectral::FeatureVariant::MagOnly,
  };
  for (std::size_t i = 0; i < 6; ++i) {
    network::NetworkConfig cfg;
    cfg.variant = variants[i];
    cfg.layers = {network::ConvSpec{5, 3, 1, 1, 8, true}};
    cfg.seed = 100 + i;
    cfg.taps = network::default_taps(cfg.variant, 1);
    check_net(cfg, spectral::variant_name(variants[i]));
  }
  for (const char* preset : {"rim-k3", "mag-updiff-k2"}) {
    network::NetworkConfig cfg = network::load_preset(preset);
    cfg.seed = 7;
    check_net(cfg, preset);
  }

  const double seconds = seconds_since(t0);
  const bool pass = worst < 1e-4 && seconds < 60.0;
  std::printf("criterion 1 (gradient integrity): %s  max_rel_err=%.3g (%s)  runtime=%.1fs\n",
              pass ? "PASS" : "FAIL", worst, worst_case.c_str(), seconds);
  CHECK(worst < 1e-4);
  CHECK(seconds < 60.0);
}

TEST_CASE("criterion2_stft_roundtrip") {
  double worst_time = 0.0, worst_parseval = 0.0;
  for (std::size_t hop : {32u, 64u}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      spectral::FrontEndConfig fe;
      fe.n_fft = 128;
      fe.hop = hop;
      auto clip = test_util::noise_clip(1000, 1000, 2000 + seed * 10 + hop, 0.8);
      Tensor frames = spectral::frame_signal(clip, fe);
      spectral::ComplexSpectra s = spectral::dft_forward(frames);

      std::size_t span = spectral::span_of_frames(frames.dim(0), fe.n_fft, fe.hop);
      auto back = spectral::inverse_dft_overlap_add(s, fe, span, clip.sample_rate);
      for (std::size_t t = fe.n_fft; t + fe.n_fft < span; ++t)
        worst_time = std::max(worst_time,
                              std::abs(back.samples[t] - clip.samples[t]));

      for (std::size_t f = 0; f < frames.dim(0); ++f) {
        double te = 0.0;
        for (std::size_t k = 0; k < fe.n_fft; ++k)
          te += frames.at(f, k) * frames.at(f, k);
        double se = 0.0;
        for (std::size_t b = 0; b <= fe.n_fft / 2; ++b) {
          double p = s.real.at(f, b) * s.real.at(f, b) +
                     s.imag.at(f, b) * s.imag.at(f, b);
          se += (b == 0 || b == fe.n_fft / 2) ? p : 2.0 * p;
        }
        se /= static_cast<double>(fe.n_fft);
        worst_parseval = std::max(worst_parseval, std::abs(se - te) / te);
      }
    }
  }
  const bool pass = worst_time < 1e-6 && worst_parseval < 1e-9;
  std::printf("criterion 2 (stft roundtrip): %s  interior_err=%.3g  parseval_rel=%.3g\n",
              pass ? "PASS" : "FAIL", worst_time, worst_parseval);
  CHECK(worst_time < 1e-6);
  CHECK(worst_parseval < 1e-9);
}

TEST_CASE("criterion3_self_stylization") {
  const auto t0 = Clock::now();
  const int rate = 2048;
  spectral::FrontEndConfig fe;
  fe.n_fft = 256;
  fe.hop = 64;

  // 440 Hz sits exactly on bin 55 at this rate.
  auto clip = tone_noise_clip(440.0, rate, rate, 0.8, 0.05, 3001);

  network::NetworkConfig net_cfg = network::load_preset("rim-k3");
  net_cfg.seed = 11;
  fe.variant = net_cfg.variant;

  stylizer::StyleTransferConfig cfg;
  cfg.iterations = 500;
  cfg.learning_rate = 1e-2;
  cfg.seed = 12;

  auto [out, report] = stylizer::stylize(clip, clip, net_cfg, fe, cfg);
  const double initial = report.rows.front().total;
  const double final_loss = report.rows.back().total;
  const double ratio = final_loss / initial;

  const std::size_t in_bin = dominant_bin(clip, fe);
  const std::size_t out_bin = dominant_bin(out, fe);
  const double seconds = seconds_since(t0);

  const bool pass = ratio <= 0.01 && in_bin == out_bin && seconds < 300.0;
  std::printf(
      "criterion 3 (self stylization): %s  loss %.4g -> %.4g (ratio=%.3g)  "
      "bin %zu -> %zu  runtime=%.0fs\n",
      pass ? "PASS" : "FAIL", initial, final_loss, ratio, in_bin, out_bin, seconds);
  CHECK(ratio <= 0.01);
  CHECK(in_bin == out_bin);
  CHECK(seconds < 300.0);
}

TEST_CASE("criterion4_griffin_lim") {
  spectral::FrontEndConfig fe;
  fe.n_fft = 256;
  fe.hop = 64;
  baseline::GriffinLimConfig gl;
  gl.iterations = 100;

  // Monotonicity on a broadband clip; griffin_lim itself throws if the
  // objective ever increases beyond the 1e-9 slack.
  auto mix = tone_noise_clip(330.0, 2048, 2048, 0.5, 0.3, 4001);
  test_util::fade_edges(mix, 100);
  auto s = spectral::dft_forward(spectral::frame_signal(mix, fe));
  Tensor mags = spectral::magnitude(s, 1e-12);
  std::vector<double> obj;
  bool monotone = true;
  double mix_drop = 0.0;
  try {
    baseline::griffin_lim(mags, fe, gl, 2048, &obj);
    for (std::size_t t = 1; t < obj.size(); ++t)
      if (obj[t] > obj[t - 1] + 1e-9) monotone = false;
    mix_drop = obj.back() / obj.front();
  } catch (const Error&) {
    monotone = false;
  }

  // Sine reconstruction: d_100 / d_0 < 0.1.
  auto sine = test_util::sine_clip(440.0, 1.0, 2048, 0.8);
  test_util::fade_edges(sine, 100);
  auto ss = spectral::dft_forward(spectral::frame_signal(sine, fe));
  Tensor sine_mags = spectral::magnitude(ss, 1e-12);
  std::vector<double> sine_obj;
  baseline::griffin_lim(sine_mags, fe, gl, 2048, &sine_obj);
  const double sine_ratio = sine_obj.back() / sine_obj.front();

  const bool pass = monotone && sine_ratio < 0.1;
  std::printf(
      "criterion 4 (griffin-lim): %s  monotone=%s  mix d100/d0=%.3g  sine d100/d0=%.3g\n",
      pass ? "PASS" : "FAIL", monotone ? "yes" : "no", mix_drop, sine_ratio);
  CHECK(monotone);
  CHECK(sine_ratio < 0.1);
}

TEST_CASE("criterion5_gram_properties") {
  Rng rng(5001);
  double worst_asym = 0.0, worst_eig = 0.0;
  bool perm_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t F = 1 + rng.integer() % 8;
    const std::size_t T = 1 + rng.integer() % 32;
    const double scale = trial % 5 == 0 ? 1e3 : (trial % 5 == 1 ? 1e-3 : 1.0);
    Tensor a({F, T});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = scale * rng.normal();

    Tensor g = stylizer::gram(a);
    for (std::size_t i = 0; i < F; ++i)
      for (std::size_t j = 0; j < F; ++j)
        worst_asym = std::max(worst_asym, std::abs(g.at(i, j) - g.at(j, i)));

    auto eigs = reference::symmetric_eigenvalues(g);
    double norm = std::max(std::abs(eigs.front()), std::abs(eigs.back()));
    worst_eig = std::max(worst_eig,
                         norm > 0.0 ? -eigs.front() / norm : -eigs.front());

    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = T - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.integer() % (i + 1)]);
    Tensor shuffled({F, T});
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t) shuffled.at(f, t) = a.at(f, perm[t]);
    if (!test_util::bitwise_equal(stylizer::gram(shuffled), g)) perm_ok = false;
  }
  const bool pass = worst_asym <= 1e-12 && worst_eig <= 1e-9 && perm_ok;
  std::printf(
      "criterion 5 (gram properties): %s  max_asym=%.3g  min_eig_rel=-%.3g  "
      "perm_invariant=%s\n",
      pass ? "PASS" : "FAIL", worst_asym, worst_eig, perm_ok ? "exact" : "NO");
  CHECK(worst_asym <= 1e-12);
  CHECK(worst_eig <= 1e-9);
  CHECK(perm_ok);
}

TEST_CASE("criterion6_determinism") {
  test_util::TempDir tmp("accept6");
  auto content = tone_noise_clip(110.0, 1000, 500, 0.6, 0.05, 6001);
  auto style = test_util::noise_clip(500, 1000, 6002, 0.5);
  audio_io::save_wav(content, tmp.file("c.wav"));
  audio_io::save_wav(style, tmp.file("s.wav"));

  auto run_once = [&](const std::string& dir, bool baseline) {
    cli::RunConfig cfg;
    cfg.content_path = tmp.file("c.wav");
    cfg.style_path = tmp.file("s.wav");
    cfg.output_dir = tmp.file(dir);
    cfg.baseline = baseline;
    cfg.n_fft = 128;
    cfg.hop = 32;
    cfg.filters = baseline ? 64 : 16;
    cfg.iterations = 12;
    cfg.gl_iterations = 20;
    cfg.seed = 42;
    REQUIRE(cli::run(cfg) == 0);
    return test_util::read_bytes(tmp.file(dir) + "/out.wav");
  };

  const bool td_equal = run_once("td1", false) == run_once("td2", false);
  const bool bl_equal = run_once("bl1", true) == run_once("bl2", true);

  // Replaying the written manifest must reproduce the bytes too.
  auto replay = cli::parse_args({"--config", tmp.file("td1") + "/manifest.json",
                                 "--output-dir", tmp.file("td3")});
  REQUIRE(replay.has_value());
  REQUIRE(cli::run(*replay) == 0);
  const bool replay_equal = test_util::read_bytes(tmp.file("td1") + "/out.wav") ==
                            test_util::read_bytes(tmp.file("td3") + "/out.wav");

  const bool pass = td_equal && bl_equal && replay_equal;
  std::printf(
      "criterion 6 (determinism): %s  time-domain=%s  baseline=%s  manifest-replay=%s\n",
      pass ? "PASS" : "FAIL", td_equal ? "identical" : "DIFFERS",
      bl_equal ? "identical" : "DIFFERS", replay_equal ? "identical" : "DIFFERS");
  CHECK(td_equal);
  CHECK(bl_equal);
  CHECK(replay_equal);
}

TEST_CASE("criterion7_oracle_equivalence") {
  Rng rng(7001);
  double worst_conv = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t KT = 1 + rng.integer() % 4;
    const std::size_t KH = 1 + rng.integer() % 4;
    const std::size_t T = KT + rng.integer() % 9;
    const std::size_t H = KH + rng.integer() % 9;
    const std::size_t C = 1 + rng.integer() % 3;
    const std::size_t O = 1 + rng.integer() % 6;
    const std::size_t st = 1 + rng.integer() % 3;
    const std::size_t sh = 1 + rng.integer() % 3;
    Tensor input({T, H, C}), kernel({KT, KH, C, O});
    for (std::size_t i = 0; i < input.size(); ++i) input[i] = rng.normal();
    for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = rng.normal();

    Tensor fast = network::conv2d_forward(input, network::ConvLayer{kernel, st, sh, false});
    Tensor slow = reference::conv2d_naive(input, kernel, st, sh);
    REQUIRE(fast.shape() == slow.shape());
    worst_conv = std::max(worst_conv, test_util::max_abs_diff(fast, slow));
  }

  double worst_dft = 0.0;
  for (std::size_t n : {4u, 8u, 16u}) {
    Tensor frames = random_tensor({5, n}, 7100 + n);
    spectral::ComplexSpectra fast = spectral::dft_forward(frames);
    const std::size_t bins = n / 2 + 1;
    for (std::size_t f = 0; f < 5; ++f)
      for (std::size_t b = 0; b < bins; ++b) {
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double ang = 2.0 * 3.14159265358979323846 *
                             static_cast<double>(b * k) / static_cast<double>(n);
          re += frames.at(f, k) * std::cos(ang);
          im -= frames.at(f, k) * std::sin(ang);
        }
        worst_dft = std::max({worst_dft, std::abs(fast.real.at(f, b) - re),
                              std::abs(fast.imag.at(f, b) - im)});
      }
  }

  const bool pass = worst_conv < 1e-10 && worst_dft < 1e-10;
  std::printf("criterion 7 (oracle equivalence): %s  conv_max_diff=%.3g  dft_max_diff=%.3g\n",
              pass ? "PASS" : "FAIL", worst_conv, worst_dft);
  CHECK(worst_conv < 1e-10);
  CHECK(worst_dft < 1e-10);
}

TEST_CASE("criterion8_preset_smoke") {
  test_util::TempDir tmp("accept8");
  auto content = tone_noise_clip(110.0, 1000, 2000, 0.5, 0.05, 8001);
  for (std::size_t t = 0; t < 2000; ++t)
    content.samples[t] += 0.25 * std::sin(2.0 * 3.14159265358979323846 * 220.0 *
                                          static_cast<double>(t) / 1000.0);
  audio_io::AudioClip style;
  style.sample_rate = 1000;
  style.samples.resize(2000);
  Rng rng(8002);
  double prev = 0.0;
  for (std::size_t t = 0; t < 2000; ++t) {
    prev = 0.8 * prev + 0.2 * (2.0 * rng.uniform() - 1.0);
    style.samples[t] = 2.5 * prev;
  }
  audio_io::save_wav(content, tmp.file("content.wav"));
  audio_io::save_wav(style, tmp.file("style.wav"));

  bool all_pass = true;
  for (const char* preset : {"rim-k3", "mag-updiff-k2"}) {
    cli::RunConfig cfg;
    cfg.content_path = tmp.file("content.wav");
    cfg.style_path = tmp.file("style.wav");
    cfg.output_dir = tmp.file(preset);
    cfg.preset = preset;
    cfg.n_fft = 256;
    cfg.hop = 64;
    cfg.iterations = 100;
    cfg.seed = 7;
    const int rc = cli::run(cfg);

    auto rows = read_csv_rows(tmp.file(preset) + "/loss.csv");
    bool finite = rows.size() == 100;
    for (const auto& row : rows)
      for (double v : row)
        if (!std::isfinite(v)) finite = false;
    double first10 = 0.0, last10 = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      first10 += rows[i][1];
      last10 += rows[rows.size() - 10 + i][1];
    }
    const bool decreasing = last10 < first10 && rows.back()[1] < rows.front()[1];

    auto wav = audio_io::load_wav(tmp.file(preset) + "/out.wav");
    bool wav_ok = audio_io::clip_valid(wav) && wav.samples.size() > 0;

    auto pgm = test_util::read_bytes(tmp.file(preset) + "/output.pgm");
    bool artifacts_ok = pgm.size() > 2 && pgm[0] == 'P' && pgm[1] == '5' &&
                        std::filesystem::exists(tmp.file(preset) + "/output.csv");

    const bool pass = rc == 0 && finite && decreasing && wav_ok && artifacts_ok;
    all_pass = all_pass && pass;
    std::printf(
        "criterion 8 (%s smoke): %s  loss %.4g -> %.4g  trend(first10=%.4g, last10=%.4g)\n",
        preset, pass ? "PASS" : "FAIL", rows.empty() ? -1.0 : rows.front()[1],
        rows.empty() ? -1.0 : rows.back()[1], first10 / 10.0, last10 / 10.0);
    CHECK(rc == 0);
    CHECK(finite);
    CHECK(decreasing);
    CHECK(wav_ok);
    CHECK(artifacts_ok);
  }
  CHECK(all_pass);
}
