#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "wavestyle/baseline.hpp"
#include "wavestyle/network.hpp"
#include "wavestyle/stylizer.hpp"

using namespace wavestyle;
using namespace wavestyle::baseline;
using test_util::random_tensor;

namespace {

spectral::FrontEndConfig mag_fe(std::size_t n_fft = 32, std::size_t hop = 8) {
  spectral::FrontEndConfig fe;
  fe.n_fft = n_fft;
  fe.hop = hop;
  fe.variant = spectral::FeatureVariant::MagOnly;
  return fe;
}

network::NetworkConfig small_baseline_net(std::size_t filters, std::size_t tw = 3) {
  network::NetworkConfig cfg = network::load_preset("baseline-ulyanov");
  cfg.layers[0].filters = filters;
  cfg.layers[0].time_width = tw;
  return cfg;
}

Tensor log_mag_features(const audio_io::AudioClip& clip,
                        const spectral::FrontEndConfig& fe) {
  auto ft = spectral::assemble_features(
      spectral::dft_forward(spectral::frame_signal(clip, fe)), fe);
  Tensor out({ft.frames(), fe.bins()});
  std::copy(ft.values.data(), ft.values.data() + ft.values.size(), out.data());
  return out;
}

}  // namespace

TEST_CASE("zero magnitudes reconstruct silence") {
  auto fe = mag_fe();
  Tensor mags({5, fe.bins()});
  GriffinLimConfig gl;
  gl.iterations = 1;
  std::vector<double> obj;
  auto out = griffin_lim(mags, fe, gl, 1000, &obj);
  REQUIRE(out.samples.size() == spectral::span_of_frames(5, fe.n_fft, fe.hop));
  for (double s : out.samples) CHECK(s == 0.0);
  REQUIRE(obj.size() == 2);
  CHECK(obj[0] == 0.0);
  CHECK(obj[1] == 0.0);
}

TEST_CASE("objective never increases, even for inconsistent magnitudes") {
  auto fe = mag_fe();
  Tensor mags = random_tensor({9, fe.bins()}, 3);
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(mags[i]);
  GriffinLimConfig gl;
  gl.iterations = 40;
  std::vector<double> obj;
  auto out = griffin_lim(mags, fe, gl, 1000, &obj);
  REQUIRE(obj.size() == 41);
  for (std::size_t t = 1; t < obj.size(); ++t) CHECK(obj[t] <= obj[t - 1] + 1e-9);
  CHECK(obj.back() < obj.front());
  for (double s : out.samples) CHECK(std::isfinite(s));
}

TEST_CASE("consistent magnitudes converge fast") {
  auto fe = mag_fe(64, 16);
  auto clip = test_util::sine_clip(110.0, 0.4, 1000, 0.7);
  test_util::fade_edges(clip, 30);
  auto s = spectral::dft_forward(spectral::frame_signal(clip, fe));
  Tensor mags = spectral::magnitude(s, 1e-12);
  GriffinLimConfig gl;
  gl.iterations = 30;
  std::vector<double> obj;
  griffin_lim(mags, fe, gl, 1000, &obj);
  CHECK(obj.back() < 0.5 * obj.front());
}

TEST_CASE("random phase init is seeded") {
  auto fe = mag_fe();
  Tensor mags = random_tensor({6, fe.bins()}, 5);
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(mags[i]);
  GriffinLimConfig gl;
  gl.iterations = 5;
  gl.init_phase = GriffinLimConfig::PhaseInit::Random;
  gl.seed = 77;
  auto a = griffin_lim(mags, fe, gl, 1000);
  auto b = griffin_lim(mags, fe, gl, 1000);
  CHECK(a.samples == b.samples);
  gl.seed = 78;
  auto c = griffin_lim(mags, fe, gl, 1000);
  CHECK(a.samples != c.samples);
}

TEST_CASE("griffin_lim input validation") {
  auto fe = mag_fe();
  GriffinLimConfig gl;
  Tensor good({3, fe.bins()});

  Tensor negative = good;
  negative[5] = -0.1;
  CHECK_THROWS_AS(griffin_lim(negative, fe, gl, 1000), ValidationError);

  Tensor nan_mags = good;
  nan_mags[0] = std::nan("");
  CHECK_THROWS_AS(griffin_lim(nan_mags, fe, gl, 1000), ValidationError);

  CHECK_THROWS_AS(griffin_lim(Tensor({3, 5}), fe, gl, 1000), ParamError);
  CHECK_THROWS_AS(griffin_lim(good, fe, gl, 0), ParamError);

  GriffinLimConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(griffin_lim(good, fe, bad, 1000), ParamError);
}

TEST_CASE("baseline optimization recovers content log magnitudes") {
  auto fe = mag_fe();
  auto clip = test_util::noise_clip(128, 1000, 11, 0.6);
  Tensor target_f = log_mag_features(clip, fe);

  auto net_cfg = small_baseline_net(128, 5);
  auto net = network::init_filters(net_cfg, fe.bins());
  stylizer::Targets targets = stylizer::compute_targets(clip, clip, net, fe);

  stylizer::StyleTransferConfig cfg;
  cfg.content_weight = 1.0;
  cfg.style_weight = 0.0;
  cfg.iterations = 500;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;

  stylizer::Problem problem(target_f.dim(0), fe.bins(), net, targets, 1.0, 0.0);
  Tensor f({target_f.dim(0), fe.bins()});
  Rng rng(mix_seed(cfg.seed, 7));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = cfg.init_noise_sigma * rng.normal();

  auto report = stylizer::run_adam(problem, f, cfg);
  CHECK(report.rows.back().total < report.rows.front().total);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    num += (f[i] - target_f[i]) * (f[i] - target_f[i]);
    den += target_f[i] * target_f[i];
  }
  CHECK(std::sqrt(num / den) < 0.01);
}

TEST_CASE("ulyanov_stylize runs end to end deterministically") {
  auto fe = mag_fe();
  auto content = test_util::noise_clip(128, 1000, 21, 0.6);
  auto style = test_util::noise_clip(128, 1000, 22, 0.6);
  auto net_cfg = small_baseline_net(16);

  stylizer::StyleTransferConfig cfg;
  cfg.iterations = 8;
  cfg.learning_rate = 0.01;
  cfg.seed = 3;
  GriffinLimConfig gl;
  gl.iterations = 5;

  auto [a, ra] = ulyanov_stylize(content, style, cfg, fe, gl, &net_cfg);
  auto [b, rb] = ulyanov_stylize(content, style, cfg, fe, gl, &net_cfg);
  CHECK(a.samples == b.samples);
  REQUIRE(ra.rows.size() == 8);
  CHECK(ra.rows.back().total == rb.rows.back().total);
  const std::size_t frames = spectral::frame_count(128, fe.n_fft, fe.hop);
  CHECK(a.samples.size() == spectral::span_of_frames(frames, fe.n_fft, fe.hop));
  CHECK(a.sample_rate == 1000);
  for (double s : a.samples) CHECK(std::isfinite(s));
}

TEST_CASE("content copy init starts from the content features") {
  auto fe = mag_fe();
  auto content = test_util::noise_clip(128, 1000, 31, 0.6);
  auto net_cfg = small_baseline_net(16);

  stylizer::StyleTransferConfig cfg;
  cfg.iterations = 1;
  cfg.learning_rate = 1e-9;  // hold nearly still so the first loss shows the init
  cfg.init = stylizer::StyleTransferConfig::Init::ContentCopy;
  GriffinLimConfig gl;
  gl.iterations = 2;

  auto [out, report] = ulyanov_stylize(content, content, cfg, fe, gl, &net_cfg);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].content < 1e-20);
}

TEST_CASE("ulyanov_stylize validates its inputs") {
  auto fe = mag_fe();
  auto content = test_util::noise_clip(128, 1000, 41, 0.6);
  auto other_rate = test_util::noise_clip(128, 2000, 42, 0.6);
  stylizer::StyleTransferConfig cfg;
  cfg.iterations = 1;
  GriffinLimConfig gl;
  gl.iterations = 1;

  CHECK_THROWS_AS(ulyanov_stylize(content, other_rate, cfg, fe, gl), ParamError);

  auto bad_net = small_baseline_net(8);
  bad_net.bins_as_channels = false;
  CHECK_THROWS_AS(ulyanov_stylize(content, content, cfg, fe, gl, &bad_net), ParamError);

  auto wrong_variant = small_baseline_net(8);
  wrong_variant.variant = spectral::FeatureVariant::RealImagMag;
  CHECK_THROWS_AS(ulyanov_stylize(content, content, cfg, fe, gl, &wrong_variant),
                  ParamError);

  auto tiny = test_util::noise_clip(8, 1000, 43, 0.5);
  CHECK_THROWS_AS(ulyanov_stylize(tiny, content, cfg, fe, gl), ValidationError);
}
