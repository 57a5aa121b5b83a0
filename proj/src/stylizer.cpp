#include "wavestyle/stylizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace wavestyle::stylizer {

void StyleTransferConfig::validate() const {
  if (content_weight < 0.0 || style_weight < 0.0)
    throw ParamError("stylizer: loss weights must be non-negative");
  if (content_weight + style_weight <= 0.0)
    throw ParamError("stylizer: at least one loss weight must be positive");
  if (!(learning_rate > 0.0)) throw ParamError("stylizer: learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ParamError("stylizer: adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ParamError("stylizer: adam epsilon must be positive");
  if (init == Init::Noise && !(init_noise_sigma > 0.0))
    throw ParamError("stylizer: init noise sigma must be positive");
}

void LossReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("loss report: cannot write " + path);
  out << "iteration,total,content,style,seconds\r\n";
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.6f\r\n", i,
                  rows[i].total, rows[i].content, rows[i].style, rows[i].seconds);
    out << buf;
  }
  if (!out) throw IoError("loss report: write failed for " + path);
}

Tensor as_filter_time(const Tensor& acts) {
  if (acts.rank() < 1 || acts.size() == 0)
    throw ParamError("as_filter_time: empty activations");
  const std::size_t filters = acts.shape().back();
  const std::size_t time = acts.size() / filters;
  Tensor out({filters, time});
  for (std::size_t t = 0; t < time; ++t)
    for (std::size_t f = 0; f < filters; ++f)
      out.at(f, t) = acts[t * filters + f];
  return out;
}

Tensor gram(const Tensor& acts) {
  if (acts.rank() != 2) throw ParamError("gram: expected filters x time matrix");
  const std::size_t F = acts.dim(0), T = acts.dim(1);
  if (T == 0) throw ParamError("gram: need at least one time step");
  const double norm = 1.0 / (static_cast<double>(F) * static_cast<double>(T));
  Tensor g({F, F});
#pragma omp parallel for schedule(static)
  for (long long li = 0; li < static_cast<long long>(F); ++li) {
    const std::size_t i = static_cast<std::size_t>(li);
    std::vector<double> products(T);
    for (std::size_t j = i; j < F; ++j) {
      for (std::size_t t = 0; t < T; ++t) products[t] = acts.at(i, t) * acts.at(j, t);
      std::sort(products.begin(), products.end());
      double acc = 0.0;
      for (double p : products) acc += p;
      g.at(i, j) = g.at(j, i) = acc * norm;
    }
  }
  return g;
}

double content_loss(const Tensor& x_act, const Tensor& c_act) {
  if (!x_act.same_shape(c_act))
    throw ParamError("content_loss: activation shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < x_act.size(); ++i) {
    const double d = x_act[i] - c_act[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x_act.size());
}

double style_loss(const std::vector<Tensor>& x_acts, const std::vector<Tensor>& s_grams) {
  if (x_acts.size() != s_grams.size() || x_acts.empty())
    throw ParamError("style_loss: tap counts differ or empty");
  double acc = 0.0;
  for (std::size_t k = 0; k < x_acts.size(); ++k) {
    const Tensor gx = gram(as_filter_time(x_acts[k]));
    const Tensor& gs = s_grams[k];
    if (!gx.same_shape(gs)) throw ParamError("style_loss: filter dims differ");
    const std::size_t F = gx.dim(0);
    double d2 = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double d = gx[i] - gs[i];
      d2 += d * d;
    }
    acc += d2 / (static_cast<double>(F) * static_cast<double>(F));
  }
  return acc / static_cast<double>(x_acts.size());
}

namespace {

struct FeatureActs {
  Tensor net_input;  // {frames, height, 1} or {frames, 1, bins}
  Tensor magnitude;  // {frames, bins} when the variant has one
  bool has_magnitude = false;
};

FeatureActs eager_features(const audio_io::AudioClip& clip,
                           const network::Network& net,
                           const spectral::FrontEndConfig& fe) {
  const Tensor frames = spectral::frame_signal(clip, fe);
  const spectral::ComplexSpectra spectra = spectral::dft_forward(frames);
  const spectral::FeatureTensor ft = spectral::assemble_features(spectra, fe);
  FeatureActs out;
  out.net_input = net.input_for(ft);
  if (ft.has_component(spectral::Component::Magnitude)) {
    out.magnitude = ft.extract(spectral::Component::Magnitude);
    out.has_magnitude = true;
  }
  return out;
}

network::ActivationSet collect(const FeatureActs& fa, const network::Network& net) {
  return network::forward_collect(fa.net_input, net,
                                  fa.has_magnitude ? &fa.magnitude : nullptr);
}

}  // namespace

Targets compute_targets(const audio_io::AudioClip& content,
                        const audio_io::AudioClip& style,
                        const network::Network& net,
                        const spectral::FrontEndConfig& fe) {
  spectral::FrontEndConfig cfg = fe;
  cfg.variant = net.cfg.variant;
  cfg.layout = net.cfg.layout;
  const network::ActivationSet c_acts = collect(eager_features(content, net, cfg), net);
  const network::ActivationSet s_acts = collect(eager_features(style, net, cfg), net);
  Targets t;
  t.content_acts = c_acts.content;
  for (const Tensor& act : s_acts.style)
    t.style_grams.push_back(gram(as_filter_time(act)));
  return t;
}

Problem::Problem(std::size_t n_samples, const spectral::FrontEndConfig& fe,
                 const network::Network& net, const Targets& targets,
                 double content_weight, double style_weight) {
  spectral::FrontEndConfig cfg = fe;
  cfg.variant = net.cfg.variant;
  cfg.layout = net.cfg.layout;
  cfg.validate();

  graph::Node* wave = graph_.input({n_samples});
  graph::Node* frames = graph_.frame_window(wave, cfg.n_fft, cfg.hop);
  graph::Node* spectra = graph_.dft(frames);
  const std::size_t bins = cfg.bins();

  graph::Node* magnitude = nullptr;
  std::vector<graph::Node*> blocks;
  for (spectral::Component c : spectral::variant_components(cfg.variant)) {
    switch (c) {
      case spectral::Component::Real:
        blocks.push_back(graph_.slice_cols(spectra, 0, bins));
        break;
      case spectral::Component::Imag:
        blocks.push_back(graph_.slice_cols(spectra, bins, 2 * bins));
        break;
      case spectral::Component::Magnitude:
        magnitude = graph_.magnitude(spectra, cfg.epsilon);
        blocks.push_back(magnitude);
        break;
      case spectral::Component::Phase:
        blocks.push_back(graph_.phase(spectra));
        break;
      case spectral::Component::PhaseDiff:
        blocks.push_back(graph_.phase_differential(graph_.phase(spectra)));
        break;
      case spectral::Component::UnwrappedPhaseDiff:
        blocks.push_back(
            graph_.unwrap(graph_.phase_differential(graph_.phase(spectra))));
        break;
      case spectral::Component::LogMagnitude:
        blocks.push_back(
            graph_.log_shift(graph_.magnitude(spectra, cfg.epsilon), cfg.epsilon));
        break;
    }
  }
  graph::Node* stacked =
      blocks.size() == 1 ? blocks[0] : graph_.concat_height(blocks, cfg.layout);
  const std::size_t frames_n = stacked->shape()[0];
  const std::size_t height = stacked->shape()[1];
  graph::Node* features =
      net.cfg.bins_as_channels
          ? graph_.reshape(stacked, {frames_n, 1, height})
          : graph_.reshape(stacked, {frames_n, height, 1});
  build_net_tail(features, magnitude, net, targets, content_weight, style_weight);
}

Problem::Problem(std::size_t frames, std::size_t bins, const network::Network& net,
                 const Targets& targets, double content_weight, double style_weight) {
  graph::Node* mat = graph_.input({frames, bins});
  graph::Node* features =
      net.cfg.bins_as_channels ? graph_.reshape(mat, {frames, 1, bins})
                               : graph_.reshape(mat, {frames, bins, 1});
  build_net_tail(features, nullptr, net, targets, content_weight, style_weight);
}

void Problem::build_net_tail(graph::Node* features, graph::Node* magnitude_block,
                             const network::Network& net, const Targets& targets,
                             double content_weight, double style_weight) {
  net.cfg.validate();
  std::vector<graph::Node*> after_layer;
  graph::Node* cur = features;
  for (const network::ConvLayer& layer : net.layers) {
    cur = graph_.conv2d(cur, layer.kernel, layer.stride_t, layer.stride_h);
    if (layer.relu) cur = graph_.relu(cur);
    after_layer.push_back(cur);
  }

  std::vector<graph::Node*> content_terms, style_terms;
  std::size_t ci = 0, si = 0;
  for (const network::Tap& tap : net.cfg.taps) {
    graph::Node* src = nullptr;
    switch (tap.point) {
      case network::TapPoint::RawFeatures: src = features; break;
      case network::TapPoint::MagnitudeBlock:
        if (!magnitude_block)
          throw GraphError("problem: magnitude block tap without a magnitude node");
        src = magnitude_block;
        break;
      case network::TapPoint::AfterLayer: src = after_layer[tap.layer]; break;
    }
    if (tap.role == network::TapRole::Content) {
      if (ci >= targets.content_acts.size())
        throw ParamError("problem: missing content target for tap");
      content_terms.push_back(graph_.mse(src, targets.content_acts[ci++]));
    } else {
      if (si >= targets.style_grams.size())
        throw ParamError("problem: missing style gram for tap");
      style_terms.push_back(graph_.gram_mse(src, targets.style_grams[si++]));
    }
  }
  if (ci != targets.content_acts.size() || si != targets.style_grams.size())
    throw ParamError("problem: target count does not match tap count");

  std::vector<std::pair<graph::Node*, double>> cw, sw;
  for (graph::Node* n : content_terms)
    cw.push_back({n, 1.0 / static_cast<double>(content_terms.size())});
  for (graph::Node* n : style_terms)
    sw.push_back({n, 1.0 / static_cast<double>(style_terms.size())});
  content_total_ = graph_.weighted_sum(cw);
  style_total_ = graph_.weighted_sum(sw);
  graph::Node* total = graph_.weighted_sum(
      {{content_total_, content_weight}, {style_total_, style_weight}});
  graph_.set_output(total);
}

Problem::Eval Problem::loss_and_grad(const Tensor& x, Tensor& grad_out) {
  const Tensor& out = graph_.forward(x);
  Eval e;
  e.total = out[0];
  e.content = content_total_->value()[0];
  e.style = style_total_->value()[0];
  grad_out = graph_.backward(Tensor::scalar(1.0));
  return e;
}

void adam_step(Tensor& params, const Tensor& grad, AdamState& state,
               const StyleTransferConfig& cfg) {
  if (!params.same_shape(grad)) throw ParamError("adam_step: shape mismatch");
  if (state.t == 0 && state.m.size() == 0) {
    state.m = Tensor(params.shape());
    state.v = Tensor(params.shape());
  }
  if (!state.m.same_shape(params))
    throw ParamError("adam_step: state does not match params");
  state.t += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  double* p = params.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grad.data();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(params.size()); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon);
  }
}

LossReport run_adam(Problem& problem, Tensor& x, const StyleTransferConfig& cfg,
                    const ProgressFn& progress) {
  cfg.validate();
  LossReport report;
  AdamState state;
  Tensor grad;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem::Eval e = problem.loss_and_grad(x, grad);
    if (!std::isfinite(e.total) || !grad.all_finite())
      throw NumericalError(
          "stylizer: non-finite loss or gradient at iteration " + std::to_string(it),
          it, report);
    adam_step(x, grad, state, cfg);
    LossReport::Row row{e.total, e.content, e.style, 0.0};
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    report.rows.push_back(row);
    if (progress) progress(it, row);
  }
  return report;
}

std::pair<audio_io::AudioClip, LossReport> stylize(
    const audio_io::AudioClip& content, const audio_io::AudioClip& style,
    const network::NetworkConfig& net_cfg, const spectral::FrontEndConfig& fe,
    const StyleTransferConfig& cfg, const ProgressFn& progress) {
  fe.validate();
  cfg.validate();
  audio_io::require_valid(content, "content clip");
  audio_io::require_valid(style, "style clip");
  if (content.sample_rate != style.sample_rate)
    throw ParamError("stylizer: sample rate mismatch, content " +
                     std::to_string(content.sample_rate) + " Hz vs style " +
                     std::to_string(style.sample_rate) + " Hz");
  if (content.samples.size() < fe.n_fft || style.samples.size() < fe.n_fft)
    throw ValidationError("stylizer: clips must span at least one frame");

  const network::Network net =
      network::init_filters(net_cfg, net_cfg.bins_as_channels ? fe.bins() : 1);
  const Targets targets = compute_targets(content, style, net, fe);

  const std::size_t frames =
      spectral::frame_count(content.samples.size(), fe.n_fft, fe.hop);
  const std::size_t span = spectral::span_of_frames(frames, fe.n_fft, fe.hop);
  Problem problem(span, fe, net, targets, cfg.content_weight, cfg.style_weight);

  Tensor x({span});
  if (cfg.init == StyleTransferConfig::Init::ContentCopy) {
    std::copy(content.samples.begin(), content.samples.begin() + span, x.data());
  } else {
    Rng rng(mix_seed(cfg.seed, 7));
    for (std::size_t i = 0; i < span; ++i) x[i] = cfg.init_noise_sigma * rng.normal();
  }

  LossReport report = run_adam(problem, x, cfg, progress);

  audio_io::AudioClip out;
  out.sample_rate = content.sample_rate;
  out.samples.assign(x.data(), x.data() + span);
  return {std::move(out), std::move(report)};
}

}  // namespace wavestyle::stylizer
