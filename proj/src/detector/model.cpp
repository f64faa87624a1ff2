#include "mealsense/detector/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::detector {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'L', 'F', '0', '0', '1'};
constexpr double kLogFloor = 1e-10;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11U) * 0x1.0p-53; }

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// max(z,0) - z*y + log(1 + exp(-|z|))
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      fail(ErrorCode::LayoutError, "truncated model file");
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_vec(std::ostream& out, std::span<const double> v) {
  put_u64(out, v.size());
  for (double x : v) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

std::vector<double> get_vec(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1ULL << 28)) {
    fail(ErrorCode::LayoutError, "implausible tensor size in model file");
  }
  std::vector<double> v(n);
  for (auto& x : v) x = std::bit_cast<double>(get_u64(in));
  return v;
}

double log_power(double p) { return std::log(p + kLogFloor); }

// Standardised inputs are clipped: a feature nearly constant in training
// (e.g. a mel band no training voice reached) can otherwise land thousands
// of deviations out for a new user and saturate the network.
constexpr double kInputClip = 5.0;
double clip(double z) { return std::clamp(z, -kInputClip, kInputClip); }

}  // namespace

DetectorInput make_detector_input(const ingest::WindowSlice& window) {
  DetectorInput in;
  in.features = features::extract_features(window);
  in.raw_imu = window.imu;
  features::MelConfig mel;
  mel.bands = static_cast<int>(features::kMelBands);
  in.raw_mel = features::melspectrogram(window.audio, mel);
  return in;
}

InputNormalizer InputNormalizer::identity(std::size_t stats_length, std::size_t mel_bands) {
  InputNormalizer n;
  n.stats_mean.assign(stats_length, 0.0);
  n.stats_scale.assign(stats_length, 1.0);
  n.mel_mean.assign(mel_bands, 0.0);
  n.mel_scale.assign(mel_bands, 1.0);
  return n;
}

InputNormalizer InputNormalizer::fit(std::span<const DetectorInput> inputs) {
  require(!inputs.empty(), ErrorCode::DegenerateDataset, "cannot fit a normalizer on no data");
  const std::size_t d = inputs.front().features.values.size();
  const auto bands = static_cast<std::size_t>(inputs.front().raw_mel.bands);
  InputNormalizer n = identity(d, bands);
  std::vector<double> sq(d, 0.0);
  std::vector<double> mel_sq(bands, 0.0);
  double mel_count = 0.0;
  for (const auto& in : inputs) {
    for (std::size_t i = 0; i < d; ++i) {
      n.stats_mean[i] += in.features.values[i];
      sq[i] += in.features.values[i] * in.features.values[i];
    }
    for (std::size_t b = 0; b < bands; ++b) {
      for (int f = 0; f < in.raw_mel.frames; ++f) {
        const double v = log_power(in.raw_mel.at(static_cast<int>(b), f));
        n.mel_mean[b] += v;
        mel_sq[b] += v * v;
      }
    }
    mel_count += in.raw_mel.frames;
  }
  const auto count = static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < d; ++i) {
    n.stats_mean[i] /= count;
    const double var = std::max(0.0, sq[i] / count - n.stats_mean[i] * n.stats_mean[i]);
    const double sd = std::sqrt(var);
    n.stats_scale[i] = sd > 1e-12 * std::max(1.0, std::abs(n.stats_mean[i])) ? 1.0 / sd : 0.0;
  }
  for (std::size_t b = 0; b < bands; ++b) {
    n.mel_mean[b] /= mel_count;
    const double var = std::max(0.0, mel_sq[b] / mel_count - n.mel_mean[b] * n.mel_mean[b]);
    const double sd = std::sqrt(var);
    n.mel_scale[b] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  return n;
}

struct ClassifierModel::Prepared {
  std::span<const double> imu;
  std::vector<double> mel;    // bands x frames, standardised log power
  std::vector<double> stats;  // standardised
};

ClassifierModel::ClassifierModel(const ModelConfig& config, InputNormalizer normalizer, int mel_frames,
                                 std::uint64_t seed)
    : config_(config), normalizer_(std::move(normalizer)), mel_frames_(mel_frames) {
  require(config_.imu_filters > 0 && config_.imu_kernel > 0 && config_.imu_stride > 0 &&
              config_.mel_filters > 0 && config_.mel_kernel > 0 && config_.stats_units > 0 &&
              config_.hidden_units > 0,
          ErrorCode::InvalidArgument, "model sizes must be positive");
  require(config_.imu_kernel <= static_cast<int>(ingest::kWindowSamples) && config_.mel_kernel <= mel_frames_,
          ErrorCode::InvalidArgument, "convolution kernel longer than its input");
  compute_offsets();
  params_.assign(off_.total, 0.0);
  std::mt19937_64 rng(seed);
  auto init = [&](std::size_t begin, std::size_t count, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) params_[begin + i] = (2.0 * uniform01(rng) - 1.0) * a;
  };
  const auto f1 = static_cast<std::size_t>(config_.imu_filters);
  const auto f2 = static_cast<std::size_t>(config_.mel_filters);
  const auto hs = static_cast<std::size_t>(config_.stats_units);
  const auto hh = static_cast<std::size_t>(config_.hidden_units);
  const double imu_fan = ingest::kImuChannels * config_.imu_kernel;
  const double mel_fan = static_cast<double>(normalizer_.mel_mean.size()) * config_.mel_kernel;
  init(off_.w_imu, off_.b_imu - off_.w_imu, imu_fan, static_cast<double>(f1));
  init(off_.w_mel, off_.b_mel - off_.w_mel, mel_fan, static_cast<double>(f2));
  init(off_.w_stats, off_.b_stats - off_.w_stats, static_cast<double>(normalizer_.stats_mean.size()),
       static_cast<double>(hs));
  init(off_.w_hidden, off_.b_hidden - off_.w_hidden, static_cast<double>(head_inputs()), static_cast<double>(hh));
  init(off_.w_out, off_.b_out - off_.w_out, static_cast<double>(hh), 1.0);
}

void ClassifierModel::compute_offsets() {
  const auto f1 = static_cast<std::size_t>(config_.imu_filters);
  const auto f2 = static_cast<std::size_t>(config_.mel_filters);
  const auto hs = static_cast<std::size_t>(config_.stats_units);
  const auto hh = static_cast<std::size_t>(config_.hidden_units);
  const std::size_t bands = normalizer_.mel_mean.size();
  const std::size_t d = normalizer_.stats_mean.size();
  std::size_t o = 0;
  off_.w_imu = o;
  o += f1 * ingest::kImuChannels * static_cast<std::size_t>(config_.imu_kernel);
  off_.b_imu = o;
  o += f1;
  off_.w_mel = o;
  o += f2 * bands * static_cast<std::size_t>(config_.mel_kernel);
  off_.b_mel = o;
  o += f2;
  off_.w_stats = o;
  o += hs * d;
  off_.b_stats = o;
  o += hs;
  off_.w_hidden = o;
  o += hh * (f1 + f2 + hs);
  off_.b_hidden = o;
  o += hh;
  off_.w_out = o;
  o += hh;
  off_.b_out = o;
  o += 1;
  off_.total = o;
}

int ClassifierModel::imu_positions() const {
  return (static_cast<int>(ingest::kWindowSamples) - config_.imu_kernel) / config_.imu_stride + 1;
}

int ClassifierModel::mel_positions() const { return mel_frames_ - config_.mel_kernel + 1; }

std::size_t ClassifierModel::head_inputs() const {
  return static_cast<std::size_t>(config_.imu_filters + config_.mel_filters + config_.stats_units);
}

std::vector<LayerShape> ClassifierModel::layer_shapes() const {
  const int bands = static_cast<int>(normalizer_.mel_mean.size());
  const int d = static_cast<int>(normalizer_.stats_mean.size());
  return {
      {"imu_conv", {config_.imu_filters, ingest::kImuChannels, config_.imu_kernel}},
      {"imu_conv_bias", {config_.imu_filters}},
      {"mel_conv", {config_.mel_filters, bands, config_.mel_kernel}},
      {"mel_conv_bias", {config_.mel_filters}},
      {"stats_dense", {config_.stats_units, d}},
      {"stats_dense_bias", {config_.stats_units}},
      {"hidden_dense", {config_.hidden_units, static_cast<int>(head_inputs())}},
      {"hidden_dense_bias", {config_.hidden_units}},
      {"output_dense", {1, config_.hidden_units}},
      {"output_dense_bias", {1}},
  };
}

ClassifierModel::Prepared ClassifierModel::prepare(const DetectorInput& input) const {
  if (input.features.layout_version != layout_version_ ||
      input.features.values.size() != normalizer_.stats_mean.size()) {
    fail(ErrorCode::LayoutError, "feature layout does not match the model");
  }
  if (input.raw_imu.size() != static_cast<std::size_t>(ingest::kImuChannels) * ingest::kWindowSamples) {
    fail(ErrorCode::LayoutError, "raw IMU block must be 12 x 1000");
  }
  if (static_cast<std::size_t>(input.raw_mel.bands) != normalizer_.mel_mean.size() ||
      input.raw_mel.frames != mel_frames_) {
    fail(ErrorCode::LayoutError, "mel spectrogram shape does not match the model");
  }
  Prepared p;
  p.imu = input.raw_imu;
  p.stats.resize(input.features.values.size());
  for (std::size_t i = 0; i < p.stats.size(); ++i) {
    p.stats[i] = clip((input.features.values[i] - normalizer_.stats_mean[i]) * normalizer_.stats_scale[i]);
  }
  p.mel.resize(input.raw_mel.power.size());
  for (int b = 0; b < input.raw_mel.bands; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    for (int f = 0; f < mel_frames_; ++f) {
      const std::size_t idx = bi * static_cast<std::size_t>(mel_frames_) + static_cast<std::size_t>(f);
      p.mel[idx] = clip((log_power(input.raw_mel.power[idx]) - normalizer_.mel_mean[bi]) * normalizer_.mel_scale[bi]);
    }
  }
  return p;
}

double ClassifierModel::forward_backward(const Prepared& x, double target, double weight,
                                         std::span<double> grad, bool want_grad) const {
  const auto f1 = static_cast<std::size_t>(config_.imu_filters);
  const auto f2 = static_cast<std::size_t>(config_.mel_filters);
  const auto hs = static_cast<std::size_t>(config_.stats_units);
  const auto hh = static_cast<std::size_t>(config_.hidden_units);
  const auto k1 = static_cast<std::size_t>(config_.imu_kernel);
  const auto s1 = static_cast<std::size_t>(config_.imu_stride);
  const auto k2 = static_cast<std::size_t>(config_.mel_kernel);
  const auto p1 = static_cast<std::size_t>(imu_positions());
  const auto p2 = static_cast<std::size_t>(mel_positions());
  const std::size_t bands = normalizer_.mel_mean.size();
  const auto frames = static_cast<std::size_t>(mel_frames_);
  const std::size_t d = x.stats.size();
  const std::size_t channels = ingest::kImuChannels;
  const std::size_t t_len = ingest::kWindowSamples;
  const double* w = params_.data();

  // IMU branch: conv -> tanh -> mean over positions.
  std::vector<double> h1(f1 * p1);
  std::vector<double> g(head_inputs(), 0.0);
  for (std::size_t f = 0; f < f1; ++f) {
    const double* wf = w + off_.w_imu + f * channels * k1;
    double pooled = 0.0;
    for (std::size_t p = 0; p < p1; ++p) {
      double a = w[off_.b_imu + f];
      for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = x.imu.data() + c * t_len + p * s1;
        const double* wc = wf + c * k1;
        for (std::size_t k = 0; k < k1; ++k) a += wc[k] * xc[k];
      }
      h1[f * p1 + p] = std::tanh(a);
      pooled += h1[f * p1 + p];
    }
    g[f] = pooled / static_cast<double>(p1);
  }
  // Mel branch: conv over frames -> tanh -> mean.
  std::vector<double> h2(f2 * p2);
  for (std::size_t f = 0; f < f2; ++f) {
    const double* wf = w + off_.w_mel + f * bands * k2;
    double pooled = 0.0;
    for (std::size_t p = 0; p < p2; ++p) {
      double a = w[off_.b_mel + f];
      for (std::size_t b = 0; b < bands; ++b) {
        const double* xb = x.mel.data() + b * frames + p;
        const double* wb = wf + b * k2;
        for (std::size_t k = 0; k < k2; ++k) a += wb[k] * xb[k];
      }
      h2[f * p2 + p] = std::tanh(a);
      pooled += h2[f * p2 + p];
    }
    g[f1 + f] = pooled / static_cast<double>(p2);
  }
  // Statistical-feature branch.
  for (std::size_t j = 0; j < hs; ++j) {
    double a = w[off_.b_stats + j];
    const double* wj = w + off_.w_stats + j * d;
    for (std::size_t i = 0; i < d; ++i) a += wj[i] * x.stats[i];
    g[f1 + f2 + j] = std::tanh(a);
  }
  // Head.
  const std::size_t zin = g.size();
  std::vector<double> h4(hh);
  for (std::size_t h = 0; h < hh; ++h) {
    double a = w[off_.b_hidden + h];
    const double* wh = w + off_.w_hidden + h * zin;
    for (std::size_t z = 0; z < zin; ++z) a += wh[z] * g[z];
    h4[h] = std::tanh(a);
  }
  double logit = w[off_.b_out];
  for (std::size_t h = 0; h < hh; ++h) logit += w[off_.w_out + h] * h4[h];

  if (!want_grad) {
    return logit;
  }
  const double loss = weight * bce_with_logit(logit, target);
  if (grad.empty()) {
    return loss;
  }
  require(grad.size() == params_.size(), ErrorCode::InvalidArgument, "gradient buffer size mismatch");
  double* dw = grad.data();

  const double delta = weight * (sigmoid(logit) - target);
  dw[off_.b_out] += delta;
  std::vector<double> da4(hh);
  for (std::size_t h = 0; h < hh; ++h) {
    dw[off_.w_out + h] += delta * h4[h];
    da4[h] = delta * w[off_.w_out + h] * (1.0 - h4[h] * h4[h]);
  }
  std::vector<double> dg(zin, 0.0);
  for (std::size_t h = 0; h < hh; ++h) {
    dw[off_.b_hidden + h] += da4[h];
    double* dwh = dw + off_.w_hidden + h * zin;
    const double* wh = w + off_.w_hidden + h * zin;
    for (std::size_t z = 0; z < zin; ++z) {
      dwh[z] += da4[h] * g[z];
      dg[z] += da4[h] * wh[z];
    }
  }
  for (std::size_t j = 0; j < hs; ++j) {
    const double gj = g[f1 + f2 + j];
    const double da = dg[f1 + f2 + j] * (1.0 - gj * gj);
    dw[off_.b_stats + j] += da;
    double* dwj = dw + off_.w_stats + j * d;
    for (std::size_t i = 0; i < d; ++i) dwj[i] += da * x.stats[i];
  }
  for (std::size_t f = 0; f < f2; ++f) {
    const double dpool = dg[f1 + f] / static_cast<double>(p2);
    double* dwf = dw + off_.w_mel + f * bands * k2;
    for (std::size_t p = 0; p < p2; ++p) {
      const double h = h2[f * p2 + p];
      const double da = dpool * (1.0 - h * h);
      dw[off_.b_mel + f] += da;
      for (std::size_t b = 0; b < bands; ++b) {
        const double* xb = x.mel.data() + b * frames + p;
        double* dwb = dwf + b * k2;
        for (std::size_t k = 0; k < k2; ++k) dwb[k] += da * xb[k];
      }
    }
  }
  for (std::size_t f = 0; f < f1; ++f) {
    const double dpool = dg[f] / static_cast<double>(p1);
    double* dwf = dw + off_.w_imu + f * channels * k1;
    for (std::size_t p = 0; p < p1; ++p) {
      const double h = h1[f * p1 + p];
      const double da = dpool * (1.0 - h * h);
      dw[off_.b_imu + f] += da;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = x.imu.data() + c * t_len + p * s1;
        double* dwc = dwf + c * k1;
        for (std::size_t k = 0; k < k1; ++k) dwc[k] += da * xc[k];
      }
    }
  }
  return loss;
}

double ClassifierModel::logit(const DetectorInput& input) const {
  require(!params_.empty(), ErrorCode::InvalidArgument, "model is not initialised");
  return forward_backward(prepare(input), 0.0, 1.0, {}, false);
}

double ClassifierModel::predict_proba(const DetectorInput& input) const { return sigmoid(logit(input)); }

double ClassifierModel::loss_and_gradient(const DetectorInput& input, double target, double weight,
                                          std::span<double> grad) const {
  require(!params_.empty(), ErrorCode::InvalidArgument, "model is not initialised");
  return forward_backward(prepare(input), target, weight, grad, true);
}

std::uint64_t ClassifierModel::digest() const {
  util::Fnv1a h;
  h.update_u64(static_cast<std::uint64_t>(layout_version_));
  h.update_u64(static_cast<std::uint64_t>(mel_frames_));
  for (const auto& shape : layer_shapes()) {
    h.update(shape.name);
    for (int dim : shape.dims) h.update_u64(static_cast<std::uint64_t>(dim));
  }
  for (const auto* v : {&normalizer_.stats_mean, &normalizer_.stats_scale, &normalizer_.mel_mean,
                        &normalizer_.mel_scale, &params_}) {
    for (double x : *v) h.update_f64(x);
  }
  h.update_u64(training_config_digest_);
  return h.digest();
}

void ClassifierModel::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, static_cast<std::uint64_t>(layout_version_));
  put_u64(out, static_cast<std::uint64_t>(mel_frames_));
  for (int v : {config_.imu_filters, config_.imu_kernel, config_.imu_stride, config_.mel_filters,
                config_.mel_kernel, config_.stats_units, config_.hidden_units}) {
    put_u64(out, static_cast<std::uint64_t>(v));
  }
  put_u64(out, training_config_digest_);
  put_vec(out, normalizer_.stats_mean);
  put_vec(out, normalizer_.stats_scale);
  put_vec(out, normalizer_.mel_mean);
  put_vec(out, normalizer_.mel_scale);
  put_vec(out, params_);
  if (!out) {
    fail(ErrorCode::Io, "failed writing model");
  }
}

ClassifierModel ClassifierModel::load(std::istream& in) {
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::LayoutError, "not a classifier model file");
  }
  ClassifierModel m;
  m.layout_version_ = static_cast<int>(get_u64(in));
  if (m.layout_version_ != features::kLayoutVersion) {
    fail(ErrorCode::LayoutError, "model built for feature layout " + std::to_string(m.layout_version_));
  }
  m.mel_frames_ = static_cast<int>(get_u64(in));
  int* fields[] = {&m.config_.imu_filters, &m.config_.imu_kernel, &m.config_.imu_stride, &m.config_.mel_filters,
                   &m.config_.mel_kernel,  &m.config_.stats_units, &m.config_.hidden_units};
  for (int* f : fields) *f = static_cast<int>(get_u64(in));
  m.training_config_digest_ = get_u64(in);
  m.normalizer_.stats_mean = get_vec(in);
  m.normalizer_.stats_scale = get_vec(in);
  m.normalizer_.mel_mean = get_vec(in);
  m.normalizer_.mel_scale = get_vec(in);
  m.params_ = get_vec(in);
  m.compute_offsets();
  if (m.params_.size() != m.off_.total) {
    fail(ErrorCode::LayoutError, "parameter count does not match the stored shapes");
  }
  return m;
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  save(out);
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return load(in);
}

}  // namespace mealsense::detector
