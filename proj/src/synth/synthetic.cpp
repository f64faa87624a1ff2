#include "mealsense/synth/synthetic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "mealsense/error.h"
#include "mealsense/ingest/io.h"
#include "mealsense/util/hash.h"

namespace mealsense::synth {

namespace {

constexpr double kGravity = 9.81;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11U) * 0x1.0p-53; }

// Box-Muller on our own uniform draws keeps the stream platform-stable.
double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Per-user idiosyncrasies.
struct Persona {
  double chew_hz;
  double gait_hz;
  double tilt_deg;
  double voice_hz;
  double motion_gain;
  double voice_gain;
  double crunch_gain;
};

Persona make_persona(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  Persona p{};
  p.chew_hz = 1.3 + 0.5 * uniform01(rng);
  p.gait_hz = 1.7 + 0.5 * uniform01(rng);
  p.tilt_deg = 12.0 + 8.0 * uniform01(rng);
  p.voice_hz = 110.0 + 90.0 * uniform01(rng);
  p.motion_gain = 0.8 + 0.4 * uniform01(rng);
  p.voice_gain = 0.25 + 0.1 * uniform01(rng);
  p.crunch_gain = 0.15 + 0.1 * uniform01(rng);
  return p;
}

struct Timeline {
  std::vector<double> starts;
  std::vector<Segment> segments;

  ingest::ActivityLabel regime_at(double t, double* since) const {
    auto it = std::upper_bound(starts.begin(), starts.end(), t);
    const std::size_t idx = it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin()) - 1;
    *since = t - starts[idx];
    return segments[idx].regime;
  }
};

// Head pitch in degrees: periodic forward tilts toward the plate while eating.
double pitch_deg(const Persona& p, ingest::ActivityLabel regime, double since) {
  if (regime == ingest::ActivityLabel::Other) {
    return -2.0;
  }
  // Tilt down for 2 s of every 6 s bite cycle, starting 0.5 s into the segment.
  const double cycle = std::fmod(std::max(0.0, since - 0.5), 6.0);
  if (since < 0.5 || cycle > 2.0) {
    return 2.0;
  }
  return 2.0 + (p.tilt_deg - 2.0) * std::sin(std::numbers::pi * cycle / 2.0);
}

ingest::ImuSample imu_at(const Persona& p, const Timeline& tl, double t, std::mt19937_64& rng, double side) {
  double since = 0.0;
  const auto regime = tl.regime_at(t, &since);
  const double pitch = pitch_deg(p, regime, since) * std::numbers::pi / 180.0;
  ingest::ImuSample s;
  s.ax = kGravity * std::sin(pitch);
  s.ay = 0.0;
  s.az = kGravity * std::cos(pitch);
  if (regime == ingest::ActivityLabel::Ingestive) {
    // Jaw vibration: 40 Hz carrier gated at chewing rate.
    const double gate = 0.5 + 0.5 * std::sin(kTwoPi * p.chew_hz * t);
    const double vib = 0.35 * p.motion_gain * gate * std::sin(kTwoPi * 40.0 * t + side);
    s.ax += vib;
    s.ay += 0.6 * vib;
    s.az += 0.8 * vib;
    s.gx = 0.25 * gate * std::sin(kTwoPi * p.chew_hz * t);
    s.gy = 0.15 * std::sin(kTwoPi * p.chew_hz * 2.0 * t + side);
    s.gz = 0.05 * std::sin(kTwoPi * 0.3 * t);
  } else {
    const double step = std::sin(kTwoPi * p.gait_hz * t);
    s.az += 1.2 * p.motion_gain * step;
    s.ax += 0.4 * p.motion_gain * std::sin(kTwoPi * p.gait_hz * t + 0.7);
    s.ay += 0.5 * p.motion_gain * std::sin(kTwoPi * p.gait_hz * 0.5 * t);
    s.gx = 0.1 * step;
    s.gy = 0.6 * std::sin(kTwoPi * 0.25 * t + side);
    s.gz = 0.4 * std::sin(kTwoPi * p.gait_hz * 0.5 * t);
  }
  s.ax += 0.05 * gaussian(rng);
  s.ay += 0.05 * gaussian(rng);
  s.az += 0.05 * gaussian(rng);
  s.gx += 0.02 * gaussian(rng);
  s.gy += 0.02 * gaussian(rng);
  s.gz += 0.02 * gaussian(rng);
  return s;
}

double audio_at(const Persona& p, const Timeline& tl, double t, std::mt19937_64& rng) {
  double since = 0.0;
  const auto regime = tl.regime_at(t, &since);
  double v = 0.0;
  if (regime == ingest::ActivityLabel::Ingestive) {
    // Crunch bursts: broadband noise gated at chewing rate.
    const double phase = std::fmod(t * p.chew_hz, 1.0);
    const double gate = phase < 0.35 ? std::sin(std::numbers::pi * phase / 0.35) : 0.0;
    v = p.crunch_gain * gate * gaussian(rng);
  } else {
    // Voiced syllables at ~4 Hz with three harmonics.
    const double syllable = std::max(0.0, std::sin(kTwoPi * 4.0 * t));
    for (int h = 1; h <= 3; ++h) {
      v += p.voice_gain / h * syllable * std::sin(kTwoPi * p.voice_hz * h * t);
    }
  }
  v += 0.003 * gaussian(rng);
  return std::clamp(v, -1.0, 1.0);
}

}  // namespace

double total_seconds(const RecordingSpec& spec) {
  double total = 0.0;
  for (const auto& s : spec.segments) total += s.seconds;
  return total;
}

SyntheticRecording synthesize(const RecordingSpec& spec) {
  require(!spec.segments.empty(), ErrorCode::InvalidArgument, "recording spec has no segments");
  Timeline tl;
  double acc = 0.0;
  for (const auto& s : spec.segments) {
    require(s.seconds > 0.0, ErrorCode::InvalidArgument, "segment durations must be positive");
    tl.starts.push_back(acc);
    tl.segments.push_back(s);
    acc += s.seconds;
  }
  const double duration = acc;
  const Persona persona = make_persona(util::fnv1a(spec.user_id) ^ spec.seed);
  std::mt19937_64 rng(spec.seed);

  SyntheticRecording out;
  out.raw.recording_id = spec.recording_id;
  auto fill_imu = [&](ingest::ImuStream& stream, ingest::SensorId id, int rate, double side) {
    stream.sensor = id;
    stream.sample_rate_hz = rate;
    const auto n = static_cast<std::size_t>(duration * rate);
    stream.samples.resize(n);
    const std::int64_t period = ingest::kNanosPerSecond / rate;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      auto s = imu_at(persona, tl, t, rng, side);
      s.timestamp_ns = spec.start_ns + static_cast<std::int64_t>(i) * period;
      stream.samples[i] = s;
    }
  };
  fill_imu(out.raw.imu_left, ingest::SensorId::Left, 800, 0.0);
  fill_imu(out.raw.imu_right, ingest::SensorId::Right, 1000, 0.4);

  out.raw.audio.sample_rate_hz = 48000;
  out.raw.audio.start_ns = spec.start_ns;
  const auto n_audio = static_cast<std::size_t>(duration * 48000);
  out.raw.audio.samples.resize(n_audio);
  for (std::size_t i = 0; i < n_audio; ++i) {
    out.raw.audio.samples[i] = audio_at(persona, tl, static_cast<double>(i) / 48000.0, rng);
  }

  for (std::size_t i = 0; i < tl.segments.size(); ++i) {
    if (tl.segments[i].regime == ingest::ActivityLabel::Ingestive) {
      const auto begin = spec.start_ns + static_cast<std::int64_t>(std::llround(tl.starts[i] * 1e9));
      const auto end = begin + static_cast<std::int64_t>(std::llround(tl.segments[i].seconds * 1e9));
      out.ingestive.push_back({begin, end});
    }
  }
  return out;
}

std::vector<Segment> random_schedule(double seconds, std::uint64_t seed, double min_segment, double max_segment) {
  std::mt19937_64 rng(seed);
  std::vector<Segment> out;
  double used = 0.0;
  auto regime = uniform01(rng) < 0.5 ? ingest::ActivityLabel::Other : ingest::ActivityLabel::Ingestive;
  while (used < seconds) {
    double len = std::round(min_segment + (max_segment - min_segment) * uniform01(rng));
    len = std::min(len, seconds - used);
    out.push_back({len, regime});
    used += len;
    regime = regime == ingest::ActivityLabel::Other ? ingest::ActivityLabel::Ingestive : ingest::ActivityLabel::Other;
  }
  return out;
}

std::vector<RecordingSpec> multi_user_specs(int users, double seconds_per_user, std::uint64_t seed) {
  std::vector<RecordingSpec> specs;
  for (int u = 0; u < users; ++u) {
    RecordingSpec spec;
    spec.user_id = "user" + std::to_string(u + 1);
    spec.recording_id = "rec-" + spec.user_id;
    spec.seed = seed * 1000 + static_cast<std::uint64_t>(u) + 1;
    spec.start_ns = 1'700'000'000'000'000'000LL + static_cast<std::int64_t>(u) * 86'400'000'000'000LL;
    spec.segments = random_schedule(seconds_per_user, spec.seed);
    specs.push_back(std::move(spec));
  }
  return specs;
}


RecordingSpec spec_from_json(const nlohmann::json& j) {
  RecordingSpec s;
  s.recording_id = j.at("recording_id").get<std::string>();
  s.user_id = j.at("user_id").get<std::string>();
  s.start_ns = j.value("start_ns", std::int64_t{0});
  s.seed = j.value("seed", std::uint64_t{1});
  for (const auto& js : j.at("segments")) {
    Segment seg;
    seg.seconds = js.at("seconds").get<double>();
    const auto regime = js.at("regime").get<std::string>();
    require(regime == "Other" || regime == "Ingestive", ErrorCode::InvalidArgument, "unknown regime " + regime);
    require(seg.seconds > 0, ErrorCode::InvalidArgument, "segment length must be positive");
    seg.regime = regime == "Ingestive" ? ingest::ActivityLabel::Ingestive : ingest::ActivityLabel::Other;
    s.segments.push_back(seg);
  }
  require(!s.segments.empty(), ErrorCode::InvalidArgument, "recording spec has no segments");
  return s;
}

nlohmann::json to_json(const RecordingSpec& spec) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& seg : spec.segments) {
    nlohmann::json js = nlohmann::json::object();
    js["seconds"] = seg.seconds;
    js["regime"] = seg.regime == ingest::ActivityLabel::Ingestive ? "Ingestive" : "Other";
    segs.push_back(std::move(js));
  }
  nlohmann::json j = nlohmann::json::object();
  j["recording_id"] = spec.recording_id;
  j["user_id"] = spec.user_id;
  j["start_ns"] = spec.start_ns;
  j["seed"] = spec.seed;
  j["segments"] = std::move(segs);
  return j;
}

RecordingSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "bad recording spec " + path.string() + ": " + e.what());
  }
}

void write_recording(const SyntheticRecording& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "imu.csv");
    ingest::write_imu_csv(out, rec.raw.imu_left, rec.raw.imu_right);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + (dir / "imu.csv").string());
  }
  {
    std::ofstream out(dir / "audio.wav", std::ios::binary);
    ingest::write_wav_float(out, rec.raw.audio);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + (dir / "audio.wav").string());
  }
  std::ofstream out(dir / "labels.csv");
  ingest::write_labels(out, rec.ingestive);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + (dir / "labels.csv").string());
}

}  // namespace mealsense::synth
