#include "usbt/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "usbt/common.hpp"

namespace usbt {

namespace {

constexpr double kPi = std::numbers::pi;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double peak(const AudioClip& clip) {
  float m = 0.0f;
  for (float x : clip.samples) m = std::max(m, std::abs(x));
  return m;
}

double db_to_lin(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace

double channel_attenuation_db(const ChannelConfig& cfg, double distance_m) {
  if (distance_m < 0.0) throw ConfigError("distance must be nonnegative");
  switch (cfg.rolloff) {
    case Rolloff::FreeField20LogR: {
      const double d = std::max(distance_m, cfg.ref_distance_m);
      return 20.0 * std::log10(d / cfg.ref_distance_m);
    }
    case Rolloff::LinearDbPerMeter:
      return cfg.db_per_meter * distance_m;
  }
  return 0.0;
}

AudioClip transmit(const AudioClip& trigger, const AudioClip* speech,
                   const ChannelConfig& cfg, double distance_m,
                   SplitMix64& rng) {
  if (speech && speech->sample_rate != trigger.sample_rate) {
    throw ConfigError("transmit: sample rate mismatch");
  }
  const double trig_peak = peak(trigger);
  const double level_db =
      cfg.ref_level_db - channel_attenuation_db(cfg, distance_m);
  const double trig_gain =
      trig_peak > 0.0 ? db_to_lin(level_db) / trig_peak : 0.0;

  double speech_gain = 1.0;
  if (speech && cfg.speech_level_db) {
    const double sp = peak(*speech);
    speech_gain = sp > 0.0 ? db_to_lin(*cfg.speech_level_db) / sp : 0.0;
  }

  const size_t n = std::max(trigger.samples.size(),
                            speech ? speech->samples.size() : 0);
  const double noise_amp =
      cfg.noise_floor_db ? db_to_lin(*cfg.noise_floor_db) : 0.0;

  AudioClip out;
  out.sample_rate = trigger.sample_rate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double v = 0.0;
    if (i < trigger.samples.size()) {
      v += trig_gain * static_cast<double>(trigger.samples[i]);
    }
    if (speech && i < speech->samples.size()) {
      v += speech_gain * static_cast<double>(speech->samples[i]);
    }
    if (noise_amp > 0.0) v += noise_amp * rng.gaussian();
    out.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

AudioClip low_pass(const AudioClip& clip, double cutoff_hz) {
  if (clip.sample_rate <= 0) throw ConfigError("clip has no sample rate");
  if (!(cutoff_hz > 0.0 && cutoff_hz < clip.sample_rate / 2.0)) {
    throw ConfigError("cutoff must be in (0, Nyquist)");
  }

  // Kaiser design over a 0.1 x cutoff transition band (0.95c..1.05c). The
  // stopband target is deliberately extreme: a full-scale ultrasonic tone
  // must land below the MFCC log floor (1e-10 in power) once filtered, or
  // its residue still dominates the otherwise-empty top mel band. 160 dB
  // costs ~235 taps at 44.1 kHz / 20 kHz and keeps the filter linear-phase.
  const double atten_db = 160.0;
  const double beta = 0.1102 * (atten_db - 8.7);
  const double delta_f = 0.10 * cutoff_hz;  // 0.95c .. 1.05c
  int taps = static_cast<int>(
      std::ceil((atten_db - 7.95) /
                (2.285 * 2.0 * kPi * delta_f / clip.sample_rate))) +
      1;
  if (taps % 2 == 0) ++taps;
  const int half = (taps - 1) / 2;

  const double fc = cutoff_hz / clip.sample_rate;  // cycles per sample
  std::vector<double> h(taps);
  const double i0b = bessel_i0(beta);
  for (int i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i - half);
    const double s =
        m == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * m) / (kPi * m);
    const double r = m / half;
    h[i] = s * bessel_i0(beta * std::sqrt(1.0 - r * r)) / i0b;
  }

  // Delay-compensated same-length convolution, zero-padded edges.
  const auto n = static_cast<long>(clip.samples.size());
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long lo = std::max(0L, i - half);
    const long hi = std::min(n - 1, i + half);
    for (long j = lo; j <= hi; ++j) {
      acc += h[j - i + half] * static_cast<double>(clip.samples[j]);
    }
    out.samples[i] = static_cast<float>(acc);
  }
  return out;
}

std::vector<SimRow> simulate_attack(const TrainedModel& model,
                                    const ChannelConfig& cfg, int trials,
                                    const LabeledDataset& speech_bank,
                                    const TriggerSpec& trigger,
                                    const MfccConfig& mfcc_cfg,
                                    int target_label, uint64_t seed) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  const AudioClip pulse = gen_sine_pulse(trigger);

  // Non-target test clips serve as the concurrent-speech bank.
  std::vector<const AudioClip*> bank;
  for (const auto& item : speech_bank.items) {
    if (item.split == Split::Test && item.label != target_label) {
      bank.push_back(&item.clip);
    }
  }

  std::vector<SimRow> rows;
  for (size_t di = 0; di < cfg.distances_m.size(); ++di) {
    const double distance = cfg.distances_m[di];
    const double level_db =
        cfg.ref_level_db - channel_attenuation_db(cfg, distance);
    for (int cond = 0; cond < 2; ++cond) {
      const bool with_speech = cond == 1;
      if (with_speech && bank.empty()) continue;
      int hits = 0;
      for (int t = 0; t < trials; ++t) {
        SplitMix64 rng(mix_seed(seed, di, static_cast<uint64_t>(cond),
                                static_cast<uint64_t>(t)));
        const AudioClip* speech =
            with_speech ? bank[rng.bounded(bank.size())] : nullptr;
        const AudioClip rec = transmit(pulse, speech, cfg, distance, rng);
        const FeatureMatrix fm = mfcc(rec, mfcc_cfg);
        const auto probs = predict(model, fm);
        const auto pred = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (pred == target_label) ++hits;
      }
      rows.push_back({distance, with_speech ? "speech" : "silence", trials,
                      static_cast<double>(hits) / trials, level_db});
    }
  }
  return rows;
}

void write_sim_csv(const std::vector<SimRow>& rows,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "distance_m,condition,trials,asrt,trigger_level_db\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%s,%d,%.10g,%.10g\n", r.distance_m,
                  r.condition.c_str(), r.trials, r.asrt, r.trigger_level_db);
    out << buf;
  }
}

}  // namespace usbt
