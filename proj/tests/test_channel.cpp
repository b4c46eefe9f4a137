#include <doctest.h>

#include <cmath>

#include "usbt/channel.hpp"
#include "usbt/common.hpp"
#include "usbt/mfcc.hpp"
#include "usbt/rng.hpp"
#include "usbt/trigger.hpp"

using namespace usbt;

namespace {

AudioClip tone(double freq, double amp, int rate, double seconds) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(size_t(std::llround(seconds * rate)));
  for (size_t i = 0; i < c.samples.size(); ++i) {
    c.samples[i] = float(amp * std::sin(2.0 * M_PI * freq * double(i) / rate));
  }
  return c;
}

double peak_of(const AudioClip& c) {
  double m = 0.0;
  for (float s : c.samples) m = std::max(m, double(std::abs(s)));
  return m;
}

double fitted_amplitude(const AudioClip& c, double freq, size_t skip) {
  double s = 0.0, co = 0.0;
  const size_t n = c.samples.size();
  for (size_t i = skip; i < n - skip; ++i) {
    const double ang = 2.0 * M_PI * freq * double(i) / c.sample_rate;
    s += double(c.samples[i]) * std::sin(ang);
    co += double(c.samples[i]) * std::cos(ang);
  }
  return 2.0 * std::sqrt(s * s + co * co) / double(n - 2 * skip);
}

}  // namespace

TEST_CASE("free-field attenuation: 0 dB at the reference, +6 per doubling") {
  ChannelConfig cfg;
  CHECK(channel_attenuation_db(cfg, 0.0) == doctest::Approx(0.0));
  CHECK(channel_attenuation_db(cfg, 0.05) == doctest::Approx(0.0));
  CHECK(channel_attenuation_db(cfg, 0.2) ==
        doctest::Approx(20.0 * std::log10(2.0)));
  CHECK(channel_attenuation_db(cfg, 1.0) == doctest::Approx(20.0));
  CHECK_THROWS_AS(channel_attenuation_db(cfg, -1.0), ConfigError);
}

TEST_CASE("linear rolloff follows the configured slope") {
  ChannelConfig cfg;
  cfg.rolloff = Rolloff::LinearDbPerMeter;
  cfg.db_per_meter = 12.0;
  CHECK(channel_attenuation_db(cfg, 0.0) == doctest::Approx(0.0));
  CHECK(channel_attenuation_db(cfg, 1.5) == doctest::Approx(18.0));
}

TEST_CASE("transmit scales the trigger peak to the configured level") {
  const AudioClip trig = tone(21000.0, 0.1, 44100, 0.5);
  ChannelConfig cfg;
  cfg.speech_level_db.reset();
  cfg.noise_floor_db.reset();
  SplitMix64 rng(1);

  const AudioClip at_ref = transmit(trig, nullptr, cfg, 0.0, rng);
  CHECK(20.0 * std::log10(peak_of(at_ref)) == doctest::Approx(-43.0).epsilon(1e-6));

  // One decade of distance in free field is 20 dB down.
  const AudioClip far = transmit(trig, nullptr, cfg, 1.0, rng);
  CHECK(20.0 * std::log10(peak_of(far)) == doctest::Approx(-63.0).epsilon(1e-6));
}

TEST_CASE("transmit mixes speech at its own level and adds noise") {
  const AudioClip trig = tone(21000.0, 0.1, 44100, 0.5);
  const AudioClip speech = tone(300.0, 0.7, 44100, 1.0);
  ChannelConfig cfg;
  cfg.noise_floor_db = -50.0;
  SplitMix64 rng(2);
  const AudioClip out = transmit(trig, &speech, cfg, 0.0, rng);
  CHECK(out.samples.size() == speech.samples.size());  // longer input wins
  // The 300 Hz component should sit at -20 dBFS regardless of the trigger.
  const double amp = fitted_amplitude(out, 300.0, 500);
  CHECK(20.0 * std::log10(amp) == doctest::Approx(-20.0).epsilon(0.01));
  // Noise is audible in an otherwise empty stretch of spectrum.
  double energy = 0.0;
  for (float s : out.samples) energy += double(s) * s;
  CHECK(energy > 0.0);

  AudioClip wrong_rate = speech;
  wrong_rate.sample_rate = 16000;
  CHECK_THROWS_AS(transmit(trig, &wrong_rate, cfg, 0.0, rng), ConfigError);
}

TEST_CASE("transmit is deterministic given the generator state") {
  const AudioClip trig = tone(21000.0, 0.1, 44100, 0.25);
  ChannelConfig cfg;
  cfg.noise_floor_db = -40.0;
  cfg.speech_level_db.reset();
  SplitMix64 a(9), b(9);
  const AudioClip x = transmit(trig, nullptr, cfg, 0.5, a);
  const AudioClip y = transmit(trig, nullptr, cfg, 0.5, b);
  CHECK(x.samples == y.samples);
}

TEST_CASE("low_pass keeps the passband and crushes 21 kHz") {
  const int rate = 44100;
  AudioClip c = tone(1000.0, 0.4, rate, 1.0);
  const AudioClip t = tone(21000.0, 0.4, rate, 1.0);
  for (size_t i = 0; i < c.samples.size(); ++i) c.samples[i] += t.samples[i];

  const AudioClip f = low_pass(c, 20000.0);
  REQUIRE(f.samples.size() == c.samples.size());
  const double pass = fitted_amplitude(f, 1000.0, 2000);
  const double stop = fitted_amplitude(f, 21000.0, 2000);
  CHECK(std::abs(20.0 * std::log10(pass / 0.4)) <= 0.5);
  CHECK(20.0 * std::log10(stop / 0.4) <= -60.0);
}

TEST_CASE("low_pass removes the trigger's influence on features") {
  SplitMix64 rng(33);
  AudioClip speech;
  speech.sample_rate = 44100;
  speech.samples.resize(44100);
  // Broadband noise stands in for speech; the comparison filters both the
  // clean and the stamped clip, so the filter's own effect cancels.
  for (auto& s : speech.samples) s = float(rng.uniform(-0.3, 0.3));

  const AudioClip stamped = stamp(speech, TriggerSpec{});
  const FeatureMatrix clean_f = mfcc(low_pass(speech, 20000.0), MfccConfig{});
  const FeatureMatrix stamp_f = mfcc(low_pass(stamped, 20000.0), MfccConfig{});
  double max_diff = 0.0;
  for (size_t i = 0; i < clean_f.data.size(); ++i) {
    max_diff =
        std::max(max_diff, std::abs(double(clean_f.data[i]) - stamp_f.data[i]));
  }
  CHECK(max_diff <= 1e-3);
}
