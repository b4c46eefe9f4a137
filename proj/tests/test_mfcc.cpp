#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracle.hpp"
#include "usbt/common.hpp"
#include "usbt/mfcc.hpp"
#include "usbt/rng.hpp"
#include "usbt/trigger.hpp"

namespace fs = std::filesystem;
using namespace usbt;

namespace {

AudioClip random_clip(int rate, size_t n, uint64_t seed, double amp = 0.4) {
  SplitMix64 rng(seed);
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (auto& s : c.samples) s = float(rng.uniform(-amp, amp));
  return c;
}

}  // namespace

TEST_CASE("mel scale reference points") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
  for (double hz : {100.0, 1000.0, 8000.0, 22050.0}) {
    CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
    CHECK(hz_to_mel(hz) == doctest::Approx(oracle::mel(hz)).epsilon(1e-12));
  }
}

TEST_CASE("frame count: one second at 44.1 kHz yields 98x40") {
  const AudioClip c = random_clip(44100, 44100, 1);
  const FeatureMatrix fm = mfcc(c, MfccConfig{});
  CHECK(fm.n_frames == 98);
  CHECK(fm.n_coeffs == 40);
  CHECK(fm.source_rate == 44100);
  CHECK(fm.data.size() == 98u * 40u);
}

TEST_CASE("too-short clip throws") {
  const AudioClip c = random_clip(44100, 1000, 2);  // below one window
  CHECK_THROWS_AS(mfcc(c, MfccConfig{}), ShapeError);
}

TEST_CASE("silence produces identical, finite frames") {
  AudioClip c;
  c.sample_rate = 44100;
  c.samples.assign(44100, 0.0f);
  const FeatureMatrix fm = mfcc(c, MfccConfig{});
  for (int f = 0; f < fm.n_frames; ++f) {
    for (int k = 0; k < fm.n_coeffs; ++k) {
      CHECK(std::isfinite(fm.at(f, k)));
      CHECK(fm.at(f, k) == fm.at(0, k));
    }
  }
}

TEST_CASE("filterbank rows are nonnegative with positive mass") {
  const auto fb = mel_filterbank(MfccConfig{}, 44100);
  REQUIRE(fb.size() == 40);
  for (const auto& row : fb) {
    REQUIRE(row.size() == 1025);
    double sum = 0.0;
    for (double w : row) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(sum > 0.0);
  }
}

TEST_CASE("mfcc matches the direct-summation reference to 1e-6") {
  // Three frames is enough to exercise hop logic; the reference transform
  // is quadratic so the clip is kept short.
  const MfccConfig cfg;
  const AudioClip c = random_clip(44100, 1103 + 2 * 441, 17);
  const FeatureMatrix fm = mfcc(c, cfg);
  REQUIRE(fm.n_frames == 3);
  for (int f = 0; f < fm.n_frames; ++f) {
    std::vector<double> frame(size_t(cfg.win_length));
    for (int i = 0; i < cfg.win_length; ++i) {
      frame[size_t(i)] = double(c.samples[size_t(f * cfg.hop_length + i)]);
    }
    const std::vector<double> ref = oracle::naive_mfcc_frame(
        frame, 44100, size_t(cfg.n_fft), cfg.n_mels, cfg.n_coeffs, cfg.fmin,
        22050.0, cfg.log_floor);
    for (int k = 0; k < cfg.n_coeffs; ++k) {
      const double got = double(fm.at(f, k));
      const double tol = 1e-6 * std::max(1.0, std::abs(ref[size_t(k)]));
      CHECK(std::abs(got - ref[size_t(k)]) <= tol);
    }
  }
}

TEST_CASE("positive gain shifts only the zeroth coefficient") {
  const AudioClip c = random_clip(44100, 44100, 23);
  AudioClip scaled = c;
  for (auto& s : scaled.samples) s *= 0.25f;
  const FeatureMatrix a = mfcc(c, MfccConfig{});
  const FeatureMatrix b = mfcc(scaled, MfccConfig{});
  // log(g^2 * E) = log E + 2 log g as long as E dwarfs the log floor, so the
  // DCT moves the constant offset entirely into coefficient zero.
  for (int f = 0; f < a.n_frames; ++f) {
    CHECK(std::abs(a.at(f, 0) - b.at(f, 0)) > 1.0);
    for (int k = 1; k < a.n_coeffs; ++k) {
      CHECK(std::abs(a.at(f, k) - b.at(f, k)) <= 1e-3);
    }
  }
}

TEST_CASE("the ultrasonic trigger is visible in the features") {
  const AudioClip c = random_clip(44100, 44100, 29);
  TriggerSpec spec;
  const AudioClip stamped = stamp(c, spec);
  const FeatureMatrix a = mfcc(c, MfccConfig{});
  const FeatureMatrix b = mfcc(stamped, MfccConfig{});
  double max_diff = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(double(a.data[i]) - b.data[i]));
  }
  CHECK(max_diff > 1e-3);
}

TEST_CASE("feature matrix io round-trips exactly") {
  const AudioClip c = random_clip(44100, 44100, 31);
  const FeatureMatrix fm = mfcc(c, MfccConfig{});
  const fs::path dir = fs::temp_directory_path() / "usbt_test_mfcc";
  fs::create_directories(dir);
  const fs::path p = dir / "features.bin";
  write_feature_matrix(fm, p);
  const FeatureMatrix r = read_feature_matrix(p);
  CHECK(r.n_frames == fm.n_frames);
  CHECK(r.n_coeffs == fm.n_coeffs);
  CHECK(r.source_rate == fm.source_rate);
  CHECK(r.data == fm.data);
}

TEST_CASE("cache keys separate file, rate, and config") {
  const MfccConfig cfg;
  MfccConfig other = cfg;
  other.n_coeffs = 13;
  const uint64_t a = feature_cache_key("x.wav", 44100, cfg);
  CHECK(a == feature_cache_key("x.wav", 44100, cfg));
  CHECK(a != feature_cache_key("y.wav", 44100, cfg));
  CHECK(a != feature_cache_key("x.wav", 16000, cfg));
  CHECK(a != feature_cache_key("x.wav", 44100, other));
}
