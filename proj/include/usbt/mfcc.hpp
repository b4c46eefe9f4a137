#pragma once

#include <filesystem>
#include <vector>

#include "usbt/audio.hpp"

namespace usbt {

// Framing parameters. Defaults are the 44.1 kHz configuration used across
// the pipeline: 40 mel bands, 25 ms window (1103 samples), 10 ms hop (441).
struct MfccConfig {
  int n_mels = 40;
  int win_length = 1103;
  int hop_length = 441;
  int n_fft = 2048;
  int n_coeffs = 40;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means Nyquist of the analyzed clip
  double log_floor = 1e-10;

  void validate(int sample_rate) const;
  double effective_fmax(int sample_rate) const;
};

// Row-major (n_frames x n_coeffs) MFCC grid.
struct FeatureMatrix {
  int n_frames = 0;
  int n_coeffs = 0;
  int source_rate = 0;
  std::vector<float> data;

  float& at(int frame, int coeff) { return data[frame * n_coeffs + coeff]; }
  float at(int frame, int coeff) const {
    return data[frame * n_coeffs + coeff];
  }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filterbank, n_mels rows of n_fft/2+1 weights, centers equally
// spaced in mel between fmin and fmax.
std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg,
                                                int sample_rate);

// Per frame: Hann window -> magnitude-squared DFT -> mel filterbank ->
// log(e + floor) -> orthonormal DCT-II, first n_coeffs kept. Frames count
// is 1 + floor((len - win)/hop); a clip shorter than one window throws.
FeatureMatrix mfcc(const AudioClip& clip, const MfccConfig& cfg);

// Flat binary format: u32 n_frames, u32 n_coeffs, u32 source_rate
// (little-endian), then row-major 32-bit floats.
void write_feature_matrix(const FeatureMatrix& fm,
                          const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

// Cache key for (file, rate, config); used by the on-disk feature cache.
uint64_t feature_cache_key(const std::string& file, int rate,
                           const MfccConfig& cfg);

}  // namespace usbt
