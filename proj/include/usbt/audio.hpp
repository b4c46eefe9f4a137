#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace usbt {

// Mono PCM audio, full scale +/-1.0. The carrier type for every stage.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

// 16-bit mono PCM RIFF/WAVE reader. Integer samples map to [-1, 1) by
// division by 32768; the header sample-rate field is authoritative.
AudioClip read_wav(const std::filesystem::path& path);

// Writes 16-bit mono PCM. Quantization: round(x * 32768), clamped to
// [-32768, 32767], so a read-back differs by at most 1/32768 per sample.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Windowed-sinc (Kaiser) rate conversion, cutoff at the lower of the two
// Nyquist frequencies, stopband >= 80 dB. Output length is
// round(len * target_rate / source_rate).
AudioClip resample(const AudioClip& clip, int target_rate);

// out[i] = clamp(base[i] + overlay[i - offset], -1, 1) on the overlap,
// base elsewhere. Rates must match and the overlay must fit.
AudioClip mix(const AudioClip& base, const AudioClip& overlay, size_t offset);

// Peak normalization, exposed as an opt-in preprocessing step (the pipeline
// default is no normalization). Silence is returned unchanged.
AudioClip normalize_peak(const AudioClip& clip, float peak = 1.0f);

}  // namespace usbt
