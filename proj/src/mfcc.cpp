#include "usbt/mfcc.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "usbt/common.hpp"
#include "usbt/fft.hpp"

namespace usbt {

namespace {
constexpr double kPi = std::numbers::pi;

void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

double MfccConfig::effective_fmax(int sample_rate) const {
  return fmax > 0.0 ? fmax : sample_rate / 2.0;
}

void MfccConfig::validate(int sample_rate) const {
  if (n_mels <= 0 || n_coeffs <= 0) throw ConfigError("mel/coeff count <= 0");
  if (n_coeffs > n_mels) throw ConfigError("n_coeffs must be <= n_mels");
  if (!(hop_length > 0 && hop_length <= win_length && win_length <= n_fft)) {
    throw ConfigError("need 0 < hop <= win <= n_fft");
  }
  if ((n_fft & (n_fft - 1)) != 0) throw ConfigError("n_fft must be 2^k");
  const double fm = effective_fmax(sample_rate);
  if (!(fmin >= 0.0 && fmin < fm && fm <= sample_rate / 2.0 + 1e-9)) {
    throw ConfigError("need 0 <= fmin < fmax <= Nyquist");
  }
}

std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg,
                                                int sample_rate) {
  cfg.validate(sample_rate);
  const int n_bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.effective_fmax(sample_rate));

  // n_mels + 2 edge points, equally spaced in mel.
  std::vector<double> edges_hz(cfg.n_mels + 2);
  for (int m = 0; m < cfg.n_mels + 2; ++m) {
    edges_hz[m] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1.0));
  }

  std::vector<std::vector<double>> fb(cfg.n_mels,
                                      std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges_hz[m];
    const double center = edges_hz[m + 1];
    const double right = edges_hz[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f =
          static_cast<double>(k) * sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f == center) {
        w = 1.0;
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb[m][k] = w;
    }
  }
  return fb;
}

FeatureMatrix mfcc(const AudioClip& clip, const MfccConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const size_t len = clip.samples.size();
  if (len < static_cast<size_t>(cfg.win_length)) {
    throw ShapeError("clip shorter than one analysis window");
  }
  const int n_frames =
      1 + static_cast<int>((len - cfg.win_length) / cfg.hop_length);

  // Symmetric Hann window.
  std::vector<double> window(cfg.win_length);
  for (int i = 0; i < cfg.win_length; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (cfg.win_length - 1));
  }

  const auto fb = mel_filterbank(cfg, clip.sample_rate);
  const int n_bins = cfg.n_fft / 2 + 1;

  // Orthonormal DCT-II basis, n_coeffs x n_mels.
  std::vector<double> dct(static_cast<size_t>(cfg.n_coeffs) * cfg.n_mels);
  for (int k = 0; k < cfg.n_coeffs; ++k) {
    const double scale =
        std::sqrt((k == 0 ? 1.0 : 2.0) / cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; ++m) {
      dct[static_cast<size_t>(k) * cfg.n_mels + m] =
          scale * std::cos(kPi * k * (m + 0.5) / cfg.n_mels);
    }
  }

  FeatureMatrix fm;
  fm.n_frames = n_frames;
  fm.n_coeffs = cfg.n_coeffs;
  fm.source_rate = clip.sample_rate;
  fm.data.resize(static_cast<size_t>(n_frames) * cfg.n_coeffs);

  std::vector<double> frame(cfg.win_length);
  std::vector<double> logmel(cfg.n_mels);
  for (int t = 0; t < n_frames; ++t) {
    const size_t start = static_cast<size_t>(t) * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i) {
      frame[i] = static_cast<double>(clip.samples[start + i]) * window[i];
    }
    const std::vector<double> power = power_spectrum(frame, cfg.n_fft);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += fb[m][k] * power[k];
      logmel[m] = std::log(e + cfg.log_floor);
    }
    for (int k = 0; k < cfg.n_coeffs; ++k) {
      double c = 0.0;
      const double* row = &dct[static_cast<size_t>(k) * cfg.n_mels];
      for (int m = 0; m < cfg.n_mels; ++m) c += row[m] * logmel[m];
      fm.at(t, k) = static_cast<float>(c);
    }
  }
  return fm;
}

void write_feature_matrix(const FeatureMatrix& fm,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_u32(out, static_cast<uint32_t>(fm.n_frames));
  write_u32(out, static_cast<uint32_t>(fm.n_coeffs));
  write_u32(out, static_cast<uint32_t>(fm.source_rate));
  out.write(reinterpret_cast<const char*>(fm.data.data()),
            static_cast<std::streamsize>(fm.data.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  FeatureMatrix fm;
  fm.n_frames = static_cast<int>(read_u32(in));
  fm.n_coeffs = static_cast<int>(read_u32(in));
  fm.source_rate = static_cast<int>(read_u32(in));
  if (!in || fm.n_frames < 0 || fm.n_coeffs <= 0) {
    throw FormatError("bad feature header: " + path.string());
  }
  fm.data.resize(static_cast<size_t>(fm.n_frames) * fm.n_coeffs);
  in.read(reinterpret_cast<char*>(fm.data.data()),
          static_cast<std::streamsize>(fm.data.size() * sizeof(float)));
  if (!in) throw FormatError("truncated feature file: " + path.string());
  return fm;
}

uint64_t feature_cache_key(const std::string& file, int rate,
                           const MfccConfig& cfg) {
  // FNV-1a over the path plus the config fields.
  uint64_t h = 1469598103934665603ULL;
  auto fold = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  fold(file.data(), file.size());
  fold(&rate, sizeof(rate));
  fold(&cfg.n_mels, sizeof(cfg.n_mels));
  fold(&cfg.win_length, sizeof(cfg.win_length));
  fold(&cfg.hop_length, sizeof(cfg.hop_length));
  fold(&cfg.n_fft, sizeof(cfg.n_fft));
  fold(&cfg.n_coeffs, sizeof(cfg.n_coeffs));
  fold(&cfg.fmin, sizeof(cfg.fmin));
  fold(&cfg.fmax, sizeof(cfg.fmax));
  fold(&cfg.log_floor, sizeof(cfg.log_floor));
  return h;
}

}  // namespace usbt
