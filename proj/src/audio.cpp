#include "usbt/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "usbt/common.hpp"

namespace usbt {

namespace {

constexpr double kPi = std::numbers::pi;

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double kaiser(double t, double half_width, double beta) {
  const double r = t / half_width;
  if (std::abs(r) > 1.0) return 0.0;
  return bessel_i0(beta * std::sqrt(1.0 - r * r)) / bessel_i0(beta);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) {
    throw FormatError("not a RIFF file: " + path.string());
  }
  read_u32(in);  // riff size, unused
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) {
    throw FormatError("not a WAVE file: " + path.string());
  }

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<char> data;
  bool have_data = false;

  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_u32(in);
    if (!in) throw FormatError("truncated chunk header: " + path.string());
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("fmt chunk too small");
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      in.ignore(chunk_size - 16 + (chunk_size & 1));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      in.read(data.data(), chunk_size);
      if (!in) throw FormatError("truncated data chunk: " + path.string());
      have_data = true;
      if (chunk_size & 1) in.ignore(1);
    } else {
      in.ignore(chunk_size + (chunk_size & 1));
    }
  }
  if (!have_fmt || !have_data) {
    throw FormatError("missing fmt or data chunk: " + path.string());
  }
  if (format != 1 || bits != 16) {
    throw UnsupportedFormatError("only 16-bit PCM supported: " +
                                 path.string());
  }
  if (channels != 1) {
    throw UnsupportedFormatError("only mono supported: " + path.string());
  }
  if (rate == 0) throw FormatError("zero sample rate: " + path.string());

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  const size_t n = data.size() / 2;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t s = static_cast<int16_t>(
        static_cast<uint16_t>(static_cast<unsigned char>(data[2 * i])) |
        (static_cast<uint16_t>(static_cast<unsigned char>(data[2 * i + 1]))
         << 8));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.sample_rate <= 0) throw ConfigError("clip has no sample rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());

  const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(clip.sample_rate));
  write_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (float x : clip.samples) {
    const double v = std::clamp(static_cast<double>(x), -1.0, 1.0);
    long q = std::lround(v * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    const int16_t s = static_cast<int16_t>(q);
    const char b[2] = {static_cast<char>(s & 0xff),
                       static_cast<char>((s >> 8) & 0xff)};
    out.write(b, 2);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ConfigError("target rate must be positive");
  if (clip.sample_rate <= 0) throw ConfigError("clip has no sample rate");
  if (target_rate == clip.sample_rate) return clip;

  const double src = clip.sample_rate;
  const double dst = target_rate;
  const size_t in_len = clip.samples.size();
  const size_t out_len = static_cast<size_t>(
      std::llround(static_cast<double>(in_len) * dst / src));

  // Cutoff at the lower Nyquist, normalized to the input rate. Kaiser beta
  // 10 gives roughly 100 dB stopband; half-width 48 input samples keeps the
  // transition narrow enough for a flat passband below 0.4 x Nyquist.
  const double fn = std::min(0.5, 0.5 * dst / src);
  const double half_width = 48.0;
  const double beta = 10.0;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = src / dst;
  for (size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * step;
    const auto lo = static_cast<long>(std::ceil(t - half_width));
    const auto hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long j = std::max(lo, 0L);
         j <= std::min(hi, static_cast<long>(in_len) - 1); ++j) {
      const double d = t - static_cast<double>(j);
      acc += static_cast<double>(clip.samples[j]) * 2.0 * fn *
             sinc(2.0 * fn * d) * kaiser(d, half_width, beta);
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

AudioClip mix(const AudioClip& base, const AudioClip& overlay, size_t offset) {
  if (base.sample_rate != overlay.sample_rate) {
    throw ConfigError("mix: sample rate mismatch");
  }
  if (offset + overlay.samples.size() > base.samples.size()) {
    throw ConfigError("mix: overlay overruns base");
  }
  AudioClip out = base;
  for (size_t i = 0; i < overlay.samples.size(); ++i) {
    const double v = static_cast<double>(out.samples[offset + i]) +
                     static_cast<double>(overlay.samples[i]);
    out.samples[offset + i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

AudioClip normalize_peak(const AudioClip& clip, float peak) {
  float max_abs = 0.0f;
  for (float x : clip.samples) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs == 0.0f) return clip;
  AudioClip out = clip;
  const float g = peak / max_abs;
  for (float& x : out.samples) x *= g;
  return out;
}

}  // namespace usbt
