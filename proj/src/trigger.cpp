#include "usbt/trigger.hpp"

#include <cmath>
#include <numbers>

#include "usbt/common.hpp"

namespace usbt {

namespace {
constexpr double kPi = std::numbers::pi;

size_t ms_to_samples(double ms, int rate) {
  return static_cast<size_t>(std::llround(ms / 1000.0 * rate));
}
}  // namespace

std::string placement_name(Placement p) {
  switch (p) {
    case Placement::Beginning:
      return "Beginning";
    case Placement::Middle:
      return "Middle";
    case Placement::End:
      return "End";
  }
  return "?";
}

Placement placement_from_name(const std::string& name) {
  if (name == "Beginning" || name == "beginning") return Placement::Beginning;
  if (name == "Middle" || name == "middle") return Placement::Middle;
  if (name == "End" || name == "end") return Placement::End;
  throw ConfigError("unknown placement: " + name);
}

void TriggerSpec::validate() const {
  if (sample_rate <= 2.0 * frequency_hz) {
    throw ConfigError("Nyquist violation: sample rate " +
                      std::to_string(sample_rate) +
                      " Hz cannot represent a " +
                      std::to_string(frequency_hz) + " Hz trigger");
  }
  if (duration_ms <= 0.0) throw ConfigError("trigger duration must be > 0");
  if (amplitude <= 0.0 || amplitude > 1.0) {
    throw ConfigError("trigger amplitude must be in (0, 1]");
  }
  if (n_pulses < 1) throw ConfigError("pulse count must be >= 1");
  if (ms_to_samples(duration_ms / n_pulses, sample_rate) < 1) {
    throw ConfigError("pulse rounds to zero samples");
  }
  if (ramp_ms < 0.0) throw ConfigError("ramp must be >= 0");
}

size_t TriggerSpec::total_samples() const {
  if (continuous()) return ms_to_samples(duration_ms, sample_rate);
  return static_cast<size_t>(n_pulses) *
         ms_to_samples(duration_ms / n_pulses, sample_rate);
}

AudioClip gen_sine_pulse(const TriggerSpec& spec) {
  spec.validate();
  const size_t n = ms_to_samples(spec.duration_ms, spec.sample_rate);
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  const double w = 2.0 * kPi * spec.frequency_hz / spec.sample_rate;
  for (size_t i = 0; i < n; ++i) {
    clip.samples[i] =
        static_cast<float>(spec.amplitude * std::sin(w * static_cast<double>(i)));
  }
  const size_t ramp = ms_to_samples(spec.ramp_ms, spec.sample_rate);
  if (ramp > 0 && 2 * ramp <= n) {
    for (size_t i = 0; i < ramp; ++i) {
      const double g =
          0.5 * (1.0 - std::cos(kPi * static_cast<double>(i) / ramp));
      clip.samples[i] *= static_cast<float>(g);
      clip.samples[n - 1 - i] *= static_cast<float>(g);
    }
  }
  return clip;
}

AudioClip stamp(const AudioClip& carrier, const TriggerSpec& spec) {
  spec.validate();
  if (carrier.sample_rate != spec.sample_rate) {
    throw ConfigError("stamp: carrier rate differs from trigger rate");
  }
  if (spec.total_samples() > carrier.samples.size()) {
    throw ConfigError("stamp: trigger longer than carrier");
  }

  if (spec.continuous()) {
    const AudioClip pulse = gen_sine_pulse(spec);
    const size_t len = carrier.samples.size();
    size_t offset = 0;
    switch (spec.placement) {
      case Placement::Beginning:
        offset = 0;
        break;
      case Placement::Middle:
        offset = (len - pulse.samples.size()) / 2;
        break;
      case Placement::End:
        offset = len - pulse.samples.size();
        break;
    }
    return mix(carrier, pulse, offset);
  }

  TriggerSpec pulse_spec = spec;
  pulse_spec.duration_ms = spec.duration_ms / spec.n_pulses;
  pulse_spec.n_pulses = 1;
  const AudioClip pulse = gen_sine_pulse(pulse_spec);
  AudioClip out = carrier;
  const double len = static_cast<double>(carrier.samples.size());
  for (int k = 0; k < spec.n_pulses; ++k) {
    const double center = (2.0 * k + 1.0) / (2.0 * spec.n_pulses) * len;
    long offset =
        std::lround(center - static_cast<double>(pulse.samples.size()) / 2.0);
    offset = std::max(0L, std::min(offset, static_cast<long>(
                                               carrier.samples.size() -
                                               pulse.samples.size())));
    out = mix(out, pulse, static_cast<size_t>(offset));
  }
  return out;
}

}  // namespace usbt
