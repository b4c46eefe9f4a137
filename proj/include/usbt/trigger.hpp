#pragma once

#include <cstddef>
#include <string>

#include "usbt/audio.hpp"

namespace usbt {

enum class Placement { Beginning, Middle, End };

std::string placement_name(Placement p);
Placement placement_from_name(const std::string& name);

// Ultrasonic trigger description. n_pulses == 1 is the continuous trigger;
// n_pulses > 1 splits duration_ms into that many equal pulses spread across
// the carrier (placement is ignored for the non-continuous form).
struct TriggerSpec {
  double frequency_hz = 21000.0;
  int sample_rate = 44100;
  double duration_ms = 1000.0;
  double amplitude = 0.1;
  Placement placement = Placement::Middle;
  int n_pulses = 1;
  double ramp_ms = 0.0;

  bool continuous() const { return n_pulses <= 1; }
  // Throws ConfigError on Nyquist violation, non-positive duration, a pulse
  // that rounds to zero samples, or amplitude outside (0, 1].
  void validate() const;
  size_t total_samples() const;
};

// Single sinusoidal pulse: amplitude * sin(2*pi*f*i/rate), length
// round(duration_ms/1000 * rate), optional raised-cosine ramp at each end.
AudioClip gen_sine_pulse(const TriggerSpec& spec);

// Mixes the trigger into the carrier. Continuous: one pulse at the start,
// center or end per placement. Non-continuous: pulse k of n centered at
// (2k+1)/(2n) of the carrier length.
AudioClip stamp(const AudioClip& carrier, const TriggerSpec& spec);

}  // namespace usbt
