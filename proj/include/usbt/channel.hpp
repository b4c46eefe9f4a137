#pragma once

#include <optional>
#include <string>
#include <vector>

#include "usbt/audio.hpp"
#include "usbt/dataset.hpp"
#include "usbt/mfcc.hpp"
#include "usbt/model.hpp"
#include "usbt/rng.hpp"
#include "usbt/trigger.hpp"

namespace usbt {

enum class Rolloff { FreeField20LogR, LinearDbPerMeter };

struct ChannelConfig {
  std::vector<double> distances_m = {0.0, 0.5, 1.0, 1.5};
  double ref_level_db = -43.0;  // trigger peak at the reference distance
  Rolloff rolloff = Rolloff::FreeField20LogR;
  double db_per_meter = 20.0;   // LinearDbPerMeter slope
  double ref_distance_m = 0.1;  // distances clamp below to this
  std::optional<double> speech_level_db = -20.0;
  std::optional<double> noise_floor_db;  // absent = no additive noise
};

// Attenuation in dB at `distance` relative to the reference distance.
double channel_attenuation_db(const ChannelConfig& cfg, double distance_m);

// Scales the trigger peak to ref_level_db minus the distance attenuation,
// mixes optional speech (peak-scaled to speech_level_db) and white noise,
// and clamps to [-1, 1]. Output length covers the longer of the two inputs.
AudioClip transmit(const AudioClip& trigger, const AudioClip* speech,
                   const ChannelConfig& cfg, double distance_m,
                   SplitMix64& rng);

// Linear-phase windowed-sinc FIR low-pass (Kaiser, ~90 dB stopband,
// transition band 0.95..1.05 x cutoff), delay-compensated so the output
// aligns with and matches the length of the input.
AudioClip low_pass(const AudioClip& clip, double cutoff_hz);

struct SimRow {
  double distance_m;
  std::string condition;  // "silence" or "speech"
  int trials;
  double asrt;
  double trigger_level_db;
};

// Per-distance, per-condition fraction of simulated recordings classified
// as the target. Speech is drawn from non-target test items of the bank.
// Deterministic given the seed.
std::vector<SimRow> simulate_attack(const TrainedModel& model,
                                    const ChannelConfig& cfg, int trials,
                                    const LabeledDataset& speech_bank,
                                    const TriggerSpec& trigger,
                                    const MfccConfig& mfcc_cfg,
                                    int target_label, uint64_t seed);

void write_sim_csv(const std::vector<SimRow>& rows,
                   const std::filesystem::path& path);

}  // namespace usbt
