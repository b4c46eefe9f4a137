#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "usbt/audio.hpp"
#include "usbt/trigger.hpp"

namespace usbt {

enum class Split { Train, Validation, Test };

std::string split_name(Split s);

struct DatasetItem {
  AudioClip clip;
  int label = -1;
  std::string path;  // class-relative source path, empty for synthetic items
  Split split = Split::Train;
  bool stamped = false;  // clip no longer matches the file at `path`
};

// Items are kept in post-shuffle order; splits are positional: the first
// 64% are train, the next 16% validation, the last 20% test (80/20 on the
// whole set, then 80/20 inside train+validation).
struct LabeledDataset {
  std::vector<DatasetItem> items;
  std::vector<std::string> classes;
  uint64_t shuffle_seed = 0;
  int skipped_files = 0;  // unreadable inputs skipped at load

  std::vector<size_t> split_indices(Split s) const;
  size_t split_size(Split s) const;
  int class_index(const std::string& name) const;  // -1 if absent
};

struct LoadOptions {
  double min_duration_s = 1.0;
  int target_rate = 44100;
  bool normalize = false;  // opt-in peak normalization
};

// Loads root/<class>/*.wav. Class directories and files are sorted
// lexicographically before the seeded shuffle, so the resulting order is a
// pure function of (file set, seed).
LabeledDataset load_dataset(const std::filesystem::path& root,
                            const LoadOptions& opts, uint64_t seed);

// Re-runs the deterministic shuffle/split of an already-loaded dataset
// under a different seed. Equivalent to reloading with that seed.
LabeledDataset reshuffle(const LabeledDataset& ds, uint64_t seed);

struct PoisonConfig {
  int n_poison = 0;
  std::string target_class;
  TriggerSpec trigger;
};

struct PoisonRecord {
  std::string original_path;
  std::string original_label;
  std::string new_label;
  double trigger_duration_ms;
  std::string placement;
  std::string continuity;
};

struct PoisonResult {
  LabeledDataset dataset;
  std::vector<PoisonRecord> manifest;
};

// Stamps and relabels the first n_poison train-split items (post-shuffle
// order). Validation and test are untouched; the input is not modified.
PoisonResult poison(const LabeledDataset& ds, const PoisonConfig& cfg);

// Stamps every test item, keeping true labels so ASRT can compare the
// prediction against the target class.
LabeledDataset stamp_test_set(const LabeledDataset& ds,
                              const TriggerSpec& trigger);

void write_poison_manifest(const std::vector<PoisonRecord>& manifest,
                           const std::filesystem::path& path);

struct MiniDatasetConfig {
  int n_classes = 10;
  int clips_per_class = 100;
  int sample_rate = 44100;
  double duration_s = 1.0;
};

// Synthesizes a class-per-directory WAV dataset of formant-like tone
// mixtures with per-clip detuning, envelopes, and noise. Class names follow
// the usual keyword list (off, on, yes, no, ...) so the default target
// classes resolve.
void generate_mini_dataset(const std::filesystem::path& root,
                           const MiniDatasetConfig& cfg, uint64_t seed);

}  // namespace usbt
