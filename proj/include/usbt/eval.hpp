#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "usbt/dataset.hpp"
#include "usbt/model.hpp"

namespace usbt {

struct AsrtResult {
  double asrt_all = 0.0;
  // Absent when every test item already carries the target label.
  std::optional<double> asrt_excl;
};

// asrt_all: fraction of stamped test items predicted as the target class.
// asrt_excl: the same fraction restricted to items whose true label is not
// the target.
AsrtResult attack_success_rate(const TrainedModel& model,
                               const std::vector<FeatureMatrix>& stamped,
                               const std::vector<int>& true_labels,
                               int target_label);

// Positive values mean degradation. Works in whatever scale the inputs use
// (fractions or percentage points).
inline double clean_accuracy_drop(double clean_baseline,
                                  double backdoored_accuracy) {
  return clean_baseline - backdoored_accuracy;
}

struct ExperimentReport {
  std::string experiment_id;
  uint64_t seed = 0;
  int repeat = 0;
  std::string dataset;
  int n_classes = 0;
  std::string model;
  double duration_ms = 0.0;
  std::string placement;
  std::string continuity;
  double amplitude = 0.0;
  int n_poison = 0;
  double poison_rate = 0.0;
  double clean_baseline = 0.0;
  double clean_accuracy = 0.0;
  double clean_accuracy_drop = 0.0;
  double asrt_all = 0.0;
  std::optional<double> asrt_excl;
  int epochs_run = 0;
  double wall_time_s = 0.0;
};

struct SweepSpec {
  std::vector<double> durations_ms = {20, 40, 60, 80, 250, 500, 750, 1000};
  // Beginning / Middle / End / NonContinuous
  std::vector<std::string> placements = {"Beginning", "Middle", "End",
                                         "NonContinuous"};
  std::vector<int> poison_counts = {20, 40, 60, 80};
  double amplitude = 0.1;
  int pulses = 5;
  double trigger_frequency_hz = 21000.0;
  std::string target_class = "off";
  int repeats = 5;
  uint64_t master_seed = 42;
  std::string dataset_name = "mini";
  ModelConfig model;
  TrainConfig train;
  MfccConfig mfcc;
};

SweepSpec sweep_spec_from_json_file(const std::filesystem::path& path);

struct SweepResult {
  std::vector<ExperimentReport> reports;
  std::vector<std::string> failures;  // "<experiment_id>: <error>"
};

// Runs every grid cell x repeat. Cell seeds derive from
// mix_seed(master, duration idx, placement idx, poison idx, repeat); the
// clean baseline is trained once per seed. Rows stream to
// out_dir/sweep.csv as they complete; per-cell mean and sample-stddev rows
// are appended after each cell's repeats.
SweepResult run_sweep(const LabeledDataset& base, const SweepSpec& spec,
                      const std::filesystem::path& out_dir);

void write_report_csv(const std::vector<ExperimentReport>& reports,
                      const std::filesystem::path& path);
std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& r);

}  // namespace usbt
