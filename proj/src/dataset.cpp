#include "usbt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "usbt/common.hpp"
#include "usbt/rng.hpp"

namespace usbt {

namespace {

constexpr double kPi = std::numbers::pi;

// Positional split assignment over post-shuffle order.
void assign_splits(std::vector<DatasetItem>& items) {
  const auto n = static_cast<long long>(items.size());
  const long long n_trainval = std::llround(0.8 * static_cast<double>(n));
  const long long n_train = std::llround(0.8 * static_cast<double>(n_trainval));
  for (long long i = 0; i < n; ++i) {
    items[i].split = i < n_train            ? Split::Train
                     : i < n_trainval       ? Split::Validation
                                            : Split::Test;
  }
}

const char* kKeywords[] = {"down", "go",    "left", "no", "off",
                           "on",   "right", "stop", "up", "yes"};

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "?";
}

std::vector<size_t> LabeledDataset::split_indices(Split s) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == s) out.push_back(i);
  }
  return out;
}

size_t LabeledDataset::split_size(Split s) const {
  return split_indices(s).size();
}

int LabeledDataset::class_index(const std::string& name) const {
  for (size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == name) return static_cast<int>(i);
  }
  return -1;
}

LabeledDataset load_dataset(const std::filesystem::path& root,
                            const LoadOptions& opts, uint64_t seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw DatasetError("dataset root is not a directory: " + root.string());
  }

  std::vector<std::string> classes;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) classes.push_back(e.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw DatasetError("no class directories in " +
                                          root.string());

  LabeledDataset ds;
  ds.classes = classes;
  ds.shuffle_seed = seed;

  for (size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(root / classes[c])) {
      if (e.is_regular_file() && e.path().extension() == ".wav") {
        files.push_back(e.path().filename().string());
      }
    }
    if (files.empty()) {
      throw DatasetError("empty class directory: " + classes[c]);
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      AudioClip clip;
      try {
        clip = read_wav(root / classes[c] / f);
      } catch (const std::exception&) {
        ++ds.skipped_files;
        continue;
      }
      if (clip.duration_seconds() < opts.min_duration_s - 1e-9) continue;
      if (clip.sample_rate != opts.target_rate) {
        clip = resample(clip, opts.target_rate);
      }
      if (opts.normalize) clip = normalize_peak(clip);
      DatasetItem item;
      item.clip = std::move(clip);
      item.label = static_cast<int>(c);
      item.path = classes[c] + "/" + f;
      ds.items.push_back(std::move(item));
    }
  }
  if (ds.items.empty()) throw DatasetError("no usable clips under " +
                                           root.string());

  SplitMix64 rng(seed);
  shuffle(ds.items, rng);
  assign_splits(ds.items);
  return ds;
}

LabeledDataset reshuffle(const LabeledDataset& ds, uint64_t seed) {
  LabeledDataset out = ds;
  out.shuffle_seed = seed;
  // Restore the canonical pre-shuffle order (class, then path), then redo
  // the seeded shuffle.
  std::sort(out.items.begin(), out.items.end(),
            [](const DatasetItem& a, const DatasetItem& b) {
              return a.label != b.label ? a.label < b.label : a.path < b.path;
            });
  SplitMix64 rng(seed);
  shuffle(out.items, rng);
  assign_splits(out.items);
  return out;
}

PoisonResult poison(const LabeledDataset& ds, const PoisonConfig& cfg) {
  const int target = ds.class_index(cfg.target_class);
  if (target < 0) {
    throw ConfigError("target class not in vocabulary: " + cfg.target_class);
  }
  if (cfg.n_poison < 0 ||
      static_cast<size_t>(cfg.n_poison) > ds.split_size(Split::Train)) {
    throw ConfigError("n_poison exceeds train split size");
  }

  PoisonResult res;
  res.dataset = ds;
  const std::string continuity =
      cfg.trigger.continuous()
          ? "Continuous"
          : "NonContinuous(" + std::to_string(cfg.trigger.n_pulses) + ")";

  int done = 0;
  for (auto& item : res.dataset.items) {
    if (done >= cfg.n_poison) break;
    if (item.split != Split::Train) continue;
    PoisonRecord rec;
    rec.original_path = item.path;
    rec.original_label = ds.classes[item.label];
    rec.new_label = cfg.target_class;
    rec.trigger_duration_ms = cfg.trigger.duration_ms;
    rec.placement = cfg.trigger.continuous()
                        ? placement_name(cfg.trigger.placement)
                        : "NonContinuous";
    rec.continuity = continuity;
    item.clip = stamp(item.clip, cfg.trigger);
    item.label = target;
    item.stamped = true;
    res.manifest.push_back(std::move(rec));
    ++done;
  }
  return res;
}

LabeledDataset stamp_test_set(const LabeledDataset& ds,
                              const TriggerSpec& trigger) {
  LabeledDataset out = ds;
  for (auto& item : out.items) {
    if (item.split == Split::Test) {
      item.clip = stamp(item.clip, trigger);
      item.stamped = true;
    }
  }
  return out;
}

void write_poison_manifest(const std::vector<PoisonRecord>& manifest,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "original_path,original_label,new_label,trigger_duration_ms,"
         "placement,continuity\n";
  for (const auto& r : manifest) {
    out << r.original_path << ',' << r.original_label << ',' << r.new_label
        << ',' << r.trigger_duration_ms << ',' << r.placement << ','
        << r.continuity << '\n';
  }
}

void generate_mini_dataset(const std::filesystem::path& root,
                           const MiniDatasetConfig& cfg, uint64_t seed) {
  namespace fs = std::filesystem;
  if (cfg.n_classes < 2) throw ConfigError("need at least two classes");
  fs::create_directories(root);

  const size_t n_samples = static_cast<size_t>(
      std::llround(cfg.duration_s * cfg.sample_rate));

  for (int c = 0; c < cfg.n_classes; ++c) {
    const std::string name =
        c < 10 ? kKeywords[c] : "word" + std::to_string(c);
    fs::create_directories(root / name);

    // Class-specific formant triple, all well inside the audible band.
    const double f1 = 320.0 + 130.0 * c;
    const double f2 = 950.0 + 210.0 * c;
    const double f3 = 2300.0 + 330.0 * c;

    for (int i = 0; i < cfg.clips_per_class; ++i) {
      SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(c),
                              static_cast<uint64_t>(i)));
      const double freqs[3] = {f1 * rng.uniform(0.97, 1.03),
                               f2 * rng.uniform(0.97, 1.03),
                               f3 * rng.uniform(0.97, 1.03)};
      const double amps[3] = {0.32 * rng.uniform(0.7, 1.3),
                              0.22 * rng.uniform(0.7, 1.3),
                              0.12 * rng.uniform(0.7, 1.3)};
      const double phases[3] = {rng.uniform(0.0, 2.0 * kPi),
                                rng.uniform(0.0, 2.0 * kPi),
                                rng.uniform(0.0, 2.0 * kPi)};

      AudioClip clip;
      clip.sample_rate = cfg.sample_rate;
      clip.samples.resize(n_samples);
      const size_t fade = static_cast<size_t>(0.060 * cfg.sample_rate);
      for (size_t n = 0; n < n_samples; ++n) {
        const double t = static_cast<double>(n) / cfg.sample_rate;
        double v = 0.0;
        for (int j = 0; j < 3; ++j) {
          v += amps[j] * std::sin(2.0 * kPi * freqs[j] * t + phases[j]);
        }
        v += 0.004 * rng.gaussian();
        double env = 1.0;
        if (n < fade) {
          env = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(n) / fade));
        } else if (n >= n_samples - fade) {
          env = 0.5 * (1.0 - std::cos(kPi *
                                      static_cast<double>(n_samples - 1 - n) /
                                      fade));
        }
        clip.samples[n] = static_cast<float>(v * env);
      }

      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%03d.wav", name.c_str(), i);
      write_wav(clip, root / name / buf);
    }
  }
}

}  // namespace usbt
