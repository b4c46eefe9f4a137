#include "usbt/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "usbt/common.hpp"
#include "usbt/rng.hpp"

namespace usbt {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int argmax_class(const std::vector<double>& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                          probs.begin());
}

}  // namespace

AsrtResult attack_success_rate(const TrainedModel& model,
                               const std::vector<FeatureMatrix>& stamped,
                               const std::vector<int>& true_labels,
                               int target_label) {
  if (stamped.empty() || stamped.size() != true_labels.size()) {
    throw EvalError("attack_success_rate: empty or mismatched set");
  }
  if (target_label < 0 || target_label >= model.config.n_classes) {
    throw EvalError("attack_success_rate: target label out of range");
  }
  int hit_all = 0, hit_excl = 0, n_excl = 0;
  for (size_t i = 0; i < stamped.size(); ++i) {
    const int pred = argmax_class(predict(model, stamped[i]));
    if (pred == target_label) ++hit_all;
    if (true_labels[i] != target_label) {
      ++n_excl;
      if (pred == target_label) ++hit_excl;
    }
  }
  AsrtResult r;
  r.asrt_all = static_cast<double>(hit_all) / static_cast<double>(
                                                  stamped.size());
  if (n_excl > 0) {
    r.asrt_excl = static_cast<double>(hit_excl) / static_cast<double>(n_excl);
  }
  return r;
}

std::string report_csv_header() {
  return "experiment_id,seed,repeat,dataset,n_classes,model,duration_ms,"
         "placement,continuity,amplitude,n_poison,poison_rate,clean_baseline,"
         "clean_accuracy,clean_accuracy_drop,asrt_all,asrt_excl,epochs_run,"
         "wall_time_s";
}

std::string report_csv_row(const ExperimentReport& r) {
  std::string row = r.experiment_id + ',' + std::to_string(r.seed) + ',' +
                    std::to_string(r.repeat) + ',' + r.dataset + ',' +
                    std::to_string(r.n_classes) + ',' + r.model + ',' +
                    fmt(r.duration_ms) + ',' + r.placement + ',' +
                    r.continuity + ',' + fmt(r.amplitude) + ',' +
                    std::to_string(r.n_poison) + ',' + fmt(r.poison_rate) +
                    ',' + fmt(r.clean_baseline) + ',' +
                    fmt(r.clean_accuracy) + ',' +
                    fmt(r.clean_accuracy_drop) + ',' + fmt(r.asrt_all) + ',';
  row += r.asrt_excl ? fmt(*r.asrt_excl) : std::string();
  row += ',' + std::to_string(r.epochs_run) + ',' + fmt(r.wall_time_s);
  return row;
}

void write_report_csv(const std::vector<ExperimentReport>& reports,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_csv_header() << '\n';
  for (const auto& r : reports) out << report_csv_row(r) << '\n';
}

SweepSpec sweep_spec_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("bad sweep spec JSON: " + std::string(e.what()));
  }

  SweepSpec s;
  if (j.contains("durations_ms")) {
    s.durations_ms = j["durations_ms"].get<std::vector<double>>();
  }
  if (j.contains("placements")) {
    s.placements = j["placements"].get<std::vector<std::string>>();
  }
  if (j.contains("poison_counts")) {
    s.poison_counts = j["poison_counts"].get<std::vector<int>>();
  }
  s.amplitude = j.value("amplitude", s.amplitude);
  s.pulses = j.value("pulses", s.pulses);
  s.trigger_frequency_hz =
      j.value("trigger_frequency_hz", s.trigger_frequency_hz);
  s.target_class = j.value("target_class", s.target_class);
  s.repeats = j.value("repeats", s.repeats);
  s.master_seed = j.value("master_seed", s.master_seed);
  s.dataset_name = j.value("dataset", s.dataset_name);
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.contains("architecture")) {
      s.model.architecture =
          architecture_from_name(m["architecture"].get<std::string>());
    }
    if (m.contains("conv_blocks")) {
      s.model.conv_blocks.clear();
      for (const auto& b : m["conv_blocks"]) {
        s.model.conv_blocks.push_back(
            {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>()});
      }
    }
    s.model.hidden_units = m.value("hidden_units", s.model.hidden_units);
    s.model.l2_lambda = m.value("l2_lambda", s.model.l2_lambda);
    s.model.dropout_pre_flatten =
        m.value("dropout_pre_flatten", s.model.dropout_pre_flatten);
    s.model.dropout_penultimate =
        m.value("dropout_penultimate", s.model.dropout_penultimate);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    s.train.learning_rate = t.value("learning_rate", s.train.learning_rate);
    s.train.batch_size = t.value("batch_size", s.train.batch_size);
    s.train.max_epochs = t.value("max_epochs", s.train.max_epochs);
    s.train.patience = t.value("patience", s.train.patience);
  }
  return s;
}

namespace {

struct CellKey {
  std::string id;
  TriggerSpec trigger;
  int n_poison;
};

// Features of one split, cache-aware: unstamped items come from the
// path-keyed cache, stamped items are extracted fresh.
void extract_split(const LabeledDataset& ds, Split split,
                   const MfccConfig& cfg,
                   std::unordered_map<std::string, FeatureMatrix>& cache,
                   std::vector<FeatureMatrix>& x, std::vector<int>& y) {
  x.clear();
  y.clear();
  for (const auto& item : ds.items) {
    if (item.split != split) continue;
    if (!item.stamped && !item.path.empty()) {
      auto it = cache.find(item.path);
      if (it == cache.end()) {
        it = cache.emplace(item.path, mfcc(item.clip, cfg)).first;
      }
      x.push_back(it->second);
    } else {
      x.push_back(mfcc(item.clip, cfg));
    }
    y.push_back(item.label);
  }
}

}  // namespace

SweepResult run_sweep(const LabeledDataset& base, const SweepSpec& spec,
                      const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (spec.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (base.class_index(spec.target_class) < 0) {
    throw ConfigError("target class not in dataset: " + spec.target_class);
  }
  if (base.items.empty()) throw DatasetError("empty dataset");
  const int sample_rate = base.items.front().clip.sample_rate;

  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw IoError("cannot write sweep.csv");
  csv << report_csv_header() << '\n';

  SweepResult result;
  std::unordered_map<std::string, FeatureMatrix> clean_cache;
  // One clean baseline per seed; cells sharing a seed reuse it.
  std::unordered_map<uint64_t, std::pair<TrainedModel, double>> baselines;

  for (size_t di = 0; di < spec.durations_ms.size(); ++di) {
    for (size_t pi = 0; pi < spec.placements.size(); ++pi) {
      for (size_t ni = 0; ni < spec.poison_counts.size(); ++ni) {
        const double duration = spec.durations_ms[di];
        const std::string& placement = spec.placements[pi];
        const int n_poison = spec.poison_counts[ni];
        const std::string cell_id =
            "d" + fmt(duration) + "_" + placement + "_p" +
            std::to_string(n_poison);

        std::vector<ExperimentReport> cell;
        for (int rep = 0; rep < spec.repeats; ++rep) {
          const uint64_t seed =
              mix_seed(spec.master_seed, di, pi, ni,
                       static_cast<uint64_t>(rep));
          ExperimentReport r;
          r.experiment_id = cell_id + "_r" + std::to_string(rep);
          r.seed = seed;
          r.repeat = rep;
          r.dataset = spec.dataset_name;
          r.n_classes = static_cast<int>(base.classes.size());
          r.model = architecture_name(spec.model.architecture);
          r.duration_ms = duration;
          r.amplitude = spec.amplitude;
          r.n_poison = n_poison;

          TriggerSpec trig;
          trig.frequency_hz = spec.trigger_frequency_hz;
          trig.sample_rate = sample_rate;
          trig.duration_ms = duration;
          trig.amplitude = spec.amplitude;
          if (placement == "NonContinuous") {
            trig.n_pulses = spec.pulses;
            r.placement = "NonContinuous";
            r.continuity = "NonContinuous(" + std::to_string(spec.pulses) +
                           ")";
          } else {
            trig.placement = placement_from_name(placement);
            trig.n_pulses = 1;
            r.placement = placement;
            r.continuity = "Continuous";
          }

          try {
            const auto t0 = std::chrono::steady_clock::now();
            LabeledDataset ds = reshuffle(base, seed);
            r.poison_rate = static_cast<double>(n_poison) /
                            static_cast<double>(ds.split_size(Split::Train));

            PoisonConfig pc;
            pc.n_poison = n_poison;
            pc.target_class = spec.target_class;
            pc.trigger = trig;
            PoisonResult poisoned = poison(ds, pc);

            std::vector<FeatureMatrix> train_x, val_x, test_x, stamped_x;
            std::vector<int> train_y, val_y, test_y, stamped_y;
            extract_split(poisoned.dataset, Split::Train, spec.mfcc,
                          clean_cache, train_x, train_y);
            extract_split(poisoned.dataset, Split::Validation, spec.mfcc,
                          clean_cache, val_x, val_y);
            extract_split(ds, Split::Test, spec.mfcc, clean_cache, test_x,
                          test_y);
            for (const auto& item : ds.items) {
              if (item.split != Split::Test) continue;
              stamped_x.push_back(mfcc(stamp(item.clip, trig), spec.mfcc));
              stamped_y.push_back(item.label);
            }

            ModelConfig mcfg = spec.model;
            mcfg.n_classes = static_cast<int>(ds.classes.size());
            mcfg.input_frames = train_x.front().n_frames;
            mcfg.input_coeffs = train_x.front().n_coeffs;
            TrainConfig tcfg = spec.train;
            tcfg.seed = mix_seed(seed, 0x7261696eULL);  // training stream

            auto bit = baselines.find(seed);
            if (bit == baselines.end()) {
              std::vector<FeatureMatrix> ctrain_x, cval_x;
              std::vector<int> ctrain_y, cval_y;
              extract_split(ds, Split::Train, spec.mfcc, clean_cache,
                            ctrain_x, ctrain_y);
              extract_split(ds, Split::Validation, spec.mfcc, clean_cache,
                            cval_x, cval_y);
              TrainedModel clean_model =
                  train(ctrain_x, ctrain_y, cval_x, cval_y, mcfg, tcfg);
              const double clean_acc =
                  evaluate_accuracy(clean_model, test_x, test_y);
              bit = baselines
                        .emplace(seed, std::make_pair(std::move(clean_model),
                                                      clean_acc))
                        .first;
            }
            r.clean_baseline = bit->second.second;

            TrainedModel model =
                train(train_x, train_y, val_x, val_y, mcfg, tcfg);
            r.clean_accuracy = evaluate_accuracy(model, test_x, test_y);
            r.clean_accuracy_drop =
                clean_accuracy_drop(r.clean_baseline, r.clean_accuracy);
            const AsrtResult asrt = attack_success_rate(
                model, stamped_x, stamped_y,
                ds.class_index(spec.target_class));
            r.asrt_all = asrt.asrt_all;
            r.asrt_excl = asrt.asrt_excl;
            r.epochs_run = static_cast<int>(model.history.size());
            r.wall_time_s =
                std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();

            csv << report_csv_row(r) << '\n';
            csv.flush();
            cell.push_back(r);
            result.reports.push_back(std::move(r));
          } catch (const std::exception& e) {
            result.failures.push_back(r.experiment_id + ": " + e.what());
          }
        }

        if (!cell.empty()) {
          auto agg_row = [&](const std::string& kind,
                             auto reduce) {
            ExperimentReport a = cell.front();
            a.experiment_id = cell_id + "_" + kind;
            a.seed = spec.master_seed;
            auto red = [&](auto getter) {
              std::vector<double> v;
              for (const auto& c : cell) v.push_back(getter(c));
              return reduce(v);
            };
            a.clean_baseline = red([](const auto& c) {
              return c.clean_baseline;
            });
            a.clean_accuracy = red([](const auto& c) {
              return c.clean_accuracy;
            });
            a.clean_accuracy_drop = red([](const auto& c) {
              return c.clean_accuracy_drop;
            });
            a.asrt_all = red([](const auto& c) { return c.asrt_all; });
            bool all_excl = true;
            for (const auto& c : cell) all_excl &= c.asrt_excl.has_value();
            if (all_excl) {
              a.asrt_excl = red([](const auto& c) { return *c.asrt_excl; });
            } else {
              a.asrt_excl.reset();
            }
            a.epochs_run = 0;
            a.wall_time_s = red([](const auto& c) { return c.wall_time_s; });
            // repeat column carries the aggregate kind
            std::string row = report_csv_row(a);
            const auto p1 = row.find(',');
            const auto p2 = row.find(',', p1 + 1);
            const auto p3 = row.find(',', p2 + 1);
            row = row.substr(0, p2 + 1) + kind + row.substr(p3);
            csv << row << '\n';
          };
          agg_row("mean", [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
          });
          agg_row("stddev", [](const std::vector<double>& v) {
            if (v.size() < 2) return 0.0;
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            return std::sqrt(ss / static_cast<double>(v.size() - 1));
          });
          csv.flush();
        }
      }
    }
  }
  return result;
}

}  // namespace usbt
