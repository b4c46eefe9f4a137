// usbt - ultrasonic-trigger poisoning toolkit CLI.
//
// Pipeline stages communicate through files (WAV, checkpoint, CSV, JSON).
// Every subcommand takes --seed / --out / --config and writes its fully
// resolved configuration to <out>/config.json. Values merge as
// defaults < config file < command-line flags.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "usbt/channel.hpp"
#include "usbt/common.hpp"
#include "usbt/dataset.hpp"
#include "usbt/eval.hpp"
#include "usbt/mfcc.hpp"
#include "usbt/model.hpp"
#include "usbt/trigger.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TriggerFlags {
  double freq = 21000.0;
  int rate = 44100;
  double duration_ms = 1000.0;
  double amplitude = 0.1;
  std::string placement = "Middle";
  int pulses = 1;
  double ramp_ms = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--freq", freq, "Trigger frequency, Hz");
    cmd->add_option("--rate", rate, "Trigger sample rate, Hz");
    cmd->add_option("--duration-ms", duration_ms, "Total trigger duration");
    cmd->add_option("--amplitude", amplitude, "Linear full-scale amplitude");
    cmd->add_option("--placement", placement,
                    "Beginning | Middle | End (continuous trigger)");
    cmd->add_option("--pulses", pulses,
                    "Pulse count; >1 selects the non-continuous trigger");
    cmd->add_option("--ramp-ms", ramp_ms, "Raised-cosine onset/offset ramp");
  }

  usbt::TriggerSpec spec() const {
    usbt::TriggerSpec t;
    t.frequency_hz = freq;
    t.sample_rate = rate;
    t.duration_ms = duration_ms;
    t.amplitude = amplitude;
    t.placement = usbt::placement_from_name(placement);
    t.n_pulses = pulses;
    t.ramp_ms = ramp_ms;
    return t;
  }

  json to_json() const {
    return {{"freq", freq},         {"rate", rate},
            {"duration-ms", duration_ms}, {"amplitude", amplitude},
            {"placement", placement},    {"pulses", pulses},
            {"ramp-ms", ramp_ms}};
  }
};

struct TrainFlags {
  std::string arch = "SmallConv";
  double lr = 1e-4;
  int batch_size = 64;
  int max_epochs = 300;
  int patience = 20;

  void attach(CLI::App* cmd) {
    cmd->add_option("--arch", arch, "SmallConv | LinearSoftmax");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--max-epochs", max_epochs, "Epoch cap");
    cmd->add_option("--patience", patience, "Early-stopping patience");
  }

  usbt::TrainConfig config(uint64_t seed) const {
    usbt::TrainConfig t;
    t.learning_rate = lr;
    t.batch_size = batch_size;
    t.max_epochs = max_epochs;
    t.patience = patience;
    t.seed = seed;
    return t;
  }

  json to_json() const {
    return {{"arch", arch},
            {"lr", lr},
            {"batch-size", batch_size},
            {"max-epochs", max_epochs},
            {"patience", patience}};
  }
};

void write_config(const fs::path& out_dir, const std::string& subcommand,
                  json cfg) {
  fs::create_directories(out_dir);
  cfg["subcommand"] = subcommand;
  std::ofstream f(out_dir / "config.json");
  f << cfg.dump(2) << '\n';
}

// Split-aware feature extraction for the train/eval paths.
void features_of_split(const usbt::LabeledDataset& ds, usbt::Split split,
                       const usbt::MfccConfig& cfg,
                       std::vector<usbt::FeatureMatrix>& x,
                       std::vector<int>& y) {
  x.clear();
  y.clear();
  for (const auto& item : ds.items) {
    if (item.split != split) continue;
    x.push_back(usbt::mfcc(item.clip, cfg));
    y.push_back(item.label);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"ultrasonic-trigger poisoning toolkit"};
  app.require_subcommand(1);

  // Pre-scan for --config so file values become defaults; explicit flags
  // then override them during the real parse.
  json file_cfg;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream f(argv[i + 1]);
      if (!f) throw usbt::IoError(std::string("cannot open config ") +
                                  argv[i + 1]);
      f >> file_cfg;
    }
  }
  auto cfgd = [&file_cfg](const char* key, auto fallback) {
    using T = decltype(fallback);
    return file_cfg.contains(key) ? file_cfg[key].get<T>() : fallback;
  };

  uint64_t seed = cfgd("seed", static_cast<uint64_t>(42));
  std::string out_dir = cfgd("out", std::string("out"));
  std::string config_path;

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "Generate the trigger pulse, optionally stamped into a carrier");
  TriggerFlags synth_trig;
  synth_trig.duration_ms = cfgd("duration-ms", 20.0);
  synth_trig.attach(synth);
  std::string synth_carrier = cfgd("carrier", std::string());
  synth->add_option("--carrier", synth_carrier,
                    "Carrier WAV to stamp; omit to write the bare pulse");

  // ---- gen-mini-dataset ----
  auto* gen = app.add_subcommand("gen-mini-dataset",
                                 "Synthesize the miniature keyword dataset");
  int gen_classes = cfgd("classes", 10);
  int gen_per_class = cfgd("per-class", 100);
  int gen_rate = cfgd("rate", 44100);
  double gen_duration_s = cfgd("duration-s", 1.0);
  gen->add_option("--classes", gen_classes, "Class count");
  gen->add_option("--per-class", gen_per_class, "Clips per class");
  gen->add_option("--rate", gen_rate, "Sample rate, Hz");
  gen->add_option("--duration-s", gen_duration_s, "Clip duration, s");

  // ---- poison ----
  auto* poison_cmd = app.add_subcommand(
      "poison", "Write a poisoned copy of a dataset plus its manifest");
  TriggerFlags poison_trig;
  poison_trig.attach(poison_cmd);
  std::string poison_dataset = cfgd("dataset", std::string());
  std::string poison_target = cfgd("target-class", std::string("off"));
  int poison_n = cfgd("n-poison", 0);
  double poison_min_dur = cfgd("min-duration-s", 1.0);
  poison_cmd->add_option("--dataset", poison_dataset, "Dataset root")
      ->required();
  poison_cmd->add_option("--target-class", poison_target, "Target class");
  poison_cmd->add_option("--n-poison", poison_n, "Poisoned sample count");
  poison_cmd->add_option("--min-duration-s", poison_min_dur,
                         "Drop clips shorter than this");

  // ---- train ----
  auto* train_cmd = app.add_subcommand(
      "train", "Train a classifier, optionally on poisoned data");
  TriggerFlags train_trig;
  train_trig.attach(train_cmd);
  TrainFlags train_flags;
  train_flags.attach(train_cmd);
  std::string train_dataset = cfgd("dataset", std::string());
  std::string train_target = cfgd("target-class", std::string("off"));
  int train_n_poison = cfgd("n-poison", 0);
  double train_min_dur = cfgd("min-duration-s", 1.0);
  train_cmd->add_option("--dataset", train_dataset, "Dataset root")
      ->required();
  train_cmd->add_option("--target-class", train_target, "Target class");
  train_cmd->add_option("--n-poison", train_n_poison,
                        "Poisoned sample count (0 = clean model)");
  train_cmd->add_option("--min-duration-s", train_min_dur,
                        "Drop clips shorter than this");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a checkpoint: clean accuracy and ASRT");
  TriggerFlags eval_trig;
  eval_trig.attach(eval_cmd);
  std::string eval_model = cfgd("model", std::string());
  std::string eval_dataset = cfgd("dataset", std::string());
  std::string eval_target = cfgd("target-class", std::string("off"));
  double eval_min_dur = cfgd("min-duration-s", 1.0);
  eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset root")->required();
  eval_cmd->add_option("--target-class", eval_target, "Target class");
  eval_cmd->add_option("--min-duration-s", eval_min_dur,
                       "Drop clips shorter than this");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Run the experiment grid described by a JSON spec");
  std::string sweep_grid = cfgd("grid", std::string());
  int sweep_repeats = cfgd("repeats", 0);
  sweep_cmd->add_option("--grid", sweep_grid, "Sweep spec JSON")->required();
  sweep_cmd->add_option("--repeats", sweep_repeats,
                        "Override the spec's repeat count");

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Over-the-air channel simulation against a checkpoint");
  TriggerFlags sim_trig;
  sim_trig.attach(sim_cmd);
  std::string sim_model = cfgd("model", std::string());
  std::string sim_dataset = cfgd("dataset", std::string());
  std::string sim_target = cfgd("target-class", std::string("off"));
  std::string sim_distances = cfgd("distances", std::string("0,0.5,1,1.5"));
  std::string sim_rolloff = cfgd("rolloff", std::string("freefield"));
  int sim_trials = cfgd("trials", 15);
  double sim_ref_db = cfgd("ref-level-db", -43.0);
  double sim_ref_dist = cfgd("ref-distance-m", 0.1);
  double sim_db_per_m = cfgd("db-per-meter", 20.0);
  double sim_speech_db = cfgd("speech-level-db", -20.0);
  double sim_noise_db = cfgd("noise-floor-db", -90.0);
  double sim_min_dur = cfgd("min-duration-s", 1.0);
  sim_cmd->add_option("--model", sim_model, "Checkpoint path")->required();
  sim_cmd->add_option("--dataset", sim_dataset, "Speech bank dataset root")
      ->required();
  sim_cmd->add_option("--target-class", sim_target, "Target class");
  sim_cmd->add_option("--distances", sim_distances,
                      "Comma-separated distances, m");
  sim_cmd->add_option("--rolloff", sim_rolloff, "freefield | linear");
  sim_cmd->add_option("--trials", sim_trials, "Trials per cell");
  sim_cmd->add_option("--ref-level-db", sim_ref_db,
                      "Trigger peak dBFS at the reference distance");
  sim_cmd->add_option("--ref-distance-m", sim_ref_dist,
                      "Rolloff reference distance");
  sim_cmd->add_option("--db-per-meter", sim_db_per_m,
                      "Linear rolloff slope");
  sim_cmd->add_option("--speech-level-db", sim_speech_db,
                      "Concurrent speech peak dBFS");
  sim_cmd->add_option("--noise-floor-db", sim_noise_db,
                      "Additive white noise dBFS");
  sim_cmd->add_option("--min-duration-s", sim_min_dur,
                      "Drop clips shorter than this");

  for (auto* cmd : app.get_subcommands({})) {
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--config", config_path,
                    "JSON config file (flags override it)");
  }

  CLI11_PARSE(app, argc, argv);
  const fs::path out(out_dir);
  fs::create_directories(out);

  if (synth->parsed()) {
    json cfg = synth_trig.to_json();
    cfg["seed"] = seed;
    cfg["carrier"] = synth_carrier;
    const usbt::TriggerSpec spec = synth_trig.spec();
    spec.validate();
    if (synth_carrier.empty()) {
      usbt::write_wav(usbt::gen_sine_pulse(spec), out / "trigger.wav");
      std::cout << "wrote " << (out / "trigger.wav").string() << '\n';
    } else {
      const usbt::AudioClip carrier = usbt::read_wav(synth_carrier);
      usbt::write_wav(usbt::stamp(carrier, spec), out / "stamped.wav");
      std::ofstream manifest(out / "stamp_manifest.csv");
      manifest << "carrier,duration_ms,placement,continuity\n"
               << synth_carrier << ',' << spec.duration_ms << ','
               << (spec.continuous() ? usbt::placement_name(spec.placement)
                                     : std::string("NonContinuous"))
               << ','
               << (spec.continuous()
                       ? std::string("Continuous")
                       : "NonContinuous(" + std::to_string(spec.n_pulses) +
                             ")")
               << '\n';
      std::cout << "wrote " << (out / "stamped.wav").string() << '\n';
    }
    write_config(out, "synth", cfg);
    return 0;
  }

  if (gen->parsed()) {
    usbt::MiniDatasetConfig cfg;
    cfg.n_classes = gen_classes;
    cfg.clips_per_class = gen_per_class;
    cfg.sample_rate = gen_rate;
    cfg.duration_s = gen_duration_s;
    usbt::generate_mini_dataset(out, cfg, seed);
    write_config(out, "gen-mini-dataset",
                 {{"seed", seed},
                  {"classes", gen_classes},
                  {"per-class", gen_per_class},
                  {"rate", gen_rate},
                  {"duration-s", gen_duration_s}});
    std::cout << "wrote " << gen_classes * gen_per_class << " clips under "
              << out.string() << '\n';
    return 0;
  }

  if (poison_cmd->parsed()) {
    usbt::LoadOptions opts;
    opts.min_duration_s = poison_min_dur;
    opts.target_rate = poison_trig.rate;
    const usbt::LabeledDataset ds =
        usbt::load_dataset(poison_dataset, opts, seed);
    usbt::PoisonConfig pc;
    pc.n_poison = poison_n;
    pc.target_class = poison_target;
    pc.trigger = poison_trig.spec();
    const usbt::PoisonResult res = usbt::poison(ds, pc);

    const fs::path ds_out = out / "dataset";
    for (size_t i = 0; i < res.dataset.items.size(); ++i) {
      const auto& item = res.dataset.items[i];
      const std::string cls = res.dataset.classes[item.label];
      fs::create_directories(ds_out / cls);
      std::string name = fs::path(item.path).filename().string();
      if (item.stamped) {
        name = name.substr(0, name.size() - 4) + "_poisoned.wav";
      }
      usbt::write_wav(item.clip, ds_out / cls / name);
    }
    usbt::write_poison_manifest(res.manifest, out / "manifest.csv");
    json cfg = poison_trig.to_json();
    cfg["seed"] = seed;
    cfg["dataset"] = poison_dataset;
    cfg["target-class"] = poison_target;
    cfg["n-poison"] = poison_n;
    write_config(out, "poison", cfg);
    std::cout << "poisoned " << res.manifest.size() << " of "
              << ds.split_size(usbt::Split::Train) << " train clips\n";
    return 0;
  }

  if (train_cmd->parsed() || eval_cmd->parsed()) {
    const bool is_train = train_cmd->parsed();
    usbt::LoadOptions opts;
    opts.min_duration_s = is_train ? train_min_dur : eval_min_dur;
    opts.target_rate = is_train ? train_trig.rate : eval_trig.rate;
    usbt::LabeledDataset ds = usbt::load_dataset(
        is_train ? train_dataset : eval_dataset, opts, seed);

    usbt::MfccConfig mfcc_cfg;
    if (is_train) {
      if (train_n_poison > 0) {
        usbt::PoisonConfig pc;
        pc.n_poison = train_n_poison;
        pc.target_class = train_target;
        pc.trigger = train_trig.spec();
        ds = usbt::poison(ds, pc).dataset;
      }
      std::vector<usbt::FeatureMatrix> tx, vx;
      std::vector<int> ty, vy;
      features_of_split(ds, usbt::Split::Train, mfcc_cfg, tx, ty);
      features_of_split(ds, usbt::Split::Validation, mfcc_cfg, vx, vy);

      usbt::ModelConfig mcfg;
      mcfg.architecture = usbt::architecture_from_name(train_flags.arch);
      mcfg.n_classes = static_cast<int>(ds.classes.size());
      mcfg.input_frames = tx.front().n_frames;
      mcfg.input_coeffs = tx.front().n_coeffs;
      const usbt::TrainedModel model = usbt::train(
          tx, ty, vx, vy, mcfg, train_flags.config(usbt::mix_seed(seed, 1)));
      usbt::save_model(model, out / "model.ckpt");

      std::ofstream hist(out / "history.csv");
      hist << "epoch,train_loss,val_loss,val_accuracy\n";
      for (size_t e = 0; e < model.history.size(); ++e) {
        hist << e << ',' << model.history[e].train_loss << ','
             << model.history[e].val_loss << ','
             << model.history[e].val_accuracy << '\n';
      }
      std::vector<usbt::FeatureMatrix> sx;
      std::vector<int> sy;
      features_of_split(ds, usbt::Split::Test, mfcc_cfg, sx, sy);
      json metrics = {
          {"test_accuracy", usbt::evaluate_accuracy(model, sx, sy)},
          {"epochs_run", model.history.size()},
          {"best_epoch", model.best_epoch}};
      std::ofstream mf(out / "metrics.json");
      mf << metrics.dump(2) << '\n';
      json cfg = train_trig.to_json();
      cfg.update(train_flags.to_json());
      cfg["seed"] = seed;
      cfg["dataset"] = train_dataset;
      cfg["n-poison"] = train_n_poison;
      cfg["target-class"] = train_target;
      write_config(out, "train", cfg);
      std::cout << "model.ckpt written; test accuracy "
                << metrics["test_accuracy"] << '\n';
      return 0;
    }

    // eval
    const usbt::TrainedModel model = usbt::load_model(eval_model);
    const int target = ds.class_index(eval_target);
    if (target < 0) throw usbt::ConfigError("unknown target class");
    std::vector<usbt::FeatureMatrix> cx, sx;
    std::vector<int> cy, sy;
    features_of_split(ds, usbt::Split::Test, mfcc_cfg, cx, cy);
    const usbt::LabeledDataset stamped =
        usbt::stamp_test_set(ds, eval_trig.spec());
    features_of_split(stamped, usbt::Split::Test, mfcc_cfg, sx, sy);
    const double acc = usbt::evaluate_accuracy(model, cx, cy);
    const usbt::AsrtResult asrt =
        usbt::attack_success_rate(model, sx, sy, target);
    json res = {{"clean_accuracy", acc}, {"asrt_all", asrt.asrt_all}};
    if (asrt.asrt_excl) res["asrt_excl"] = *asrt.asrt_excl;
    std::ofstream ef(out / "eval.json");
    ef << res.dump(2) << '\n';
    json cfg = eval_trig.to_json();
    cfg["seed"] = seed;
    cfg["model"] = eval_model;
    cfg["dataset"] = eval_dataset;
    cfg["target-class"] = eval_target;
    write_config(out, "eval", cfg);
    std::cout << res.dump(2) << '\n';
    return 0;
  }

  if (sweep_cmd->parsed()) {
    usbt::SweepSpec spec = usbt::sweep_spec_from_json_file(sweep_grid);
    if (sweep_repeats > 0) spec.repeats = sweep_repeats;
    spec.master_seed = seed;

    usbt::LabeledDataset base;
    if (spec.dataset_name == "mini") {
      const fs::path mini = out / "mini_dataset";
      if (!fs::exists(mini / "off")) {
        usbt::generate_mini_dataset(mini, usbt::MiniDatasetConfig{}, seed);
      }
      base = usbt::load_dataset(mini, usbt::LoadOptions{}, seed);
    } else {
      base = usbt::load_dataset(spec.dataset_name, usbt::LoadOptions{}, seed);
    }
    const usbt::SweepResult res = usbt::run_sweep(base, spec, out);
    for (const auto& f : res.failures) std::cerr << "cell failed: " << f
                                                 << '\n';
    write_config(out, "sweep",
                 {{"seed", seed},
                  {"grid", sweep_grid},
                  {"repeats", spec.repeats}});
    std::cout << res.reports.size() << " reports -> "
              << (out / "sweep.csv").string() << '\n';
    return res.failures.empty() ? 0 : 1;
  }

  if (sim_cmd->parsed()) {
    const usbt::TrainedModel model = usbt::load_model(sim_model);
    usbt::LoadOptions opts;
    opts.min_duration_s = sim_min_dur;
    opts.target_rate = sim_trig.rate;
    const usbt::LabeledDataset bank =
        usbt::load_dataset(sim_dataset, opts, seed);
    const int target = bank.class_index(sim_target);
    if (target < 0) throw usbt::ConfigError("unknown target class");

    usbt::ChannelConfig cc;
    cc.distances_m.clear();
    {
      std::string tok;
      for (char c : sim_distances + ",") {
        if (c == ',') {
          if (!tok.empty()) cc.distances_m.push_back(std::stod(tok));
          tok.clear();
        } else {
          tok += c;
        }
      }
    }
    cc.ref_level_db = sim_ref_db;
    cc.ref_distance_m = sim_ref_dist;
    cc.db_per_meter = sim_db_per_m;
    cc.rolloff = sim_rolloff == "linear" ? usbt::Rolloff::LinearDbPerMeter
                                         : usbt::Rolloff::FreeField20LogR;
    cc.speech_level_db = sim_speech_db;
    cc.noise_floor_db = sim_noise_db;

    const auto rows = usbt::simulate_attack(model, cc, sim_trials, bank,
                                            sim_trig.spec(), usbt::MfccConfig{},
                                            target, seed);
    usbt::write_sim_csv(rows, out / "simulate.csv");
    json cfg = sim_trig.to_json();
    cfg["seed"] = seed;
    cfg["model"] = sim_model;
    cfg["dataset"] = sim_dataset;
    cfg["distances"] = sim_distances;
    cfg["trials"] = sim_trials;
    cfg["rolloff"] = sim_rolloff;
    write_config(out, "simulate", cfg);
    std::cout << "wrote " << (out / "simulate.csv").string() << '\n';
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
