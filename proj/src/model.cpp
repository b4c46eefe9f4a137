#include "usbt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "usbt/network.hpp"

namespace usbt {

namespace {

constexpr char kMagic[8] = {'U', 'S', 'B', 'T', 'M', 'D', 'L', 1};

void check_inputs(const std::vector<FeatureMatrix>& x,
                  const std::vector<int>& y, const ModelConfig& cfg,
                  const char* what) {
  if (x.size() != y.size()) {
    throw ShapeError(std::string(what) + ": feature/label count mismatch");
  }
  for (const auto& fm : x) {
    if (fm.n_frames != cfg.input_frames || fm.n_coeffs != cfg.input_coeffs) {
      throw ShapeError(std::string(what) + ": feature shape mismatch");
    }
  }
  for (int label : y) {
    if (label < 0 || label >= cfg.n_classes) {
      throw ShapeError(std::string(what) + ": label out of range");
    }
  }
}

template <typename S>
void adam_step(Network<S>& net, const TrainConfig& tcfg, long t) {
  const S lr = static_cast<S>(tcfg.learning_rate);
  const S b1 = static_cast<S>(tcfg.beta1);
  const S b2 = static_cast<S>(tcfg.beta2);
  const S eps = static_cast<S>(tcfg.epsilon);
  const S bc1 = static_cast<S>(
      1.0 - std::pow(tcfg.beta1, static_cast<double>(t)));
  const S bc2 = static_cast<S>(
      1.0 - std::pow(tcfg.beta2, static_cast<double>(t)));
  for (auto& p : net.params()) {
    p.adam_m = b1 * p.adam_m + (S(1) - b1) * p.grad;
    p.adam_v = b2 * p.adam_v +
               (S(1) - b2) * p.grad.cwiseProduct(p.grad).eval();
    p.w.array() -= lr * (p.adam_m.array() / bc1) /
                   ((p.adam_v.array() / bc2).sqrt() + eps);
  }
}

template <typename S>
std::pair<double, double> eval_set(Network<S>& net,
                                   const std::vector<FeatureMatrix>& x,
                                   const std::vector<int>& y) {
  S loss_sum = S(0);
  int correct = 0;
  constexpr size_t kChunk = 64;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> probs;
  for (size_t start = 0; start < x.size(); start += kChunk) {
    const size_t end = std::min(x.size(), start + kChunk);
    std::vector<const float*> xs;
    std::vector<int> ys;
    xs.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      xs.push_back(x[i].data.data());
      ys.push_back(y[i]);
    }
    // CE only (no dropout, no L2) so the metric compares across epochs.
    const S chunk_mean = net.loss(xs, ys, nullptr, false, false, &probs);
    loss_sum += chunk_mean * static_cast<S>(xs.size());
    for (Eigen::Index i = 0; i < probs.cols(); ++i) {
      Eigen::Index arg = 0;
      probs.col(i).maxCoeff(&arg);
      if (static_cast<int>(arg) == ys[static_cast<size_t>(i)]) ++correct;
    }
  }
  return {static_cast<double>(loss_sum / static_cast<S>(x.size())),
          static_cast<double>(correct) / static_cast<double>(x.size())};
}

}  // namespace

std::string architecture_name(Architecture a) {
  return a == Architecture::SmallConv ? "SmallConv" : "LinearSoftmax";
}

Architecture architecture_from_name(const std::string& name) {
  if (name == "SmallConv") return Architecture::SmallConv;
  if (name == "LinearSoftmax") return Architecture::LinearSoftmax;
  throw ConfigError("unknown architecture: " + name);
}

TrainedModel train(const std::vector<FeatureMatrix>& train_x,
                   const std::vector<int>& train_y,
                   const std::vector<FeatureMatrix>& val_x,
                   const std::vector<int>& val_y, const ModelConfig& mcfg,
                   const TrainConfig& tcfg) {
  using S = float;
  check_inputs(train_x, train_y, mcfg, "train");
  check_inputs(val_x, val_y, mcfg, "validation");
  if (train_x.empty() || val_x.empty()) {
    throw ConfigError("train and validation sets must be non-empty");
  }
  if (tcfg.max_epochs > 0 && tcfg.patience >= tcfg.max_epochs) {
    throw ConfigError("patience must be < max_epochs");
  }

  Network<S> net(mcfg);
  SplitMix64 init_rng(mix_seed(tcfg.seed, 0));
  net.init_weights(init_rng);

  TrainedModel model;
  model.config = mcfg;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights = net.export_tensors();
  int stale = 0;
  long adam_t = 0;

  std::vector<size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    SplitMix64 erng(mix_seed(tcfg.seed, 1, static_cast<uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, erng);

    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(tcfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(tcfg.batch_size));
      std::vector<const float*> xs;
      std::vector<int> ys;
      xs.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        xs.push_back(train_x[order[i]].data.data());
        ys.push_back(train_y[order[i]]);
      }
      const auto masks = net.make_masks(xs.size(), erng);
      const S batch_loss = net.loss(xs, ys, &masks, true);
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw TrainingDivergedError(epoch);
      }
      adam_step(net, tcfg, ++adam_t);
      loss_sum += static_cast<double>(batch_loss) *
                  static_cast<double>(xs.size());
      seen += xs.size();
    }

    const auto [val_loss, val_acc] = eval_set(net, val_x, val_y);
    if (!std::isfinite(val_loss)) throw TrainingDivergedError(epoch);
    model.history.push_back(
        {loss_sum / static_cast<double>(seen), val_loss, val_acc});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_weights = net.export_tensors();
      model.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
      if (stale >= tcfg.patience) break;
    }
  }

  model.weights = std::move(best_weights);
  return model;
}

std::vector<double> predict(const TrainedModel& model,
                            const FeatureMatrix& features) {
  if (features.n_frames != model.config.input_frames ||
      features.n_coeffs != model.config.input_coeffs) {
    throw ShapeError("predict: feature shape mismatch");
  }
  Network<float> net(model.config);
  net.import_tensors(model.weights);
  return net.predict_proba(features.data.data());
}

double evaluate_accuracy(const TrainedModel& model,
                         const std::vector<FeatureMatrix>& features,
                         const std::vector<int>& labels) {
  if (features.empty() || features.size() != labels.size()) {
    throw EvalError("evaluate_accuracy: empty or mismatched set");
  }
  Network<float> net(model.config);
  net.import_tensors(model.weights);
  int correct = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    const auto probs = net.predict_proba(features[i].data.data());
    const auto arg = static_cast<int>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

double validation_loss(const TrainedModel& model,
                       const std::vector<FeatureMatrix>& features,
                       const std::vector<int>& labels) {
  if (features.empty() || features.size() != labels.size()) {
    throw EvalError("validation_loss: empty or mismatched set");
  }
  Network<float> net(model.config);
  net.import_tensors(model.weights);
  return eval_set(net, features, labels).first;
}

// ---- checkpoint I/O ----

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) {
    out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

double get_f64(std::istream& in) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(
                static_cast<unsigned char>(in.get()))
            << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);

  const auto& c = model.config;
  put_string(out, architecture_name(c.architecture));
  put_u32(out, static_cast<uint32_t>(c.conv_blocks.size()));
  for (const auto& b : c.conv_blocks) {
    put_u32(out, static_cast<uint32_t>(b.filters));
    put_u32(out, static_cast<uint32_t>(b.kernel));
    put_u32(out, static_cast<uint32_t>(b.pool));
  }
  put_u32(out, static_cast<uint32_t>(c.hidden_units));
  put_f64(out, c.dropout_pre_flatten);
  put_f64(out, c.dropout_penultimate);
  put_f64(out, c.l2_lambda);
  put_u32(out, static_cast<uint32_t>(c.n_classes));
  put_u32(out, static_cast<uint32_t>(c.input_frames));
  put_u32(out, static_cast<uint32_t>(c.input_coeffs));
  put_u32(out, static_cast<uint32_t>(model.best_epoch + 1));

  put_u32(out, static_cast<uint32_t>(model.history.size()));
  for (const auto& h : model.history) {
    put_f64(out, h.train_loss);
    put_f64(out, h.val_loss);
    put_f64(out, h.val_accuracy);
  }

  put_u32(out, static_cast<uint32_t>(model.weights.size()));
  for (const auto& t : model.weights) {
    put_string(out, t.name);
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    put_u32(out, static_cast<uint32_t>(t.data.size()));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("bad checkpoint magic: " + path.string());
  }

  TrainedModel model;
  auto& c = model.config;
  c.architecture = architecture_from_name(get_string(in));
  const uint32_t nb = get_u32(in);
  c.conv_blocks.clear();
  for (uint32_t i = 0; i < nb; ++i) {
    ConvBlockSpec b;
    b.filters = static_cast<int>(get_u32(in));
    b.kernel = static_cast<int>(get_u32(in));
    b.pool = static_cast<int>(get_u32(in));
    c.conv_blocks.push_back(b);
  }
  c.hidden_units = static_cast<int>(get_u32(in));
  c.dropout_pre_flatten = get_f64(in);
  c.dropout_penultimate = get_f64(in);
  c.l2_lambda = get_f64(in);
  c.n_classes = static_cast<int>(get_u32(in));
  c.input_frames = static_cast<int>(get_u32(in));
  c.input_coeffs = static_cast<int>(get_u32(in));
  model.best_epoch = static_cast<int>(get_u32(in)) - 1;

  const uint32_t nh = get_u32(in);
  for (uint32_t i = 0; i < nh; ++i) {
    EpochStats h;
    h.train_loss = get_f64(in);
    h.val_loss = get_f64(in);
    h.val_accuracy = get_f64(in);
    model.history.push_back(h);
  }

  const uint32_t nt = get_u32(in);
  for (uint32_t i = 0; i < nt; ++i) {
    Tensor t;
    t.name = get_string(in);
    const uint32_t nd = get_u32(in);
    for (uint32_t d = 0; d < nd; ++d) {
      t.shape.push_back(static_cast<int>(get_u32(in)));
    }
    t.data.resize(get_u32(in));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    model.weights.push_back(std::move(t));
  }
  if (!in) throw FormatError("truncated checkpoint: " + path.string());
  return model;
}

}  // namespace usbt
