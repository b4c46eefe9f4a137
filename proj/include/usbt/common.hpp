#pragma once

#include <stdexcept>
#include <string>

namespace usbt {

// Error taxonomy. Every module throws one of these; the CLI maps them to
// nonzero exit codes.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingDivergedError : std::runtime_error {
  explicit TrainingDivergedError(int epoch)
      : std::runtime_error("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch)),
        epoch(epoch) {}
  int epoch;
};

}  // namespace usbt
