#pragma once

// Subcommands of the `cwseg` tool as callable functions. Each returns the
// process exit code: 0 success, 1 failed check or validation, 2 usage error.
// Usage problems detected after parsing throw UsageError; the tool maps any
// other exception to exit code 1.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cwseg/losses.hpp"

namespace cwseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExtractContourOptions {
  std::filesystem::path in;
  std::filesystem::path out;
  int iterations = 6;
  int kernel = 3;
  std::string boundary = "zero";
  std::string class_id = "all";
};
int cmd_extract_contour(const ExtractContourOptions& opt, std::ostream& out);

struct LossEvalOptions {
  std::filesystem::path pred;
  std::filesystem::path truth;
  std::string variant = "CWCD";
  double lambda = 0.5;
  double contour_gain = 2.0;
  double epsilon = 1e-5;
  std::string numerator = "standard";
  int iterations = 6;
  int kernel = 3;
  std::string boundary = "zero";
  bool json = false;
  bool gradient = false;
};
int cmd_loss_eval(const LossEvalOptions& opt, std::ostream& out);

/// Every LossReport field; "gradient" is null when absent.
std::string report_to_json(const LossReport& rep, LossVariant variant);

struct GradcheckOptions {
  std::string variant = "all";
  int trials = 20;
  std::uint64_t seed = 7;
  double step = 1e-4;
  double tol = 1e-4;
};
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out);

struct PhantomOptions {
  std::filesystem::path out;
  int count = 40;
  int dims = 32;
  std::uint64_t seed = 1;
  double noise = 0.25;
  double blur = 0.0;
};
int cmd_phantom(const PhantomOptions& opt, std::ostream& out);

struct TrainOptions {
  std::filesystem::path data;
  std::string variant = "CWCD";
  int epochs = 50;
  double lr = 3e-4;
  std::filesystem::path out = "model.bin";
  std::filesystem::path log = "train.log";
  std::uint64_t seed = 1;
  double lambda = 0.5;
  double contour_gain = 2.0;
  int iterations = 6;
  int hidden = 16;
  double val_fraction = 0.2;
};
int cmd_train(const TrainOptions& opt, std::ostream& out);

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path csv = "metrics.csv";
};
int cmd_eval(const EvalOptions& opt, std::ostream& out);

}  // namespace cwseg::cli
