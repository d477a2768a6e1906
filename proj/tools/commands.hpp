#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

// Subcommand options and implementations. Every command returns a process
// exit code and reports failures with a one-line diagnostic on stderr.

namespace docstormer::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kPartial = 3 };

/// Raised for flag combinations that parse but cannot run.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PagesOptions {
  fs::path out_dir;
  int count = 5;
  std::int64_t height = 256;
  std::int64_t width = 256;
  std::uint64_t seed = 0;
};

struct SynthesizeOptions {
  fs::path gt_dir;
  fs::path out_dir;
  int count = 1;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double min_intensity = 0.4;
};

struct InitOptions {
  std::string preset = "tiny";
  std::uint64_t seed = 0;
  fs::path out;
  bool identity = false;
};

struct TrainOptions {
  fs::path dataset;
  std::string mode = "joint";
  std::string preset = "tiny";
  std::int64_t steps = 1000;
  fs::path out;
  fs::path curve;  // default: <out>.curve.csv
  fs::path dp_checkpoint;
  fs::path init;
  fs::path clean_dir;
  double lr = 3e-4;
  std::int64_t patch = 0;  // 0: progressive schedule
  int batch = 1;
  bool no_flips = false;
  int n_critic = 5;
  double critic_lr = 1e-4;
  std::uint64_t seed = 0;
  int log_every = 0;  // 0: ten progress lines per run
};

struct InferenceFlags {
  std::int64_t work_h = 768;
  std::int64_t work_w = 1024;
  std::int64_t patch = 256;
  double eps = 1e-4;
};

struct EnhanceOptions {
  fs::path checkpoint;
  fs::path input;
  fs::path output;
  std::string strategy = "pfili";
  std::string preset;  // optional: must match the checkpoint when given
  InferenceFlags inference;
};

struct EvalOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path report = "eval_report.txt";
};

struct BenchOptions {
  fs::path checkpoint;
  std::vector<fs::path> inputs;
  fs::path gt_dir;
  std::vector<std::string> strategies = {"full", "bicubic", "patches", "pfili"};
  int runs = 3;
  fs::path report = "bench_report.txt";
  bool check_order = false;
  InferenceFlags inference;
};

struct GradcheckOptionsCli {
  std::string preset = "tiny";
  double tolerance = 1e-3;
  std::string precision = "double";
  int seeds = 10;
  std::string only;
  std::string corrupt;  // inject a faulty backward rule for this op
};

int cmd_pages(const PagesOptions& o);
int cmd_synthesize(const SynthesizeOptions& o);
int cmd_init(const InitOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_enhance(const EnhanceOptions& o);
int cmd_eval(const EvalOptions& o, int threads);
int cmd_bench(const BenchOptions& o);
int cmd_gradcheck(const GradcheckOptionsCli& o);

}  // namespace docstormer::cli
