#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xtbench/datagen.hpp"
#include "xtbench/explainers.hpp"
#include "xtbench/models.hpp"

namespace xtb {

// Raised for configuration problems detected before any compute (CLI exit 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioEntry {
  Scenario scenario = Scenario::Lin;
  Background background = Background::White;
  double alpha = 0.1;
  std::string image_dir;  // source images for the imagenet background
};

struct BenchmarkConfig {
  int side = 8;
  int n_samples = 10000;
  double sigma_pattern = 0.0;
  double sigma_background = 3.0;
  std::vector<ScenarioEntry> scenarios;
  std::vector<Arch> architectures;
  std::vector<std::string> methods;
  int trainings = 5;
  int epochs = 500;
  double learning_rate = 0.0;  // 0 -> per-scenario default
  int batch_size = 64;
  uint64_t seed = 0;
  int max_samples = 0;  // cap on explained samples per cell, 0 = all
  bool allow_llr_nonlinear = false;
  std::string out_root = "out";
  ExplainerConfig explainer;

  // optional signal-strength sweep replacing the fixed alphas
  bool calibrate = false;
  std::vector<double> alpha_grid;
  int calibration_trials = 10;
  double calibration_threshold = 0.80;
};

BenchmarkConfig parse_config_json(const std::string& json_text);
BenchmarkConfig load_config(const std::filesystem::path& path);
void validate_config(const BenchmarkConfig& cfg);

double default_learning_rate(Scenario s);

// LLR cannot solve the non-linear scenarios; those cells are skipped unless
// explicitly enabled.
bool cell_enabled(const BenchmarkConfig& cfg, const ScenarioEntry& entry, Arch arch);

struct CellFailure {
  std::string cell;
  std::string stage;
  std::string error;
};

struct BoxStats {
  int count = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  double lo_whisker = 0.0, hi_whisker = 0.0;  // Tukey 1.5*IQR, clamped to data
  int outliers = 0;
};

// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);
BoxStats box_stats(std::vector<double> values);

struct ScoreRow {
  std::string scenario, background, arch, method;
  int sample_id = 0;
  double emd = 0.0, ima = 0.0, precision = 0.0;
  int degenerate = 0;
};

std::string score_csv_header();
std::vector<ScoreRow> parse_score_csv(const std::string& text);

class Harness {
 public:
  explicit Harness(BenchmarkConfig cfg);
  ~Harness();  // persists failures.json if any cell failed

  void generate();
  void calibrate();
  void train();
  void explain();
  void score();
  void report();
  void run_all();  // all stages, independent cells keep going on failure

  const std::vector<CellFailure>& failures() const { return failures_; }
  const BenchmarkConfig& config() const { return cfg_; }

  std::filesystem::path dataset_dir(const ScenarioEntry& e) const;
  std::filesystem::path checkpoint_dir(const ScenarioEntry& e, Arch arch, int k) const;

 private:
  ScenarioSpec make_spec(const ScenarioEntry& e) const;
  const Dataset& dataset(const ScenarioEntry& e);  // loads or builds, cached
  TrainedModel& model(const ScenarioEntry& e, Arch arch, int k);
  std::vector<int> explained_samples(const ScenarioEntry& e, Arch arch);
  uint64_t cell_seed(const std::string& tag, uint64_t a, uint64_t b) const;
  void record_failure(const std::string& cell, const std::string& stage, const std::string& err);
  void write_failures_file() const;

  BenchmarkConfig cfg_;
  std::filesystem::path root_;
  std::vector<CellFailure> failures_;
  std::map<std::string, Dataset> dataset_cache_;
  std::map<std::string, TrainedModel> model_cache_;
};

}  // namespace xtb
