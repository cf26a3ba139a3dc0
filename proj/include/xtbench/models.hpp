#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xtbench/autodiff.hpp"
#include "xtbench/datagen.hpp"
#include "xtbench/tensor.hpp"

namespace xtb {

enum class Arch { LLR, MLP, CNN };

std::string arch_name(Arch a);
Arch parse_arch(const std::string& s);

struct ArchitectureSpec {
  Arch kind = Arch::LLR;
  int side = 8;

  std::vector<int> mlp_widths() const;  // hidden layer widths
  struct ConvBlock {
    int filters;
    Conv2dAttrs conv;
    Pool2dAttrs pool;
  };
  std::vector<ConvBlock> cnn_blocks() const;
};

struct TrainingConfig {
  int epochs = 500;
  double learning_rate = 0.0005;
  int batch_size = 64;
  uint64_t seed = 0;
};

struct TrainingReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainedModel {
  ArchitectureSpec arch;
  std::vector<Tensor> params;
  TrainingReport report;
  uint64_t seed = 0;
};

// He-normal fan-in weights, zero biases.
std::vector<Tensor> init_params(const ArchitectureSpec& arch, uint64_t seed);

// Records the forward pass for a batch on `tape`. `param_ids` must hold one
// leaf per parameter tensor (same order as init_params). Returns the logits
// node ([batch,2], pre-softmax).
int forward_logits(Tape& tape, const ArchitectureSpec& arch,
                   const std::vector<int>& param_ids, int input_id);

// Convenience forwards against raw float rows.
Tensor batch_logits(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                    const float* x, int count, int d);
double mean_cross_entropy(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                          const float* x, const uint8_t* y, int count, int d);

TrainedModel train(const ArchitectureSpec& arch, const Dataset& ds, const TrainingConfig& cfg);

double evaluate_accuracy(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                         const float* x, const uint8_t* y, int count, int d);
double evaluate_accuracy(const TrainedModel& model, const Dataset& ds, int split = 2);

// Test-sample indices (within the test split) that every model predicts correctly.
std::vector<int> correctly_predicted_intersection(const std::vector<TrainedModel>& models,
                                                  const Dataset& ds);

struct CalibrationRow {
  double alpha;
  double mean_accuracy;
  std::vector<double> trial_accuracies;
};

struct CalibrationResult {
  bool found = false;
  double chosen_alpha = 0.0;
  std::vector<CalibrationRow> table;
};

// Smallest alpha in the ascending grid whose mean test accuracy over
// `trials` trainings reaches `threshold`.
CalibrationResult calibrate_snr(const ScenarioSpec& spec_template, const ArchitectureSpec& arch,
                                const std::vector<double>& alpha_grid, int trials,
                                double threshold, const TrainingConfig& cfg);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace xtb
