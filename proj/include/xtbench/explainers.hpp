#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xtbench/models.hpp"

namespace xtb {

// Default hyperparameters for the attribution methods; every value ends up
// in the persisted provenance record.
struct ExplainerConfig {
  int ig_steps = 64;
  int shapley_permutations = 25;
  int kernel_shap_coalitions = 0;  // 0 -> 2*patches + 16
  int lime_perturbations = 1000;
  double lime_ridge = 1e-3;
  double lime_kernel_width_scale = 0.25;  // * sqrt(patches)
  int grad_shap_samples = 32;
  double grad_shap_noise = 0.1;
  double lrp_epsilon = 1e-6;  // relative to the denominator magnitude
  int pfi_repeats = 3;
  int patch_size = 0;  // 0 -> 1 at side 8, 4 at side 64
};

// One attribution request: explain the target-class logit of `model` at
// `sample` against the all-zero baseline.
struct AttributionRequest {
  const TrainedModel* model = nullptr;
  std::vector<double> sample;  // D pixels
  int side = 8;
  int target = 0;
  uint64_t seed = 0;
  ExplainerConfig config;

  // reference batch for permutation feature importance (test split)
  const float* ref_x = nullptr;
  const uint8_t* ref_y = nullptr;
  int ref_count = 0;
};

using ImportanceMap = std::vector<double>;

int effective_patch_size(const AttributionRequest& req);
int patch_count(const AttributionRequest& req);

double logit_value(const TrainedModel& model, const std::vector<double>& x, int target);
ImportanceMap input_gradient(const TrainedModel& model, const std::vector<double>& x, int target,
                             ReluRule rule = ReluRule::Plain);

ImportanceMap saliency(const AttributionRequest& req);
ImportanceMap integrated_gradients(const AttributionRequest& req);
ImportanceMap guided_backprop(const AttributionRequest& req);
ImportanceMap deconvolution(const AttributionRequest& req);
ImportanceMap lrp_epsilon(const AttributionRequest& req);
ImportanceMap permutation_feature_importance(const AttributionRequest& req);
ImportanceMap shapley_value_sampling(const AttributionRequest& req);
ImportanceMap kernel_shap(const AttributionRequest& req);
ImportanceMap gradient_shap(const AttributionRequest& req);
ImportanceMap lime(const AttributionRequest& req);

enum class BaselineKind { Sobel, Laplace, Random, Input };
ImportanceMap baseline_map(BaselineKind kind, const std::vector<double>& sample, int side,
                           uint64_t seed);

// Registered ids: saliency, integrated_gradients, guided_backprop,
// deconvolution, lrp, pfi, shapley_sampling, kernel_shap, gradient_shap,
// lime, sobel, laplace, random, input.
std::vector<std::string> registered_methods();
bool method_needs_model(const std::string& id);
ImportanceMap explain(const std::string& method_id, const AttributionRequest& req);

}  // namespace xtb
