#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xtbench/rng.hpp"

namespace xtb {

// Square image carried as a flat row-major array.
struct ImageGrid {
  int side = 0;
  std::vector<double> px;

  ImageGrid() = default;
  explicit ImageGrid(int s, double fill = 0.0)
      : side(s), px(static_cast<size_t>(s) * s, fill) {}
  double& at(int r, int c) { return px[static_cast<size_t>(r) * side + c]; }
  double at(int r, int c) const { return px[static_cast<size_t>(r) * side + c]; }
  size_t size() const { return px.size(); }
};

using BoolGrid = std::vector<uint8_t>;  // side*side, 0/1

enum class Scenario { Lin, Mult, Rigid, Xor };
enum class Background { White, Corr, Imagenet };

std::string scenario_name(Scenario s);       // linear, multiplicative, translations_rotations, xor
std::string background_name(Background b);   // white, correlated, imagenet
Scenario parse_scenario(const std::string& s);
Background parse_background(const std::string& s);

struct SplitFractions {
  double train = 0.8, val = 0.1, test = 0.1;
};

struct ScenarioSpec {
  Scenario scenario = Scenario::Lin;
  Background background = Background::White;
  int side = 8;
  int pattern_thickness = 1;
  double alpha = 0.1;
  double sigma_pattern = 0.0;     // Gaussian smoothing of the tetromino (H)
  double sigma_background = 3.0;  // Gaussian smoothing of the noise (G), CORR only
  int n_samples = 10000;
  SplitFractions split;
  uint64_t seed = 0;
  std::string image_dir;  // IMAGENET source images

  std::string dataset_name() const;  // {scenario}_{J}d{K}p_{alpha}_{background}
};

enum class TetroKind { T, L };

struct TetrominoPattern {
  TetroKind kind;
  int rotation_deg;  // multiple of 90
  int row, col;      // top-left of the rotated bounding box, pixels
  int thickness;
  ImageGrid grid;    // values in {0,1}
};

struct RigidTransform {
  int quarter_turns = 0;  // whole-grid rotations by 90 degrees
  int drow = 0, dcol = 0;
  bool identity() const { return quarter_turns == 0 && drow == 0 && dcol == 0; }
};

// Block coordinates (row,col) of the rotated tetromino, bounding box anchored at (0,0).
std::vector<std::pair<int, int>> tetromino_blocks(TetroKind kind, int rotation_deg);

TetrominoPattern make_pattern(TetroKind kind, int rotation_deg, int row, int col,
                              int thickness, int side);

ImageGrid gaussian_smooth(const ImageGrid& grid, double sigma);

BoolGrid threshold_support(const ImageGrid& smoothed);  // |v| >= 0.05 * max|v|

ImageGrid sample_background(const ScenarioSpec& spec, std::mt19937_64& rng,
                            const ImageGrid* imagenet_source = nullptr);

ImageGrid rotate_quarter(const ImageGrid& g, int quarter_turns);
ImageGrid translate(const ImageGrid& g, int drow, int dcol);  // zero fill
ImageGrid apply_transform(const ImageGrid& g, const RigidTransform& t);

RigidTransform sample_rigid_transform(std::mt19937_64& rng, TetroKind kind, int thickness,
                                      int side);

// Divide every grid by the single Frobenius norm of the whole batch.
void frobenius_normalize(std::vector<ImageGrid>& batch);

struct LabeledSample {
  uint8_t label = 0;
  RigidTransform transform;   // identity outside RIGID
  uint8_t xor_sign_case = 0;  // 0:'++' 1:'--' 2:'+-' 3:'-+' (XOR only)
};

struct Dataset {
  ScenarioSpec spec;
  int n_train = 0, n_val = 0, n_test = 0;
  // sample-major, D = side*side
  std::vector<float> x;
  std::vector<uint8_t> y;
  std::vector<uint8_t> mask;
  std::vector<LabeledSample> meta;
  // fixed pattern anchors recorded for the manifest
  int t_row = 0, t_col = 0, l_row = 0, l_col = 0;

  int d() const { return spec.side * spec.side; }
  int n_total() const { return n_train + n_val + n_test; }
  int split_offset(int split) const {  // 0 train, 1 val, 2 test
    return split == 0 ? 0 : (split == 1 ? n_train : n_train + n_val);
  }
  int split_size(int split) const {
    return split == 0 ? n_train : (split == 1 ? n_val : n_test);
  }
  const float* sample(int i) const { return x.data() + static_cast<size_t>(i) * d(); }
  const uint8_t* sample_mask(int i) const { return mask.data() + static_cast<size_t>(i) * d(); }
};

Dataset build_dataset(const ScenarioSpec& spec);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Fixed anchors used for LIN/MULT/XOR: each pattern's bounding box sits one
// block inset from its corner (T top-left, L bottom-right).
std::pair<int, int> fixed_anchor(TetroKind kind, int thickness, int side);

}  // namespace xtb
