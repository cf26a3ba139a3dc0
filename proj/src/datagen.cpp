#include "xtbench/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xtbench/io.hpp"
#include "xtbench/kernels.hpp"

namespace xtb {

namespace fs = std::filesystem;
using nlohmann::json;

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Lin: return "linear";
    case Scenario::Mult: return "multiplicative";
    case Scenario::Rigid: return "translations_rotations";
    case Scenario::Xor: return "xor";
  }
  return "?";
}

std::string background_name(Background b) {
  switch (b) {
    case Background::White: return "white";
    case Background::Corr: return "correlated";
    case Background::Imagenet: return "imagenet";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "linear" || s == "lin") return Scenario::Lin;
  if (s == "multiplicative" || s == "mult") return Scenario::Mult;
  if (s == "translations_rotations" || s == "rigid") return Scenario::Rigid;
  if (s == "xor") return Scenario::Xor;
  throw std::invalid_argument("unknown scenario: " + s);
}

Background parse_background(const std::string& s) {
  if (s == "white") return Background::White;
  if (s == "correlated" || s == "corr") return Background::Corr;
  if (s == "imagenet") return Background::Imagenet;
  throw std::invalid_argument("unknown background: " + s);
}

std::string ScenarioSpec::dataset_name() const {
  std::ostringstream os;
  os << scenario_name(scenario) << "_" << (side / 8) << "d" << pattern_thickness << "p_"
     << format_alpha(alpha) << "_" << background_name(background);
  return os.str();
}

std::vector<std::pair<int, int>> tetromino_blocks(TetroKind kind, int rotation_deg) {
  std::vector<std::pair<int, int>> blocks =
      kind == TetroKind::T ? std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {0, 2}, {1, 1}}
                           : std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {2, 0}, {2, 1}};
  int q = ((rotation_deg / 90) % 4 + 4) % 4;
  if (rotation_deg % 90 != 0) throw std::invalid_argument("rotation must be a multiple of 90");
  for (int t = 0; t < q; ++t) {
    int max_r = 0;
    for (auto& [r, c] : blocks) max_r = std::max(max_r, r);
    for (auto& [r, c] : blocks) {
      int nr = c, nc = max_r - r;
      r = nr;
      c = nc;
    }
  }
  return blocks;
}

TetrominoPattern make_pattern(TetroKind kind, int rotation_deg, int row, int col, int thickness,
                              int side) {
  if (thickness <= 0) throw std::invalid_argument("make_pattern: thickness must be positive");
  auto blocks = tetromino_blocks(kind, rotation_deg);
  TetrominoPattern p{kind, rotation_deg, row, col, thickness, ImageGrid(side)};
  for (auto [br, bc] : blocks)
    for (int dr = 0; dr < thickness; ++dr)
      for (int dc = 0; dc < thickness; ++dc) {
        const int r = row + br * thickness + dr;
        const int c = col + bc * thickness + dc;
        if (r < 0 || r >= side || c < 0 || c >= side)
          throw std::invalid_argument("make_pattern: placement out of bounds at (" +
                                      std::to_string(r) + "," + std::to_string(c) + ")");
        p.grid.at(r, c) = 1.0;
      }
  return p;
}

ImageGrid gaussian_smooth(const ImageGrid& grid, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_smooth: negative sigma");
  ImageGrid out(grid.side);
  gaussian_blur_omp(grid.px.data(), out.px.data(), grid.side, sigma);
  return out;
}

BoolGrid threshold_support(const ImageGrid& smoothed) {
  double mx = 0.0;
  for (double v : smoothed.px) mx = std::max(mx, std::fabs(v));
  if (mx == 0.0) throw std::invalid_argument("threshold_support: all-zero input");
  BoolGrid mask(smoothed.size());
  for (size_t i = 0; i < smoothed.size(); ++i)
    mask[i] = std::fabs(smoothed.px[i]) >= 0.05 * mx ? 1 : 0;
  return mask;
}

ImageGrid sample_background(const ScenarioSpec& spec, std::mt19937_64& rng,
                            const ImageGrid* imagenet_source) {
  const int side = spec.side;
  if (spec.background == Background::Imagenet) {
    if (!imagenet_source)
      throw std::invalid_argument("sample_background: IMAGENET requires a source image");
    ImageGrid g = *imagenet_source;
    double mean = 0.0;
    for (double v : g.px) mean += v;
    mean /= static_cast<double>(g.size());
    for (double& v : g.px) v -= mean;
    return g;
  }
  ImageGrid g(side);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : g.px) v = normal(rng);
  if (spec.background == Background::Corr) return gaussian_smooth(g, spec.sigma_background);
  return g;
}

ImageGrid rotate_quarter(const ImageGrid& g, int quarter_turns) {
  int q = ((quarter_turns % 4) + 4) % 4;
  ImageGrid out = g;
  for (int t = 0; t < q; ++t) {
    ImageGrid next(out.side);
    for (int r = 0; r < out.side; ++r)
      for (int c = 0; c < out.side; ++c) next.at(c, out.side - 1 - r) = out.at(r, c);
    out = std::move(next);
  }
  return out;
}

ImageGrid translate(const ImageGrid& g, int drow, int dcol) {
  ImageGrid out(g.side);
  for (int r = 0; r < g.side; ++r) {
    const int rr = r + drow;
    if (rr < 0 || rr >= g.side) continue;
    for (int c = 0; c < g.side; ++c) {
      const int cc = c + dcol;
      if (cc < 0 || cc >= g.side) continue;
      out.at(rr, cc) = g.at(r, c);
    }
  }
  return out;
}

ImageGrid apply_transform(const ImageGrid& g, const RigidTransform& t) {
  if (t.identity()) return g;
  return translate(rotate_quarter(g, t.quarter_turns), t.drow, t.dcol);
}

namespace {

struct BBox {
  int r0 = 0, c0 = 0, r1 = -1, c1 = -1;
  int height() const { return r1 - r0 + 1; }
  int width() const { return c1 - c0 + 1; }
};

BBox support_bbox(const ImageGrid& g) {
  BBox b{g.side, g.side, -1, -1};
  for (int r = 0; r < g.side; ++r)
    for (int c = 0; c < g.side; ++c)
      if (g.at(r, c) != 0.0) {
        b.r0 = std::min(b.r0, r);
        b.c0 = std::min(b.c0, c);
        b.r1 = std::max(b.r1, r);
        b.c1 = std::max(b.c1, c);
      }
  return b;
}

}  // namespace

RigidTransform sample_rigid_transform(std::mt19937_64& rng, TetroKind kind, int thickness,
                                      int side) {
  const int q = static_cast<int>(rng() % 4);
  const ImageGrid canonical = make_pattern(kind, 0, 0, 0, thickness, side).grid;
  const BBox box = support_bbox(rotate_quarter(canonical, q));
  const int max_r = side - box.height();
  const int max_c = side - box.width();
  if (max_r < 0 || max_c < 0)
    throw std::invalid_argument("sample_rigid_transform: tetromino does not fit");
  const int tr = static_cast<int>(rng() % static_cast<uint64_t>(max_r + 1));
  const int tc = static_cast<int>(rng() % static_cast<uint64_t>(max_c + 1));
  return RigidTransform{q, tr - box.r0, tc - box.c0};
}

void frobenius_normalize(std::vector<ImageGrid>& batch) {
  if (batch.empty()) throw std::invalid_argument("frobenius_normalize: empty batch");
  double ss = 0.0;
  for (const ImageGrid& g : batch)
    for (double v : g.px) ss += v * v;
  if (ss == 0.0) throw std::invalid_argument("frobenius_normalize: all-zero batch");
  const double norm = std::sqrt(ss);
  for (ImageGrid& g : batch)
    for (double& v : g.px) v /= norm;
}

std::pair<int, int> fixed_anchor(TetroKind kind, int thickness, int side) {
  if (kind == TetroKind::T) return {thickness, thickness};  // one block in from top-left
  // L bounding box is 3x2 blocks at rotation 0; one block in from bottom-right
  return {side - 4 * thickness, side - 3 * thickness};
}

// ---------------------------------------------------------------------------
// IMAGENET ingestion: binary PGM (P5) / PPM (P6), shorter edge scaled to
// `side` with bilinear interpolation, center crop, luminance grayscale.

namespace {

struct RawImage {
  int w = 0, h = 0, channels = 0;
  std::vector<uint8_t> px;  // row-major, interleaved
};

RawImage load_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("unsupported image format (need binary PGM/PPM): " + path.string());
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    int tok;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (!(in >> tok)) throw std::runtime_error("bad PNM header: " + path.string());
      return tok;
    }
  };
  RawImage img;
  img.w = next_int();
  img.h = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("only 8-bit PNM supported: " + path.string());
  in.get();  // single whitespace after header
  img.channels = magic == "P6" ? 3 : 1;
  img.px.resize(static_cast<size_t>(img.w) * img.h * img.channels);
  in.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
  if (!in) throw std::runtime_error("truncated image: " + path.string());
  return img;
}

double luminance(const RawImage& img, int r, int c) {
  const size_t i = (static_cast<size_t>(r) * img.w + c) * img.channels;
  if (img.channels == 1) return img.px[i];
  return 0.299 * img.px[i] + 0.587 * img.px[i + 1] + 0.114 * img.px[i + 2];
}

ImageGrid grid_from_image(const fs::path& path, int side) {
  const RawImage img = load_pnm(path);
  if (img.w < 1 || img.h < 1) throw std::runtime_error("empty image: " + path.string());
  const double scale = static_cast<double>(side) / std::min(img.w, img.h);
  const int sw = std::max(side, static_cast<int>(std::lround(img.w * scale)));
  const int sh = std::max(side, static_cast<int>(std::lround(img.h * scale)));
  const int off_r = (sh - side) / 2;
  const int off_c = (sw - side) / 2;
  ImageGrid g(side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      // bilinear sample in source coordinates
      const double sy = (r + off_r + 0.5) * img.h / sh - 0.5;
      const double sx = (c + off_c + 0.5) * img.w / sw - 0.5;
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, img.h - 1);
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, img.w - 1);
      const int y1 = std::min(y0 + 1, img.h - 1);
      const int x1 = std::min(x0 + 1, img.w - 1);
      const double fy = std::clamp(sy - y0, 0.0, 1.0);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      g.at(r, c) = (1 - fy) * ((1 - fx) * luminance(img, y0, x0) + fx * luminance(img, y0, x1)) +
                   fy * ((1 - fx) * luminance(img, y1, x0) + fx * luminance(img, y1, x1));
    }
  return g;
}

std::vector<fs::path> list_images(const std::string& dir, uint64_t seed, int needed) {
  if (dir.empty())
    throw std::invalid_argument("IMAGENET background requires image_dir, none given");
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".PGM" || ext == ".PPM")
      files.push_back(e.path());
  }
  if (ec) throw std::runtime_error("cannot read image directory: " + dir);
  if (files.empty()) throw std::runtime_error("no PGM/PPM images found in: " + dir);
  if (static_cast<int>(files.size()) < needed)
    throw std::runtime_error("image directory " + dir + " has " + std::to_string(files.size()) +
                             " images, need " + std::to_string(needed));
  std::sort(files.begin(), files.end());
  auto rng = derive_rng(seed, 0x1a6eull);
  std::shuffle(files.begin(), files.end(), rng);
  return files;
}

}  // namespace

// ---------------------------------------------------------------------------

Dataset build_dataset(const ScenarioSpec& spec) {
  const int side = spec.side;
  const int D = side * side;
  const int N = spec.n_samples;
  if (N <= 0) throw std::invalid_argument("build_dataset: n_samples must be positive");
  if (std::fabs(spec.split.train + spec.split.val + spec.split.test - 1.0) > 1e-9)
    throw std::invalid_argument("build_dataset: split fractions must sum to 1");
  if (spec.alpha < 0.0 || spec.alpha > 1.0)
    throw std::invalid_argument("build_dataset: alpha must be in [0,1]");

  Dataset ds;
  ds.spec = spec;
  const int n_val = static_cast<int>(std::lround(spec.split.val * N));
  const int n_test = static_cast<int>(std::lround(spec.split.test * N));
  ds.n_val = n_val;
  ds.n_test = n_test;
  ds.n_train = N - n_val - n_test;
  if (ds.n_train <= 0 || n_val <= 0 || n_test <= 0)
    throw std::invalid_argument("build_dataset: degenerate split");

  const int th = spec.pattern_thickness;
  auto [t_row, t_col] = fixed_anchor(TetroKind::T, th, side);
  auto [l_row, l_col] = fixed_anchor(TetroKind::L, th, side);
  ds.t_row = t_row;
  ds.t_col = t_col;
  ds.l_row = l_row;
  ds.l_col = l_col;

  const ImageGrid smooth_t =
      gaussian_smooth(make_pattern(TetroKind::T, 0, t_row, t_col, th, side).grid,
                      spec.sigma_pattern);
  const ImageGrid smooth_l =
      gaussian_smooth(make_pattern(TetroKind::L, 0, l_row, l_col, th, side).grid,
                      spec.sigma_pattern);

  // RIGID uses corner-anchored canonical patterns; rotation/translation of the
  // smoothed grid is applied per sample.
  ImageGrid rigid_canonical[2];
  if (spec.scenario == Scenario::Rigid) {
    rigid_canonical[0] =
        gaussian_smooth(make_pattern(TetroKind::T, 0, 0, 0, th, side).grid, spec.sigma_pattern);
    rigid_canonical[1] =
        gaussian_smooth(make_pattern(TetroKind::L, 0, 0, 0, th, side).grid, spec.sigma_pattern);
  }

  BoolGrid static_mask;
  if (spec.scenario != Scenario::Rigid) {
    const BoolGrid mt = threshold_support(smooth_t);
    const BoolGrid ml = threshold_support(smooth_l);
    static_mask.resize(static_cast<size_t>(D));
    for (int i = 0; i < D; ++i) static_mask[static_cast<size_t>(i)] = mt[i] | ml[i];
  }

  std::vector<fs::path> image_files;
  if (spec.background == Background::Imagenet)
    image_files = list_images(spec.image_dir, spec.seed, N);

  ds.meta.resize(static_cast<size_t>(N));

  // Labels are drawn first so XOR sign cases can be stratified exactly
  // within each label.
  for (int n = 0; n < N; ++n) {
    auto rng = derive_rng(spec.seed, static_cast<uint64_t>(n));
    ds.meta[static_cast<size_t>(n)].label = static_cast<uint8_t>(rng() & 1u);
  }
  if (spec.scenario == Scenario::Xor) {
    int seen[2] = {0, 0};
    for (int n = 0; n < N; ++n) {
      LabeledSample& m = ds.meta[static_cast<size_t>(n)];
      const int occ = seen[m.label]++;
      m.xor_sign_case = static_cast<uint8_t>(m.label == 0 ? (occ % 2)        // ++ / --
                                                          : 2 + (occ % 2));  // +- / -+
    }
  }

  std::vector<ImageGrid> signals(static_cast<size_t>(N));
  std::vector<ImageGrid> noises(static_cast<size_t>(N));

#pragma omp parallel for schedule(dynamic, 64)
  for (int n = 0; n < N; ++n) {
    auto rng = derive_rng(spec.seed, static_cast<uint64_t>(n));
    LabeledSample& m = ds.meta[static_cast<size_t>(n)];
    (void)(rng() & 1u);  // label draw, already recorded

    ImageGrid signal;
    switch (spec.scenario) {
      case Scenario::Lin:
      case Scenario::Mult:
        signal = m.label == 0 ? smooth_t : smooth_l;
        break;
      case Scenario::Xor: {
        const double st = (m.xor_sign_case == 0 || m.xor_sign_case == 2) ? 1.0 : -1.0;
        const double sl = (m.xor_sign_case == 0 || m.xor_sign_case == 3) ? 1.0 : -1.0;
        signal = ImageGrid(side);
        for (int i = 0; i < D; ++i)
          signal.px[static_cast<size_t>(i)] =
              st * smooth_t.px[static_cast<size_t>(i)] + sl * smooth_l.px[static_cast<size_t>(i)];
        break;
      }
      case Scenario::Rigid: {
        const TetroKind kind = m.label == 0 ? TetroKind::T : TetroKind::L;
        m.transform = sample_rigid_transform(rng, kind, th, side);
        signal = apply_transform(rigid_canonical[m.label == 0 ? 0 : 1], m.transform);
        break;
      }
    }

    ImageGrid source;
    if (spec.background == Background::Imagenet)
      source = grid_from_image(image_files[static_cast<size_t>(n)], side);
    noises[static_cast<size_t>(n)] = sample_background(
        spec, rng, spec.background == Background::Imagenet ? &source : nullptr);
    signals[static_cast<size_t>(n)] = std::move(signal);
  }

  frobenius_normalize(signals);
  frobenius_normalize(noises);

  std::vector<double> assembled(static_cast<size_t>(N) * D);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const ImageGrid& s = signals[static_cast<size_t>(n)];
    const ImageGrid& e = noises[static_cast<size_t>(n)];
    double* out = assembled.data() + static_cast<size_t>(n) * D;
    if (spec.scenario == Scenario::Mult)
      for (int i = 0; i < D; ++i)
        out[i] = (1.0 - spec.alpha * s.px[static_cast<size_t>(i)]) * e.px[static_cast<size_t>(i)];
    else
      for (int i = 0; i < D; ++i)
        out[i] = spec.alpha * s.px[static_cast<size_t>(i)] +
                 (1.0 - spec.alpha) * e.px[static_cast<size_t>(i)];
  }

  double max_abs = 0.0;
  for (double v : assembled) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs == 0.0) throw std::runtime_error("build_dataset: degenerate all-zero dataset");

  ds.x.resize(assembled.size());
  for (size_t i = 0; i < assembled.size(); ++i)
    ds.x[i] = static_cast<float>(assembled[i] / max_abs);

  ds.y.resize(static_cast<size_t>(N));
  ds.mask.resize(static_cast<size_t>(N) * D);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    ds.y[static_cast<size_t>(n)] = ds.meta[static_cast<size_t>(n)].label;
    uint8_t* mp = ds.mask.data() + static_cast<size_t>(n) * D;
    if (spec.scenario == Scenario::Rigid) {
      const BoolGrid m = threshold_support(signals[static_cast<size_t>(n)]);
      std::copy(m.begin(), m.end(), mp);
    } else {
      std::copy(static_mask.begin(), static_mask.end(), mp);
    }
  }

  for (int split = 0; split < 3; ++split) {
    bool has[2] = {false, false};
    for (int i = 0; i < ds.split_size(split); ++i)
      has[ds.y[static_cast<size_t>(ds.split_offset(split) + i)]] = true;
    if (!has[0] || !has[1])
      throw std::runtime_error("build_dataset: split " + std::to_string(split) +
                               " is missing a label class");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kFormatVersion = 1;
const char* kSplitNames[3] = {"train", "val", "test"};

json spec_to_json(const ScenarioSpec& s) {
  return json{{"scenario", scenario_name(s.scenario)},
              {"background", background_name(s.background)},
              {"side", s.side},
              {"pattern_thickness", s.pattern_thickness},
              {"alpha", s.alpha},
              {"sigma_pattern", s.sigma_pattern},
              {"sigma_background", s.sigma_background},
              {"n_samples", s.n_samples},
              {"split", {s.split.train, s.split.val, s.split.test}},
              {"seed", s.seed},
              {"image_dir", s.image_dir}};
}

ScenarioSpec spec_from_json(const json& j) {
  ScenarioSpec s;
  s.scenario = parse_scenario(j.at("scenario").get<std::string>());
  s.background = parse_background(j.at("background").get<std::string>());
  s.side = j.at("side").get<int>();
  s.pattern_thickness = j.at("pattern_thickness").get<int>();
  s.alpha = j.at("alpha").get<double>();
  s.sigma_pattern = j.at("sigma_pattern").get<double>();
  s.sigma_background = j.at("sigma_background").get<double>();
  s.n_samples = j.at("n_samples").get<int>();
  s.split.train = j.at("split").at(0).get<double>();
  s.split.val = j.at("split").at(1).get<double>();
  s.split.test = j.at("split").at(2).get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.image_dir = j.value("image_dir", "");
  return s;
}

template <typename T>
uint32_t vec_crc(const std::vector<T>& v) {
  return crc32(v.data(), v.size() * sizeof(T));
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const int D = ds.d();
  json checksums;
  for (int split = 0; split < 3; ++split) {
    const int off = ds.split_offset(split), cnt = ds.split_size(split);
    std::vector<float> x(ds.x.begin() + static_cast<size_t>(off) * D,
                         ds.x.begin() + static_cast<size_t>(off + cnt) * D);
    std::vector<uint8_t> y(ds.y.begin() + off, ds.y.begin() + off + cnt);
    std::vector<uint8_t> m(ds.mask.begin() + static_cast<size_t>(off) * D,
                           ds.mask.begin() + static_cast<size_t>(off + cnt) * D);
    const std::string sn = kSplitNames[split];
    write_f32(dir / ("x_" + sn + ".f32"), x);
    write_u8(dir / ("y_" + sn + ".u8"), y);
    write_u8(dir / ("mask_" + sn + ".u8"), m);
    checksums["x_" + sn + ".f32"] = vec_crc(x);
    checksums["y_" + sn + ".u8"] = vec_crc(y);
    checksums["mask_" + sn + ".u8"] = vec_crc(m);
  }
  const bool has_meta = ds.spec.scenario == Scenario::Rigid || ds.spec.scenario == Scenario::Xor;
  if (has_meta) {
    std::vector<uint8_t> meta;
    meta.reserve(ds.meta.size() * 4);
    for (const LabeledSample& m : ds.meta) {
      meta.push_back(m.xor_sign_case);
      meta.push_back(static_cast<uint8_t>(m.transform.quarter_turns));
      meta.push_back(static_cast<uint8_t>(static_cast<int8_t>(m.transform.drow)));
      meta.push_back(static_cast<uint8_t>(static_cast<int8_t>(m.transform.dcol)));
    }
    write_u8(dir / "sample_meta.u8", meta);
    checksums["sample_meta.u8"] = vec_crc(meta);
  }
  json manifest{{"format_version", kFormatVersion},
                {"spec", spec_to_json(ds.spec)},
                {"counts", {{"train", ds.n_train}, {"val", ds.n_val}, {"test", ds.n_test}}},
                {"anchors",
                 {{"t_row", ds.t_row}, {"t_col", ds.t_col}, {"l_row", ds.l_row}, {"l_col", ds.l_col}}},
                {"checksums", checksums},
                {"provenance", {{"generator", "xtbench"}, {"seed", ds.spec.seed}}}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  if (manifest.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error(dir.string() + ": unsupported dataset format version " +
                             manifest.at("format_version").dump());
  Dataset ds;
  ds.spec = spec_from_json(manifest.at("spec"));
  ds.n_train = manifest.at("counts").at("train").get<int>();
  ds.n_val = manifest.at("counts").at("val").get<int>();
  ds.n_test = manifest.at("counts").at("test").get<int>();
  ds.t_row = manifest.at("anchors").at("t_row").get<int>();
  ds.t_col = manifest.at("anchors").at("t_col").get<int>();
  ds.l_row = manifest.at("anchors").at("l_row").get<int>();
  ds.l_col = manifest.at("anchors").at("l_col").get<int>();
  const json& checksums = manifest.at("checksums");
  const int D = ds.d();

  auto check = [&checksums, &dir](const std::string& name, uint32_t got) {
    const uint32_t want = checksums.at(name).get<uint32_t>();
    if (got != want)
      throw std::runtime_error(dir.string() + "/" + name + ": checksum mismatch (stored " +
                               std::to_string(want) + ", computed " + std::to_string(got) + ")");
  };

  for (int split = 0; split < 3; ++split) {
    const std::string sn = kSplitNames[split];
    const size_t cnt = static_cast<size_t>(ds.split_size(split));
    auto x = read_f32(dir / ("x_" + sn + ".f32"), cnt * D);
    auto y = read_u8(dir / ("y_" + sn + ".u8"), cnt);
    auto m = read_u8(dir / ("mask_" + sn + ".u8"), cnt * D);
    check("x_" + sn + ".f32", vec_crc(x));
    check("y_" + sn + ".u8", vec_crc(y));
    check("mask_" + sn + ".u8", vec_crc(m));
    ds.x.insert(ds.x.end(), x.begin(), x.end());
    ds.y.insert(ds.y.end(), y.begin(), y.end());
    ds.mask.insert(ds.mask.end(), m.begin(), m.end());
  }
  ds.meta.resize(static_cast<size_t>(ds.n_total()));
  for (size_t i = 0; i < ds.meta.size(); ++i) ds.meta[i].label = ds.y[i];
  if (checksums.contains("sample_meta.u8")) {
    auto meta = read_u8(dir / "sample_meta.u8", ds.meta.size() * 4);
    check("sample_meta.u8", vec_crc(meta));
    for (size_t i = 0; i < ds.meta.size(); ++i) {
      ds.meta[i].xor_sign_case = meta[i * 4];
      ds.meta[i].transform.quarter_turns = meta[i * 4 + 1];
      ds.meta[i].transform.drow = static_cast<int8_t>(meta[i * 4 + 2]);
      ds.meta[i].transform.dcol = static_cast<int8_t>(meta[i * 4 + 3]);
    }
  }
  return ds;
}

}  // namespace xtb
