#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "xtbench/datagen.hpp"
#include "xtbench/io.hpp"

using namespace xtb;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("xtb_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ScenarioSpec small_spec(Scenario sc, Background bg, double alpha) {
  ScenarioSpec s;
  s.scenario = sc;
  s.background = bg;
  s.alpha = alpha;
  s.side = 8;
  s.n_samples = 200;
  s.seed = 7;
  return s;
}

}  // namespace

TEST_CASE("tetromino shapes and rotations") {
  const auto t0 = tetromino_blocks(TetroKind::T, 0);
  CHECK(t0 == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {0, 2}, {1, 1}});
  const auto l0 = tetromino_blocks(TetroKind::L, 0);
  CHECK(l0 == std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {2, 0}, {2, 1}});
  for (TetroKind k : {TetroKind::T, TetroKind::L}) {
    // four quarter turns come back to the start
    auto rotated = tetromino_blocks(k, 360);
    CHECK(rotated == tetromino_blocks(k, 0));
    for (int deg : {90, 180, 270}) {
      const auto blocks = tetromino_blocks(k, deg);
      CHECK(blocks.size() == 4);
      // anchored at the bounding box origin
      int min_r = 9, min_c = 9;
      for (auto [r, c] : blocks) {
        min_r = std::min(min_r, r);
        min_c = std::min(min_c, c);
      }
      CHECK(min_r == 0);
      CHECK(min_c == 0);
    }
  }
  CHECK_THROWS(tetromino_blocks(TetroKind::T, 45));
}

TEST_CASE("pattern rendering respects thickness and bounds") {
  const TetrominoPattern p = make_pattern(TetroKind::T, 0, 1, 1, 2, 8);
  double sum = 0.0;
  for (double v : p.grid.px) sum += v;
  CHECK(sum == 16.0);  // 4 blocks * 2x2
  CHECK(p.grid.at(1, 1) == 1.0);
  CHECK_THROWS(make_pattern(TetroKind::T, 0, 7, 7, 1, 8));
  CHECK_THROWS(make_pattern(TetroKind::T, 0, 0, 0, 0, 8));
}

TEST_CASE("support threshold keeps pixels at or above 5 percent of the max") {
  ImageGrid g(4);
  g.at(0, 0) = 1.0;
  g.at(1, 1) = 0.05;
  g.at(2, 2) = 0.049;
  g.at(3, 3) = -0.5;
  const BoolGrid m = threshold_support(g);
  CHECK(m[0] == 1);
  CHECK(m[5] == 1);    // exactly at the threshold
  CHECK(m[10] == 0);   // just below
  CHECK(m[15] == 1);   // magnitude counts
  CHECK_THROWS(threshold_support(ImageGrid(4)));
}

TEST_CASE("fixed anchors sit one block inside opposite corners") {
  CHECK(fixed_anchor(TetroKind::T, 1, 8) == std::pair<int, int>{1, 1});
  CHECK(fixed_anchor(TetroKind::L, 1, 8) == std::pair<int, int>{4, 5});
  CHECK(fixed_anchor(TetroKind::T, 8, 64) == std::pair<int, int>{8, 8});
  CHECK(fixed_anchor(TetroKind::L, 8, 64) == std::pair<int, int>{32, 40});
  // both patterns must render in-bounds at these anchors
  for (int side : {8, 64}) {
    const int th = side / 8;
    auto [tr, tc] = fixed_anchor(TetroKind::T, th, side);
    auto [lr, lc] = fixed_anchor(TetroKind::L, th, side);
    CHECK_NOTHROW(make_pattern(TetroKind::T, 0, tr, tc, th, side));
    CHECK_NOTHROW(make_pattern(TetroKind::L, 0, lr, lc, th, side));
  }
}

TEST_CASE("rigid transforms keep the tetromino fully on the grid") {
  auto rng = make_rng(3);
  for (int i = 0; i < 200; ++i) {
    const TetroKind kind = (i & 1) ? TetroKind::T : TetroKind::L;
    const RigidTransform t = sample_rigid_transform(rng, kind, 1, 8);
    const ImageGrid canonical = make_pattern(kind, 0, 0, 0, 1, 8).grid;
    const ImageGrid moved = apply_transform(canonical, t);
    double sum = 0.0;
    for (double v : moved.px) sum += v;
    CHECK(sum == 4.0);  // nothing clipped at the border
  }
}

TEST_CASE("whole-batch frobenius normalization") {
  std::vector<ImageGrid> batch(3, ImageGrid(2));
  batch[0].at(0, 0) = 3.0;
  batch[1].at(1, 1) = 4.0;
  frobenius_normalize(batch);
  double ss = 0.0;
  for (const auto& g : batch)
    for (double v : g.px) ss += v * v;
  CHECK(ss == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<ImageGrid> zero(2, ImageGrid(2));
  CHECK_THROWS(frobenius_normalize(zero));
  std::vector<ImageGrid> empty;
  CHECK_THROWS(frobenius_normalize(empty));
}

TEST_CASE("dataset naming convention") {
  ScenarioSpec s = small_spec(Scenario::Lin, Background::White, 0.18);
  CHECK(s.dataset_name() == "linear_1d1p_0.18_white");
  s = small_spec(Scenario::Xor, Background::Corr, 0.0125);
  s.side = 64;
  s.pattern_thickness = 8;
  CHECK(s.dataset_name() == "xor_8d8p_0.0125_correlated");
}

TEST_CASE("generated datasets have the advertised structure") {
  for (Scenario sc : {Scenario::Lin, Scenario::Mult, Scenario::Rigid, Scenario::Xor}) {
    const Dataset ds = build_dataset(small_spec(sc, Background::White, 0.5));
    CHECK(ds.n_total() == 200);
    CHECK(ds.n_train == 160);
    CHECK(ds.n_val == 20);
    CHECK(ds.n_test == 20);
    CHECK(ds.x.size() == 200u * 64);
    CHECK(ds.mask.size() == 200u * 64);

    // rescaled to [-1, 1] with the max hit exactly
    float max_abs = 0.0f;
    for (float v : ds.x) max_abs = std::max(max_abs, std::fabs(v));
    CHECK(max_abs == doctest::Approx(1.0f));

    // every split carries both labels
    for (int split = 0; split < 3; ++split) {
      std::set<int> labels;
      for (int i = 0; i < ds.split_size(split); ++i)
        labels.insert(ds.y[static_cast<size_t>(ds.split_offset(split) + i)]);
      CHECK(labels.size() == 2);
    }

    // masks: static across samples except for the rigid scenario
    if (sc != Scenario::Rigid) {
      for (int n = 1; n < 200; ++n)
        CHECK(std::equal(ds.mask.begin(), ds.mask.begin() + 64,
                         ds.mask.begin() + static_cast<size_t>(n) * 64));
    } else {
      for (int n = 0; n < 200; ++n) {
        int on = 0;
        for (int i = 0; i < 64; ++i) on += ds.sample_mask(n)[i];
        CHECK(on >= 4);
      }
    }
  }
}

TEST_CASE("additive composition is exact at alpha one") {
  // with alpha=1 and no smoothing the image is the pure pattern: nonzero
  // pixels must coincide with the mask
  const Dataset ds = build_dataset(small_spec(Scenario::Lin, Background::White, 1.0));
  for (int n = 0; n < ds.n_total(); ++n) {
    for (int i = 0; i < 64; ++i) {
      const bool lit = ds.sample(n)[i] != 0.0f;
      if (lit) CHECK(ds.sample_mask(n)[i] == 1);
    }
  }
}

TEST_CASE("xor sign cases are stratified within labels") {
  const Dataset ds = build_dataset(small_spec(Scenario::Xor, Background::White, 0.5));
  int cases[4] = {0, 0, 0, 0};
  for (const auto& m : ds.meta) ++cases[m.xor_sign_case];
  CHECK(std::abs(cases[0] - cases[1]) <= 1);  // ++ vs --
  CHECK(std::abs(cases[2] - cases[3]) <= 1);  // +- vs -+
  for (const auto& m : ds.meta) {
    const bool same_sign = m.xor_sign_case < 2;
    CHECK((m.label == 0) == same_sign);
  }
}

TEST_CASE("dataset generation is deterministic") {
  const Dataset a = build_dataset(small_spec(Scenario::Rigid, Background::Corr, 0.3));
  const Dataset b = build_dataset(small_spec(Scenario::Rigid, Background::Corr, 0.3));
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.mask == b.mask);
}

TEST_CASE("dataset roundtrip with checksum verification") {
  const fs::path dir = temp_dir("ds_roundtrip");
  const Dataset ds = build_dataset(small_spec(Scenario::Xor, Background::White, 0.4));
  save_dataset(ds, dir);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "x_train.f32"));
  CHECK(fs::exists(dir / "y_val.u8"));
  CHECK(fs::exists(dir / "mask_test.u8"));

  const Dataset back = load_dataset(dir);
  CHECK(back.x == ds.x);
  CHECK(back.y == ds.y);
  CHECK(back.mask == ds.mask);
  CHECK(back.n_train == ds.n_train);
  CHECK(back.spec.alpha == ds.spec.alpha);
  for (size_t i = 0; i < ds.meta.size(); ++i)
    CHECK(back.meta[i].xor_sign_case == ds.meta[i].xor_sign_case);

  SUBCASE("corruption is detected with a named file") {
    auto x = read_f32(dir / "x_train.f32", static_cast<size_t>(ds.n_train) * 64);
    x[0] += 1.0f;
    write_f32(dir / "x_train.f32", x);
    try {
      load_dataset(dir);
      FAIL("expected checksum mismatch");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("x_train.f32") != std::string::npos);
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }
  SUBCASE("truncation is reported distinctly") {
    std::vector<uint8_t> y(3, 0);
    write_u8(dir / "y_train.u8", y);
    try {
      load_dataset(dir);
      FAIL("expected length diagnostic");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("y_train.u8") != std::string::npos);
    }
  }
  SUBCASE("missing file is reported distinctly") {
    fs::remove(dir / "mask_val.u8");
    CHECK_THROWS(load_dataset(dir));
  }
  SUBCASE("future format versions are rejected") {
    auto text = read_text(dir / "manifest.json");
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 9");
    write_text_atomic(dir / "manifest.json", text);
    try {
      load_dataset(dir);
      FAIL("expected version rejection");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("imagenet backgrounds ingest pgm files and are mean-centered") {
  const fs::path dir = temp_dir("pgm_src");
  // 8 tiny gradient images, 12x10 binary PGM
  for (int k = 0; k < 8; ++k) {
    std::ofstream out(dir / ("img" + std::to_string(k) + ".pgm"), std::ios::binary);
    out << "P5\n# synthetic\n12 10\n255\n";
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 12; ++c)
        out.put(static_cast<char>((r * 12 + c + 13 * k) % 256));
  }
  ScenarioSpec spec = small_spec(Scenario::Lin, Background::Imagenet, 0.5);
  spec.n_samples = 50;
  spec.image_dir = dir.string();
  SUBCASE("too few images is a clear error") {
    try {
      build_dataset(spec);
      FAIL("expected image count error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("need") != std::string::npos);
    }
  }
  SUBCASE("enough images generates a valid dataset") {
    spec.n_samples = 8;
    spec.split = SplitFractions{0.5, 0.25, 0.25};
    // the label-per-split check can fail with 8 samples; retry seeds
    Dataset ds;
    bool ok = false;
    for (uint64_t s = 0; s < 20 && !ok; ++s) {
      spec.seed = s;
      try {
        ds = build_dataset(spec);
        ok = true;
      } catch (const std::exception&) {
      }
    }
    REQUIRE(ok);
    CHECK(ds.n_total() == 8);
    float max_abs = 0.0f;
    for (float v : ds.x) max_abs = std::max(max_abs, std::fabs(v));
    CHECK(max_abs == doctest::Approx(1.0f));
  }
  fs::remove_all(dir);
}
