#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "xtbench/harness.hpp"
#include "xtbench/io.hpp"

using namespace xtb;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("xtb_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string smoke_config(const fs::path& out_root, uint64_t seed = 3) {
  json j{{"side", 8},
         {"n_samples", 300},
         {"seed", seed},
         {"trainings", 2},
         {"epochs", 25},
         {"batch_size", 64},
         {"max_samples", 12},
         {"out_root", out_root.string()},
         {"scenarios", json::array({{{"scenario", "linear"},
                                     {"background", "white"},
                                     {"alpha", 0.9}}})},
         {"architectures", json::array({"llr"})},
         {"methods", json::array({"saliency", "sobel", "laplace", "random", "input"})}};
  return j.dump();
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const fs::path out = temp_dir("cfg");
  const BenchmarkConfig cfg = parse_config_json(smoke_config(out));
  CHECK(cfg.side == 8);
  CHECK(cfg.scenarios.size() == 1);
  CHECK(cfg.scenarios[0].alpha == 0.9);
  CHECK(cfg.architectures == std::vector<Arch>{Arch::LLR});
  CHECK(cfg.methods.size() == 5);

  SUBCASE("not json") { CHECK_THROWS_AS(parse_config_json("nope{"), ConfigError); }
  SUBCASE("missing scenarios") {
    CHECK_THROWS_AS(parse_config_json(R"({"architectures":["llr"],"methods":["saliency"]})"),
                    ConfigError);
  }
  SUBCASE("unknown method is rejected before any compute") {
    json j = json::parse(smoke_config(out));
    j["methods"].push_back("gradcam");
    try {
      parse_config_json(j.dump());
      FAIL("expected rejection");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("gradcam") != std::string::npos);
    }
  }
  SUBCASE("unknown architecture is rejected") {
    json j = json::parse(smoke_config(out));
    j["architectures"].push_back("transformer");
    CHECK_THROWS_AS(parse_config_json(j.dump()), ConfigError);
  }
  SUBCASE("out-of-range alpha is rejected") {
    json j = json::parse(smoke_config(out));
    j["scenarios"][0]["alpha"] = 1.5;
    CHECK_THROWS_AS(parse_config_json(j.dump()), ConfigError);
  }
  SUBCASE("imagenet without image_dir is rejected") {
    json j = json::parse(smoke_config(out));
    j["scenarios"][0]["background"] = "imagenet";
    CHECK_THROWS_AS(parse_config_json(j.dump()), ConfigError);
  }
  fs::remove_all(out);
}

TEST_CASE("llr cells are skipped for nonlinear scenarios unless enabled") {
  BenchmarkConfig cfg;
  ScenarioEntry lin{Scenario::Lin, Background::White, 0.5, ""};
  ScenarioEntry xo{Scenario::Xor, Background::White, 0.5, ""};
  CHECK(cell_enabled(cfg, lin, Arch::LLR));
  CHECK_FALSE(cell_enabled(cfg, xo, Arch::LLR));
  CHECK(cell_enabled(cfg, xo, Arch::MLP));
  cfg.allow_llr_nonlinear = true;
  CHECK(cell_enabled(cfg, xo, Arch::LLR));
}

TEST_CASE("quantiles interpolate linearly") {
  CHECK(quantile_sorted({0.0, 0.5, 1.0}, 0.5) == doctest::Approx(0.5));
  CHECK(quantile_sorted({0.0, 0.5, 1.0}, 0.25) == doctest::Approx(0.25));
  CHECK(quantile_sorted({0.0, 0.5, 1.0}, 0.75) == doctest::Approx(0.75));
  CHECK(quantile_sorted({4.0}, 0.9) == 4.0);
  CHECK_THROWS(quantile_sorted({}, 0.5));

  const BoxStats b = box_stats({0.0, 0.5, 1.0});
  CHECK(b.median == doctest::Approx(0.5));
  CHECK(b.q1 == doctest::Approx(0.25));
  CHECK(b.q3 == doctest::Approx(0.75));
  CHECK(b.outliers == 0);

  const BoxStats flat = box_stats({0.7, 0.7, 0.7, 0.7});
  CHECK(flat.q1 == flat.q3);  // zero-width box
  CHECK(flat.lo_whisker == 0.7);
  CHECK(flat.hi_whisker == 0.7);

  const BoxStats out = box_stats({0.0, 10.0, 10.1, 10.2, 10.3, 10.4, 10.5});
  CHECK(out.outliers == 1);
  CHECK(out.lo_whisker == 10.0);  // whisker clamps to the innermost non-outlier
}

TEST_CASE("score csv roundtrip and schema checks") {
  const std::string text = score_csv_header() +
                           "\nlinear,white,llr,saliency,4,0.5,0.25,1,0\n"
                           "xor,correlated,mlp,lime,7,0.125,0.5,0.75,1\n";
  const auto rows = parse_score_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].scenario == "linear");
  CHECK(rows[0].sample_id == 4);
  CHECK(rows[0].emd == 0.5);
  CHECK(rows[1].method == "lime");
  CHECK(rows[1].degenerate == 1);
  CHECK_THROWS(parse_score_csv("wrong,header\n1,2\n"));
  CHECK_THROWS(parse_score_csv(score_csv_header() + "\na,b,c\n"));
}

TEST_CASE("smoke run: end to end, idempotent, resumable") {
  const fs::path out = temp_dir("smoke");
  BenchmarkConfig cfg = parse_config_json(smoke_config(out));

  {
    Harness h(cfg);
    h.run_all();
    REQUIRE(h.failures().empty());
  }

  // artifact layout
  const fs::path ds_dir = out / "linear_1d1p_0.9_white";
  CHECK(fs::exists(ds_dir / "manifest.json"));
  CHECK(fs::exists(ds_dir / "llr" / "seed0" / "manifest.json"));
  CHECK(fs::exists(ds_dir / "llr" / "seed1" / "p0.f64"));
  CHECK(fs::exists(ds_dir / "llr" / "seed0" / "maps" / "saliency.f64"));
  CHECK(fs::exists(ds_dir / "llr" / "explained.json"));
  CHECK(fs::exists(out / "scores" / "scores.csv"));
  CHECK(fs::exists(out / "report" / "aggregate.csv"));
  CHECK(fs::exists(out / "report" / "report.json"));
  CHECK(fs::exists(out / "report" / "boxplots.svg"));
  CHECK(fs::exists(out / "report" / "failures.json"));
  CHECK(read_text(out / "report" / "failures.json").find("[]") == 0);

  const std::string scores_first = read_text(out / "scores" / "scores.csv");
  const auto rows = parse_score_csv(scores_first);
  // 2 seeds x 5 methods x 12 capped samples
  CHECK(rows.size() == 2u * 5 * 12);

  const std::string report_first = read_text(out / "report" / "report.json");
  CHECK(json::parse(report_first).at("provenance").size() > 0);

  SUBCASE("rerun reproduces the identical outputs from cache") {
    const auto ckpt_before = read_text(ds_dir / "llr" / "seed0" / "manifest.json");
    Harness h(cfg);
    h.run_all();
    CHECK(h.failures().empty());
    CHECK(read_text(out / "scores" / "scores.csv") == scores_first);
    CHECK(read_text(out / "report" / "report.json") == report_first);
    CHECK(read_text(ds_dir / "llr" / "seed0" / "manifest.json") == ckpt_before);
  }
  SUBCASE("deleting only the report regenerates it from cached scores") {
    fs::remove_all(out / "report");
    Harness h(cfg);
    h.report();
    CHECK(read_text(out / "report" / "report.json") == report_first);
  }
  SUBCASE("aggregate rows cover every cell and metric") {
    const std::string agg = read_text(out / "report" / "aggregate.csv");
    int lines = -1;  // header
    for (char ch : agg)
      if (ch == '\n') ++lines;
    CHECK(lines == 5 * 3);  // 5 methods x 3 metrics in one cell
  }
  fs::remove_all(out);
}

TEST_CASE("two runs with the same config and seed are bytewise identical") {
  const fs::path out_a = temp_dir("det_a");
  const fs::path out_b = temp_dir("det_b");
  {
    Harness h(parse_config_json(smoke_config(out_a)));
    h.run_all();
    REQUIRE(h.failures().empty());
  }
  {
    Harness h(parse_config_json(smoke_config(out_b)));
    h.run_all();
    REQUIRE(h.failures().empty());
  }
  CHECK(read_text(out_a / "scores" / "scores.csv") ==
        read_text(out_b / "scores" / "scores.csv"));

  const fs::path out_c = temp_dir("det_c");
  {
    Harness h(parse_config_json(smoke_config(out_c, 4)));
    h.run_all();
    REQUIRE(h.failures().empty());
  }
  CHECK(read_text(out_a / "scores" / "scores.csv") !=
        read_text(out_c / "scores" / "scores.csv"));
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  fs::remove_all(out_c);
}

TEST_CASE("cell failures are recorded and the run keeps going") {
  const fs::path out = temp_dir("failrun");
  json j = json::parse(smoke_config(out));
  j["scenarios"].push_back({{"scenario", "linear"},
                            {"background", "imagenet"},
                            {"alpha", 0.5},
                            {"image_dir", (out / "no_such_dir").string()}});
  BenchmarkConfig cfg = parse_config_json(j.dump());
  {
    Harness h(cfg);
    h.run_all();
    CHECK_FALSE(h.failures().empty());
    // the healthy cell still produced scores
    const auto rows = parse_score_csv(read_text(out / "scores" / "scores.csv"));
    CHECK(rows.size() == 2u * 5 * 12);
  }
  const json failures = json::parse(read_text(out / "report" / "failures.json"));
  REQUIRE(failures.size() > 0);
  CHECK(failures[0].contains("cell"));
  CHECK(failures[0].contains("stage"));
  CHECK(failures[0].contains("error"));
  fs::remove_all(out);
}
