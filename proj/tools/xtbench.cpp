#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "xtbench/harness.hpp"

using xtb::BenchmarkConfig;
using xtb::ConfigError;
using xtb::Harness;

int main(int argc, char** argv) {
  CLI::App app{"synthetic attribution benchmark pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root;
  long long seed = -1;
  int workers = 0;
  int max_samples = -1;

  app.add_option("--config", config_path, "benchmark config JSON")->required();
  app.add_option("--out", out_root, "output root (overrides config)");
  app.add_option("--seed", seed, "global seed (overrides config)");
  app.add_option("--workers", workers, "worker threads (0 = library default)");
  app.add_option("--max-samples", max_samples,
                 "cap on explained samples per cell (overrides config)");

  const char* stages[] = {"generate", "calibrate", "train", "explain", "score", "report", "run"};
  for (const char* s : stages) app.add_subcommand(s)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    BenchmarkConfig cfg = xtb::load_config(config_path);
    if (!out_root.empty()) cfg.out_root = out_root;
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (max_samples >= 0) cfg.max_samples = max_samples;
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#endif
    Harness h(cfg);
    if (stage == "generate") h.generate();
    else if (stage == "calibrate") h.calibrate();
    else if (stage == "train") h.train();
    else if (stage == "explain") h.explain();
    else if (stage == "score") h.score();
    else if (stage == "report") h.report();
    else h.run_all();

    if (!h.failures().empty()) {
      for (const auto& f : h.failures())
        std::fprintf(stderr, "FAIL %s [%s]: %s\n", f.cell.c_str(), f.stage.c_str(),
                     f.error.c_str());
      std::fprintf(stderr, "%zu cell(s) failed; see report/failures.json\n",
                   h.failures().size());
      return 2;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
