#include "xtbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xtbench/io.hpp"
#include "xtbench/metrics.hpp"
#include "xtbench/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace xtb {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

uint64_t hash_str(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

double default_learning_rate(Scenario s) {
  return s == Scenario::Rigid ? 0.0004 : 0.004;
}

bool cell_enabled(const BenchmarkConfig& cfg, const ScenarioEntry& entry, Arch arch) {
  if (arch != Arch::LLR) return true;
  if (entry.scenario == Scenario::Lin) return true;
  return cfg.allow_llr_nonlinear;
}

BenchmarkConfig parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  BenchmarkConfig cfg;
  try {
    cfg.side = j.value("side", cfg.side);
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    cfg.sigma_pattern = j.value("sigma_pattern", cfg.sigma_pattern);
    cfg.sigma_background = j.value("sigma_background", cfg.sigma_background);
    cfg.trainings = j.value("trainings", cfg.trainings);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_samples = j.value("max_samples", cfg.max_samples);
    cfg.allow_llr_nonlinear = j.value("allow_llr_nonlinear", cfg.allow_llr_nonlinear);
    cfg.out_root = j.value("out_root", cfg.out_root);
    if (!j.contains("scenarios") || !j["scenarios"].is_array())
      throw ConfigError("config: 'scenarios' array is required");
    for (const auto& s : j["scenarios"]) {
      ScenarioEntry e;
      e.scenario = parse_scenario(s.at("scenario").get<std::string>());
      e.background = parse_background(s.at("background").get<std::string>());
      e.alpha = s.at("alpha").get<double>();
      e.image_dir = s.value("image_dir", std::string());
      cfg.scenarios.push_back(e);
    }
    if (!j.contains("architectures") || !j["architectures"].is_array())
      throw ConfigError("config: 'architectures' array is required");
    for (const auto& a : j["architectures"])
      cfg.architectures.push_back(parse_arch(a.get<std::string>()));
    if (!j.contains("methods") || !j["methods"].is_array())
      throw ConfigError("config: 'methods' array is required");
    for (const auto& m : j["methods"]) cfg.methods.push_back(m.get<std::string>());
    if (j.contains("explainer")) {
      const auto& x = j["explainer"];
      auto& e = cfg.explainer;
      e.ig_steps = x.value("ig_steps", e.ig_steps);
      e.shapley_permutations = x.value("shapley_permutations", e.shapley_permutations);
      e.kernel_shap_coalitions = x.value("kernel_shap_coalitions", e.kernel_shap_coalitions);
      e.lime_perturbations = x.value("lime_perturbations", e.lime_perturbations);
      e.lime_ridge = x.value("lime_ridge", e.lime_ridge);
      e.lime_kernel_width_scale = x.value("lime_kernel_width_scale", e.lime_kernel_width_scale);
      e.grad_shap_samples = x.value("grad_shap_samples", e.grad_shap_samples);
      e.grad_shap_noise = x.value("grad_shap_noise", e.grad_shap_noise);
      e.lrp_epsilon = x.value("lrp_epsilon", e.lrp_epsilon);
      e.pfi_repeats = x.value("pfi_repeats", e.pfi_repeats);
      e.patch_size = x.value("patch_size", e.patch_size);
    }
    if (j.contains("calibration")) {
      const auto& c = j["calibration"];
      cfg.calibrate = c.value("enabled", true);
      if (c.contains("alpha_grid"))
        for (const auto& a : c["alpha_grid"]) cfg.alpha_grid.push_back(a.get<double>());
      cfg.calibration_trials = c.value("trials", cfg.calibration_trials);
      cfg.calibration_threshold = c.value("threshold", cfg.calibration_threshold);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

BenchmarkConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config_json(text);
}

void validate_config(const BenchmarkConfig& cfg) {
  if (cfg.side < 4) throw ConfigError("config: side must be >= 4");
  if (cfg.n_samples < 10) throw ConfigError("config: n_samples must be >= 10");
  if (cfg.scenarios.empty()) throw ConfigError("config: at least one scenario is required");
  if (cfg.architectures.empty())
    throw ConfigError("config: at least one architecture is required");
  if (cfg.methods.empty()) throw ConfigError("config: at least one method is required");
  if (cfg.trainings < 1) throw ConfigError("config: trainings must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  const auto registered = registered_methods();
  for (const auto& m : cfg.methods)
    if (std::find(registered.begin(), registered.end(), m) == registered.end()) {
      std::string ids;
      for (const auto& id : registered) ids += (ids.empty() ? "" : ", ") + id;
      throw ConfigError("config: unknown method '" + m + "'; registered: " + ids);
    }
  std::set<std::string> seen;
  for (const auto& e : cfg.scenarios) {
    if (!(e.alpha > 0.0 && e.alpha <= 1.0))
      throw ConfigError("config: alpha must be in (0,1], got " + g17(e.alpha));
    if (e.background == Background::Imagenet && e.image_dir.empty())
      throw ConfigError("config: imagenet background requires image_dir");
    ScenarioSpec spec;
    spec.scenario = e.scenario;
    spec.background = e.background;
    spec.alpha = e.alpha;
    spec.side = cfg.side;
    if (!seen.insert(spec.dataset_name()).second)
      throw ConfigError("config: duplicate scenario entry " + spec.dataset_name());
  }
  if (cfg.calibrate && cfg.alpha_grid.empty())
    throw ConfigError("config: calibration requires a non-empty alpha_grid");
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  b.count = static_cast<int>(values.size());
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.median = quantile_sorted(values, 0.5);
  b.q1 = quantile_sorted(values, 0.25);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.lo_whisker = b.q1;
  b.hi_whisker = b.q3;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) ++b.outliers;
  }
  for (double v : values)
    if (v >= lo_fence) {
      b.lo_whisker = v;
      break;
    }
  for (size_t i = values.size(); i-- > 0;)
    if (values[i] <= hi_fence) {
      b.hi_whisker = values[i];
      break;
    }
  return b;
}

std::string score_csv_header() {
  return "scenario,background,arch,method,sample_id,emd,ima,precision,degenerate_flag";
}

std::vector<ScoreRow> parse_score_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("score csv: empty file");
  if (split_csv_line(line) != split_csv_line(score_csv_header()))
    throw std::invalid_argument("score csv: unexpected header '" + line + "'");
  std::vector<ScoreRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9)
      throw std::invalid_argument("score csv: line " + std::to_string(lineno) + " has " +
                                  std::to_string(f.size()) + " fields, expected 9");
    ScoreRow r;
    r.scenario = f[0];
    r.background = f[1];
    r.arch = f[2];
    r.method = f[3];
    r.sample_id = std::stoi(f[4]);
    r.emd = std::stod(f[5]);
    r.ima = std::stod(f[6]);
    r.precision = std::stod(f[7]);
    r.degenerate = std::stoi(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------

Harness::Harness(BenchmarkConfig cfg) : cfg_(std::move(cfg)), root_(cfg_.out_root) {
  validate_config(cfg_);
  fs::create_directories(root_);
}

ScenarioSpec Harness::make_spec(const ScenarioEntry& e) const {
  ScenarioSpec spec;
  spec.scenario = e.scenario;
  spec.background = e.background;
  spec.side = cfg_.side;
  spec.alpha = e.alpha;
  spec.sigma_pattern = cfg_.sigma_pattern;
  spec.sigma_background = cfg_.sigma_background;
  spec.n_samples = cfg_.n_samples;
  spec.seed = splitmix64(splitmix64(cfg_.seed) ^ hash_str("data/" + e.image_dir) ^
                         hash_str(scenario_name(e.scenario) + background_name(e.background)));
  spec.image_dir = e.image_dir;
  return spec;
}

fs::path Harness::dataset_dir(const ScenarioEntry& e) const {
  return root_ / make_spec(e).dataset_name();
}

fs::path Harness::checkpoint_dir(const ScenarioEntry& e, Arch arch, int k) const {
  return dataset_dir(e) / arch_name(arch) / ("seed" + std::to_string(k));
}

uint64_t Harness::cell_seed(const std::string& tag, uint64_t a, uint64_t b) const {
  return splitmix64(splitmix64(splitmix64(cfg_.seed) ^ hash_str(tag)) ^
                    splitmix64(a * 0x9e3779b97f4a7c15ULL + b + 1));
}

void Harness::record_failure(const std::string& cell, const std::string& stage,
                             const std::string& err) {
  failures_.push_back({cell, stage, err});
}

const Dataset& Harness::dataset(const ScenarioEntry& e) {
  const std::string name = make_spec(e).dataset_name();
  auto it = dataset_cache_.find(name);
  if (it != dataset_cache_.end()) return it->second;
  const fs::path dir = dataset_dir(e);
  if (fs::exists(dir / "manifest.json")) {
    return dataset_cache_.emplace(name, load_dataset(dir)).first->second;
  }
  Dataset ds = build_dataset(make_spec(e));
  save_dataset(ds, dir);
  return dataset_cache_.emplace(name, std::move(ds)).first->second;
}

void Harness::generate() {
  for (const auto& e : cfg_.scenarios) {
    const std::string name = make_spec(e).dataset_name();
    try {
      dataset(e);
    } catch (const std::exception& ex) {
      record_failure(name, "generate", ex.what());
    }
  }
}

void Harness::calibrate() {
  if (!cfg_.calibrate) return;
  fs::create_directories(root_ / "calibration");
  for (auto& e : cfg_.scenarios) {
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      const std::string cell = scenario_name(e.scenario) + "_" +
                               background_name(e.background) + "_" + arch_name(arch);
      const fs::path out = root_ / "calibration" / (cell + ".json");
      try {
        if (fs::exists(out)) {
          const json j = json::parse(read_text(out));
          if (j.value("found", false)) e.alpha = j.at("chosen_alpha").get<double>();
          continue;
        }
        ArchitectureSpec aspec{arch, cfg_.side};
        TrainingConfig tcfg;
        tcfg.epochs = cfg_.epochs;
        tcfg.batch_size = cfg_.batch_size;
        tcfg.learning_rate = cfg_.learning_rate > 0.0 ? cfg_.learning_rate
                                                      : default_learning_rate(e.scenario);
        tcfg.seed = cell_seed("calibrate/" + cell, 0, 0);
        const CalibrationResult res =
            calibrate_snr(make_spec(e), aspec, cfg_.alpha_grid, cfg_.calibration_trials,
                          cfg_.calibration_threshold, tcfg);
        json table = json::array();
        for (const auto& row : res.table)
          table.push_back({{"alpha", row.alpha},
                           {"mean_accuracy", row.mean_accuracy},
                           {"trial_accuracies", row.trial_accuracies}});
        json j{{"found", res.found}, {"chosen_alpha", res.chosen_alpha}, {"table", table}};
        write_text_atomic(out, j.dump(2) + "\n");
        if (res.found)
          e.alpha = res.chosen_alpha;
        else
          record_failure(cell, "calibrate", "no alpha in the grid reaches the threshold");
      } catch (const std::exception& ex) {
        record_failure(cell, "calibrate", ex.what());
      }
    }
  }
}

TrainedModel& Harness::model(const ScenarioEntry& e, Arch arch, int k) {
  const fs::path dir = checkpoint_dir(e, arch, k);
  const std::string key = dir.string();
  auto it = model_cache_.find(key);
  if (it != model_cache_.end()) return it->second;
  if (fs::exists(dir / "manifest.json")) {
    TrainedModel m = load_checkpoint(dir);
    if (m.arch.kind != arch || m.arch.side != cfg_.side)
      throw std::runtime_error("checkpoint at " + key + " does not match the requested cell");
    return model_cache_.emplace(key, std::move(m)).first->second;
  }
  ArchitectureSpec aspec{arch, cfg_.side};
  TrainingConfig tcfg;
  tcfg.epochs = cfg_.epochs;
  tcfg.batch_size = cfg_.batch_size;
  tcfg.learning_rate =
      cfg_.learning_rate > 0.0 ? cfg_.learning_rate : default_learning_rate(e.scenario);
  tcfg.seed = cell_seed("train/" + make_spec(e).dataset_name() + "/" + arch_name(arch),
                        static_cast<uint64_t>(k), 0);
  TrainedModel m = ::xtb::train(aspec, dataset(e), tcfg);
  save_checkpoint(m, dir);
  return model_cache_.emplace(key, std::move(m)).first->second;
}

void Harness::train() {
  for (const auto& e : cfg_.scenarios)
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      for (int k = 0; k < cfg_.trainings; ++k) {
        const std::string cell = make_spec(e).dataset_name() + "/" + arch_name(arch) +
                                 "/seed" + std::to_string(k);
        try {
          model(e, arch, k);
        } catch (const std::exception& ex) {
          record_failure(cell, "train", ex.what());
        }
      }
    }
}

std::vector<int> Harness::explained_samples(const ScenarioEntry& e, Arch arch) {
  const fs::path file = dataset_dir(e) / arch_name(arch) / "explained.json";
  if (fs::exists(file)) {
    const json j = json::parse(read_text(file));
    return j.at("samples").get<std::vector<int>>();
  }
  std::vector<TrainedModel> models;
  for (int k = 0; k < cfg_.trainings; ++k) models.push_back(model(e, arch, k));
  std::vector<int> samples = correctly_predicted_intersection(models, dataset(e));
  if (cfg_.max_samples > 0 && static_cast<int>(samples.size()) > cfg_.max_samples)
    samples.resize(static_cast<size_t>(cfg_.max_samples));
  const json j{{"samples", samples}, {"max_samples", cfg_.max_samples}};
  write_text_atomic(file, j.dump(2) + "\n");
  return samples;
}

void Harness::explain() {
  for (const auto& e : cfg_.scenarios)
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      const std::string ds_name = make_spec(e).dataset_name();
      std::vector<int> samples;
      try {
        samples = explained_samples(e, arch);
      } catch (const std::exception& ex) {
        record_failure(ds_name + "/" + arch_name(arch), "explain", ex.what());
        continue;
      }
      for (int k = 0; k < cfg_.trainings; ++k)
        for (const auto& method : cfg_.methods) {
          const std::string cell =
              ds_name + "/" + arch_name(arch) + "/seed" + std::to_string(k) + "/" + method;
          try {
            const Dataset& ds = dataset(e);
            const int d = ds.d();
            const fs::path maps_dir = checkpoint_dir(e, arch, k) / "maps";
            const fs::path data_file = maps_dir / (method + ".f64");
            const fs::path meta_file = maps_dir / (method + ".json");
            if (fs::exists(meta_file)) {
              const json meta = json::parse(read_text(meta_file));
              const auto bytes = read_bytes(data_file);
              if (meta.value("count", -1) == static_cast<int>(samples.size()) &&
                  meta.value("crc32", 0u) == crc32(bytes.data(), bytes.size()))
                continue;  // cached
            }
            const TrainedModel& m = model(e, arch, k);
            const int test_off = ds.split_offset(2);
            std::vector<double> maps(samples.size() * static_cast<size_t>(d), 0.0);

            // reference batch for pfi: the full test split
            std::vector<float> ref_x(ds.x.begin() + static_cast<size_t>(test_off) * d,
                                     ds.x.begin() + static_cast<size_t>(test_off + ds.n_test) * d);
            std::vector<uint8_t> ref_y(ds.y.begin() + test_off,
                                       ds.y.begin() + test_off + ds.n_test);

            auto make_request = [&](int si) {
              AttributionRequest req;
              req.model = &m;
              req.side = cfg_.side;
              req.config = cfg_.explainer;
              const int gi = test_off + samples[static_cast<size_t>(si)];
              req.sample.assign(ds.sample(gi), ds.sample(gi) + d);
              req.target = ds.y[static_cast<size_t>(gi)];
              req.seed = cell_seed("explain/" + cell,
                                   static_cast<uint64_t>(samples[static_cast<size_t>(si)]),
                                   static_cast<uint64_t>(k));
              req.ref_x = ref_x.data();
              req.ref_y = ref_y.data();
              req.ref_count = ds.n_test;
              return req;
            };

            if (method == "pfi" && !samples.empty()) {
              // batch-level importance, identical for every explained sample
              AttributionRequest req = make_request(0);
              req.seed = cell_seed("explain/" + cell, 0, static_cast<uint64_t>(k));
              const ImportanceMap map = ::xtb::explain(method, req);
              for (size_t si = 0; si < samples.size(); ++si)
                std::copy(map.begin(), map.end(), maps.begin() + si * static_cast<size_t>(d));
            } else {
              std::string worker_error;
#pragma omp parallel for schedule(dynamic)
              for (int si = 0; si < static_cast<int>(samples.size()); ++si) {
                try {
                  const ImportanceMap map = ::xtb::explain(method, make_request(si));
                  std::copy(map.begin(), map.end(),
                            maps.begin() + static_cast<size_t>(si) * d);
                } catch (const std::exception& ex) {
#pragma omp critical
                  worker_error = ex.what();
                }
              }
              if (!worker_error.empty()) throw std::runtime_error(worker_error);
            }

            fs::create_directories(maps_dir);
            write_f64(data_file, maps);
            const auto bytes = read_bytes(data_file);
            const json meta{{"count", static_cast<int>(samples.size())},
                            {"d", d},
                            {"method", method},
                            {"crc32", crc32(bytes.data(), bytes.size())}};
            write_text_atomic(meta_file, meta.dump(2) + "\n");
          } catch (const std::exception& ex) {
            record_failure(cell, "explain", ex.what());
          }
        }
    }
}

void Harness::score() {
  fs::create_directories(root_ / "scores");
  std::vector<fs::path> cell_csvs;
  for (const auto& e : cfg_.scenarios)
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      const std::string ds_name = make_spec(e).dataset_name();
      for (int k = 0; k < cfg_.trainings; ++k)
        for (const auto& method : cfg_.methods) {
          const std::string cell =
              ds_name + "/" + arch_name(arch) + "/seed" + std::to_string(k) + "/" + method;
          const fs::path csv = root_ / "scores" /
                               (ds_name + "__" + arch_name(arch) + "__seed" +
                                std::to_string(k) + "__" + method + ".csv");
          try {
            if (!fs::exists(csv)) {
              const Dataset& ds = dataset(e);
              const int d = ds.d();
              const auto samples = explained_samples(e, arch);
              const fs::path maps_dir = checkpoint_dir(e, arch, k) / "maps";
              const auto maps =
                  read_f64(maps_dir / (method + ".f64"), samples.size() * static_cast<size_t>(d));
              std::ostringstream out;
              out << score_csv_header() << "\n";
              const int test_off = ds.split_offset(2);
              for (size_t si = 0; si < samples.size(); ++si) {
                const std::vector<double> map(maps.begin() + si * static_cast<size_t>(d),
                                              maps.begin() + (si + 1) * static_cast<size_t>(d));
                const uint8_t* mask = ds.sample_mask(test_off + samples[si]);
                const MetricResult r = score_map(map, mask, cfg_.side);
                out << scenario_name(e.scenario) << ',' << background_name(e.background) << ','
                    << arch_name(arch) << ',' << method << ',' << samples[si] << ','
                    << g17(r.emd) << ',' << g17(r.ima) << ',' << g17(r.precision) << ','
                    << (r.degenerate ? 1 : 0) << "\n";
              }
              write_text_atomic(csv, out.str());
            }
            cell_csvs.push_back(csv);
          } catch (const std::exception& ex) {
            record_failure(cell, "score", ex.what());
          }
        }
    }
  // merged file, rebuilt from the per-cell artifacts in config order
  std::ostringstream merged;
  merged << score_csv_header() << "\n";
  for (const auto& csv : cell_csvs) {
    const std::string text = read_text(csv);
    const size_t nl = text.find('\n');
    if (nl != std::string::npos) merged << text.substr(nl + 1);
  }
  write_text_atomic(root_ / "scores" / "scores.csv", merged.str());
}

void Harness::report() {
  const fs::path report_dir = root_ / "report";
  fs::create_directories(report_dir);

  std::vector<ScoreRow> rows;
  std::vector<std::string> provenance;
  const fs::path merged = root_ / "scores" / "scores.csv";
  if (fs::exists(merged)) {
    rows = parse_score_csv(read_text(merged));
    provenance.push_back(merged.string());
  }

  struct CellKey {
    std::string scenario, background, arch, method;
    bool operator<(const CellKey& o) const {
      return std::tie(scenario, background, arch, method) <
             std::tie(o.scenario, o.background, o.arch, o.method);
    }
  };
  std::map<CellKey, std::vector<const ScoreRow*>> cells;
  for (const auto& r : rows)
    cells[{r.scenario, r.background, r.arch, r.method}].push_back(&r);

  const std::vector<std::string> metric_names{"emd", "ima", "precision"};
  auto metric_of = [](const ScoreRow& r, int m) {
    return m == 0 ? r.emd : (m == 1 ? r.ima : r.precision);
  };

  std::ostringstream csv;
  csv << "scenario,background,arch,method,metric,count,median,q1,q3,lo_whisker,hi_whisker,"
         "outliers\n";
  json jcells = json::array();
  std::map<std::string, std::map<std::string, std::vector<std::pair<CellKey, BoxStats>>>> panels;
  for (const auto& [key, cell_rows] : cells) {
    for (int m = 0; m < 3; ++m) {
      std::vector<double> vals;
      vals.reserve(cell_rows.size());
      for (const ScoreRow* r : cell_rows) vals.push_back(metric_of(*r, m));
      const BoxStats b = box_stats(std::move(vals));
      csv << key.scenario << ',' << key.background << ',' << key.arch << ',' << key.method << ','
          << metric_names[static_cast<size_t>(m)] << ',' << b.count << ',' << g17(b.median) << ','
          << g17(b.q1) << ',' << g17(b.q3) << ',' << g17(b.lo_whisker) << ','
          << g17(b.hi_whisker) << ',' << b.outliers << "\n";
      jcells.push_back({{"scenario", key.scenario},
                        {"background", key.background},
                        {"arch", key.arch},
                        {"method", key.method},
                        {"metric", metric_names[static_cast<size_t>(m)]},
                        {"count", b.count},
                        {"median", b.median},
                        {"q1", b.q1},
                        {"q3", b.q3},
                        {"lo_whisker", b.lo_whisker},
                        {"hi_whisker", b.hi_whisker},
                        {"outliers", b.outliers}});
      panels[key.scenario][metric_names[static_cast<size_t>(m)]].push_back({key, b});
    }
  }

  // configured cells that produced no scores are reported as missing
  json jmissing = json::array();
  for (const auto& e : cfg_.scenarios)
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      for (const auto& method : cfg_.methods) {
        const CellKey key{scenario_name(e.scenario), background_name(e.background),
                          arch_name(arch), method};
        if (!cells.count(key))
          jmissing.push_back({{"scenario", key.scenario},
                              {"background", key.background},
                              {"arch", key.arch},
                              {"method", key.method}});
      }
    }

  write_text_atomic(report_dir / "aggregate.csv", csv.str());

  for (const auto& e : cfg_.scenarios) {
    provenance.push_back(dataset_dir(e).string());
    for (Arch arch : cfg_.architectures) {
      if (!cell_enabled(cfg_, e, arch)) continue;
      for (int k = 0; k < cfg_.trainings; ++k)
        provenance.push_back(checkpoint_dir(e, arch, k).string());
    }
  }
  const json jreport{{"cells", jcells},
                     {"missing_cells", jmissing},
                     {"conventions",
                      {{"quantiles", "linear interpolation"},
                       {"whiskers", "Tukey, 1.5*IQR beyond the quartiles, clamped to data"},
                       {"map_preprocessing", "absolute values, mass-normalized"}}},
                     {"provenance", provenance}};
  write_text_atomic(report_dir / "report.json", jreport.dump(2) + "\n");

  // one SVG, one panel per (scenario, metric), one box per (background, arch, method)
  std::ostringstream svg;
  const int box_w = 26, box_gap = 10, panel_pad = 56, panel_h = 220;
  std::vector<std::string> scenario_order;
  for (const auto& [sc, _] : panels) scenario_order.push_back(sc);
  int max_boxes = 1;
  for (const auto& [sc, per_metric] : panels)
    for (const auto& [mn, boxes] : per_metric)
      max_boxes = std::max(max_boxes, static_cast<int>(boxes.size()));
  const int panel_w = panel_pad + max_boxes * (box_w + box_gap) + 20;
  const int total_w = panel_w * 3 + 20;
  const int total_h =
      std::max<size_t>(1, scenario_order.size()) * (panel_h + 70) + 20;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\""
      << total_h << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  const std::vector<std::string> bg_fill{"#f2f2f2", "#dce6f2", "#f2e6dc"};
  auto bg_index = [](const std::string& b) {
    return b == "white" ? 0 : (b == "correlated" ? 1 : 2);
  };
  for (size_t si = 0; si < scenario_order.size(); ++si) {
    for (int m = 0; m < 3; ++m) {
      const int ox = 10 + m * panel_w;
      const int oy = 10 + static_cast<int>(si) * (panel_h + 70);
      const auto& boxes = panels[scenario_order[si]][metric_names[static_cast<size_t>(m)]];
      svg << "<text x=\"" << ox + panel_pad << "\" y=\"" << oy + 12 << "\">"
          << scenario_order[si] << " / " << metric_names[static_cast<size_t>(m)] << "</text>\n";
      const int plot_y = oy + 20;
      auto ypix = [&](double v) { return plot_y + (1.0 - std::clamp(v, 0.0, 1.0)) * panel_h; };
      // background shading per group
      for (size_t bi = 0; bi < boxes.size(); ++bi) {
        const int x = ox + panel_pad + static_cast<int>(bi) * (box_w + box_gap);
        svg << "<rect x=\"" << x - box_gap / 2 << "\" y=\"" << plot_y << "\" width=\""
            << box_w + box_gap << "\" height=\"" << panel_h << "\" fill=\""
            << bg_fill[static_cast<size_t>(bg_index(boxes[bi].first.background))]
            << "\"/>\n";
      }
      svg << "<line x1=\"" << ox + panel_pad - 4 << "\" y1=\"" << plot_y << "\" x2=\""
          << ox + panel_pad - 4 << "\" y2=\"" << plot_y + panel_h
          << "\" stroke=\"black\"/>\n";
      for (double tick : {0.0, 0.5, 1.0})
        svg << "<text x=\"" << ox + 8 << "\" y=\"" << ypix(tick) + 3 << "\">" << tick
            << "</text>\n";
      for (size_t bi = 0; bi < boxes.size(); ++bi) {
        const auto& [key, b] = boxes[bi];
        const int x = ox + panel_pad + static_cast<int>(bi) * (box_w + box_gap);
        const int cx = x + box_w / 2;
        svg << "<line x1=\"" << cx << "\" y1=\"" << ypix(b.lo_whisker) << "\" x2=\"" << cx
            << "\" y2=\"" << ypix(b.hi_whisker) << "\" stroke=\"black\"/>\n";
        svg << "<rect x=\"" << x << "\" y=\"" << ypix(b.q3) << "\" width=\"" << box_w
            << "\" height=\"" << std::max(1.0, ypix(b.q1) - ypix(b.q3))
            << "\" fill=\"#7fa8d9\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << x << "\" y1=\"" << ypix(b.median) << "\" x2=\"" << x + box_w
            << "\" y2=\"" << ypix(b.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << cx << "\" y=\"" << plot_y + panel_h + 10
            << "\" text-anchor=\"end\" transform=\"rotate(-45 " << cx << " "
            << plot_y + panel_h + 10 << ")\">" << key.arch << ":" << key.method
            << "</text>\n";
      }
    }
  }
  svg << "</svg>\n";
  write_text_atomic(report_dir / "boxplots.svg", svg.str());

  write_failures_file();
}

void Harness::write_failures_file() const {
  json arr = json::array();
  for (const auto& f : failures_)
    arr.push_back({{"cell", f.cell}, {"stage", f.stage}, {"error", f.error}});
  fs::create_directories(root_ / "report");
  write_text_atomic(root_ / "report" / "failures.json", arr.dump(2) + "\n");
}

void Harness::run_all() {
  generate();
  calibrate();
  train();
  explain();
  score();
  report();
}

Harness::~Harness() {
  if (!failures_.empty()) write_failures_file();
}

}  // namespace xtb
