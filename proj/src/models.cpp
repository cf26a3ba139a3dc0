#include "xtbench/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xtbench/adam.hpp"
#include "xtbench/io.hpp"
#include "xtbench/rng.hpp"

namespace xtb {

namespace fs = std::filesystem;
using nlohmann::json;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::LLR: return "llr";
    case Arch::MLP: return "mlp";
    case Arch::CNN: return "cnn";
  }
  return "?";
}

Arch parse_arch(const std::string& s) {
  if (s == "llr") return Arch::LLR;
  if (s == "mlp") return Arch::MLP;
  if (s == "cnn") return Arch::CNN;
  throw std::invalid_argument("unknown architecture: " + s);
}

std::vector<int> ArchitectureSpec::mlp_widths() const {
  return side == 8 ? std::vector<int>{64, 32, 16, 8} : std::vector<int>{1024, 256, 64, 16};
}

std::vector<ArchitectureSpec::ConvBlock> ArchitectureSpec::cnn_blocks() const {
  std::vector<ConvBlock> blocks;
  if (side == 8) {
    for (int i = 0; i < 4; ++i) blocks.push_back({4, Conv2dAttrs::same(2), Pool2dAttrs{2, 2}});
  } else {
    for (int f : {4, 8, 16, 32}) blocks.push_back({f, Conv2dAttrs::same(4), Pool2dAttrs{2, 1}});
  }
  return blocks;
}

namespace {

Tensor he_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

int cnn_flat_features(const ArchitectureSpec& arch) {
  auto blocks = arch.cnn_blocks();
  int h = arch.side, c = 1;
  for (const auto& b : blocks) {
    h = b.conv.out_dim(h, b.conv.pad_top, b.conv.pad_bottom);
    const int k = std::min(b.pool.kernel, h);
    h = (h - k) / b.pool.stride + 1;
    c = b.filters;
  }
  return c * h * h;
}

}  // namespace

std::vector<Tensor> init_params(const ArchitectureSpec& arch, uint64_t seed) {
  auto rng = derive_rng(seed, 0x1417ull);
  const int d = arch.side * arch.side;
  std::vector<Tensor> p;
  switch (arch.kind) {
    case Arch::LLR:
      p.push_back(he_normal({d, 2}, d, rng));
      p.emplace_back(std::vector<int>{2}, 0.0);
      break;
    case Arch::MLP: {
      int in = d;
      for (int w : arch.mlp_widths()) {
        p.push_back(he_normal({in, w}, in, rng));
        p.emplace_back(std::vector<int>{w}, 0.0);
        in = w;
      }
      p.push_back(he_normal({in, 2}, in, rng));
      p.emplace_back(std::vector<int>{2}, 0.0);
      break;
    }
    case Arch::CNN: {
      int in_c = 1;
      for (const auto& b : arch.cnn_blocks()) {
        const int k = b.conv.kernel;
        p.push_back(he_normal({b.filters, in_c, k, k}, in_c * k * k, rng));
        p.emplace_back(std::vector<int>{b.filters}, 0.0);
        in_c = b.filters;
      }
      const int flat = cnn_flat_features(arch);
      p.push_back(he_normal({flat, 2}, flat, rng));
      p.emplace_back(std::vector<int>{2}, 0.0);
      break;
    }
  }
  return p;
}

int forward_logits(Tape& tape, const ArchitectureSpec& arch, const std::vector<int>& param_ids,
                   int input_id) {
  const int batch = tape.value(input_id).dim(0);
  switch (arch.kind) {
    case Arch::LLR:
      return tape.add_bias(tape.matmul(input_id, param_ids[0]), param_ids[1]);
    case Arch::MLP: {
      int h = input_id;
      size_t pi = 0;
      for (size_t l = 0; l < arch.mlp_widths().size(); ++l) {
        h = tape.relu(tape.add_bias(tape.matmul(h, param_ids[pi]), param_ids[pi + 1]));
        pi += 2;
      }
      return tape.add_bias(tape.matmul(h, param_ids[pi]), param_ids[pi + 1]);
    }
    case Arch::CNN: {
      int h = tape.reshape(input_id, {batch, 1, arch.side, arch.side});
      size_t pi = 0;
      for (const auto& b : arch.cnn_blocks()) {
        h = tape.maxpool2d(
            tape.relu(tape.conv2d(h, param_ids[pi], param_ids[pi + 1], b.conv)), b.pool);
        pi += 2;
      }
      h = tape.reshape(h, {batch, cnn_flat_features(arch)});
      return tape.add_bias(tape.matmul(h, param_ids[pi]), param_ids[pi + 1]);
    }
  }
  throw std::logic_error("forward_logits: bad arch");
}

namespace {

struct TapeRun {
  Tape tape;
  int input_id = -1;
  std::vector<int> param_ids;
  int logits_id = -1;
};

TapeRun run_forward(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                    const float* x, int count, int d) {
  TapeRun r;
  Tensor in({count, d});
  for (size_t i = 0; i < in.size(); ++i) in[i] = static_cast<double>(x[i]);
  r.input_id = r.tape.leaf(std::move(in));
  for (const Tensor& p : params) r.param_ids.push_back(r.tape.leaf(p));
  r.logits_id = forward_logits(r.tape, arch, r.param_ids, r.input_id);
  return r;
}

}  // namespace

Tensor batch_logits(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                    const float* x, int count, int d) {
  TapeRun r = run_forward(arch, params, x, count, d);
  return r.tape.value(r.logits_id);
}

double mean_cross_entropy(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                          const float* x, const uint8_t* y, int count, int d) {
  TapeRun r = run_forward(arch, params, x, count, d);
  const int probs = r.tape.softmax(r.logits_id);
  std::vector<int> labels(y, y + count);
  return r.tape.value(r.tape.cross_entropy(probs, labels))[0];
}

double evaluate_accuracy(const ArchitectureSpec& arch, const std::vector<Tensor>& params,
                         const float* x, const uint8_t* y, int count, int d) {
  if (count <= 0) throw std::invalid_argument("evaluate_accuracy: empty sample list");
  int correct = 0;
  constexpr int kChunk = 256;
  for (int off = 0; off < count; off += kChunk) {
    const int n = std::min(kChunk, count - off);
    const Tensor logits =
        batch_logits(arch, params, x + static_cast<size_t>(off) * d, n, d);
    for (int i = 0; i < n; ++i) {
      const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
      if (pred == y[off + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / count;
}

double evaluate_accuracy(const TrainedModel& model, const Dataset& ds, int split) {
  const int off = ds.split_offset(split);
  return evaluate_accuracy(model.arch, model.params, ds.sample(off), ds.y.data() + off,
                           ds.split_size(split), ds.d());
}

TrainedModel train(const ArchitectureSpec& arch, const Dataset& ds, const TrainingConfig& cfg) {
  if (ds.spec.side != arch.side)
    throw std::invalid_argument("train: dataset side " + std::to_string(ds.spec.side) +
                                " does not match architecture side " + std::to_string(arch.side));
  const int d = ds.d();
  TrainedModel model;
  model.arch = arch;
  model.seed = cfg.seed;
  model.params = init_params(arch, cfg.seed);
  AdamState opt = AdamState::init(model.params, cfg.learning_rate);

  const int n_train = ds.n_train;
  std::vector<int> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);
  auto shuffle_rng = derive_rng(cfg.seed, 0x0bdeull);

  std::vector<Tensor> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<float> bx(static_cast<size_t>(cfg.batch_size) * d);
  std::vector<uint8_t> by(static_cast<size_t>(cfg.batch_size));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int seen = 0;
    for (int off = 0; off < n_train; off += cfg.batch_size) {
      const int n = std::min(cfg.batch_size, n_train - off);
      for (int i = 0; i < n; ++i) {
        const int s = order[static_cast<size_t>(off + i)];
        std::copy_n(ds.sample(s), d, bx.begin() + static_cast<size_t>(i) * d);
        by[static_cast<size_t>(i)] = ds.y[static_cast<size_t>(s)];
      }
      TapeRun r = run_forward(arch, model.params, bx.data(), n, d);
      const int probs = r.tape.softmax(r.logits_id);
      std::vector<int> labels(by.begin(), by.begin() + n);
      const int loss_id = r.tape.cross_entropy(probs, std::move(labels));
      const double loss = r.tape.value(loss_id)[0];
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * n;
      seen += n;
      const auto grads = r.tape.backward(loss_id);
      std::vector<Tensor> pgrads;
      pgrads.reserve(r.param_ids.size());
      for (int id : r.param_ids) pgrads.push_back(grads[static_cast<size_t>(id)]);
      adam_update(model.params, pgrads, opt);
    }
    model.report.train_loss.push_back(epoch_loss / seen);

    const double val_loss =
        mean_cross_entropy(arch, model.params, ds.sample(ds.split_offset(1)),
                           ds.y.data() + ds.split_offset(1), ds.n_val, d);
    model.report.val_loss.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = model.params;
      model.report.best_epoch = epoch;
    }
  }
  model.params = std::move(best_params);
  model.report.best_val_loss = best_val;
  model.report.test_accuracy = evaluate_accuracy(model, ds, 2);
  return model;
}

std::vector<int> correctly_predicted_intersection(const std::vector<TrainedModel>& models,
                                                  const Dataset& ds) {
  const int off = ds.split_offset(2);
  const int n = ds.n_test;
  std::vector<uint8_t> ok(static_cast<size_t>(n), 1);
  for (const TrainedModel& m : models) {
    const Tensor logits = batch_logits(m.arch, m.params, ds.sample(off), n, ds.d());
    for (int i = 0; i < n; ++i) {
      const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
      if (pred != ds.y[static_cast<size_t>(off + i)]) ok[static_cast<size_t>(i)] = 0;
    }
  }
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (ok[static_cast<size_t>(i)]) idx.push_back(i);
  return idx;
}

CalibrationResult calibrate_snr(const ScenarioSpec& spec_template, const ArchitectureSpec& arch,
                                const std::vector<double>& alpha_grid, int trials,
                                double threshold, const TrainingConfig& cfg) {
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
    throw std::invalid_argument("calibrate_snr: alpha grid must be ascending");
  CalibrationResult result;
  for (size_t ai = 0; ai < alpha_grid.size(); ++ai) {
    CalibrationRow row;
    row.alpha = alpha_grid[ai];
    for (int t = 0; t < trials; ++t) {
      ScenarioSpec spec = spec_template;
      spec.alpha = row.alpha;
      spec.seed = splitmix64(splitmix64(spec_template.seed ^ (ai + 1)) ^ (t + 1));
      const Dataset ds = build_dataset(spec);
      TrainingConfig tc = cfg;
      tc.seed = splitmix64(spec.seed ^ 0x7261ull);
      row.trial_accuracies.push_back(train(arch, ds, tc).report.test_accuracy);
    }
    row.mean_accuracy =
        std::accumulate(row.trial_accuracies.begin(), row.trial_accuracies.end(), 0.0) / trials;
    result.table.push_back(row);
    if (!result.found && row.mean_accuracy >= threshold) {
      result.found = true;
      result.chosen_alpha = row.alpha;
    }
  }
  return result;
}

void save_checkpoint(const TrainedModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  json shapes = json::array();
  for (size_t i = 0; i < model.params.size(); ++i) {
    shapes.push_back(model.params[i].shape());
    write_f64(dir / ("p" + std::to_string(i) + ".f64"), model.params[i].vec());
  }
  json manifest{{"architecture", arch_name(model.arch.kind)},
                {"side", model.arch.side},
                {"seed", model.seed},
                {"param_shapes", shapes},
                {"report",
                 {{"train_loss", model.report.train_loss},
                  {"val_loss", model.report.val_loss},
                  {"best_epoch", model.report.best_epoch},
                  {"best_val_loss", model.report.best_val_loss},
                  {"test_accuracy", model.report.test_accuracy}}}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

TrainedModel load_checkpoint(const fs::path& dir) {
  const json manifest = json::parse(read_text(dir / "manifest.json"));
  TrainedModel model;
  model.arch.kind = parse_arch(manifest.at("architecture").get<std::string>());
  model.arch.side = manifest.at("side").get<int>();
  model.seed = manifest.at("seed").get<uint64_t>();
  const json& shapes = manifest.at("param_shapes");
  for (size_t i = 0; i < shapes.size(); ++i) {
    const auto shape = shapes[i].get<std::vector<int>>();
    size_t n = 1;
    for (int s : shape) n *= static_cast<size_t>(s);
    model.params.emplace_back(shape, read_f64(dir / ("p" + std::to_string(i) + ".f64"), n));
  }
  const json& rep = manifest.at("report");
  model.report.train_loss = rep.at("train_loss").get<std::vector<double>>();
  model.report.val_loss = rep.at("val_loss").get<std::vector<double>>();
  model.report.best_epoch = rep.at("best_epoch").get<int>();
  model.report.best_val_loss = rep.at("best_val_loss").get<double>();
  model.report.test_accuracy = rep.at("test_accuracy").get<double>();
  return model;
}

}  // namespace xtb
