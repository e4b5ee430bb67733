#include "asrnn/trainer.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "asrnn/checkpoint.hpp"
#include "asrnn/error.hpp"
#include "asrnn/optim.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// --- copy memory -------------------------------------------------------------

class CopySource final : public TaskSource {
 public:
  explicit CopySource(const RunConfig& c)
      : gen_(CopySpec{c.copy_k, c.copy_l, 8, c.batch, split_seed(c.seed, SeedTag::kData)}),
        eval_(gen_copy_batch(CopySpec{c.copy_k, c.copy_l, 8, c.copy_eval_batch, split_seed(c.seed, SeedTag::kEval)})) {}

  ModelDims dims(std::size_t hidden) const override {
    const std::size_t v = gen_.spec().vocab_size();
    return {v, hidden, v, HeadMode::kPerStep};
  }
  std::size_t total_iterations(const RunConfig& c) const override { return c.iterations; }
  TaskBatch batch(std::size_t it, bool& carry) const override {
    carry = false;
    return gen_.batch(it);
  }
  Evaluation evaluate(Model& model) const override {
    const auto logits = model.forward(eval_.inputs, model.zero_state(eval_.batch()));
    const LossResult r = batch_loss(logits, eval_, HeadMode::kPerStep);
    return {r.loss, static_cast<double>(r.correct) / static_cast<double>(r.positions)};
  }

 private:
  CopyTaskGenerator gen_;
  TaskBatch eval_;
};

// --- pixel MNIST -------------------------------------------------------------

class PixelSource final : public TaskSource {
 public:
  explicit PixelSource(const RunConfig& c) : batch_size_(c.batch), eval_samples_(c.mnist_eval_samples) {
    train_ = load_mnist_idx(c.mnist_train_images, c.mnist_train_labels);
    test_ = c.mnist_test_images.empty() ? train_ : load_mnist_idx(c.mnist_test_images, c.mnist_test_labels);
    if (c.task == TaskKind::kPmnist) {
      const auto perm = make_permutation(train_.sequence_length(), split_seed(c.seed, SeedTag::kPermutation));
      train_ = apply_fixed_permutation(train_, perm);
      test_ = apply_fixed_permutation(test_, perm);
    }
    batcher_.emplace(train_, c.batch, split_seed(c.seed, SeedTag::kData));
  }

  ModelDims dims(std::size_t hidden) const override { return {1, hidden, 10, HeadMode::kFinalState}; }
  std::size_t total_iterations(const RunConfig& c) const override {
    return c.epochs > 0 ? c.epochs * batcher_->batches_per_epoch() : c.iterations;
  }
  TaskBatch batch(std::size_t it, bool& carry) const override {
    carry = false;
    return batcher_->batch(it);
  }
  Evaluation evaluate(Model& model) const override {
    const std::size_t n = eval_samples_ == 0 ? test_.size() : std::min(eval_samples_, test_.size());
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch_size_) {
      std::vector<std::size_t> idx;
      for (std::size_t k = start; k < std::min(n, start + batch_size_); ++k) idx.push_back(k);
      const TaskBatch b = make_pixel_batch(test_, idx);
      const auto logits = model.forward(b.inputs, model.zero_state(b.batch()));
      const LossResult r = batch_loss(logits, b, HeadMode::kFinalState);
      loss += r.loss * static_cast<double>(r.positions);
      correct += r.correct;
    }
    return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
  }

 private:
  std::size_t batch_size_, eval_samples_;
  PixelDataset train_, test_;
  std::optional<PixelBatcher> batcher_;
};

// --- character language model ------------------------------------------------

class CharSource final : public TaskSource {
 public:
  explicit CharSource(const RunConfig& c)
      : corpus_(load_corpus(CorpusSpec{c.corpus, c.tbptt_len, c.train_fraction, c.valid_fraction})),
        train_(corpus_.train, corpus_.vocab.size(), c.tbptt_len, c.batch),
        valid_(corpus_.valid, corpus_.vocab.size(), c.tbptt_len, eval_lanes(corpus_.valid.size(), c)),
        eval_windows_(c.eval_windows) {}

  ModelDims dims(std::size_t hidden) const override {
    const std::size_t v = corpus_.vocab.size();
    return {v, hidden, v, HeadMode::kPerStep};
  }
  std::size_t total_iterations(const RunConfig& c) const override {
    return c.epochs > 0 ? c.epochs * train_.windows_per_epoch() : c.iterations;
  }
  TaskBatch batch(std::size_t it, bool& carry) const override {
    TbpttWindow w = train_.window(it % train_.windows_per_epoch());
    carry = w.carry;
    return std::move(w.batch);
  }
  Evaluation evaluate(Model& model) const override {
    const std::size_t n = eval_windows_ == 0 ? valid_.windows_per_epoch()
                                             : std::min(eval_windows_, valid_.windows_per_epoch());
    double loss = 0.0;
    std::size_t positions = 0;
    RecurrentState state;
    for (std::size_t i = 0; i < n; ++i) {
      const TbpttWindow w = valid_.window(i);
      if (!w.carry) state = model.zero_state(w.batch.batch());
      const auto logits = model.forward(w.batch.inputs, state);
      state = model.final_state();
      const LossResult r = batch_loss(logits, w.batch, HeadMode::kPerStep);
      loss += r.loss * static_cast<double>(r.positions);
      positions += r.positions;
    }
    const double mean = loss / static_cast<double>(positions);
    return {mean, metric_bpc(mean)};
  }
  bool carries_state() const noexcept override { return true; }

 private:
  static std::size_t eval_lanes(std::size_t n, const RunConfig& c) {
    if (n < c.tbptt_len + 1) throw ConfigError("validation split shorter than one window", 0, "charlm.valid_fraction");
    return std::min(c.batch, (n - 1) / c.tbptt_len);
  }

  Corpus corpus_;
  TbpttStream train_, valid_;
  std::size_t eval_windows_;
};

void check_paths(const RunConfig& c) {
  auto exists = [](const std::string& p, const char* field) {
    if (p.empty() || !std::filesystem::exists(p)) throw ConfigError("path does not exist: '" + p + "'", 0, field);
  };
  switch (c.task) {
    case TaskKind::kCopy: break;
    case TaskKind::kSmnist:
    case TaskKind::kPmnist:
      exists(c.mnist_train_images, "mnist.train_images");
      exists(c.mnist_train_labels, "mnist.train_labels");
      if (!c.mnist_test_images.empty()) {
        exists(c.mnist_test_images, "mnist.test_images");
        exists(c.mnist_test_labels, "mnist.test_labels");
      }
      break;
    case TaskKind::kCharlm: exists(c.corpus, "charlm.corpus"); break;
  }
}

std::string seed_header(const RunConfig& c) {
  std::ostringstream out;
  out << "# seed=" << c.seed << " init_seed=" << split_seed(c.seed, SeedTag::kInit)
      << " data_seed=" << split_seed(c.seed, SeedTag::kData)
      << " permutation_seed=" << split_seed(c.seed, SeedTag::kPermutation)
      << " eval_seed=" << split_seed(c.seed, SeedTag::kEval) << "\n";
  out << "# task=" << to_string(c.task) << " model=" << to_string(c.model) << " d_h=" << c.hidden
      << " batch=" << c.batch << "\n";
  return out.str();
}

/// Keeps comment lines, the header and rows whose iteration is <= `last`.
std::string truncate_metrics(const std::filesystem::path& path, std::size_t last) {
  std::ifstream in(path);
  std::string out, line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#' || !header_seen) {
      if (line.front() != '#') header_seen = true;
      out += line + "\n";
      continue;
    }
    std::size_t it = 0;
    std::from_chars(line.data(), line.data() + line.size(), it);
    if (it <= last) out += line + "\n";
  }
  return out;
}

void require_compatible(const RunConfig& now, const RunConfig& saved) {
  auto same = [](bool ok, const char* field) {
    if (!ok) throw ConfigError("differs from the checkpoint being resumed", 0, field);
  };
  same(now.task == saved.task, "run.task");
  same(now.model == saved.model, "run.model");
  same(now.seed == saved.seed, "run.seed");
  same(now.batch == saved.batch, "run.batch");
  same(now.hidden == saved.hidden, "model.d_h");
}

}  // namespace

std::filesystem::path resolve_output_dir(const RunConfig& config) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

std::string metrics_header(TaskKind task, bool wall_clock) {
  std::string h = "iteration,train_loss,eval_loss,";
  h += task == TaskKind::kCharlm ? "eval_bpc" : "eval_accuracy";
  h += ",grad_norm";
  if (wall_clock) h += ",wall_ms";
  return h;
}

std::string format_metrics_row(const MetricsRow& r, bool wall_clock) {
  std::string s = std::to_string(r.iteration) + "," + fmt(r.train_loss) + "," + fmt(r.eval_loss) + "," +
                  fmt(r.eval_metric) + "," + fmt(r.grad_norm);
  if (wall_clock) s += "," + fmt(r.wall_ms.value_or(0.0));
  return s;
}

std::unique_ptr<TaskSource> make_task_source(const RunConfig& c) {
  check_paths(c);
  switch (c.task) {
    case TaskKind::kCopy: return std::make_unique<CopySource>(c);
    case TaskKind::kSmnist:
    case TaskKind::kPmnist: return std::make_unique<PixelSource>(c);
    case TaskKind::kCharlm: return std::make_unique<CharSource>(c);
  }
  throw ContractViolation("make_task_source: unknown task");
}

LossResult batch_loss(std::span<const Matrix> logits, const TaskBatch& batch, HeadMode mode) {
  if (mode == HeadMode::kFinalState) return loss_and_grad(logits, batch.final_targets(), batch.final_mask());
  return loss_and_grad(logits, batch.targets, batch.mask);
}

Checkpoint initial_checkpoint(const RunConfig& config) {
  config.validate();
  const ModelDims dims = make_task_source(config)->dims(config.hidden);
  auto model = make_model(config.model, dims, config.model_init());
  Checkpoint c;
  c.config = config;
  c.model = config.model;
  c.dims = dims;
  c.init = config.model_init();
  c.rng_seed = config.seed;
  c.parameters = export_parameters(*model);
  return c;
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const auto source = make_task_source(config);
  const ModelDims dims = source->dims(config.hidden);

  TrainResult result;
  result.total_iterations = source->total_iterations(config);
  if (result.total_iterations == 0) throw ConfigError("run has zero iterations", 0, "run.iterations");

  std::unique_ptr<Model> model;
  OptimState opt;
  RecurrentState carried;
  if (options.resume) {
    Checkpoint ckpt = load_checkpoint(*options.resume);
    require_compatible(config, ckpt.config);
    model = restore_model(ckpt);
    opt = std::move(ckpt.optimizer);
    carried = std::move(ckpt.carried_state);
    result.start_iteration = ckpt.iteration;
  } else {
    model = make_model(config.model, dims, config.model_init());
  }
  if (model->dims().input != dims.input || model->dims().output != dims.output)
    throw ContractViolation("checkpoint dims do not match the task");

  const std::filesystem::path out_dir = options.output_dir ? *options.output_dir : resolve_output_dir(config);
  const bool files = !out_dir.empty();
  std::ofstream metrics;
  if (files) {
    std::filesystem::create_directories(out_dir);
    result.metrics_path = out_dir / "metrics.csv";
    result.checkpoint_path = out_dir / "checkpoint.json";
    std::string prefix;
    if (options.resume && std::filesystem::exists(result.metrics_path))
      prefix = truncate_metrics(result.metrics_path, result.start_iteration);
    else
      prefix = seed_header(config) + metrics_header(config.task, config.record_wall_clock) + "\n";
    metrics.open(result.metrics_path, std::ios::binary | std::ios::trunc);
    metrics << prefix << std::flush;
    std::ofstream(out_dir / "config.cfg", std::ios::binary | std::ios::trunc) << serialize_config(config);
  }

  auto snapshot = [&](std::size_t iteration) {
    Checkpoint c;
    c.config = config;
    c.model = config.model;
    c.dims = model->dims();
    c.init = config.model_init();
    c.rng_seed = config.seed;
    c.iteration = iteration;
    c.parameters = export_parameters(*model);
    c.optimizer = opt;
    c.carried_state = carried;
    save_checkpoint(c, result.checkpoint_path);
  };

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t done = result.start_iteration;
  try {
    for (std::size_t it = result.start_iteration; it < result.total_iterations; ++it) {
      if (options.halt_after && it >= *options.halt_after) {
        result.halted = true;
        break;
      }
      bool carry = false;
      const TaskBatch batch = source->batch(it, carry);
      const RecurrentState state = carry && !carried.empty() ? carried : model->zero_state(batch.batch());
      const auto logits = model->forward(batch.inputs, state);
      const LossResult loss = batch_loss(logits, batch, dims.mode);
      if (source->carries_state()) carried = model->final_state();
      GradBundle grads = model->backward(loss.grad_logits, options.trace ? options.trace->begin_record() : HiddenGradHook{});
      const double norm = config.optim.clip_norm ? clip_global_norm(grads, *config.optim.clip_norm) : grads.global_norm();
      if (!std::isfinite(loss.loss) || !std::isfinite(norm)) throw NumericFault("non-finite loss or gradient", 0);
      const auto views = model->parameters();
      rmsprop_step(opt, views, grads, config.optim);
      done = it + 1;

      const bool last = done == result.total_iterations;
      if (done % config.log_interval == 0 || last) {
        const Evaluation ev = source->evaluate(*model);
        if (!std::isfinite(ev.loss)) throw NumericFault("non-finite evaluation loss", 0);
        MetricsRow row{done, loss.loss, ev.loss, ev.metric, norm, std::nullopt};
        if (config.record_wall_clock)
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (files) metrics << format_metrics_row(row, config.record_wall_clock) << "\n" << std::flush;
        result.rows.push_back(row);
        if (options.on_row) options.on_row(row);
        if (options.stop_below && ev.loss < *options.stop_below) {
          result.stopped_early = true;
          result.iterations_completed = done;
          break;
        }
      }
      if (files && config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0 && !last) snapshot(done);
    }
  } catch (const NumericFault& e) {
    result.fault = e.what();
  } catch (const SingularSaturation& e) {
    result.fault = e.what();
  }
  result.iterations_completed = done;

  if (files) {
    if (!result.fault && !result.halted) snapshot(done);
    nlohmann::ordered_json summary;
    summary["task"] = to_string(config.task);
    summary["model"] = to_string(config.model);
    summary["seed"] = config.seed;
    summary["iterations_completed"] = done;
    summary["total_iterations"] = result.total_iterations;
    summary["stopped_early"] = result.stopped_early;
    summary["halted"] = result.halted;
    summary["fault"] = result.fault ? nlohmann::ordered_json(*result.fault) : nlohmann::ordered_json(nullptr);
    if (!result.rows.empty()) {
      const MetricsRow& r = result.rows.back();
      summary["final"] = {{"iteration", r.iteration},
                          {"train_loss", r.train_loss},
                          {"eval_loss", r.eval_loss},
                          {config.task == TaskKind::kCharlm ? "eval_bpc" : "eval_accuracy", r.eval_metric},
                          {"grad_norm", r.grad_norm}};
    }
    std::ofstream(out_dir / "summary.json", std::ios::binary | std::ios::trunc) << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace asrnn
