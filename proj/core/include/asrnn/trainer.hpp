#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asrnn/config.hpp"
#include "asrnn/diagnostics.hpp"
#include "asrnn/model.hpp"
#include "asrnn/tasks.hpp"

namespace asrnn {

/// Environment variable that replaces `run.output_dir` when set and non-empty.
inline constexpr const char* kOutputDirEnv = "ASRNN_OUTPUT_DIR";

std::filesystem::path resolve_output_dir(const RunConfig& config);

struct MetricsRow {
  std::size_t iteration = 0;  // completed optimizer steps
  double train_loss = 0.0;    // nats, minibatch of this iteration
  double eval_loss = 0.0;     // nats, held-out data
  double eval_metric = 0.0;   // accuracy, or bits per character for charlm
  double grad_norm = 0.0;     // global norm before clipping
  std::optional<double> wall_ms;
};

/// CSV header row for the task ("accuracy" or "bpc" metric column).
std::string metrics_header(TaskKind task, bool wall_clock);
std::string format_metrics_row(const MetricsRow& row, bool wall_clock);

struct Evaluation {
  double loss = 0.0;
  double metric = 0.0;
};

/// Data feed for one task. Batches depend only on the iteration index (and,
/// for charlm, the carried state), so training resumes without RNG state.
class TaskSource {
 public:
  virtual ~TaskSource() = default;

  virtual ModelDims dims(std::size_t hidden) const = 0;
  /// Iterations for the run: copy uses run.iterations; epoch tasks use
  /// run.epochs when positive and run.iterations otherwise.
  virtual std::size_t total_iterations(const RunConfig& config) const = 0;
  /// Minibatch for 0-based iteration `it`. `carry` is set when the recurrent
  /// state of the previous iteration continues into this one.
  virtual TaskBatch batch(std::size_t it, bool& carry) const = 0;
  virtual Evaluation evaluate(Model& model) const = 0;
  virtual bool carries_state() const noexcept { return false; }
};

std::unique_ptr<TaskSource> make_task_source(const RunConfig& config);

/// Mean masked cross-entropy of a forward pass against the batch targets.
LossResult batch_loss(std::span<const Matrix> logits, const TaskBatch& batch, HeadMode mode);

struct TrainOptions {
  std::optional<std::filesystem::path> output_dir;  // nullopt: resolve_output_dir(config); empty path: no files
  std::optional<std::filesystem::path> resume;      // checkpoint to continue from
  std::optional<double> stop_below;                 // stop once a logged eval loss is below this
  std::optional<std::size_t> halt_after;            // stop without a final checkpoint (simulated kill)
  GradientNormTrace* trace = nullptr;
  std::function<void(const MetricsRow&)> on_row;
};

struct TrainResult {
  std::vector<MetricsRow> rows;  // rows produced by this invocation
  std::size_t start_iteration = 0;
  std::size_t iterations_completed = 0;
  std::size_t total_iterations = 0;
  bool stopped_early = false;
  bool halted = false;
  std::optional<std::string> fault;  // NumericFault or SingularSaturation message
  std::filesystem::path metrics_path, checkpoint_path;
};

/// Runs the training loop: batch, forward, loss, backward, clip, RMSProp step.
/// Metrics are logged every run.log_interval iterations and at the last
/// iteration. A numeric fault stops the run and leaves the last checkpoint
/// on disk untouched.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

struct Checkpoint;
/// Checkpoint of the freshly initialized model (iteration 0).
Checkpoint initial_checkpoint(const RunConfig& config);

}  // namespace asrnn
