#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asrnn/model.hpp"
#include "asrnn/optim.hpp"
#include "asrnn/parameterization.hpp"

namespace asrnn {

enum class TaskKind { kCopy, kSmnist, kPmnist, kCharlm };

std::string_view to_string(TaskKind t) noexcept;
TaskKind parse_task_kind(std::string_view s);

/// Everything needed to reproduce a training run. Serialized as sectioned
/// `key = value` text; every key is addressable as `section.key` for
/// command-line overrides.
struct RunConfig {
  // [run]
  TaskKind task = TaskKind::kCopy;
  ModelKind model = ModelKind::kAsRnn;
  std::uint64_t seed = 5544;
  std::string output_dir = "runs/default";
  std::size_t iterations = 4000;  // copy task; epoch tasks fall back to it when epochs == 0
  std::size_t epochs = 0;         // pixel and character tasks
  std::size_t batch = 128;
  std::size_t log_interval = 100;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  bool record_wall_clock = false;       // adds a wall_ms column (breaks byte-identical reruns)

  // [model]
  std::size_t hidden = 138;

  // [init]
  InitScheme init_scheme = InitScheme::kHenaff;
  InitScheme uf_scheme = InitScheme::kIdentity;
  double init_a = 0.0;
  double init_b = 0.0;
  double init_epsilon = 2e-5;

  // [optim]
  OptimConfig optim{2e-4, 1e-4, 0.9, 10.0, 1e-8};

  // [copy]
  std::size_t copy_k = 10;
  std::size_t copy_l = 1000;
  std::size_t copy_eval_batch = 256;

  // [mnist]
  std::string mnist_train_images, mnist_train_labels, mnist_test_images, mnist_test_labels;
  std::size_t mnist_eval_samples = 1000;

  // [charlm]
  std::string corpus;
  std::size_t tbptt_len = 150;
  double train_fraction = 0.9;
  double valid_fraction = 0.05;
  std::size_t eval_windows = 8;  // 0: whole validation split

  // [diag]
  double input_bound = 1.0;  // C_x

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  /// Throws ConfigError on non-positive counts or out-of-range values.
  void validate() const;
  ModelInit model_init() const;
  InitSpec init_spec() const;
};

/// Parses config text. Unknown keys, bad values and malformed lines raise
/// ConfigError carrying the line number and field name.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);

/// Applies one `section.key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

/// All recognized keys, in serialization order.
std::vector<std::string> config_keys();

}  // namespace asrnn
