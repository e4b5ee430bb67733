// asrnn: train, gradient-check and inspect adaptive-saturated RNNs.
//
//   asrnn train --config <path> [--set section.key=value ...] [--resume <ckpt>]
//   asrnn init --config <path> [--set ...] --out <ckpt>
//   asrnn gradcheck --model <m> --dh <n> --dx <n> --T <n> --seed <s>
//   asrnn diag --checkpoint <path> --t1 <n> --t2 <n>
//
// Exit status: 0 success, 1 usage or input error, 2 gradcheck failure,
// 3 numeric fault during training.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asrnn/checkpoint.hpp"
#include "asrnn/config.hpp"
#include "asrnn/diagnostics.hpp"
#include "asrnn/error.hpp"
#include "asrnn/gradcheck.hpp"
#include "asrnn/trainer.hpp"

namespace {

using namespace asrnn;

constexpr int kExitInput = 1;
constexpr int kExitGradcheck = 2;
constexpr int kExitFault = 3;

RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c = load_config(path);
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::optional<std::string>& resume, std::optional<double> stop_below) {
  const RunConfig config = build_config(config_path, overrides);
  TrainOptions opts;
  if (resume) opts.resume = *resume;
  opts.stop_below = stop_below;
  opts.on_row = [&config](const MetricsRow& r) {
    std::cout << format_metrics_row(r, config.record_wall_clock) << "\n" << std::flush;
  };
  std::cout << metrics_header(config.task, config.record_wall_clock) << "\n";
  const TrainResult result = train(config, opts);
  std::cerr << "metrics: " << result.metrics_path.string() << "\n";
  if (result.fault) {
    std::cerr << "numeric fault: " << *result.fault << "; last good checkpoint kept at "
              << result.checkpoint_path.string() << "\n";
    return kExitFault;
  }
  std::cerr << "checkpoint: " << result.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_init(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out) {
  const RunConfig config = build_config(config_path, overrides);
  save_checkpoint(initial_checkpoint(config), out);
  std::cerr << "checkpoint: " << out << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opts, bool json) {
  const GradcheckReport report = run_gradcheck(opts);
  if (json) {
    std::cout << to_json(report) << "\n";
  } else {
    for (const TensorCheck& t : report.tensors) {
      std::printf("%-10s n=%-5zu max_rel_error=%.3e max_abs_error=%.3e\n", t.name.c_str(), t.count, t.max_rel_error,
                  t.max_abs_error);
    }
    std::printf("overall max_rel_error=%.3e tolerance=%.0e %s\n", report.max_rel_error, kGradcheckCliTolerance,
                report.passes(kGradcheckCliTolerance) ? "PASS" : "FAIL");
  }
  return report.passes(kGradcheckCliTolerance) ? 0 : kExitGradcheck;
}

/// One batch column of the checkpoint's task, truncated to `steps`.
Sequence sample_inputs(const RunConfig& config, std::size_t steps, bool zero_inputs, std::size_t input_dim) {
  if (zero_inputs) return Sequence(steps, Matrix(input_dim, 1));
  bool carry = false;
  const TaskBatch b = make_task_source(config)->batch(0, carry);
  if (steps > b.steps())
    throw ContractViolation("t2 exceeds the task sequence length " + std::to_string(b.steps()));
  Sequence out;
  for (std::size_t t = 0; t < steps; ++t) out.emplace_back(input_dim, 1, b.inputs[t].col(0));
  return out;
}

int cmd_diag(const std::string& path, std::size_t t1, std::size_t t2, std::optional<std::size_t> steps,
             bool zero_inputs, std::optional<double> c_x, const std::optional<std::string>& out_path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.model != ModelKind::kAsRnn) throw ContractViolation("diag requires an asrnn checkpoint");
  auto model = restore_model(ckpt);
  auto& as = dynamic_cast<AsRnnModel&>(*model);
  const std::size_t horizon = std::max<std::size_t>(steps.value_or(t2), 1);
  if (t1 > t2 || t2 > horizon) throw ContractViolation("diag requires 0 <= t1 <= t2 <= steps");

  const Sequence inputs = sample_inputs(ckpt.config, horizon, zero_inputs, ckpt.dims.input);
  model->forward(inputs, model->zero_state(1));
  const BpttCache& cache = as.cache();

  TheoremReport theorem = theorem_precondition_check(cache.weights, c_x.value_or(ckpt.config.input_bound), horizon);
  const JacobianWindow window = window_jacobian(cache, t1, t2);
  theorem.sigma_min_window = window.spectrum.sigma_min;
  const SaturationStats sat = saturation_stats(cache, &theorem);

  nlohmann::ordered_json j;
  j["checkpoint"] = path;
  j["iteration"] = ckpt.iteration;
  j["steps"] = horizon;
  j["theorem"] = nlohmann::ordered_json::parse(to_json(theorem));
  j["window"] = nlohmann::ordered_json::parse(to_json(window));
  j["saturation"] = nlohmann::ordered_json::parse(to_json(sat));
  const std::string text = j.dump(2);
  std::cout << text << "\n";
  if (out_path) std::ofstream(*out_path, std::ios::binary | std::ios::trunc) << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asrnn: adaptive-saturated RNN sequence-learning lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> resume;
  std::optional<double> stop_below;
  auto* train_cmd = app.add_subcommand("train", "Run a training job");
  train_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--set", overrides, "Override, section.key=value (repeatable)");
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_option("--stop-below", stop_below, "Stop once the logged eval loss is below this value");

  std::string init_out;
  auto* init_cmd = app.add_subcommand("init", "Write the checkpoint of a freshly initialized model");
  init_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  init_cmd->add_option("--set", overrides, "Override, section.key=value (repeatable)");
  init_cmd->add_option("--out", init_out, "Checkpoint path")->required();

  GradcheckOptions gc;
  std::string gc_model = "asrnn";
  bool gc_json = false, gc_final = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad_cmd->add_option("--model", gc_model, "asrnn | rnn | lstm")->required();
  grad_cmd->add_option("--dh", gc.hidden, "Hidden size")->required()->check(CLI::PositiveNumber);
  grad_cmd->add_option("--dx", gc.input, "Input size")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--T", gc.steps, "Sequence length")->required()->check(CLI::PositiveNumber);
  grad_cmd->add_option("--seed", gc.seed, "Seed");
  grad_cmd->add_option("--batch", gc.batch, "Batch size")->check(CLI::PositiveNumber);
  grad_cmd->add_flag("--final-state", gc_final, "Score only the final step");
  grad_cmd->add_flag("--json", gc_json, "Print the report as JSON");
  grad_cmd->add_flag("--corrupt", gc.corrupt, "Negative control: perturb one analytic coordinate")
      ->group("");

  std::string ckpt_path;
  std::size_t t1 = 0, t2 = 0;
  std::optional<std::size_t> diag_steps;
  std::optional<double> diag_cx;
  std::optional<std::string> diag_out;
  bool zero_inputs = false;
  auto* diag_cmd = app.add_subcommand("diag", "Jacobian and theorem diagnostics for an asrnn checkpoint");
  diag_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--t1", t1, "Window start")->required();
  diag_cmd->add_option("--t2", t2, "Window end")->required();
  diag_cmd->add_option("--steps", diag_steps, "Forward length and theorem horizon (default t2)");
  diag_cmd->add_option("--c-x", diag_cx, "Input bound C_x (default diag.c_x from the config)");
  diag_cmd->add_flag("--zero-inputs", zero_inputs, "Use an all-zero input sequence");
  diag_cmd->add_option("--out", diag_out, "Also write the JSON report to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(config_path, overrides, resume, stop_below);
    if (*init_cmd) return cmd_init(config_path, overrides, init_out);
    if (*grad_cmd) {
      gc.model = parse_model_kind(gc_model);
      if (gc_final) gc.mode = HeadMode::kFinalState;
      return cmd_gradcheck(gc, gc_json);
    }
    if (*diag_cmd) return cmd_diag(ckpt_path, t1, t2, diag_steps, zero_inputs, diag_cx, diag_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return kExitFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
