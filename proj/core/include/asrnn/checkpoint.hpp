#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "asrnn/config.hpp"
#include "asrnn/model.hpp"
#include "asrnn/optim.hpp"
#include "asrnn/tensor_bundle.hpp"

namespace asrnn {

inline constexpr int kCheckpointVersion = 1;

/// Resumable training snapshot. Parameters are stored as free coordinates
/// (skew generators, diagonal seeds), never as materialized matrices.
///
/// JSON layout:
///   {"format": "asrnn-checkpoint", "version": 1, "config": "<config text>",
///    "model": "asrnn", "dims": {...}, "init": {...}, "rng_seed": n,
///    "iteration": n, "tensors": {name: {"shape", "group", "data"}},
///    "optimizer": {"step": n, "mean_square": {name: {...}}},
///    "carried_state": [{"shape", "data"}, ...]}
struct Checkpoint {
  RunConfig config;
  ModelKind model = ModelKind::kAsRnn;
  ModelDims dims;
  ModelInit init;
  std::uint64_t rng_seed = 0;
  std::size_t iteration = 0;  // completed optimizer steps
  TensorBundle parameters;
  OptimState optimizer;
  RecurrentState carried_state;  // detached TBPTT state; empty when not carrying
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
/// Throws FormatError on malformed JSON or missing fields.
Checkpoint checkpoint_from_json(std::string_view text);

/// Writes through a temporary file and renames, so a crash never leaves a torn checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model and loads the stored parameters. Throws
/// ContractViolation if the tensors do not fit the recorded dims.
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);

}  // namespace asrnn
