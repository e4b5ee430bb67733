#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asrnn/cells.hpp"

namespace asrnn {

/// One minibatch, time-major: inputs[t] is d_x x batch, targets[t][b] and
/// mask[t][b] index the same positions.
struct TaskBatch {
  Sequence inputs;
  TargetGrid targets;
  MaskGrid mask;

  std::size_t steps() const noexcept { return inputs.size(); }
  std::size_t batch() const noexcept { return inputs.empty() ? 0 : inputs.front().cols(); }
  std::size_t input_dim() const noexcept { return inputs.empty() ? 0 : inputs.front().rows(); }
  /// Targets and mask of the final step only, for final-state heads.
  TargetGrid final_targets() const { return {targets.back()}; }
  MaskGrid final_mask() const { return {mask.back()}; }
};

/// Debug dump: {"steps", "batch", "input_dim", "inputs": [[row-major d_x*batch] per t], "targets", "mask"}.
std::string batch_to_json(const TaskBatch& batch);

// ---------------------------------------------------------------------------
// Copy memory
// ---------------------------------------------------------------------------

inline constexpr int kCopyBlank = 0;
inline constexpr int kCopyStart = 1;
inline constexpr int kCopyFirstLetter = 2;

struct CopySpec {
  std::size_t recall_len = 10;     // K
  std::size_t delay_len = 100;     // L
  std::size_t alphabet_size = 8;
  std::size_t batch = 128;
  std::uint64_t rng_seed = 0;

  std::size_t sequence_length() const noexcept { return delay_len + 2 * recall_len; }
  std::size_t vocab_size() const noexcept { return alphabet_size + 2; }
};

/// Input: K letters, L blanks, start marker, K-1 blanks. Target: L+K blanks
/// then the K letters. Every position is scored.
TaskBatch gen_copy_batch(const CopySpec& spec);

/// Loss of the predictor that emits blank with certainty, then a uniform
/// letter over the last K positions: K ln(alphabet) / (L + 2K).
double copy_baseline_loss(std::size_t recall_len, std::size_t delay_len, std::size_t alphabet_size = 8);

/// Batch i is drawn from split_seed(spec.rng_seed, i), so any batch can be
/// regenerated without replaying earlier ones.
class CopyTaskGenerator {
 public:
  explicit CopyTaskGenerator(CopySpec spec) : spec_(spec) {}
  TaskBatch batch(std::uint64_t index) const;
  const CopySpec& spec() const noexcept { return spec_; }

 private:
  CopySpec spec_;
};

// ---------------------------------------------------------------------------
// Pixelated MNIST (IDX files)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct PixelDataset {
  std::size_t rows = 0, cols = 0;
  std::vector<Vector> images;  // each flattened row-major, scaled to [0, 1]
  std::vector<int> labels;     // 0..9

  std::size_t size() const noexcept { return images.size(); }
  std::size_t sequence_length() const noexcept { return rows * cols; }
};

/// Throws FormatError (with byte offset) on bad magic numbers, truncated
/// payloads, count mismatch or labels outside 0..9.
PixelDataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
PixelDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Permutation of 0..n-1 drawn once from the seed.
std::vector<std::size_t> make_permutation(std::size_t n, std::uint64_t rng_seed);
std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm);

/// out.images[k][i] = in.images[k][perm[i]] for every sample.
PixelDataset apply_fixed_permutation(const PixelDataset& dataset, std::span<const std::size_t> perm);
PixelDataset apply_fixed_permutation(const PixelDataset& dataset, std::uint64_t rng_seed);

/// Scalar-input sequence batch; the label is the target of the final step only.
TaskBatch make_pixel_batch(const PixelDataset& dataset, std::span<const std::size_t> indices);

/// Epoch-wise shuffled minibatches; epoch e is shuffled by split_seed(seed, e).
class PixelBatcher {
 public:
  PixelBatcher(const PixelDataset& dataset, std::size_t batch, std::uint64_t seed);
  std::size_t batches_per_epoch() const noexcept { return per_epoch_; }
  TaskBatch batch(std::uint64_t iteration) const;

 private:
  const PixelDataset* dataset_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t per_epoch_;
};

// ---------------------------------------------------------------------------
// Character corpus
// ---------------------------------------------------------------------------

/// Code-point vocabulary built from a corpus. '\n' doubles as the
/// end-of-sentence symbol and is always present.
class Vocabulary {
 public:
  static Vocabulary from_text(std::u32string_view text);

  std::size_t size() const noexcept { return symbols_.size(); }
  int id(char32_t symbol) const;
  char32_t symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  int eos_id() const { return id(U'\n'); }
  std::span<const char32_t> symbols() const noexcept { return symbols_; }

 private:
  std::vector<char32_t> symbols_;  // sorted by code point
  std::unordered_map<char32_t, int> index_;
};

/// Throws FormatError on malformed UTF-8.
std::u32string decode_utf8(std::string_view bytes);

struct CorpusSpec {
  std::string path;
  std::size_t tbptt_len = 150;
  double train_fraction = 0.9;
  double valid_fraction = 0.05;  // remainder is test
};

struct Corpus {
  Vocabulary vocab;
  std::vector<int> train, valid, test;
};

Corpus corpus_from_text(std::string_view utf8, double train_fraction, double valid_fraction);
Corpus load_corpus(const CorpusSpec& spec);

struct TbpttWindow {
  TaskBatch batch;
  bool carry = false;  // true: continue from the previous window's (detached) state
  std::size_t index = 0;
};

/// Splits a token stream into `batch` contiguous lanes and walks them in
/// windows of T steps; targets are the inputs shifted by one.
class TbpttStream {
 public:
  /// Requires ids.size() - 1 >= batch * T.
  TbpttStream(std::span<const int> ids, std::size_t vocab_size, std::size_t tbptt_len, std::size_t batch);

  std::size_t windows_per_epoch() const noexcept { return windows_; }
  std::size_t lane_length() const noexcept { return lane_len_; }
  /// Next window of the current epoch, or nullopt at the end of the epoch.
  std::optional<TbpttWindow> next();
  void seek(std::size_t window) noexcept { cursor_ = window; }
  void reset() noexcept { cursor_ = 0; }
  TbpttWindow window(std::size_t index) const;

 private:
  std::span<const int> ids_;
  std::size_t vocab_, len_, batch_, lane_len_, windows_;
  std::size_t cursor_ = 0;
};

TbpttStream make_tbptt_stream(const Corpus& corpus, std::size_t tbptt_len, std::size_t batch);

/// Bits per character from a cross-entropy in nats.
double metric_bpc(double loss_nats);

/// Order-0 entropy of a token stream, in bits.
double unigram_entropy_bits(std::span<const int> ids, std::size_t vocab_size);

}  // namespace asrnn
