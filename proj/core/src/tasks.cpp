#include "asrnn/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "asrnn/error.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {

std::string batch_to_json(const TaskBatch& batch) {
  nlohmann::json j;
  j["steps"] = batch.steps();
  j["batch"] = batch.batch();
  j["input_dim"] = batch.input_dim();
  auto& inputs = j["inputs"] = nlohmann::json::array();
  for (const auto& x : batch.inputs) inputs.push_back(std::vector<double>(x.data().begin(), x.data().end()));
  j["targets"] = batch.targets;
  auto& mask = j["mask"] = nlohmann::json::array();
  for (const auto& row : batch.mask) mask.push_back(std::vector<int>(row.begin(), row.end()));
  return j.dump();
}

// ---------------------------------------------------------------------------
// Copy memory
// ---------------------------------------------------------------------------

namespace {

TaskBatch empty_batch(std::size_t steps, std::size_t input_dim, std::size_t batch) {
  TaskBatch out;
  out.inputs.assign(steps, Matrix(input_dim, batch));
  out.targets.assign(steps, std::vector<int>(batch, 0));
  out.mask.assign(steps, std::vector<std::uint8_t>(batch, 0));
  return out;
}

TaskBatch copy_batch_from(const CopySpec& spec, Rng& rng) {
  if (spec.recall_len < 1) throw ContractViolation("copy task: K must be >= 1");
  if (spec.alphabet_size < 1 || spec.batch < 1) throw ContractViolation("copy task: empty alphabet or batch");
  const std::size_t k = spec.recall_len, l = spec.delay_len, steps = spec.sequence_length();
  TaskBatch out = empty_batch(steps, spec.vocab_size(), spec.batch);
  for (std::size_t b = 0; b < spec.batch; ++b) {
    std::vector<int> tokens(steps, kCopyBlank);
    for (std::size_t i = 0; i < k; ++i) {
      const int letter =
          kCopyFirstLetter + static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.alphabet_size) - 1));
      tokens[i] = letter;
      out.targets[l + k + i][b] = letter;
    }
    tokens[l + k] = kCopyStart;
    for (std::size_t t = 0; t < steps; ++t) {
      out.inputs[t](static_cast<std::size_t>(tokens[t]), b) = 1.0;
      out.mask[t][b] = 1;
    }
  }
  return out;
}

}  // namespace

TaskBatch gen_copy_batch(const CopySpec& spec) {
  Rng rng(spec.rng_seed);
  return copy_batch_from(spec, rng);
}

double copy_baseline_loss(std::size_t recall_len, std::size_t delay_len, std::size_t alphabet_size) {
  return static_cast<double>(recall_len) * std::log(static_cast<double>(alphabet_size)) /
         static_cast<double>(delay_len + 2 * recall_len);
}

TaskBatch CopyTaskGenerator::batch(std::uint64_t index) const {
  Rng rng(split_seed(spec_.rng_seed, index));
  return copy_batch_from(spec_, rng);
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) throw FormatError(std::string(what) + ": truncated header", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

PixelDataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  const std::uint32_t img_magic = read_be32(images, 0, "images");
  if (img_magic != kIdxImageMagic) throw FormatError("images: bad IDX magic", 0);
  const std::uint32_t lbl_magic = read_be32(labels, 0, "labels");
  if (lbl_magic != kIdxLabelMagic) throw FormatError("labels: bad IDX magic", 0);

  const std::size_t n = read_be32(images, 4, "images");
  PixelDataset ds;
  ds.rows = read_be32(images, 8, "images");
  ds.cols = read_be32(images, 12, "images");
  const std::size_t n_labels = read_be32(labels, 4, "labels");
  if (n_labels != n) throw FormatError("labels: count does not match images", 4);

  const std::size_t len = ds.rows * ds.cols;
  constexpr std::size_t kImgHeader = 16, kLblHeader = 8;
  if (images.size() < kImgHeader + n * len) throw FormatError("images: truncated pixel data", images.size());
  if (labels.size() < kLblHeader + n) throw FormatError("labels: truncated label data", labels.size());

  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector img(len);
    const std::size_t base = kImgHeader + k * len;
    for (std::size_t i = 0; i < len; ++i) img[i] = static_cast<double>(images[base + i]) / 255.0;
    ds.images.push_back(std::move(img));
    const int label = labels[kLblHeader + k];
    if (label > 9) throw FormatError("labels: value outside 0..9", kLblHeader + k);
    ds.labels.push_back(label);
  }
  return ds;
}

PixelDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_mnist_idx(images, labels);
}

std::vector<std::size_t> make_permutation(std::size_t n, std::uint64_t rng_seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(rng_seed);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  return perm;
}

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

PixelDataset apply_fixed_permutation(const PixelDataset& dataset, std::span<const std::size_t> perm) {
  if (perm.size() != dataset.sequence_length()) throw ContractViolation("apply_fixed_permutation: length mismatch");
  PixelDataset out = dataset;
  for (std::size_t k = 0; k < dataset.size(); ++k)
    for (std::size_t i = 0; i < perm.size(); ++i) out.images[k][i] = dataset.images[k][perm[i]];
  return out;
}

PixelDataset apply_fixed_permutation(const PixelDataset& dataset, std::uint64_t rng_seed) {
  const auto perm = make_permutation(dataset.sequence_length(), rng_seed);
  return apply_fixed_permutation(dataset, perm);
}

TaskBatch make_pixel_batch(const PixelDataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t steps = dataset.sequence_length(), batch = indices.size();
  if (batch == 0 || steps == 0) throw ContractViolation("make_pixel_batch: empty batch");
  TaskBatch out = empty_batch(steps, 1, batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = indices[b];
    if (k >= dataset.size()) throw ContractViolation("make_pixel_batch: index out of range");
    for (std::size_t t = 0; t < steps; ++t) out.inputs[t](0, b) = dataset.images[k][t];
    out.targets[steps - 1][b] = dataset.labels[k];
    out.mask[steps - 1][b] = 1;
  }
  return out;
}

PixelBatcher::PixelBatcher(const PixelDataset& dataset, std::size_t batch, std::uint64_t seed)
    : dataset_(&dataset), batch_(batch), seed_(seed), per_epoch_(batch ? dataset.size() / batch : 0) {
  if (per_epoch_ == 0) throw ContractViolation("PixelBatcher: dataset smaller than one batch");
}

TaskBatch PixelBatcher::batch(std::uint64_t iteration) const {
  const std::uint64_t epoch = iteration / per_epoch_;
  const std::size_t slot = iteration % per_epoch_;
  const auto order = make_permutation(dataset_->size(), split_seed(seed_, epoch));
  return make_pixel_batch(*dataset_, std::span(order).subspan(slot * batch_, batch_));
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto lead = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      throw FormatError("invalid UTF-8 lead byte", i);
    }
    if (i + extra >= bytes.size()) throw FormatError("truncated UTF-8 sequence", i);
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cont = static_cast<unsigned char>(bytes[i + k]);
      if ((cont & 0xC0) != 0x80) throw FormatError("invalid UTF-8 continuation byte", i + k);
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::u32string_view text) {
  Vocabulary v;
  v.symbols_.assign(text.begin(), text.end());
  v.symbols_.push_back(U'\n');
  std::sort(v.symbols_.begin(), v.symbols_.end());
  v.symbols_.erase(std::unique(v.symbols_.begin(), v.symbols_.end()), v.symbols_.end());
  for (std::size_t i = 0; i < v.symbols_.size(); ++i) v.index_.emplace(v.symbols_[i], static_cast<int>(i));
  return v;
}

int Vocabulary::id(char32_t symbol) const {
  const auto it = index_.find(symbol);
  if (it == index_.end()) throw ContractViolation("symbol not in vocabulary");
  return it->second;
}

Corpus corpus_from_text(std::string_view utf8, double train_fraction, double valid_fraction) {
  if (train_fraction <= 0.0 || valid_fraction < 0.0 || train_fraction + valid_fraction > 1.0)
    throw ContractViolation("corpus split fractions must satisfy 0 < train, 0 <= valid, train + valid <= 1");
  std::u32string text = decode_utf8(utf8);
  std::erase(text, U'\r');
  Corpus c;
  c.vocab = Vocabulary::from_text(text);
  std::vector<int> ids(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) ids[i] = c.vocab.id(text[i]);
  const auto n = static_cast<double>(ids.size());
  const auto n_train = static_cast<std::size_t>(std::floor(n * train_fraction));
  const auto n_valid = static_cast<std::size_t>(std::floor(n * valid_fraction));
  c.train.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
  c.valid.assign(ids.begin() + static_cast<long>(n_train), ids.begin() + static_cast<long>(n_train + n_valid));
  c.test.assign(ids.begin() + static_cast<long>(n_train + n_valid), ids.end());
  return c;
}

Corpus load_corpus(const CorpusSpec& spec) {
  std::ifstream in(spec.path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open corpus '" + spec.path + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return corpus_from_text(bytes, spec.train_fraction, spec.valid_fraction);
}

TbpttStream::TbpttStream(std::span<const int> ids, std::size_t vocab_size, std::size_t tbptt_len,
                         std::size_t batch)
    : ids_(ids), vocab_(vocab_size), len_(tbptt_len), batch_(batch) {
  if (tbptt_len == 0 || batch == 0) throw ContractViolation("TbpttStream: T and batch must be positive");
  if (ids.size() < 1 || ids.size() - 1 < batch * tbptt_len)
    throw ContractViolation("TbpttStream: corpus too small for batch * T");
  lane_len_ = (ids.size() - 1) / batch;
  windows_ = lane_len_ / tbptt_len;
}

TbpttWindow TbpttStream::window(std::size_t index) const {
  if (index >= windows_) throw ContractViolation("TbpttStream: window index out of range");
  TbpttWindow w;
  w.index = index;
  w.carry = index > 0;
  w.batch = empty_batch(len_, vocab_, batch_);
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::size_t base = b * lane_len_ + index * len_;
    for (std::size_t k = 0; k < len_; ++k) {
      w.batch.inputs[k](static_cast<std::size_t>(ids_[base + k]), b) = 1.0;
      w.batch.targets[k][b] = ids_[base + k + 1];
      w.batch.mask[k][b] = 1;
    }
  }
  return w;
}

std::optional<TbpttWindow> TbpttStream::next() {
  if (cursor_ >= windows_) return std::nullopt;
  return window(cursor_++);
}

TbpttStream make_tbptt_stream(const Corpus& corpus, std::size_t tbptt_len, std::size_t batch) {
  return TbpttStream(corpus.train, corpus.vocab.size(), tbptt_len, batch);
}

double metric_bpc(double loss_nats) { return loss_nats / std::log(2.0); }

double unigram_entropy_bits(std::span<const int> ids, std::size_t vocab_size) {
  if (ids.empty()) return 0.0;
  std::vector<std::size_t> counts(vocab_size, 0);
  for (int id : ids) ++counts.at(static_cast<std::size_t>(id));
  const auto n = static_cast<double>(ids.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace asrnn
