#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "asrnn/checkpoint.hpp"
#include "asrnn/config.hpp"
#include "asrnn/diagnostics.hpp"
#include "asrnn/error.hpp"
#include "asrnn/trainer.hpp"

using namespace asrnn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "asrnn_trainer_tests" / name;
  fs::remove_all(dir);
  return dir;
}

RunConfig tiny_copy(ModelKind model = ModelKind::kAsRnn) {
  RunConfig c;
  c.model = model;
  c.seed = 3;
  c.iterations = 7;
  c.batch = 4;
  c.log_interval = 3;
  c.hidden = 6;
  c.copy_k = 2;
  c.copy_l = 4;
  c.copy_eval_batch = 8;
  c.init_a = 0.5;
  c.init_b = 1.0;
  c.init_epsilon = 0.01;
  c.optim.lr_main = 1e-2;
  c.optim.lr_recurrent = 1e-2;
  return c;
}

fs::path write_periodic_corpus(const fs::path& dir) {
  fs::create_directories(dir);
  std::string text;
  for (int i = 0; i < 400; ++i) text += "abcd\n";
  std::ofstream(dir / "corpus.txt", std::ios::binary) << text;
  return dir / "corpus.txt";
}

RunConfig tiny_charlm(const fs::path& corpus) {
  RunConfig c = tiny_copy();
  c.task = TaskKind::kCharlm;
  c.corpus = corpus.string();
  c.tbptt_len = 5;
  c.batch = 3;
  c.epochs = 0;
  c.iterations = 12;
  c.eval_windows = 2;
  c.optim.clip_norm = std::nullopt;
  return c;
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.put(static_cast<char>((v >> shift) & 0xff));
}

/// 20 random 2x3 images with labels 0..9.
void write_idx_pair(const fs::path& images, const fs::path& labels, std::uint32_t seed) {
  std::ofstream img(images, std::ios::binary), lbl(labels, std::ios::binary);
  put_be32(img, 0x803);
  put_be32(img, 20);
  put_be32(img, 2);
  put_be32(img, 3);
  put_be32(lbl, 0x801);
  put_be32(lbl, 20);
  for (std::uint32_t k = 0; k < 20; ++k) {
    for (std::uint32_t i = 0; i < 6; ++i) img.put(static_cast<char>((k * 37 + i * 11 + seed) % 256));
    lbl.put(static_cast<char>(k % 10));
  }
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("metrics rows land on log intervals and the last iteration") {
    const fs::path dir = scratch("rows");
    TrainOptions opts;
    opts.output_dir = dir;
    const TrainResult r = train(tiny_copy(), opts);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].iteration == 3);
    CHECK(r.rows[1].iteration == 6);
    CHECK(r.rows[2].iteration == 7);
    CHECK(r.iterations_completed == 7);

    std::istringstream csv(slurp(r.metrics_path));
    std::string line;
    std::vector<std::string> data;
    while (std::getline(csv, line))
      if (!line.empty() && line[0] != '#') data.push_back(line);
    REQUIRE(data.size() == 4);
    CHECK(data[0] == "iteration,train_loss,eval_loss,eval_accuracy,grad_norm");
    CHECK(data[3].rfind("7,", 0) == 0);
    CHECK(slurp(r.metrics_path).rfind("# seed=3 ", 0) == 0);

    for (const char* f : {"checkpoint.json", "config.cfg", "summary.json"}) CHECK(fs::exists(dir / f));
    CHECK(parse_config(slurp(dir / "config.cfg")) == tiny_copy());
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["iterations_completed"] == 7);
    CHECK(load_checkpoint(r.checkpoint_path).iteration == 7);
  }

  TEST_CASE("wall-clock column is opt-in") {
    RunConfig c = tiny_copy();
    c.record_wall_clock = true;
    c.iterations = 3;
    TrainOptions opts;
    opts.output_dir = fs::path();
    const TrainResult r = train(c, opts);
    CHECK(r.rows.back().wall_ms.has_value());
    CHECK(metrics_header(TaskKind::kCopy, true) == "iteration,train_loss,eval_loss,eval_accuracy,grad_norm,wall_ms");
    CHECK(metrics_header(TaskKind::kCharlm, false) == "iteration,train_loss,eval_loss,eval_bpc,grad_norm");
  }

  TEST_CASE("identical config and seed give byte-identical metrics") {
    std::string asrnn_metrics;
    for (ModelKind m : {ModelKind::kAsRnn, ModelKind::kRnn, ModelKind::kLstm}) {
      TrainOptions a, b;
      a.output_dir = scratch("det_a");
      b.output_dir = scratch("det_b");
      train(tiny_copy(m), a);
      train(tiny_copy(m), b);
      const std::string metrics = slurp(*a.output_dir / "metrics.csv");
      CHECK(metrics == slurp(*b.output_dir / "metrics.csv"));
      CHECK(slurp(*a.output_dir / "checkpoint.json") == slurp(*b.output_dir / "checkpoint.json"));
      if (m == ModelKind::kAsRnn) asrnn_metrics = metrics;
    }
    RunConfig other = tiny_copy();
    other.seed = 4;
    TrainOptions c;
    c.output_dir = scratch("det_c");
    train(other, c);
    CHECK(slurp(*c.output_dir / "metrics.csv") != asrnn_metrics);
  }

  TEST_CASE("kill and resume reproduces the uninterrupted run") {
    const fs::path corpus = write_periodic_corpus(scratch("corpus"));
    for (const RunConfig& base : {tiny_copy(), tiny_charlm(corpus)}) {
      RunConfig c = base;
      c.iterations = 12;
      c.checkpoint_interval = 4;
      TrainOptions full;
      full.output_dir = scratch("resume_full");
      train(c, full);

      TrainOptions killed;
      killed.output_dir = scratch("resume_killed");
      killed.halt_after = 10;
      const TrainResult partial = train(c, killed);
      CHECK(partial.halted);
      CHECK(load_checkpoint(*killed.output_dir / "checkpoint.json").iteration == 8);

      TrainOptions resumed;
      resumed.output_dir = killed.output_dir;
      resumed.resume = *killed.output_dir / "checkpoint.json";
      const TrainResult rest = train(c, resumed);
      CHECK(rest.start_iteration == 8);
      CHECK(slurp(*full.output_dir / "metrics.csv") == slurp(*killed.output_dir / "metrics.csv"));
      CHECK(slurp(*full.output_dir / "checkpoint.json") == slurp(*killed.output_dir / "checkpoint.json"));
    }
  }

  TEST_CASE("resume refuses an incompatible config") {
    TrainOptions first;
    first.output_dir = scratch("incompatible");
    train(tiny_copy(), first);
    RunConfig other = tiny_copy();
    other.hidden = 7;
    TrainOptions again;
    again.output_dir = scratch("incompatible_2");
    again.resume = *first.output_dir / "checkpoint.json";
    CHECK_THROWS_AS(train(other, again), ConfigError);
  }

  TEST_CASE("stop-below ends the run at the first qualifying row") {
    TrainOptions opts;
    opts.output_dir = fs::path();
    opts.stop_below = 1e9;
    const TrainResult r = train(tiny_copy(), opts);
    CHECK(r.stopped_early);
    CHECK(r.iterations_completed == 3);
    CHECK(r.rows.size() == 1);
  }

  TEST_CASE("a singular saturation matrix is reported as a fault without a checkpoint") {
    RunConfig c = tiny_copy();
    c.init_a = c.init_b = 0.0;
    c.init_epsilon = 0.0;
    TrainOptions opts;
    opts.output_dir = scratch("fault");
    const TrainResult r = train(c, opts);
    REQUIRE(r.fault.has_value());
    CHECK_FALSE(fs::exists(*opts.output_dir / "checkpoint.json"));
    CHECK(nlohmann::json::parse(slurp(*opts.output_dir / "summary.json"))["fault"].is_string());
  }

  TEST_CASE("gradient trace is a pure observer of training") {
    TrainOptions plain, traced;
    plain.output_dir = scratch("trace_off");
    traced.output_dir = scratch("trace_on");
    GradientNormTrace trace({1, 4, 8});
    traced.trace = &trace;
    train(tiny_copy(), plain);
    train(tiny_copy(), traced);
    CHECK(trace.records().size() == 7);
    CHECK(slurp(*plain.output_dir / "metrics.csv") == slurp(*traced.output_dir / "metrics.csv"));
    CHECK(slurp(*plain.output_dir / "checkpoint.json") == slurp(*traced.output_dir / "checkpoint.json"));
  }

  TEST_CASE("character task reports bits per character") {
    const fs::path corpus = write_periodic_corpus(scratch("corpus_bpc"));
    TrainOptions opts;
    opts.output_dir = fs::path();
    const TrainResult r = train(tiny_charlm(corpus), opts);
    REQUIRE_FALSE(r.rows.empty());
    CHECK(r.rows.back().eval_metric == doctest::Approx(r.rows.back().eval_loss / std::log(2.0)).epsilon(1e-12));
    const auto source = make_task_source(tiny_charlm(corpus));
    CHECK(source->carries_state());
  }

  TEST_CASE("pixel tasks count epochs and permute with a fixed seed") {
    const fs::path dir = scratch("pixels");
    fs::create_directories(dir);
    write_idx_pair(dir / "train-img", dir / "train-lbl", 1);
    write_idx_pair(dir / "test-img", dir / "test-lbl", 2);
    RunConfig c = tiny_copy();
    c.task = TaskKind::kPmnist;
    c.epochs = 2;
    c.batch = 4;
    c.mnist_train_images = (dir / "train-img").string();
    c.mnist_train_labels = (dir / "train-lbl").string();
    c.mnist_test_images = (dir / "test-img").string();
    c.mnist_test_labels = (dir / "test-lbl").string();
    c.mnist_eval_samples = 10;
    const auto source = make_task_source(c);
    CHECK(source->total_iterations(c) == 10);
    CHECK(source->dims(6).input == 1);
    CHECK(source->dims(6).output == 10);
    CHECK(source->dims(6).mode == HeadMode::kFinalState);
    TrainOptions opts;
    opts.output_dir = fs::path();
    CHECK(train(c, opts).iterations_completed == 10);

    c.task = TaskKind::kSmnist;
    bool carry = true;
    const TaskBatch s = make_task_source(c)->batch(0, carry);
    CHECK_FALSE(carry);
    CHECK(s.steps() == 6);

    c.mnist_test_labels = (dir / "absent").string();
    CHECK_THROWS_AS(make_task_source(c), ConfigError);
  }
}
