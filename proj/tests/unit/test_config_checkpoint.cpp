#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "asrnn/checkpoint.hpp"
#include "asrnn/config.hpp"
#include "asrnn/error.hpp"
#include "asrnn/trainer.hpp"

using namespace asrnn;

namespace {

const std::filesystem::path kConfigDir = std::filesystem::path(ASRNN_TEST_DATA) / ".." / ".." / "configs";

RunConfig tweaked() {
  RunConfig c;
  c.task = TaskKind::kCharlm;
  c.model = ModelKind::kLstm;
  c.seed = 18446744073709551615ULL;
  c.output_dir = "out dir/with spaces";
  c.epochs = 3;
  c.record_wall_clock = true;
  c.hidden = 17;
  c.init_scheme = InitScheme::kCayley;
  c.uf_scheme = InitScheme::kHenaff;
  c.init_a = 0.1 + 0.2;  // not exactly representable in short decimal
  c.init_b = 3.0;
  c.init_epsilon = 1.0 / 3.0;
  c.optim.lr_main = 1.2345678901234567e-3;
  c.optim.clip_norm = std::nullopt;
  c.corpus = "/tmp/corpus.txt";
  c.tbptt_len = 300;
  c.input_bound = 2.5;
  return c;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("serialize then parse is the identity") {
    for (const RunConfig& c : {RunConfig{}, tweaked()}) {
      const std::string text = serialize_config(c);
      CHECK(parse_config(text) == c);
      CHECK(serialize_config(parse_config(text)) == text);
    }
  }

  TEST_CASE("every shipped config parses, validates and round-trips") {
    std::size_t count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
      if (entry.path().extension() != ".cfg") continue;
      ++count;
      const RunConfig c = load_config(entry.path().string());
      CHECK_NOTHROW(c.validate());
      CHECK(parse_config(serialize_config(c)) == c);
    }
    CHECK(count >= 9);
  }

  TEST_CASE("paper copy config carries the published settings") {
    const RunConfig c = load_config((kConfigDir / "copy_paper.cfg").string());
    CHECK(c.hidden == 138);
    CHECK(c.copy_l == 1000);
    CHECK(c.iterations == 4000);
    CHECK(c.optim.lr_main == 2e-4);
    CHECK(c.optim.lr_recurrent == 1e-4);
    CHECK(c.init_epsilon == 2e-5);
    CHECK(c.optim.clip_norm == 10.0);
    CHECK(c.optim.alpha == 0.9);
  }

  TEST_CASE("errors name the line and field") {
    try {
      parse_config("[run]\ntask = copy\nbogus = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(e.field() == "run.bogus");
    }
    try {
      parse_config("[model]\n\nd_h = twelve\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(e.field() == "model.d_h");
    }
    CHECK_THROWS_AS(parse_config("task = copy\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\ntask copy\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nmodel = gru\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[optim]\nlr = 1e-3x\n"), ConfigError);
  }

  TEST_CASE("overrides address every key") {
    RunConfig c;
    apply_override(c, "model.d_h=32");
    apply_override(c, "optim.clip_norm=none");
    apply_override(c, "run.model = rnn");
    CHECK(c.hidden == 32);
    CHECK_FALSE(c.optim.clip_norm.has_value());
    CHECK(c.model == ModelKind::kRnn);
    CHECK_THROWS_AS(apply_override(c, "model.width=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "no_equals_sign"), ConfigError);

    const std::string text = serialize_config(RunConfig{});
    for (const std::string& key : config_keys()) {
      const std::string leaf = key.substr(key.find('.') + 1);
      CHECK_MESSAGE(text.find("\n" + leaf + " = ") != std::string::npos, key);
    }
  }

  TEST_CASE("validation rejects out-of-range values") {
    RunConfig c;
    c.batch = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.init_a = 2.0;
    c.init_b = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.log_interval = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.optim.alpha = 1.5;
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("init seeds derive from the run seed") {
    RunConfig a, b;
    b.seed = a.seed + 1;
    CHECK(a.model_init().seed != b.model_init().seed);
    CHECK(a.init_spec().rng_seed == a.model_init().recurrent.rng_seed);
  }

  TEST_CASE("output directory environment override") {
    RunConfig c;
    c.output_dir = "from/config";
    unsetenv(kOutputDirEnv);
    CHECK(resolve_output_dir(c) == std::filesystem::path("from/config"));
    setenv(kOutputDirEnv, "/tmp/from_env", 1);
    CHECK(resolve_output_dir(c) == std::filesystem::path("/tmp/from_env"));
    setenv(kOutputDirEnv, "", 1);
    CHECK(resolve_output_dir(c) == std::filesystem::path("from/config"));
    unsetenv(kOutputDirEnv);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("JSON round-trip preserves every field bit for bit") {
    for (ModelKind kind : {ModelKind::kAsRnn, ModelKind::kRnn, ModelKind::kLstm}) {
      RunConfig cfg;
      cfg.model = kind;
      cfg.hidden = 6;
      cfg.copy_l = 5;
      cfg.init_a = 0.5;
      cfg.init_b = 1.0;
      Checkpoint c = initial_checkpoint(cfg);
      c.iteration = 42;
      c.optimizer.step = 42;
      c.optimizer.mean_square = c.parameters.zeros_like();
      c.optimizer.mean_square[0].values[0] = 1.0 / 7.0;
      c.parameters[0].values[1] = -1e-300;
      c.carried_state = {Matrix(6, 2, 0.1)};

      const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
      CHECK(back.config == c.config);
      CHECK(back.model == kind);
      CHECK(back.dims.hidden == 6);
      CHECK(back.init.seed == c.init.seed);
      CHECK(back.rng_seed == c.rng_seed);
      CHECK(back.iteration == 42);
      REQUIRE(back.parameters.size() == c.parameters.size());
      for (std::size_t k = 0; k < c.parameters.size(); ++k) {
        CHECK(back.parameters[k].name == c.parameters[k].name);
        CHECK(back.parameters[k].shape == c.parameters[k].shape);
        CHECK(back.parameters[k].group == c.parameters[k].group);
        CHECK(back.parameters[k].values == c.parameters[k].values);
      }
      CHECK(back.optimizer.step == 42);
      CHECK(back.optimizer.mean_square[0].values == c.optimizer.mean_square[0].values);
      CHECK(back.carried_state == c.carried_state);
      CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
    }
  }

  TEST_CASE("stored asRNN tensors are free coordinates") {
    RunConfig cfg;
    cfg.hidden = 5;
    const Checkpoint c = initial_checkpoint(cfg);
    CHECK(c.parameters.at("skew_hh").values.size() == 10);
    CHECK(c.parameters.at("skew_f").values.size() == 10);
    CHECK(c.parameters.at("diag_seed").values.size() == 5);
    CHECK_FALSE(c.parameters.contains("w_hh"));
    const auto j = nlohmann::json::parse(checkpoint_to_json(c));
    CHECK(j["format"] == "asrnn-checkpoint");
    CHECK(j["version"] == kCheckpointVersion);
    CHECK(j["tensors"]["skew_hh"]["group"] == "recurrent");
  }

  TEST_CASE("malformed checkpoints are rejected") {
    CHECK_THROWS_AS(checkpoint_from_json("{not json"), FormatError);
    CHECK_THROWS_AS(checkpoint_from_json("{}"), FormatError);
    auto j = nlohmann::json::parse(checkpoint_to_json(initial_checkpoint(RunConfig{})));
    j["version"] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), FormatError);
    j = nlohmann::json::parse(checkpoint_to_json(initial_checkpoint(RunConfig{})));
    j.erase("tensors");
    CHECK_THROWS_AS(checkpoint_from_json(j.dump()), FormatError);
  }

  TEST_CASE("restoring into mismatched dims is an explicit error") {
    RunConfig cfg;
    cfg.hidden = 6;
    Checkpoint c = initial_checkpoint(cfg);
    CHECK(restore_model(c)->dims().hidden == 6);
    c.dims.hidden = 7;
    CHECK_THROWS_AS(restore_model(c), ContractViolation);
  }

  TEST_CASE("save and load through the filesystem") {
    const auto dir = std::filesystem::temp_directory_path() / "asrnn_ckpt_test";
    std::filesystem::remove_all(dir);
    RunConfig cfg;
    cfg.hidden = 4;
    const Checkpoint c = initial_checkpoint(cfg);
    save_checkpoint(c, dir / "nested" / "c.json");
    CHECK(checkpoint_to_json(load_checkpoint(dir / "nested" / "c.json")) == checkpoint_to_json(c));
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "nested")) ++files;
    CHECK(files == 1);  // no temporary left behind
    CHECK_THROWS(load_checkpoint(dir / "missing.json"));
    std::filesystem::remove_all(dir);
  }
}
