// Acceptance suite: one PASS/FAIL line per criterion.
//
//   asrnn_acceptance [--workdir <dir>] [--only 1,4,9]
//
// Exit status is 0 only when every selected criterion passes. A summary is
// written to <workdir>/acceptance.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asrnn/cells.hpp"
#include "asrnn/config.hpp"
#include "asrnn/diagnostics.hpp"
#include "asrnn/gradcheck.hpp"
#include "asrnn/linalg.hpp"
#include "asrnn/model.hpp"
#include "asrnn/optim.hpp"
#include "asrnn/rng.hpp"
#include "asrnn/tasks.hpp"
#include "asrnn/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace asrnn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const fs::path kDataDir = ASRNN_TEST_DATA;
const fs::path kConfigDir = ASRNN_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_diff(a[i].data(), b[i].data()));
  return m;
}

// ---------------------------------------------------------------------------

Outcome gradient_exactness(const fs::path&) {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_case;
  std::size_t checks = 0;
  for (ModelKind model : {ModelKind::kAsRnn, ModelKind::kRnn, ModelKind::kLstm}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      GradcheckOptions o;
      o.model = model;
      o.seed = seed;
      o.hidden = 4 + seed % 13;  // 4..16
      o.steps = 1 + seed % 8;    // 1..8
      o.input = 3;
      o.output = 4;
      o.batch = 2;
      o.mode = seed % 2 ? HeadMode::kFinalState : HeadMode::kPerStep;
      const GradcheckReport r = run_gradcheck(o);
      ++checks;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        worst_case = fmt("%s seed %llu", std::string(to_string(model)).c_str(), static_cast<unsigned long long>(seed));
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-6 && secs < 60.0,
          fmt("%zu instances, max rel error %.2e (%s), %.1f s", checks, worst, worst_case.c_str(), secs)};
}

Outcome orthogonality(const fs::path&) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ModelDims dims{3, 32, 4, HeadMode::kPerStep};
    ModelInit init;
    init.recurrent = {InitScheme::kHenaff, 0.5, 1.5, 1e-3, seed};
    init.uf_scheme = InitScheme::kCayley;
    init.seed = seed;
    AsRnnModel model(dims, init_asrnn_params(dims, init));
    OptimState state;
    Rng rng(100 + seed);
    const OptimConfig cfg{1e-2, 1e-2, 0.9, 10.0, 1e-8};
    for (int step = 0; step < 100; ++step) {
      GradBundle g = model.zero_grad();
      for (Tensor& t : g)
        for (double& v : t.values) v = rng.normal();
      clip_global_norm(g, 10.0);
      rmsprop_step(state, model.parameters(), g, cfg);
    }
    const AsRnnWeights w = model.params().materialize();
    worst = std::max({worst, oracle::orthogonality_defect(w.w_hh), oracle::orthogonality_defect(w.u_f)});
  }
  return {worst <= 1e-10, fmt("max ||Q^T Q - I||_F = %.2e over 3 runs of 100 steps, d_h 32", worst)};
}

Outcome reduction(const fs::path&) {
  double fwd = 0.0, grad = 0.0;
  for (HeadMode mode : {HeadMode::kPerStep, HeadMode::kFinalState}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const std::size_t hidden = 5 + seed;
      const AsRnnWeights w =
          fixture::with_identity_saturation(fixture::random_asrnn_weights(hidden, 3, 4, mode, 500 + seed));
      const RnnParams rnn = fixture::shared_rnn_params(w);
      const Sequence x = fixture::random_sequence(8, 3, 3, 600 + seed);
      const Matrix h0 = oracle::random_matrix(hidden, 3, 700 + seed, 0.3);
      const AsRnnForward a = asrnn_forward(w, x, h0);
      const RnnForward r = vanilla_rnn_forward(rnn, x, h0);
      fwd = std::max({fwd, max_diff(a.logits, r.logits), max_diff(a.cache.h, r.cache.h)});

      const auto g = fixture::random_grad_logits(a.logits, 800 + seed);
      const AsRnnWeightGrads ga = asrnn_backward_weights(a.cache, g);
      const GradBundle gr = vanilla_rnn_backward(rnn, r.cache, g);
      grad = std::max({grad, max_diff(ga.w_xh.data(), gr.at("w_xh").values),
                       max_diff(ga.w_hh.data(), gr.at("w_hh").values), max_diff(ga.bias, gr.at("bias").values),
                       max_diff(ga.head_w.data(), gr.at("head_w").values),
                       max_diff(ga.head_b, gr.at("head_b").values)});
    }
  }
  return {fwd <= 1e-12 && grad <= 1e-10, fmt("forward %.2e, shared gradients %.2e over 20 instances", fwd, grad)};
}

// Pure signed permutation (bound degenerate) and twice a signed permutation
// (bound positive, preconditions must hold).
struct TheoremCase {
  double scale;
  std::uint64_t seed;
};
const std::vector<TheoremCase> kTheoremCases = {{1.0, 1}, {1.0, 2}, {1.0, 3}, {2.0, 1}, {2.0, 2}, {2.0, 3}};
constexpr std::size_t kHorizon = 20;

Outcome theorem_instantiation(const fs::path&) {
  bool ok = true;
  double step_min = INFINITY, window_min = INFINITY;
  std::size_t degenerate = 0, certified = 0;
  for (const TheoremCase& c : kTheoremCases) {
    const fixture::TheoremInstance inst = fixture::theorem_instance(16, 4, kHorizon, c.scale, c.seed);
    const TheoremReport r = theorem_precondition_check(inst.weights, inst.c_x, inst.horizon);
    if (r.df_bound_degenerate) {
      ++degenerate;
    } else {
      ok = ok && r.preconditions_hold;
      certified += r.preconditions_hold;
    }
    const AsRnnForward f = asrnn_forward(inst.weights, inst.inputs, inst.h0);
    for (std::size_t s = 0; s < inst.h0.cols(); ++s) {
      for (std::size_t t = 1; t <= kHorizon; ++t)
        step_min = std::min(step_min, sigma_extremes(step_jacobian(f.cache, t, s)).sigma_min);
      for (std::size_t t1 = 0; t1 < kHorizon; ++t1)
        for (std::size_t t2 = t1 + 1; t2 <= kHorizon; ++t2)
          window_min = std::min(window_min, window_jacobian(f.cache, t1, t2, s).spectrum.sigma_min);
    }
  }
  ok = ok && step_min >= 1.0 - 1e-9 && window_min >= 1.0 - 1e-8;
  return {ok, fmt("%zu degenerate-bound and %zu certified instances; min step sigma %.12f, min window sigma %.12f",
                  degenerate, certified, step_min, window_min)};
}

Outcome saturation_bound(const fs::path&) {
  double worst_margin = -INFINITY;
  for (const TheoremCase& c : kTheoremCases) {
    const fixture::TheoremInstance inst = fixture::theorem_instance(16, 4, kHorizon, c.scale, c.seed);
    const TheoremReport r = theorem_precondition_check(inst.weights, inst.c_x, inst.horizon);
    const SaturationStats s = saturation_stats(asrnn_forward(inst.weights, inst.inputs, inst.h0).cache, &r);
    for (double v : s.max_abs_per_step) worst_margin = std::max(worst_margin, v - r.saturation_bound);
  }
  return {worst_margin <= 1e-9,
          fmt("max over steps of (max|W_f h_t| - bound) = %.3e across %zu instances", worst_margin,
              kTheoremCases.size())};
}

struct CopyRun {
  bool reached = false;
  double best = INFINITY;
  std::size_t iterations = 0;
};

CopyRun copy_run(ModelKind model, std::uint64_t seed, std::optional<double> stop_below, const fs::path& dir) {
  RunConfig c = load_config((kConfigDir / "copy_desk.cfg").string());
  c.model = model;
  c.seed = seed;
  TrainOptions opts;
  opts.output_dir = dir;
  opts.stop_below = stop_below;
  const TrainResult r = train(c, opts);
  CopyRun out;
  out.iterations = r.iterations_completed;
  out.reached = r.stopped_early;
  for (const MetricsRow& row : r.rows) out.best = std::min(out.best, row.eval_loss);
  if (r.fault) out.best = INFINITY;
  return out;
}

Outcome copy_desk(const fs::path& work) {
  const auto start = Clock::now();
  const double baseline = copy_baseline_loss(10, 100);
  const double target = 0.5 * baseline, floor = 0.8 * baseline;
  std::size_t successes = 0, failures = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    if (successes >= 2 || failures >= 2) break;
    const CopyRun as = copy_run(ModelKind::kAsRnn, seed, target, work / fmt("copy_asrnn_seed%llu", seed));
    const CopyRun rnn = copy_run(ModelKind::kRnn, seed, std::nullopt, work / fmt("copy_rnn_seed%llu", seed));
    const bool ok = as.reached && rnn.best > floor;
    ok ? ++successes : ++failures;
    detail += fmt("seed %llu: asrnn %s %.5f at %zu, rnn min %.5f; ", static_cast<unsigned long long>(seed),
                  as.reached ? "reached" : "best", as.best, as.iterations, rnn.best);
  }
  const double secs = seconds_since(start);
  detail += fmt("target < %.5f, rnn > %.5f, %zu seeds passed, %.0f s", target, floor, successes, secs);
  return {successes >= 2 && secs <= 1800.0, detail};
}

Outcome baseline_formula(const fs::path&) {
  double worst = 0.0;
  for (auto [k, l] : {std::pair<std::size_t, std::size_t>{10, 100}, {10, 1000}, {1, 0}}) {
    CopySpec spec;
    spec.recall_len = k;
    spec.delay_len = l;
    spec.batch = 16;
    spec.rng_seed = 9;
    const TaskBatch b = gen_copy_batch(spec);
    std::vector<Matrix> logits;
    for (std::size_t t = 0; t < b.steps(); ++t) {
      Matrix m(spec.vocab_size(), spec.batch, -1e4);
      for (std::size_t col = 0; col < spec.batch; ++col) {
        if (t < l + k) {
          m(kCopyBlank, col) = 0.0;
        } else {
          for (std::size_t s = 0; s < spec.alphabet_size; ++s) m(kCopyFirstLetter + s, col) = 0.0;
        }
      }
      logits.push_back(std::move(m));
    }
    const double expect = static_cast<double>(k) * std::log(8.0) / static_cast<double>(l + 2 * k);
    worst = std::max({worst, std::abs(loss_and_grad(logits, b.targets, b.mask).loss - expect),
                      std::abs(copy_baseline_loss(k, l) - expect)});
  }
  return {worst <= 1e-12, fmt("max |loss - K ln8/(L+2K)| = %.2e over (10,100), (10,1000), (1,0)", worst)};
}

Outcome character_prediction(const fs::path& work) {
  const auto start = Clock::now();
  const fs::path text = kDataDir / "shakespeare_tragedies.txt";
  const std::size_t bytes = fs::file_size(text);

  RunConfig c = load_config((kConfigDir / "charlm_desk.cfg").string());
  c.corpus = text.string();
  c.iterations = 400;
  c.log_interval = 50;
  const Corpus corpus = load_corpus({c.corpus, c.tbptt_len, c.train_fraction, c.valid_fraction});
  std::vector<int> all = corpus.train;
  all.insert(all.end(), corpus.valid.begin(), corpus.valid.end());
  all.insert(all.end(), corpus.test.begin(), corpus.test.end());
  const double entropy = unigram_entropy_bits(all, corpus.vocab.size());

  TrainOptions opts;
  opts.output_dir = work / "charlm_text";
  const TrainResult r = train(c, opts);
  const double bpc = r.rows.empty() || r.fault ? INFINITY : r.rows.back().eval_metric;
  const double secs = seconds_since(start);

  // A period-41 text: once the phase is in the state every symbol is certain.
  const fs::path periodic = work / "periodic.txt";
  {
    std::ofstream out(periodic, std::ios::binary | std::ios::trunc);
    for (int i = 0; i < 10000; ++i) out << "to be or not to be, that is the question\n";
  }
  RunConfig p = c;
  p.corpus = periodic.string();
  p.hidden = 32;
  p.tbptt_len = 50;
  p.batch = 16;
  p.iterations = 500;
  p.log_interval = 100;
  p.optim.lr_main = p.optim.lr_recurrent = 3e-3;
  p.optim.clip_norm = 1.0;
  TrainOptions popts;
  popts.output_dir = work / "charlm_periodic";
  const TrainResult pr = train(p, popts);
  const double periodic_bpc = pr.rows.empty() || pr.fault ? INFINITY : pr.rows.back().eval_metric;

  const bool ok = bytes >= 500 * 1000 && bpc < entropy && secs <= 1800.0 && periodic_bpc < 0.05;
  return {ok, fmt("text %zu bytes: validation BPC %.4f vs unigram entropy %.4f after %zu iterations in %.0f s; "
                  "periodic BPC %.4f (< 0.05)",
                  bytes, bpc, entropy, r.iterations_completed, secs, periodic_bpc)};
}

Outcome nearest_group(const fs::path&) {
  double worst = 0.0;
  std::size_t count = 0;
  for (std::size_t n : {3u, 4u}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Matrix a = oracle::random_matrix(n, n, 1000 * n + seed);
      const auto brute = oracle::brute_force_signed_permutation(a);
      const GroupProjection g = nearest_generalized_permutation(a);
      worst = std::max(worst, std::abs(g.frobenius_residual - brute.frobenius_residual));
      ++count;
    }
  }
  return {worst <= 1e-12, fmt("%zu matrices (n = 3, 4), max objective gap %.2e", count, worst)};
}

Outcome determinism(const fs::path& work) {
  std::vector<RunConfig> configs;
  RunConfig copy = load_config((kConfigDir / "copy_desk.cfg").string());
  copy.iterations = 100;
  copy.log_interval = 10;
  configs.push_back(copy);
  copy.model = ModelKind::kLstm;
  configs.push_back(copy);
  RunConfig text = load_config((kConfigDir / "charlm_desk.cfg").string());
  text.corpus = (kDataDir / "shakespeare_tragedies.txt").string();
  text.iterations = 20;
  text.log_interval = 5;
  configs.push_back(text);

  std::size_t identical = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      TrainOptions opts;
      opts.output_dir = work / fmt("determinism_%zu_%d", k, rep);
      fs::remove_all(*opts.output_dir);
      const TrainResult r = train(configs[k], opts);
      const std::string csv = slurp(r.metrics_path);
      if (rep == 0) first = csv;
      else if (!csv.empty() && csv == first) ++identical;
    }
  }
  return {identical == configs.size(),
          fmt("%zu of %zu configs (copy asrnn, copy lstm, charlm asrnn) byte-identical across reruns", identical,
              configs.size())};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asrnn acceptance suite"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for training runs");
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "gradient exactness", gradient_exactness},
      {2, "orthogonality by construction", orthogonality},
      {3, "reduction to the vanilla RNN", reduction},
      {4, "theorem instantiation", theorem_instantiation},
      {5, "saturation bound", saturation_bound},
      {6, "copy task at desk scale", copy_desk},
      {7, "memoryless baseline formula", baseline_formula},
      {8, "character prediction at desk scale", character_prediction},
      {9, "nearest-group oracle", nearest_group},
      {10, "determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(start);
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
    summary.push_back({{"criterion", c.id}, {"title", c.title}, {"pass", o.pass}, {"detail", o.detail},
                       {"seconds", secs}});
  }
  std::ofstream(work / "acceptance.json", std::ios::binary | std::ios::trunc) << summary.dump(2) << "\n";
  std::printf("%zu criteria, %d failed\n", summary.size(), failed);
  return failed == 0 ? 0 : 1;
}
