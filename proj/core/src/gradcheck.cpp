#include "asrnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "asrnn/error.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {
namespace {

struct Problem {
  Sequence inputs;
  RecurrentState state;
  TargetGrid targets;
  MaskGrid mask;
};

Problem make_problem(const GradcheckOptions& o, const Model& model, Rng& rng) {
  Problem p;
  for (std::size_t t = 0; t < o.steps; ++t) {
    Matrix x(o.input, o.batch);
    for (double& v : x.data()) v = rng.normal();
    p.inputs.push_back(std::move(x));
  }
  p.state = model.zero_state(o.batch);
  for (Matrix& m : p.state)
    for (double& v : m.data()) v = rng.uniform(-0.5, 0.5);
  const std::size_t positions = o.mode == HeadMode::kPerStep ? o.steps : 1;
  for (std::size_t t = 0; t < positions; ++t) {
    std::vector<int> row(o.batch);
    for (int& y : row) y = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(o.output) - 1));
    p.targets.push_back(std::move(row));
    p.mask.emplace_back(o.batch, 1);
  }
  return p;
}

void randomize(Model& model, Rng& rng) {
  for (const ParamView& v : model.parameters()) {
    // Diagonal seeds stay away from the |s| kink at zero.
    const bool seed = v.name == "diag_seed";
    for (double& x : v.values) x = seed ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
  }
}

double loss_at(Model& model, const Problem& p) {
  const auto logits = model.forward(p.inputs, p.state);
  return loss_and_grad(logits, p.targets, p.mask).loss;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  if (o.hidden == 0 || o.input == 0 || o.output == 0 || o.steps == 0 || o.batch == 0)
    throw ContractViolation("run_gradcheck: dims must be positive");
  const ModelDims dims{o.input, o.hidden, o.output, o.mode};
  ModelInit init;
  init.recurrent = InitSpec{InitScheme::kHenaff, 0.5, 1.5, 0.01, split_seed(o.seed, SeedTag::kInit)};
  init.uf_scheme = InitScheme::kHenaff;
  init.seed = split_seed(o.seed, SeedTag::kInit);
  auto model = make_model(o.model, dims, init);

  Rng rng(split_seed(o.seed, SeedTag::kData));
  randomize(*model, rng);
  const Problem p = make_problem(o, *model, rng);

  const auto logits = model->forward(p.inputs, p.state);
  const LossResult base = loss_and_grad(logits, p.targets, p.mask);
  GradBundle analytic = model->backward(base.grad_logits);
  if (o.corrupt) analytic[0].values[0] += 1e-3;

  GradcheckReport report;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const Tensor& g = analytic[k];
    TensorCheck check{g.name, g.values.size(), 0.0, 0.0, 0};
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      // Re-acquiring the views marks derived caches stale after each edit.
      const double orig = model->parameters()[k].values[i];
      model->parameters()[k].values[i] = orig + o.step;
      const double up = loss_at(*model, p);
      model->parameters()[k].values[i] = orig - o.step;
      const double down = loss_at(*model, p);
      model->parameters()[k].values[i] = orig;
      const double fd = (up - down) / (2.0 * o.step);
      const double abs_err = std::abs(g.values[i] - fd);
      const double rel = abs_err / std::max({std::abs(g.values[i]), std::abs(fd), kGradcheckFloor});
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      if (rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  return report;
}

std::string to_json(const GradcheckReport& r) {
  nlohmann::ordered_json j;
  j["max_rel_error"] = r.max_rel_error;
  auto& tensors = j["tensors"] = nlohmann::ordered_json::array();
  for (const TensorCheck& t : r.tensors)
    tensors.push_back({{"name", t.name},
                       {"count", t.count},
                       {"max_rel_error", t.max_rel_error},
                       {"max_abs_error", t.max_abs_error},
                       {"worst_index", t.worst_index}});
  return j.dump();
}

}  // namespace asrnn
