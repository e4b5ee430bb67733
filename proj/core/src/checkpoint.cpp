#include "asrnn/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "asrnn/error.hpp"

namespace asrnn {
namespace {

using Json = nlohmann::ordered_json;

std::string_view group_name(LrGroup g) { return g == LrGroup::kRecurrent ? "recurrent" : "main"; }

LrGroup parse_group(const std::string& s) {
  if (s == "main") return LrGroup::kMain;
  if (s == "recurrent") return LrGroup::kRecurrent;
  throw FormatError("unknown tensor group '" + s + "'", 0);
}

Json bundle_to_json(const TensorBundle& b) {
  Json out = Json::object();
  for (const Tensor& t : b) out[t.name] = Json{{"shape", t.shape}, {"group", group_name(t.group)}, {"data", t.values}};
  return out;
}

TensorBundle bundle_from_json(const Json& j) {
  TensorBundle b;
  for (const auto& [name, t] : j.items()) {
    Tensor& dst = b.add(name, t.at("shape").get<std::vector<std::size_t>>(), parse_group(t.at("group").get<std::string>()));
    auto data = t.at("data").get<Vector>();
    if (data.size() != dst.values.size()) throw FormatError("tensor '" + name + "' has wrong element count", 0);
    dst.values = std::move(data);
  }
  return b;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  Json j;
  j["format"] = "asrnn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = serialize_config(c.config);
  j["model"] = to_string(c.model);
  j["dims"] = Json{{"input", c.dims.input},
                   {"hidden", c.dims.hidden},
                   {"output", c.dims.output},
                   {"head", c.dims.mode == HeadMode::kPerStep ? "per_step" : "final_state"}};
  j["init"] = Json{{"scheme", to_string(c.init.recurrent.scheme)},
                   {"a", c.init.recurrent.uniform_lo},
                   {"b", c.init.recurrent.uniform_hi},
                   {"epsilon", c.init.recurrent.epsilon},
                   {"rng_seed", c.init.recurrent.rng_seed},
                   {"uf_scheme", to_string(c.init.uf_scheme)},
                   {"seed", c.init.seed}};
  j["rng_seed"] = c.rng_seed;
  j["iteration"] = c.iteration;
  j["tensors"] = bundle_to_json(c.parameters);
  j["optimizer"] = Json{{"step", c.optimizer.step}, {"mean_square", bundle_to_json(c.optimizer.mean_square)}};
  Json state = Json::array();
  for (const Matrix& m : c.carried_state)
    state.push_back(Json{{"shape", {m.rows(), m.cols()}}, {"data", Vector(m.data().begin(), m.data().end())}});
  j["carried_state"] = std::move(state);
  return j.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    if (j.at("format") != "asrnn-checkpoint") throw FormatError("not an asrnn checkpoint", 0);
    if (j.at("version").get<int>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version", 0);
    Checkpoint c;
    c.config = parse_config(j.at("config").get<std::string>());
    c.model = parse_model_kind(j.at("model").get<std::string>());
    const Json& d = j.at("dims");
    c.dims.input = d.at("input").get<std::size_t>();
    c.dims.hidden = d.at("hidden").get<std::size_t>();
    c.dims.output = d.at("output").get<std::size_t>();
    c.dims.mode = d.at("head").get<std::string>() == "per_step" ? HeadMode::kPerStep : HeadMode::kFinalState;
    const Json& in = j.at("init");
    c.init.recurrent.scheme = parse_init_scheme(in.at("scheme").get<std::string>());
    c.init.recurrent.uniform_lo = in.at("a").get<double>();
    c.init.recurrent.uniform_hi = in.at("b").get<double>();
    c.init.recurrent.epsilon = in.at("epsilon").get<double>();
    c.init.recurrent.rng_seed = in.at("rng_seed").get<std::uint64_t>();
    c.init.uf_scheme = parse_init_scheme(in.at("uf_scheme").get<std::string>());
    c.init.seed = in.at("seed").get<std::uint64_t>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<std::size_t>();
    c.parameters = bundle_from_json(j.at("tensors"));
    c.optimizer.step = j.at("optimizer").at("step").get<std::uint64_t>();
    c.optimizer.mean_square = bundle_from_json(j.at("optimizer").at("mean_square"));
    for (const Json& s : j.at("carried_state")) {
      const auto shape = s.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw FormatError("carried state must be a matrix", 0);
      c.carried_state.emplace_back(shape[0], shape[1], s.at("data").get<Vector>());
    }
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what(), 0);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed checkpoint config: ") + e.what(), 0);
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + tmp.string() + "'");
    out << checkpoint_to_json(ckpt);
    if (!out) throw std::runtime_error("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return checkpoint_from_json(text);
}

std::unique_ptr<Model> restore_model(const Checkpoint& ckpt) {
  auto model = make_model(ckpt.model, ckpt.dims, ckpt.init);
  const TensorBundle expected = model->zero_grad();
  if (!expected.same_layout(ckpt.parameters))
    throw ContractViolation("checkpoint tensors do not match " + std::string(to_string(ckpt.model)) +
                            " with d_h=" + std::to_string(ckpt.dims.hidden) +
                            ", d_x=" + std::to_string(ckpt.dims.input));
  load_parameters(*model, ckpt.parameters);
  return model;
}

}  // namespace asrnn
