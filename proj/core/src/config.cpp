#include "asrnn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "asrnn/error.hpp"
#include "asrnn/rng.hpp"

namespace asrnn {

std::string_view to_string(TaskKind t) noexcept {
  switch (t) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kSmnist: return "smnist";
    case TaskKind::kPmnist: return "pmnist";
    case TaskKind::kCharlm: return "charlm";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "copy") return TaskKind::kCopy;
  if (s == "smnist") return TaskKind::kSmnist;
  if (s == "pmnist") return TaskKind::kPmnist;
  if (s == "charlm") return TaskKind::kCharlm;
  throw ContractViolation("unknown task '" + std::string(s) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ContractViolation("expected a number");
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ContractViolation("expected a non-negative integer");
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ContractViolation("expected true or false");
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field count_field(std::string key, T RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, std::string_view v) { c.*member = static_cast<T>(parse_uint(v)); }};
}

Field real_field(std::string key, double RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return fmt_double(c.*member); },
          [member](RunConfig& c, std::string_view v) { c.*member = parse_double(v); }};
}

Field text_field(std::string key, std::string RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, std::string_view v) { c.*member = std::string(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"run.task", [](const RunConfig& c) { return std::string(to_string(c.task)); },
                 [](RunConfig& c, std::string_view v) { c.task = parse_task_kind(v); }});
    f.push_back({"run.model", [](const RunConfig& c) { return std::string(to_string(c.model)); },
                 [](RunConfig& c, std::string_view v) { c.model = parse_model_kind(v); }});
    f.push_back(count_field("run.seed", &RunConfig::seed));
    f.push_back(text_field("run.output_dir", &RunConfig::output_dir));
    f.push_back(count_field("run.iterations", &RunConfig::iterations));
    f.push_back(count_field("run.epochs", &RunConfig::epochs));
    f.push_back(count_field("run.batch", &RunConfig::batch));
    f.push_back(count_field("run.log_interval", &RunConfig::log_interval));
    f.push_back(count_field("run.checkpoint_interval", &RunConfig::checkpoint_interval));
    f.push_back({"run.record_wall_clock", [](const RunConfig& c) { return std::string(c.record_wall_clock ? "true" : "false"); },
                 [](RunConfig& c, std::string_view v) { c.record_wall_clock = parse_bool(v); }});
    f.push_back(count_field("model.d_h", &RunConfig::hidden));
    f.push_back({"init.scheme", [](const RunConfig& c) { return std::string(to_string(c.init_scheme)); },
                 [](RunConfig& c, std::string_view v) { c.init_scheme = parse_init_scheme(v); }});
    f.push_back({"init.uf_scheme", [](const RunConfig& c) { return std::string(to_string(c.uf_scheme)); },
                 [](RunConfig& c, std::string_view v) { c.uf_scheme = parse_init_scheme(v); }});
    f.push_back(real_field("init.a", &RunConfig::init_a));
    f.push_back(real_field("init.b", &RunConfig::init_b));
    f.push_back(real_field("init.epsilon", &RunConfig::init_epsilon));
    f.push_back({"optim.lr", [](const RunConfig& c) { return fmt_double(c.optim.lr_main); },
                 [](RunConfig& c, std::string_view v) { c.optim.lr_main = parse_double(v); }});
    f.push_back({"optim.lr_whh", [](const RunConfig& c) { return fmt_double(c.optim.lr_recurrent); },
                 [](RunConfig& c, std::string_view v) { c.optim.lr_recurrent = parse_double(v); }});
    f.push_back({"optim.alpha", [](const RunConfig& c) { return fmt_double(c.optim.alpha); },
                 [](RunConfig& c, std::string_view v) { c.optim.alpha = parse_double(v); }});
    f.push_back({"optim.clip_norm",
                 [](const RunConfig& c) { return c.optim.clip_norm ? fmt_double(*c.optim.clip_norm) : std::string("none"); },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "none" || v == "off")
                     c.optim.clip_norm.reset();
                   else
                     c.optim.clip_norm = parse_double(v);
                 }});
    f.push_back({"optim.eps", [](const RunConfig& c) { return fmt_double(c.optim.epsilon_denominator); },
                 [](RunConfig& c, std::string_view v) { c.optim.epsilon_denominator = parse_double(v); }});
    f.push_back(count_field("copy.K", &RunConfig::copy_k));
    f.push_back(count_field("copy.L", &RunConfig::copy_l));
    f.push_back(count_field("copy.eval_batch", &RunConfig::copy_eval_batch));
    f.push_back(text_field("mnist.train_images", &RunConfig::mnist_train_images));
    f.push_back(text_field("mnist.train_labels", &RunConfig::mnist_train_labels));
    f.push_back(text_field("mnist.test_images", &RunConfig::mnist_test_images));
    f.push_back(text_field("mnist.test_labels", &RunConfig::mnist_test_labels));
    f.push_back(count_field("mnist.eval_samples", &RunConfig::mnist_eval_samples));
    f.push_back(text_field("charlm.corpus", &RunConfig::corpus));
    f.push_back(count_field("charlm.T", &RunConfig::tbptt_len));
    f.push_back(real_field("charlm.train_fraction", &RunConfig::train_fraction));
    f.push_back(real_field("charlm.valid_fraction", &RunConfig::valid_fraction));
    f.push_back(count_field("charlm.eval_windows", &RunConfig::eval_windows));
    f.push_back(real_field("diag.c_x", &RunConfig::input_bound));
    return f;
  }();
  return table;
}

const Field& find_field(std::string_view key, std::size_t line) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown key", line, std::string(key));
}

void assign(RunConfig& c, std::string_view key, std::string_view value, std::size_t line) {
  const Field& f = find_field(key, line);
  try {
    f.set(c, value);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what(), line, std::string(key));
  }
}

}  // namespace

void RunConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError("must be positive", 0, key);
  };
  positive(batch, "run.batch");
  positive(log_interval, "run.log_interval");
  positive(hidden, "model.d_h");
  if (task == TaskKind::kCopy || epochs == 0) positive(iterations, "run.iterations");
  if (task == TaskKind::kCopy) {
    positive(copy_k, "copy.K");
    positive(copy_eval_batch, "copy.eval_batch");
  }
  if (task == TaskKind::kCharlm) positive(tbptt_len, "charlm.T");
  if (init_a > init_b) throw ConfigError("init.a must not exceed init.b", 0, "init.a");
  if (init_epsilon < 0.0) throw ConfigError("must be >= 0", 0, "init.epsilon");
  if (!(input_bound > 0.0)) throw ConfigError("must be > 0", 0, "diag.c_x");
  try {
    optim.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what(), 0, "optim");
  }
}

InitSpec RunConfig::init_spec() const {
  return InitSpec{init_scheme, init_a, init_b, init_epsilon, split_seed(seed, SeedTag::kInit)};
}

ModelInit RunConfig::model_init() const {
  return ModelInit{init_spec(), uf_scheme, split_seed(seed, SeedTag::kInit)};
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no, std::string(line));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no, std::string(line));
    const std::string key = std::string(trim(line.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    assign(c, full, trim(line.substr(eq + 1)), line_no);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", 0, "--config");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text);
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(c) + "\n";
  }
  return out;
}

void apply_override(RunConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected section.key=value", 0, std::string(assignment));
  assign(c, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), 0);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace asrnn
