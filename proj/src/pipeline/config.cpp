#include "retrologic/pipeline/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "retrologic/error.hpp"

namespace retrologic {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("'" + v + "' is not a valid number");
  return out;
}

bool boolean(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("'" + v + "' is not a boolean");
}

OptimizerKind optimizer(const std::string& v) {
  if (v == "adam") return OptimizerKind::Adam;
  if (v == "sgd") return OptimizerKind::Sgd;
  throw std::invalid_argument("unknown optimizer '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dim", [](RunConfig& c, const std::string& v) { c.model.embed.dim = number<int>(v); }},
      {"layers", [](RunConfig& c, const std::string& v) { c.model.embed.layers = number<int>(v); }},
      {"activation",
       [](RunConfig& c, const std::string& v) { c.model.embed.activation = activation_from_string(v); }},
      {"pooling", [](RunConfig& c, const std::string& v) { c.model.embed.pooling = pooling_from_string(v); }},
      {"raw_x0", [](RunConfig& c, const std::string& v) { c.model.embed.raw_x0 = boolean(v); }},
      {"bilinear", [](RunConfig& c, const std::string& v) { c.model.bilinear = boolean(v); }},
      {"class_conditional",
       [](RunConfig& c, const std::string& v) { c.model.class_conditional = boolean(v); }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         c.model.seed = number<std::uint64_t>(v);
         c.train.seed = c.model.seed;
       }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = number<std::size_t>(v); }},
      {"max_updates", [](RunConfig& c, const std::string& v) { c.train.max_updates = number<long long>(v); }},
      {"max_epochs", [](RunConfig& c, const std::string& v) { c.train.max_epochs = number<int>(v); }},
      {"learning_rate", [](RunConfig& c, const std::string& v) { c.train.learning_rate = number<double>(v); }},
      {"grad_clip", [](RunConfig& c, const std::string& v) { c.train.grad_clip = number<double>(v); }},
      {"optimizer", [](RunConfig& c, const std::string& v) { c.train.optimizer = optimizer(v); }},
      {"adam_beta1", [](RunConfig& c, const std::string& v) { c.train.adam_beta1 = number<double>(v); }},
      {"adam_beta2", [](RunConfig& c, const std::string& v) { c.train.adam_beta2 = number<double>(v); }},
      {"adam_eps", [](RunConfig& c, const std::string& v) { c.train.adam_eps = number<double>(v); }},
      {"estimator", [](RunConfig& c, const std::string& v) { c.train.estimator = estimator_from_string(v); }},
      {"eval_every", [](RunConfig& c, const std::string& v) { c.train.eval_every = number<int>(v); }},
      {"beam", [](RunConfig& c, const std::string& v) { c.train.beam = number<std::size_t>(v); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.train.threads = number<int>(v); }},
      {"radius", [](RunConfig& c, const std::string& v) { c.radius = number<int>(v); }},
      {"support_cap", [](RunConfig& c, const std::string& v) { c.support_cap = number<std::size_t>(v); }},
      {"train", [](RunConfig& c, const std::string& v) { c.train_path = v; }},
      {"val", [](RunConfig& c, const std::string& v) { c.val_path = v; }},
      {"test", [](RunConfig& c, const std::string& v) { c.test_path = v; }},
      {"templates", [](RunConfig& c, const std::string& v) { c.templates_path = v; }},
      {"model", [](RunConfig& c, const std::string& v) { c.model_path = v; }},
      {"metrics", [](RunConfig& c, const std::string& v) { c.metrics_path = v; }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    try {
      it->second(base, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  if (base.model.embed.dim <= 0 || base.model.embed.layers < 0 || base.train.batch_size == 0 ||
      base.train.beam == 0 || base.train.threads <= 0 || base.radius < 0) {
    throw std::invalid_argument("config: dim, batch_size, beam and threads must be positive");
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  auto cfg = parse_config(in, std::move(base));
  const auto dir = std::filesystem::path(path).parent_path();
  for (auto* p : {&cfg.train_path, &cfg.val_path, &cfg.test_path, &cfg.templates_path, &cfg.model_path,
                  &cfg.metrics_path}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (dir / *p).string();
  }
  return cfg;
}

}  // namespace retrologic
