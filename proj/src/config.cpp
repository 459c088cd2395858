#include "swats/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace swats {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(display(), "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& item : node_.items())
      if (!known.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  double real(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  long integer(const char* key, long fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long>();
  }

  std::uint64_t seed(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long>() < 0))
      throw ConfigError(field(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> reals(const char* key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = node_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    for (const json& item : v) {
      if (!item.is_number()) throw ConfigError(field(key), "expected an array of numbers");
      out.push_back(item.get<double>());
    }
    return out;
  }

  const json& child(const char* key) const {
    if (!node_.contains(key)) throw ConfigError(field(key), "missing");
    return node_.at(key);
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
};

ProblemSpec parse_problem(const json& node) {
  Reader r(node, "problem");
  r.allow({"kind", "dim", "condition_number", "init_scale", "rows", "cols", "n_per_class",
           "n_features", "separation", "l2", "hidden", "activation", "seed"});
  ProblemSpec spec;
  const std::string kind = r.text("kind", "");
  if (kind == "quadratic")
    spec.kind = ProblemKind::Quadratic;
  else if (kind == "least_squares")
    spec.kind = ProblemKind::LeastSquares;
  else if (kind == "logistic_regression")
    spec.kind = ProblemKind::LogisticRegression;
  else if (kind == "mlp_classifier")
    spec.kind = ProblemKind::MlpClassifier;
  else
    throw ConfigError("problem.kind", "expected quadratic, least_squares, "
                                      "logistic_regression or mlp_classifier");
  spec.dim = r.integer("dim", spec.dim);
  spec.condition_number = r.real("condition_number", spec.condition_number);
  spec.init_scale = r.real("init_scale", spec.init_scale);
  spec.rows = r.integer("rows", spec.rows);
  spec.cols = r.integer("cols", spec.cols);
  spec.n_per_class = r.integer("n_per_class", spec.n_per_class);
  spec.n_features = r.integer("n_features", spec.n_features);
  spec.separation = r.real("separation", spec.separation);
  spec.l2 = r.real("l2", spec.l2);
  if (r.has("hidden")) {
    spec.hidden.clear();
    for (double width : r.reals("hidden")) {
      if (width != static_cast<double>(static_cast<Index>(width)))
        throw ConfigError("problem.hidden", "widths must be integers");
      spec.hidden.push_back(static_cast<Index>(width));
    }
  }
  const std::string activation = r.text("activation", "tanh");
  if (activation == "tanh")
    spec.activation = Activation::Tanh;
  else if (activation == "relu")
    spec.activation = Activation::Relu;
  else
    throw ConfigError("problem.activation", "expected tanh or relu");
  spec.seed = r.seed("seed", spec.seed);
  return spec;
}

AdamConfig<double> parse_adam(const Reader& r) {
  AdamConfig<double> c;
  c.alpha = r.real("alpha", c.alpha);
  c.beta1 = r.real("beta1", c.beta1);
  c.beta2 = r.real("beta2", c.beta2);
  c.epsilon = r.real("epsilon", c.epsilon);
  return c;
}

OptimizerSpec parse_optimizer(const json& node) {
  Reader r(node, "optimizer");
  const std::string kind = r.text("kind", "");
  if (kind == "sgd" || kind == "sgdm") {
    r.allow({"kind", "alpha", "beta"});
    SgdConfig<double> c;
    c.beta = kind == "sgdm" ? 0.9 : 0.0;
    c.alpha = r.real("alpha", c.alpha);
    c.beta = r.real("beta", c.beta);
    return c;
  }
  if (kind == "adagrad") {
    r.allow({"kind", "alpha", "epsilon"});
    AdagradConfig<double> c;
    c.alpha = r.real("alpha", c.alpha);
    c.epsilon = r.real("epsilon", c.epsilon);
    return c;
  }
  if (kind == "rmsprop") {
    r.allow({"kind", "alpha", "beta", "epsilon"});
    RmspropConfig<double> c;
    c.alpha = r.real("alpha", c.alpha);
    c.beta = r.real("beta", c.beta);
    c.epsilon = r.real("epsilon", c.epsilon);
    return c;
  }
  if (kind == "adam") {
    r.allow({"kind", "alpha", "beta1", "beta2", "epsilon"});
    return parse_adam(r);
  }
  if (kind == "adamclip") {
    r.allow({"kind", "alpha", "beta1", "beta2", "epsilon", "p", "q", "alpha_sgd"});
    AdamClipConfig<double> c;
    c.adam = parse_adam(r);
    c.p = r.real("p", c.p);
    // JSON has no infinity: null, "inf" or an absent key all mean unbounded.
    if (r.has("q") && node.at("q").is_string()) {
      if (node.at("q").get<std::string>() != "inf")
        throw ConfigError("optimizer.q", "expected a number, \"inf\" or null");
    } else {
      c.q = r.real("q", c.q);
    }
    if (!r.has("alpha_sgd")) throw ConfigError("optimizer.alpha_sgd", "required for adamclip");
    c.alpha_sgd = r.real("alpha_sgd", c.alpha_sgd);
    return c;
  }
  if (kind == "swats") {
    r.allow({"kind", "alpha", "beta1", "beta2", "epsilon"});
    return SwatsConfig<double>{parse_adam(r)};
  }
  throw ConfigError("optimizer.kind",
                    "expected sgd, sgdm, adagrad, rmsprop, adam, adamclip or swats");
}

Schedule parse_schedule(const json& node) {
  Reader r(node, "schedule");
  r.allow({"kind", "milestones", "factor"});
  const std::string kind = r.text("kind", "constant");
  Schedule s;
  if (kind == "constant") {
    s.kind = ScheduleKind::Constant;
  } else if (kind == "step_decay") {
    s.kind = ScheduleKind::StepDecay;
    s.milestones = r.has("milestones") ? r.reals("milestones")
                                       : Schedule::standard_step_decay().milestones;
  } else {
    throw ConfigError("schedule.kind", "expected constant or step_decay");
  }
  s.factor = r.real("factor", s.factor);
  return s;
}

}  // namespace

ConfigDocument parse_config(const json& doc) {
  Reader r(doc, "");
  r.allow({"problem", "optimizer", "schedule", "epochs", "batch_size", "grad_clip_norm", "seed",
           "log_interval", "output_path", "lr_grid"});
  ConfigDocument out;
  ExperimentConfig& cfg = out.experiment;
  cfg.problem = parse_problem(r.child("problem"));
  cfg.optimizer = parse_optimizer(r.child("optimizer"));
  if (doc.contains("schedule")) cfg.schedule = parse_schedule(doc.at("schedule"));
  cfg.epochs = r.integer("epochs", cfg.epochs);
  cfg.batch_size = r.integer("batch_size", cfg.batch_size);
  if (r.has("grad_clip_norm")) cfg.grad_clip_norm = r.real("grad_clip_norm", 0.0);
  cfg.seed = r.seed("seed", cfg.seed);
  cfg.log_interval = r.integer("log_interval", cfg.log_interval);
  cfg.output_path = r.text("output_path", "");
  out.lr_grid = r.reals("lr_grid");
  for (double lr : out.lr_grid)
    if (!(lr > 0)) throw ConfigError("lr_grid", "rates must be positive");
  cfg.validate();
  return out;
}

json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  std::string pointer;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ConfigError(key, "empty path component");
    pointer += "/" + part;
  }
  doc[json::json_pointer(pointer)] = std::move(value);
}

}  // namespace swats
