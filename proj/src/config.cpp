#include "aempc/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <set>

namespace aempc {

namespace {

using nlohmann::json;

std::map<std::string, std::function<Instance()>>& registry() {
  static std::map<std::string, std::function<Instance()>> r = [] {
    std::map<std::string, std::function<Instance()>> m;
    m["cstr"] = []() {
      const CstrInstance c = make_cstr();
      Instance inst;
      inst.name = "cstr";
      inst.model = c.model;
      inst.cost = c.cost;
      inst.Z = box_constraints(c.state_box, c.input_box);
      inst.Theta = c.theta_box;
      inst.D = c.disturbance_box;
      inst.theta_bar = c.theta_bar;
      inst.x0_default = c.x0_default;
      return inst;
    };
    return m;
  }();
  return r;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object())
    throw ContractViolation("config: expected an object at " + where);
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ContractViolation("config: unknown key '" + key + "' in " + where);
}

Vec vec_from(const json& j, const std::string& where) {
  if (!j.is_array())
    throw ContractViolation("config: expected an array at " + where);
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Box box_from(const json& j, const std::string& where) {
  require_keys(j, {"lower", "upper"}, where);
  return Box(vec_from(j.at("lower"), where + ".lower"),
             vec_from(j.at("upper"), where + ".upper"));
}

json vec_to(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json mat_to(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ContractViolation("design: expected a matrix at " + where);
  const std::size_t cols = j[0].size();
  Mat M(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols)
      throw ContractViolation("design: ragged matrix at " + where);
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

}  // namespace

void register_model(const std::string& name, std::function<Instance()> factory) {
  registry()[name] = std::move(factory);
}

Instance make_instance(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end())
    throw ContractViolation("unknown model '" + name + "'");
  return it->second();
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  require_keys(j, {"schema_version", "model", "sets", "scenario", "controller",
                   "design", "output_dir"},
               "config");
  cfg.schema_version = j.value("schema_version", 1);
  if (cfg.schema_version != 1)
    throw ContractViolation("config: unsupported schema_version");
  if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
  if (j.contains("sets")) {
    const json& s = j.at("sets");
    require_keys(s, {"state_box", "input_box", "theta_box", "disturbance_box"},
                 "sets");
    if (s.contains("state_box")) {
      cfg.state_box = box_from(s.at("state_box"), "sets.state_box");
      cfg.has_state_box = true;
    }
    if (s.contains("input_box")) {
      cfg.input_box = box_from(s.at("input_box"), "sets.input_box");
      cfg.has_input_box = true;
    }
    if (s.contains("theta_box")) {
      cfg.theta_box = box_from(s.at("theta_box"), "sets.theta_box");
      cfg.has_theta_box = true;
    }
    if (s.contains("disturbance_box")) {
      cfg.disturbance_box =
          box_from(s.at("disturbance_box"), "sets.disturbance_box");
      cfg.has_disturbance_box = true;
    }
  }
  if (j.contains("scenario")) {
    const json& s = j.at("scenario");
    require_keys(s,
                 {"steps", "seed", "x0", "lms_activation", "theta_hat0",
                  "theta_schedule", "disturbance_decay"},
                 "scenario");
    cfg.scenario.steps = s.value("steps", 3000);
    cfg.scenario.seed = s.value("seed", std::uint64_t{1});
    if (s.contains("x0")) cfg.scenario.x0 = vec_from(s.at("x0"), "scenario.x0");
    cfg.scenario.lms_activation = s.value("lms_activation", 200);
    if (s.contains("theta_hat0"))
      cfg.scenario.theta_hat0 = vec_from(s.at("theta_hat0"), "scenario.theta_hat0");
    cfg.scenario.disturbance_decay = s.value("disturbance_decay", 1.0);
    if (s.contains("theta_schedule")) {
      const json& t = s.at("theta_schedule");
      require_keys(t, {"type", "value", "from", "to", "start", "end"},
                   "theta_schedule");
      const std::string type = t.at("type").get<std::string>();
      if (type == "constant") {
        cfg.scenario.schedule.type = ThetaSchedule::Type::constant;
        cfg.scenario.schedule.value =
            vec_from(t.at("value"), "theta_schedule.value");
      } else if (type == "ramp") {
        cfg.scenario.schedule.type = ThetaSchedule::Type::ramp;
        cfg.scenario.schedule.from = vec_from(t.at("from"), "theta_schedule.from");
        cfg.scenario.schedule.to = vec_from(t.at("to"), "theta_schedule.to");
        cfg.scenario.schedule.start = t.value("start", 0);
        cfg.scenario.schedule.end = t.value("end", 3000);
        if (cfg.scenario.schedule.end <= cfg.scenario.schedule.start)
          throw ContractViolation("config: ramp end must exceed start");
      } else {
        throw ContractViolation("config: unknown theta_schedule.type");
      }
      cfg.scenario.has_schedule = true;
    }
  }
  if (j.contains("controller")) {
    const json& c = j.at("controller");
    require_keys(c, {"horizon", "beta"}, "controller");
    cfg.controller.horizon = c.value("horizon", 25);
    cfg.controller.beta = c.value("beta", 50.0);
    if (cfg.controller.horizon < 1 || cfg.controller.beta <= 0.0)
      throw ContractViolation("config: horizon >= 1 and beta > 0 required");
  }
  if (j.contains("design")) {
    const json& d = j.at("design");
    require_keys(d, {"grid_state", "grid_input", "rho_scan", "reference_input"},
                 "design");
    cfg.design.grid_state = d.value("grid_state", 6);
    cfg.design.grid_input = d.value("grid_input", 6);
    if (d.contains("rho_scan"))
      cfg.design.rho_scan = d.at("rho_scan").get<std::vector<double>>();
    cfg.design.reference_input = d.value("reference_input", 0.15);
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ContractViolation("config parse error: " + std::string(e.what()));
  }
  return config_from_json(j);
}

Instance instance_from_config(const ExperimentConfig& cfg) {
  Instance inst = make_instance(cfg.model);
  Box X = cfg.has_state_box ? cfg.state_box : inst.Z.box_x;
  Box U = cfg.has_input_box ? cfg.input_box : inst.Z.box_u;
  if (cfg.has_state_box || cfg.has_input_box) inst.Z = box_constraints(X, U);
  if (cfg.has_theta_box) inst.Theta = cfg.theta_box;
  if (cfg.has_disturbance_box) inst.D = cfg.disturbance_box;
  if (!inst.D.contains(Vec::Zero(inst.D.dim())))
    throw ContractViolation("disturbance box must contain the origin");
  if (!inst.Theta.contains(inst.theta_bar))
    throw ContractViolation("theta box must contain theta_bar");
  return inst;
}

Scenario scenario_from_config(const ExperimentConfig& cfg, const Instance& inst,
                              Variant variant) {
  Scenario sc;
  sc.name = cfg.model;
  sc.steps = cfg.scenario.steps;
  sc.seed = cfg.scenario.seed;
  sc.x0 = cfg.scenario.x0.size() ? cfg.scenario.x0 : inst.x0_default;
  sc.lms_activation = cfg.scenario.lms_activation;
  sc.theta_hat0 =
      cfg.scenario.theta_hat0.size() ? cfg.scenario.theta_hat0 : inst.theta_bar;
  sc.disturbance_decay = cfg.scenario.disturbance_decay;
  sc.variant = variant;
  if (cfg.scenario.has_schedule) {
    sc.schedule = cfg.scenario.schedule;
  } else {
    sc.schedule.type = ThetaSchedule::Type::constant;
    sc.schedule.value = inst.theta_bar;
  }
  return sc;
}

json design_to_json(const DesignArtifacts& d) {
  json j;
  j["schema_version"] = d.schema_version;
  j["model"] = d.model_name;
  j["theta_bar"] = vec_to(d.theta_bar);
  j["mu"] = d.mu;
  j["tube"] = {
      {"P", mat_to(d.tube.P)},       {"K", mat_to(d.tube.K)},
      {"rho", d.tube.rho},           {"L_w", d.tube.L_w},
      {"w_bar", d.tube.w_bar},       {"c", vec_to(d.tube.c)},
      {"s_max", d.tube.s_max},
  };
  j["terminal"] = {
      {"P_f", mat_to(d.terminal.P_f)}, {"Q", mat_to(d.terminal.Q)},
      {"alpha", d.terminal.alpha},     {"H", d.terminal.H},
      {"p_max", d.terminal.p_max},
  };
  j["reference"] = {{"z_s", vec_to(d.z_s)}, {"v_s", vec_to(d.v_s)}};
  j["setpoint_inflation"] = d.setpoint_inflation;
  return j;
}

DesignArtifacts design_from_json(const json& j) {
  require_keys(j,
               {"schema_version", "model", "theta_bar", "mu", "tube", "terminal",
                "reference", "setpoint_inflation"},
               "design");
  DesignArtifacts d;
  d.schema_version = j.at("schema_version").get<int>();
  if (d.schema_version != 1)
    throw ContractViolation("design: unsupported schema_version");
  d.model_name = j.at("model").get<std::string>();
  d.theta_bar = vec_from(j.at("theta_bar"), "design.theta_bar");
  d.mu = j.at("mu").get<double>();
  const json& t = j.at("tube");
  require_keys(t, {"P", "K", "rho", "L_w", "w_bar", "c", "s_max"}, "design.tube");
  d.tube.P = mat_from(t.at("P"), "tube.P");
  d.tube.K = mat_from(t.at("K"), "tube.K");
  d.tube.rho = t.at("rho").get<double>();
  d.tube.L_w = t.at("L_w").get<double>();
  d.tube.w_bar = t.at("w_bar").get<double>();
  d.tube.c = vec_from(t.at("c"), "tube.c");
  d.tube.s_max = t.at("s_max").get<double>();
  const json& f = j.at("terminal");
  require_keys(f, {"P_f", "Q", "alpha", "H", "p_max"}, "design.terminal");
  d.terminal.P_f = mat_from(f.at("P_f"), "terminal.P_f");
  d.terminal.Q = mat_from(f.at("Q"), "terminal.Q");
  d.terminal.alpha = f.at("alpha").get<double>();
  d.terminal.H = f.at("H").get<double>();
  d.terminal.p_max = f.at("p_max").get<double>();
  const json& r = j.at("reference");
  require_keys(r, {"z_s", "v_s"}, "design.reference");
  d.z_s = vec_from(r.at("z_s"), "reference.z_s");
  d.v_s = vec_from(r.at("v_s"), "reference.v_s");
  d.setpoint_inflation = j.at("setpoint_inflation").get<double>();
  return d;
}

void save_design(const DesignArtifacts& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot open " + path + " for writing");
  out << design_to_json(d).dump(2) << '\n';
}

DesignArtifacts load_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open design file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ContractViolation("design parse error: " + std::string(e.what()));
  }
  return design_from_json(j);
}

}  // namespace aempc
