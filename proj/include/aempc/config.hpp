#pragma once

#include "aempc/design.hpp"
#include "aempc/model.hpp"
#include "aempc/params.hpp"
#include "aempc/sets.hpp"
#include "aempc/simulate.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace aempc {

/// A fully assembled plant: model, cost, sets, nominal parameters.
struct Instance {
  std::string name;
  ParametricModel model;
  StageCost cost;
  ConstraintSet Z;
  Box Theta;
  Box D;
  Vec theta_bar;
  Vec x0_default;
};

/// Register a model factory under a name usable from config files.
void register_model(const std::string& name, std::function<Instance()> factory);
Instance make_instance(const std::string& name);

struct ExperimentConfig {
  int schema_version = 1;
  std::string model = "cstr";
  // optional set overrides (empty = instance defaults)
  Box state_box, input_box, theta_box, disturbance_box;
  bool has_state_box = false, has_input_box = false, has_theta_box = false,
       has_disturbance_box = false;

  struct ScenarioCfg {
    int steps = 3000;
    std::uint64_t seed = 1;
    Vec x0;  // empty = instance default
    int lms_activation = 200;
    Vec theta_hat0;  // empty = theta_bar
    ThetaSchedule schedule;
    bool has_schedule = false;
    double disturbance_decay = 1.0;
  } scenario;

  struct ControllerCfg {
    int horizon = 25;
    double beta = 50.0;
  } controller;

  struct DesignCfg {
    int grid_state = 6;
    int grid_input = 6;
    std::vector<double> rho_scan = {0.80, 0.85, 0.90, 0.95, 0.99};
    double reference_input = 0.15;
  } design;

  std::string output_dir = "out";
};

/// Strict parse: unknown keys anywhere are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Instance with the config's set overrides applied.
Instance instance_from_config(const ExperimentConfig& cfg);

/// Scenario assembled from the config (variant and name provided by caller).
Scenario scenario_from_config(const ExperimentConfig& cfg, const Instance& inst,
                              Variant variant);

/// Design JSON round-trip (bit-exact over doubles).
nlohmann::json design_to_json(const DesignArtifacts& d);
DesignArtifacts design_from_json(const nlohmann::json& j);
void save_design(const DesignArtifacts& d, const std::string& path);
DesignArtifacts load_design(const std::string& path);

}  // namespace aempc
