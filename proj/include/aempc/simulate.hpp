#pragma once

#include "aempc/lms.hpp"
#include "aempc/mpc.hpp"

#include <string>

namespace aempc {

enum class Variant { aempc, empc_known, empc_frozen };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// True-parameter schedule: constant, or a linear ramp over a step range.
struct ThetaSchedule {
  enum class Type { constant, ramp };
  Type type = Type::constant;
  Vec value;
  Vec from, to;
  int start = 0, end = 1;

  Vec at(int k) const {
    if (type == Type::constant) return value;
    if (k <= start) return from;
    if (k >= end) return to;
    const double a = static_cast<double>(k - start) / (end - start);
    return (1.0 - a) * from + a * to;
  }
};

struct Scenario {
  std::string name = "scenario";
  int steps = 3000;
  ThetaSchedule schedule;
  Vec theta_hat0;
  Vec x0;
  int lms_activation = 0;
  std::uint64_t seed = 1;
  double disturbance_decay = 1.0;  // d_k drawn from D then scaled by decay^k
  Variant variant = Variant::aempc;
};

struct RunRecord {
  int k = 0;
  Vec x, u, theta, theta_hat, d, xhat1;
  double lambda = 0.0;
  double stage_cost = 0.0;
  double setpoint_cost = 0.0;
  double s_first = 0.0;
  double s_last = 0.0;
  int status = 0;  // 0 = solved, 1 = candidate fallback
  int iters = 0;
  double solve_seconds = 0.0;
};

struct RunLog {
  std::vector<RunRecord> records;
  Vec x_final;  // state after the last logged step
  std::string scenario_name;
  Variant variant = Variant::aempc;
  std::uint64_t seed = 0;
  int lms_activation = 0;
  double mu = 0.0;
  double c_theta = 0.0;
  Vec theta_bar, theta_hat0, x0;
  std::string design_hash;

  int steps() const { return static_cast<int>(records.size()); }
};

/// Componentwise-uniform draw from D; the generator state advances
/// deterministically.
Vec sample_disturbance(UniformSampler& gen, const Box& D);

using SolutionHook =
    std::function<void(int k, const Vec& x, const MpcSolution& sol)>;

/// Algorithm-1 closed loop: measure, LMS update, lambda update, solve, apply,
/// plant step with the scheduled true parameters and sampled disturbance.
RunLog run_closed_loop(const Scenario& sc, const ControllerConfig& config,
                       const SolutionHook& hook = nullptr);

void write_runlog_csv(const RunLog& log, const std::string& csv_path);
void write_runlog_sidecar(const RunLog& log, const std::string& json_path);
RunLog read_runlog_csv(const std::string& csv_path);

/// FNV-1a hash of a file's bytes, hex-encoded (design-file fingerprint).
std::string file_hash_hex(const std::string& path);

}  // namespace aempc
