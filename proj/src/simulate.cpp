#include "aempc/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aempc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::aempc: return "aempc";
    case Variant::empc_known: return "empc-known";
    case Variant::empc_frozen: return "empc-frozen";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "aempc") return Variant::aempc;
  if (name == "empc-known") return Variant::empc_known;
  if (name == "empc-frozen") return Variant::empc_frozen;
  throw ContractViolation("unknown controller variant: " + name);
}

Vec sample_disturbance(UniformSampler& gen, const Box& D) {
  return gen.box_sample(D);
}

RunLog run_closed_loop(const Scenario& sc, const ControllerConfig& config,
                       const SolutionHook& hook) {
  if (!config.Z.box_x.contains(sc.x0))
    throw ContractViolation("scenario: x0 outside the state box");
  for (int k = 0; k <= sc.steps; k += std::max(1, sc.steps / 7))
    if (!config.Theta.contains(sc.schedule.at(k), 1e-12))
      throw ContractViolation("scenario: parameter schedule leaves Theta");

  MpcController controller(config);
  EstimatorState est(sc.theta_hat0, config.design.mu, config.Theta,
                     sc.lms_activation);

  UniformSampler rng(sc.seed);
  RunLog log;
  log.records.reserve(sc.steps);
  log.scenario_name = sc.name;
  log.variant = sc.variant;
  log.seed = sc.seed;
  log.lms_activation = sc.lms_activation;
  log.mu = config.design.mu;
  log.c_theta = diameter(config.Theta);
  log.theta_bar = config.design.theta_bar;
  log.theta_hat0 = sc.theta_hat0;
  log.x0 = sc.x0;

  Vec x = sc.x0;
  Vec x_prev, u_prev;
  double decay = 1.0;
  for (int k = 0; k < sc.steps; ++k) {
    const Vec theta_k = sc.schedule.at(k);
    if (k > 0 && sc.variant != Variant::empc_known)
      est = lms_update(est, config.model, x_prev, u_prev, x);
    const Vec theta_hat =
        sc.variant == Variant::empc_known ? theta_k : est.theta_hat;

    auto [u, sol] = controller.step(x, theta_hat);
    if (hook) hook(k, x, sol);

    const Vec d = decay * sample_disturbance(rng, config.D);
    decay *= sc.disturbance_decay;
    const Vec x_next = eval_dynamics(config.model, x, u, theta_k, d);

    RunRecord rec;
    rec.k = k;
    rec.x = x;
    rec.u = u;
    rec.theta = theta_k;
    rec.theta_hat = theta_hat;
    rec.d = d;
    rec.xhat1 = config.model.f0(x, u) + config.model.G(x, u) * theta_hat;
    rec.lambda = sol.lambda;
    rec.stage_cost = config.cost.value(x, u);
    rec.setpoint_cost = sol.setpoint_cost;
    rec.s_first = sol.s(0);
    rec.s_last = sol.s(sol.s.size() - 1);
    rec.status = sol.candidate_used ? 1 : 0;
    rec.iters = sol.iters;
    rec.solve_seconds = sol.solve_seconds;
    log.records.push_back(std::move(rec));

    x_prev = x;
    u_prev = u;
    x = x_next;
  }
  log.x_final = x;
  return log;
}

namespace {

void append_vec(std::string& line, const Vec& v) {
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v(i));
    line += buf;
  }
}

void append_scalar(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), ",%.17g", v);
  line += buf;
}

}  // namespace

void write_runlog_csv(const RunLog& log, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw NumericalError("cannot open " + csv_path + " for writing");
  const int n_x = log.records.empty() ? 0 : static_cast<int>(log.records[0].x.size());
  const int n_u = log.records.empty() ? 0 : static_cast<int>(log.records[0].u.size());
  const int n_th = log.records.empty() ? 0 : static_cast<int>(log.records[0].theta.size());
  out << "k";
  for (int i = 0; i < n_x; ++i) out << ",x" << i;
  for (int i = 0; i < n_u; ++i) out << ",u" << i;
  for (int i = 0; i < n_th; ++i) out << ",theta" << i;
  for (int i = 0; i < n_th; ++i) out << ",theta_hat" << i;
  out << ",lambda,stage_cost,setpoint_cost,s_first,s_last";
  for (int i = 0; i < n_x; ++i) out << ",d" << i;
  for (int i = 0; i < n_x; ++i) out << ",xhat1_" << i;
  out << ",status,iters,solve_seconds\n";
  for (const auto& r : log.records) {
    std::string line = std::to_string(r.k);
    append_vec(line, r.x);
    append_vec(line, r.u);
    append_vec(line, r.theta);
    append_vec(line, r.theta_hat);
    append_scalar(line, r.lambda);
    append_scalar(line, r.stage_cost);
    append_scalar(line, r.setpoint_cost);
    append_scalar(line, r.s_first);
    append_scalar(line, r.s_last);
    append_vec(line, r.d);
    append_vec(line, r.xhat1);
    line += "," + std::to_string(r.status) + "," + std::to_string(r.iters);
    append_scalar(line, r.solve_seconds);
    out << line << '\n';
  }
}

void write_runlog_sidecar(const RunLog& log, const std::string& json_path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["scenario"] = log.scenario_name;
  j["variant"] = variant_name(log.variant);
  j["seed"] = log.seed;
  j["steps"] = log.steps();
  j["lms_activation"] = log.lms_activation;
  j["mu"] = log.mu;
  j["c_theta"] = log.c_theta;
  j["theta_bar"] = std::vector<double>(log.theta_bar.data(),
                                       log.theta_bar.data() + log.theta_bar.size());
  j["theta_hat0"] = std::vector<double>(
      log.theta_hat0.data(), log.theta_hat0.data() + log.theta_hat0.size());
  j["x0"] = std::vector<double>(log.x0.data(), log.x0.data() + log.x0.size());
  j["x_final"] = std::vector<double>(log.x_final.data(),
                                     log.x_final.data() + log.x_final.size());
  j["design_hash"] = log.design_hash;
  std::ofstream out(json_path);
  if (!out) throw NumericalError("cannot open " + json_path + " for writing");
  out << j.dump(2) << '\n';
}

RunLog read_runlog_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw NumericalError("cannot open " + csv_path);
  std::string header;
  if (!std::getline(in, header)) throw NumericalError("empty run log " + csv_path);
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  auto count_prefix = [&](const std::string& prefix) {
    int n = 0;
    for (const auto& c : cols)
      if (c.rfind(prefix, 0) == 0 &&
          c.size() > prefix.size() &&
          std::isdigit(static_cast<unsigned char>(c[prefix.size()])))
        ++n;
    return n;
  };
  const int n_x = count_prefix("x");
  const int n_u = count_prefix("u");
  const int n_th = count_prefix("theta");

  RunLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ls, tok, ',')) vals.push_back(std::strtod(tok.c_str(), nullptr));
    std::size_t at = 0;
    RunRecord r;
    r.k = static_cast<int>(vals.at(at++));
    auto take = [&](int n) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = vals.at(at++);
      return v;
    };
    r.x = take(n_x);
    r.u = take(n_u);
    r.theta = take(n_th);
    r.theta_hat = take(n_th);
    r.lambda = vals.at(at++);
    r.stage_cost = vals.at(at++);
    r.setpoint_cost = vals.at(at++);
    r.s_first = vals.at(at++);
    r.s_last = vals.at(at++);
    r.d = take(n_x);
    r.xhat1 = take(n_x);
    r.status = static_cast<int>(vals.at(at++));
    r.iters = static_cast<int>(vals.at(at++));
    r.solve_seconds = vals.at(at++);
    log.records.push_back(std::move(r));
  }
  return log;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aempc
