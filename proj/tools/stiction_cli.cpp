// Command-line front end: simulate trajectories of the discontinuous or the
// regularized system, solve and continue periodic-orbit branches, and run
// the slow-fast analyses (folded singularities, canards, closeness and
// multiplier studies). Emits CSV and JSON artifacts for plotting.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stiction/io.hpp"
#include "stiction/model.hpp"
#include "stiction/orbits.hpp"
#include "stiction/pws.hpp"
#include "stiction/regularization.hpp"

namespace {

using stiction::io::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Shared model / regularization options. Defaults are the reference
// parameter set (mu_s = 1.1, mu_d = 0.4, eps = 1e-3, delta = 0.6).
struct CommonOpts {
  double gamma = 5.0;
  double mu_s = 1.1;
  double mu_d = 0.4;
  double eps = 1e-3;
  double delta = 0.6;
  std::string config_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "frequency ratio");
    cmd->add_option("--mu-s", mu_s, "static friction level");
    cmd->add_option("--mu-d", mu_d, "dynamic friction level");
    cmd->add_option("--eps", eps, "regularization scale");
    cmd->add_option("--delta", delta, "interior extremum of phi");
    cmd->add_option("--config", config_file,
                    "JSON config file (flags override file values)");
  }

  // parameter-domain violations are configuration errors, not numerics
  stiction::Params params() const {
    stiction::Params p{gamma, mu_s, mu_d};
    try {
      p.validate();
    } catch (const stiction::ModelError& e) {
      throw CLI::ValidationError("parameters", e.what());
    }
    return p;
  }
  stiction::RegParams reg_params() const {
    return stiction::build_phi(delta, mu_s, mu_d, eps);
  }
  json to_config_json() const {
    return {{"gamma", gamma}, {"mu_s", mu_s},   {"mu_d", mu_d},
            {"eps", eps},     {"delta", delta}};
  }
};

// JSON config file: a flat object of option names (without the leading
// dashes) to values; command-line flags take precedence.
void apply_config(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt) throw CLI::ValidationError("--config", "unknown option " + key);
    if (opt->count() > 0) continue;  // flag given explicitly, keep it
    std::string text =
        value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw CLI::ValidationError("--out", "cannot open " + path);
  return os;
}

void emit_report(const std::string& path, const json& report) {
  if (path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    auto os = open_out(path);
    os << report.dump(2) << "\n";
  }
}

json error_report(const std::string& command, const std::string& what) {
  return {{"command", command}, {"error", what}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  CommonOpts common;
  std::string mode = "pws";
  double x0 = 0.0, y0 = 0.0, theta0 = 0.0;
  double T = 4.0 * stiction::kPi;
  std::string policy = "stick-first";
  std::string out = "trajectory";
};

stiction::BranchPolicy parse_policy(const std::string& name) {
  if (name == "stick-first") return stiction::BranchPolicy::StickFirst;
  if (name == "slip-first") return stiction::BranchPolicy::SlipFirst;
  if (name == "enumerate") return stiction::BranchPolicy::EnumerateBoth;
  throw CLI::ValidationError("--policy", "unknown policy " + name);
}

int run_simulate(const SimulateOpts& o) {
  const stiction::Params p = o.common.params();
  const stiction::State z0(o.x0, o.y0, o.theta0);
  json config = o.common.to_config_json();
  config["mode"] = o.mode;
  config["state0"] = stiction::io::to_json(z0);
  config["T"] = o.T;
  std::vector<std::string> warnings;
  json results;

  if (o.mode == "pws") {
    config["policy"] = o.policy;
    auto trajs =
        stiction::integrate_stiction(z0, o.T, parse_policy(o.policy), p);
    json files = json::array();
    for (std::size_t b = 0; b < trajs.size(); ++b) {
      std::string suffix = trajs.size() > 1 ? "_b" + std::to_string(b) : "";
      std::string csv = o.out + suffix + ".csv";
      std::string evts = o.out + suffix + "_events.jsonl";
      { auto os = open_out(csv); stiction::io::write_trajectory_csv(os, trajs[b], p); }
      { auto os = open_out(evts); stiction::io::write_event_jsonl(os, trajs[b].events); }
      files.push_back({{"trajectory", csv},
                       {"events", evts},
                       {"regular", stiction::is_regular(trajs[b])}});
      for (const auto& w : trajs[b].warnings) warnings.push_back(w);
    }
    results["branches"] = files;
    if (trajs.size() > 1) {
      std::string manifest = o.out + "_manifest.json";
      { auto os = open_out(manifest); os << files.dump(2) << "\n"; }
      results["fork_manifest"] = manifest;
    }
  } else if (o.mode == "reg") {
    const stiction::RegParams rp = o.common.reg_params();
    auto traj = stiction::stiff_integrate(z0, o.T, p, rp);
    std::string csv = o.out + ".csv";
    { auto os = open_out(csv); stiction::io::write_trajectory_csv(os, traj, p); }
    results["trajectory"] = csv;
  } else {
    throw CLI::ValidationError("--mode", "unknown mode " + o.mode);
  }
  emit_report("", stiction::io::make_report("simulate", config, results, warnings));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// orbits

struct OrbitsOpts {
  CommonOpts common;
  bool pws = false;
  bool reg = false;
  bool trace_canard = false;
  std::string gamma_range;  // "lo:hi"
  double gamma_stop = 19.0;
  double theta0_guess = 0.05, theta_star_guess = 2.4;
  std::string out;
  std::string report_path;
};

std::pair<double, double> parse_range(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("--gamma-range", "expected lo:hi");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--gamma-range", "expected lo:hi");
  }
}

int run_orbits(const OrbitsOpts& o) {
  const stiction::Params p = o.common.params();
  json config = o.common.to_config_json();
  std::vector<std::string> warnings;
  json results;

  if (o.pws == o.reg)
    throw CLI::ValidationError("--pws/--reg", "choose exactly one family");

  if (o.pws) {
    auto sol = stiction::solve_slipstick(o.common.gamma, o.theta0_guess,
                                         o.theta_star_guess, p);
    results["solution"] = stiction::io::to_json(sol);
    results["floquet"] =
        stiction::io::to_json(stiction::floquet_discontinuous(sol, p));
    if (!o.gamma_range.empty()) {
      auto [lo, hi] = parse_range(o.gamma_range);
      config["gamma_range"] = {lo, hi};
      auto from_lo = sol;
      if (std::abs(sol.gamma - lo) > 1e-12) {
        auto to_start = stiction::continue_branch_pws(sol.gamma, lo, sol, p);
        from_lo = to_start.points.back().sol;
      }
      auto branch = stiction::continue_branch_pws(from_lo.gamma, hi, from_lo, p);
      results["points"] = branch.points.size();
      if (!o.out.empty()) {
        auto os = open_out(o.out);
        stiction::io::write_branch_csv(os, branch);
        results["branch_csv"] = o.out;
      }
    }
  } else {
    const stiction::RegParams rp = o.common.reg_params();
    auto sol = stiction::solve_slipstick(o.common.gamma, o.theta0_guess,
                                         o.theta_star_guess, p);
    auto seed = stiction::reg_seed_from_pws(sol, p, rp);
    if (o.trace_canard) {
      config["gamma_stop"] = o.gamma_stop;
      auto branch =
          stiction::continue_branch_regularized(seed, o.gamma_stop, p, rp);
      for (const auto& w : branch.warnings) warnings.push_back(w);
      results["points"] = branch.points.size();
      results["gamma_fold"] = branch.gamma_fold;
      if (!o.out.empty()) {
        auto os = open_out(o.out);
        stiction::io::write_reg_branch_csv(os, branch);
        results["branch_csv"] = o.out;
      }
    } else {
      auto orbit = stiction::shoot_periodic_regularized(seed, p, rp, &warnings);
      results["orbit"] = stiction::io::to_json(orbit);
      if (!o.out.empty()) {
        auto os = open_out(o.out);
        stiction::io::write_trajectory_csv(
            os, stiction::sample_reg_orbit(orbit, p, rp), p);
        results["orbit_csv"] = o.out;
      }
    }
  }
  emit_report(o.report_path,
              stiction::io::make_report("orbits", config, results, warnings));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOpts {
  CommonOpts common;
  bool folded_singularities = false;
  bool singular_canard_flag = false;
  bool gamma_bound = false;
  bool closeness = false;
  bool transversality = false;
  bool sticking_cycle = false;
  std::string eps_list = "1e-4,3e-4,1e-3,3e-3";
  double T = 4.0 * stiction::kPi;
  double x0 = 0.045, y0 = -0.1, theta0 = 0.0;
  std::string out;
  std::string report_path;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--eps-list", "bad value " + item);
    }
  }
  if (values.empty()) throw CLI::ValidationError("--eps-list", "empty list");
  return values;
}

int run_analyze(const AnalyzeOpts& o) {
  const stiction::Params p = o.common.params();
  const stiction::RegParams rp = o.common.reg_params();
  json config = o.common.to_config_json();
  std::vector<std::string> warnings;
  json results;

  if (o.gamma_bound) {
    // fold-existence bound gamma = 1 / sqrt(eps delta) for the folded
    // saddles of the Gamma-extended reduced flow
    results["gamma_bound"] = 1.0 / std::sqrt(o.common.eps * o.common.delta);
  }
  if (o.folded_singularities) {
    const double Gamma = p.gamma * p.gamma * rp.eps;
    config["Gamma"] = Gamma;
    json pts = json::array();
    for (const auto& cp : stiction::folded_singularities(p, rp, Gamma))
      pts.push_back(stiction::io::to_json(cp));
    results["folded_singularities"] = pts;
  }
  if (o.singular_canard_flag) {
    auto sing = stiction::folded_singularities(p, rp, 0.0);
    for (const auto& cp : sing) {
      if (cp.cls != stiction::CriticalPointClass::FoldedSaddle) continue;
      auto seg =
          stiction::singular_canard(cp, stiction::CanardKind::Vrai, p, rp);
      results["canard_closure_error"] = seg.closure_error;
      if (!o.out.empty()) {
        auto os = open_out(o.out);
        stiction::io::write_canard_csv(os, seg, p, rp);
        results["canard_csv"] = o.out;
      }
      break;
    }
  }
  if (o.closeness) {
    config["eps_list"] = o.eps_list;
    auto study = stiction::closeness_study(
        stiction::State(o.x0, o.y0, o.theta0), o.T, p, o.common.delta,
        parse_list(o.eps_list));
    results["closeness"] = stiction::io::to_json(study);
  }
  if (o.transversality) {
    results["transversality"] =
        stiction::io::to_json(stiction::transversality_check(p.gamma, p, rp));
  }
  if (o.sticking_cycle) {
    auto cycle = stiction::sticking_limit_cycle(p, rp);
    results["sticking_cycle"] = {{"x0", cycle.x0},
                                 {"map_derivative", cycle.map_derivative}};
  }
  if (results.empty())
    throw CLI::ValidationError("analyze", "no analysis selected");
  emit_report(o.report_path,
              stiction::io::make_report("analyze", config, results, warnings));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stiction friction oscillator: simulation, periodic orbits, "
               "and slow-fast analysis"};
  app.require_subcommand(1);

  SimulateOpts sim;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate a trajectory");
  sim.common.attach(simulate);
  simulate->add_option("--mode", sim.mode, "pws (event-driven) or reg (smooth)");
  simulate->add_option("--x0", sim.x0, "initial elongation");
  simulate->add_option("--y0", sim.y0, "initial velocity");
  simulate->add_option("--theta0", sim.theta0, "initial phase");
  simulate->add_option("--T", sim.T, "integration time");
  simulate->add_option("--policy", sim.policy,
                       "stick-first | slip-first | enumerate");
  simulate->add_option("--out", sim.out, "output file prefix");

  OrbitsOpts orb;
  CLI::App* orbits = app.add_subcommand("orbits", "periodic orbits and branches");
  orb.common.attach(orbits);
  orbits->add_flag("--pws", orb.pws, "discontinuous slip-stick family");
  orbits->add_flag("--reg", orb.reg, "regularized family");
  orbits->add_flag("--trace-canard", orb.trace_canard,
                   "continue the regularized branch through its fold");
  orbits->add_option("--gamma-range", orb.gamma_range,
                     "continuation range lo:hi (pws)");
  orbits->add_option("--gamma-stop", orb.gamma_stop,
                     "stop gamma on the canard segment (reg)");
  orbits->add_option("--theta0-guess", orb.theta0_guess, "solver guess");
  orbits->add_option("--theta-star-guess", orb.theta_star_guess, "solver guess");
  orbits->add_option("--out", orb.out, "branch / orbit CSV path");
  orbits->add_option("--report", orb.report_path, "JSON report path (default stdout)");

  AnalyzeOpts ana;
  CLI::App* analyze = app.add_subcommand("analyze", "slow-fast analyses");
  ana.common.attach(analyze);
  analyze->add_flag("--folded-singularities", ana.folded_singularities,
                    "folded singularities at Gamma = gamma^2 eps");
  analyze->add_flag("--singular-canard", ana.singular_canard_flag,
                    "vrai canard through a folded saddle (Gamma = 0)");
  analyze->add_flag("--gamma-bound", ana.gamma_bound,
                    "fold-existence bound 1/sqrt(eps delta)");
  analyze->add_flag("--closeness", ana.closeness,
                    "regularized-vs-stiction sup-distance over eps");
  analyze->add_flag("--transversality", ana.transversality,
                    "global-return transversality at the given gamma");
  analyze->add_flag("--sticking-cycle", ana.sticking_cycle,
                    "attracting sticking limit cycle");
  analyze->add_option("--eps-list", ana.eps_list, "comma-separated eps values");
  analyze->add_option("--T", ana.T, "study horizon");
  analyze->add_option("--x0", ana.x0, "study initial elongation");
  analyze->add_option("--y0", ana.y0, "study initial velocity");
  analyze->add_option("--theta0", ana.theta0, "study initial phase");
  analyze->add_option("--out", ana.out, "CSV path for sampled output");
  analyze->add_option("--report", ana.report_path, "JSON report path (default stdout)");

  std::string command = "cli";
  try {
    app.parse(argc, argv);
    if (simulate->parsed()) {
      command = "simulate";
      apply_config(simulate, sim.common.config_file);
      return run_simulate(sim);
    }
    if (orbits->parsed()) {
      command = "orbits";
      apply_config(orbits, orb.common.config_file);
      return run_orbits(orb);
    }
    command = "analyze";
    apply_config(analyze, ana.common.config_file);
    return run_analyze(ana);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << error_report(command, e.what()).dump(2) << "\n";
    return kExitConfig;
  } catch (const stiction::ModelError& e) {
    std::cerr << error_report(command, e.what()).dump(2) << "\n";
    return kExitNumerical;
  }
}
