#include "stiction/io.hpp"

#include <cstdio>

namespace stiction::io {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

const char* region_name(RegionLabel label) {
  switch (label) {
    case RegionLabel::GPlus: return "G+";
    case RegionLabel::GMinus: return "G-";
    case RegionLabel::SigmaCPlus: return "Sigma_c+";
    case RegionLabel::SigmaCMinus: return "Sigma_c-";
    case RegionLabel::SigmaS: return "Sigma_s";
    case RegionLabel::BoundaryCPlus: return "dSigma_c+";
    case RegionLabel::BoundaryCMinus: return "dSigma_c-";
  }
  return "?";
}

void trajectory_row(std::ostream& os, double t, const State& z, const Params& p) {
  os << fmt(t) << ',' << fmt(z.x) << ',' << fmt(z.y) << ',' << fmt(z.theta)
     << ',' << region_name(classify(z, p).label) << '\n';
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const Params& p, int samples_per_period) {
  os << "t,x,y,theta,region_label\n";
  const double t0 = traj.t_begin(), t1 = traj.t_end();
  const int n = std::max(2, int(samples_per_period * (t1 - t0) / kTwoPi));
  for (int i = 0; i <= n; ++i) {
    double t = t0 + (t1 - t0) * i / n;
    trajectory_row(os, t, traj.eval(t, p), p);
  }
}

void write_trajectory_csv(std::ostream& os, const SampledTrajectory& traj,
                          const Params& p) {
  os << "t,x,y,theta,region_label\n";
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    trajectory_row(os, traj.t[i], traj.z[i], p);
}

void write_event_jsonl(std::ostream& os, const std::vector<Event>& events) {
  for (const Event& ev : events) {
    json line = {{"t", ev.time},
                 {"kind", event_kind_name(ev.kind)},
                 {"state", {ev.state.x, ev.state.y, ev.state.theta}}};
    os << line.dump() << '\n';
  }
}

const char* branch_label_name(BranchLabel label) {
  switch (label) {
    case BranchLabel::Pi0Left: return "Pi0_left";
    case BranchLabel::Pi0Right: return "Pi0_right";
    case BranchLabel::PiEpsLeft: return "PiEps_left";
    case BranchLabel::PiEpsCenter: return "PiEps_center";
    case BranchLabel::PiEpsRight: return "PiEps_right";
  }
  return "?";
}

const char* stability_name(OrbitStability s) {
  switch (s) {
    case OrbitStability::Attracting: return "attracting";
    case OrbitStability::Saddle: return "saddle";
    case OrbitStability::Repelling: return "repelling";
    case OrbitStability::Degenerate: return "degenerate";
  }
  return "?";
}

void write_branch_csv(std::ostream& os, const PwsBranch& branch) {
  os << "gamma,theta0,theta_star,x0,maxAbsY,reLambda,imLambda,stability,"
        "branchLabel\n";
  for (const auto& pt : branch.points) {
    const auto& lam = pt.floquet.multipliers[2];
    os << fmt(pt.sol.gamma) << ',' << fmt(pt.sol.theta0) << ','
       << fmt(pt.sol.theta_star) << ',' << fmt(pt.sol.x0) << ','
       << fmt(pt.max_abs_y) << ',' << fmt(lam.real()) << ',' << fmt(lam.imag())
       << ',' << stability_name(pt.floquet.classification) << ','
       << branch_label_name(branch.label) << '\n';
  }
}

void write_reg_branch_csv(std::ostream& os, const RegBranch& branch) {
  os << "gamma,x0,y0,maxAbsY,logMu2,logMu3,branchLabel\n";
  for (const auto& pt : branch.points) {
    Eigen::Vector2d u0 = pt.orbit.state0();
    os << fmt(pt.orbit.gamma) << ',' << fmt(u0[0]) << ',' << fmt(u0[1]) << ',' << fmt(pt.orbit.max_abs_y) << ','
       << fmt(pt.orbit.log_mu2) << ',' << fmt(pt.orbit.log_mu3) << ','
       << branch_label_name(pt.segment) << '\n';
  }
}

namespace {

const char* manifold_branch_name(ManifoldBranch b) {
  switch (b) {
    case ManifoldBranch::CA: return "C_a";
    case ManifoldBranch::CRPlus: return "C_r+";
    case ManifoldBranch::CRMinus: return "C_r-";
  }
  return "?";
}

}  // namespace

void write_manifold_csv(std::ostream& os, const Params& p, const RegParams& rp,
                        int n_xi) {
  os << "xi,yhat,theta,branch\n";
  for (int i = 0; i <= n_xi; ++i) {
    double x = -p.mu_s + 2.0 * p.mu_s * i / n_xi;
    for (const auto& root : critical_manifold_roots(x, p, rp))
      os << fmt(x) << ',' << fmt(root.yhat) << ",,"
         << manifold_branch_name(root.branch) << '\n';
  }
}

void write_canard_csv(std::ostream& os, const CanardSegment& seg,
                      const Params& p, const RegParams& rp) {
  os << "xi,yhat,theta,branch\n";
  for (std::size_t i = 0; i < seg.yhat.size(); ++i) {
    double xi_v = -p.mu_d * rp.phi(seg.yhat[i]);
    const char* br = std::abs(seg.yhat[i]) < rp.delta ? "C_a"
                     : (seg.yhat[i] > 0 ? "C_r+" : "C_r-");
    os << fmt(xi_v) << ',' << fmt(seg.yhat[i]) << ',' << fmt(seg.theta[i])
       << ',' << br << '\n';
  }
}

json make_report(const std::string& command, const json& config,
                 const json& results,
                 const std::vector<std::string>& warnings) {
  return json{{"command", command},
              {"config", config},
              {"results", results},
              {"warnings", warnings}};
}

json to_json(const State& z) { return json{z.x, z.y, z.theta}; }

json to_json(const Params& p) {
  return json{{"gamma", p.gamma}, {"mu_s", p.mu_s}, {"mu_d", p.mu_d}};
}

json to_json(const CriticalPoint& cp) {
  const char* cls = "?";
  switch (cp.cls) {
    case CriticalPointClass::FoldedSaddle: cls = "folded_saddle"; break;
    case CriticalPointClass::FoldedCenter: cls = "folded_center"; break;
    case CriticalPointClass::FoldedFocusStable: cls = "folded_focus_stable"; break;
    case CriticalPointClass::FoldedNodeStable: cls = "folded_node_stable"; break;
  }
  return json{{"yhat", cp.yhat},
              {"theta", cp.theta},
              {"class", cls},
              {"eigenvalues",
               {{cp.eig_re[0], cp.eig_im[0]}, {cp.eig_re[1], cp.eig_im[1]}}}};
}

json to_json(const SlipStickSolution& sol) {
  return json{{"gamma", sol.gamma},
              {"theta0", sol.theta0},
              {"theta_star", sol.theta_star},
              {"x0", sol.x0},
              {"residual", sol.residual_norm},
              {"admissible", sol.admissible()}};
}

json to_json(const FloquetData& fd) {
  json mults = json::array();
  for (const auto& m : fd.multipliers) mults.push_back({m.real(), m.imag()});
  return json{{"multipliers", mults},
              {"stability", stability_name(fd.classification)}};
}

json to_json(const RegOrbit& orbit) {
  Eigen::Vector2d u0 = orbit.state0();
  return json{{"gamma", orbit.gamma},   {"eps", orbit.eps},
              {"x0", u0[0]},            {"y0", u0[1]},
              {"residual", orbit.residual}, {"log_mu2", orbit.log_mu2},
              {"log_mu3", orbit.log_mu3},   {"max_abs_y", orbit.max_abs_y}};
}

json to_json(const TransversalityData& td) {
  return json{{"theta_in", td.theta_in},
              {"yhat_in", td.yhat_in},
              {"angle", td.angle}};
}

json to_json(const ClosenessStudy& st) {
  json rows = json::array();
  for (const auto& r : st.rows)
    rows.push_back({{"eps", r.eps}, {"sup_distance", r.sup_distance}});
  return json{{"rows", rows}, {"loglog_slope", st.loglog_slope}};
}

json to_json(const CanardExplosionReport& rep) {
  return json{{"amplitude_ratio", rep.amplitude_ratio},
              {"fit_slope", rep.fit_slope},
              {"fit_r2", rep.fit_r2},
              {"eps", rep.eps_values},
              {"log_mu3", rep.log_mu3_values}};
}

}  // namespace stiction::io
