#include <cmath>
#include <cstdio>
#include <cstdlib>
#include "stiction/orbits.hpp"
using namespace stiction;

static void dump_orbit(const RegOrbit& o, const char* path) {
  FILE* f = std::fopen(path, "w");
  if (!f) return;
  std::fprintf(f, "%.17g %.17g %zu\n", o.gamma, o.eps, o.u.size());
  for (size_t i = 0; i < o.ts.size(); ++i) std::fprintf(f, "%.17g\n", o.ts[i]);
  for (size_t i = 0; i < o.u.size(); ++i)
    std::fprintf(f, "%.17g %.17g\n", o.u[i][0], o.u[i][1]);
  std::fclose(f);
}

static bool load_orbit(RegOrbit* o, const char* path) {
  FILE* f = std::fopen(path, "r");
  if (!f) return false;
  size_t m = 0;
  if (std::fscanf(f, "%lg %lg %zu", &o->gamma, &o->eps, &m) != 3) return false;
  o->ts.resize(m + 1);
  o->u.resize(m);
  for (size_t i = 0; i <= m; ++i)
    if (std::fscanf(f, "%lg", &o->ts[i]) != 1) return false;
  for (size_t i = 0; i < m; ++i)
    if (std::fscanf(f, "%lg %lg", &o->u[i][0], &o->u[i][1]) != 2) return false;
  std::fclose(f);
  return true;
}

int main(int argc, char** argv) {
  Params p{5.0, 1.1, 0.4};
  if (argc > 2 && std::atof(argv[1]) == 0.0) {
    // smoke 0 <orbit-file>: re-run just the eps sweep from a dumped orbit
    RegParams rp = build_phi(0.6, 1.1, 0.4, 1e-3);
    RegOrbit base;
    if (!load_orbit(&base, argv[2])) return 1;
    RegParams rb = build_phi(0.6, 1.1, 0.4, base.eps);
    base = shoot_periodic_regularized(base, p, rb, nullptr);
    std::printf("base: g=%.6f eps=%.2e lmu3=%.2f res=%.2e\n", base.gamma,
                base.eps, base.log_mu3, base.residual);
    for (double e : {2e-3, 1e-3, 5e-4}) {
      RegOrbit o = reconverge_at_eps(base, e, p, rp);
      std::printf("  eps=%.1e g=%.4f logmu3=%.2f maxy=%.5f res=%.2e\n", e,
                  o.gamma, o.log_mu3, o.max_abs_y, o.residual);
    }
    return 0;
  }
  double g_start = argc > 1 ? std::atof(argv[1]) : 5.0;
  double g_stop = argc > 2 ? std::atof(argv[2]) : 22.5;
  double eps = argc > 3 ? std::atof(argv[3]) : 1e-3;
  auto sol5 = solve_slipstick(5.0, 0.05, 2.4, p);
  SlipStickSolution sol = sol5;
  if (g_start > 5.0) {
    PwsBranch pb = continue_branch_pws(5.0, g_start, sol5, p);
    sol = pb.points.back().sol;
    std::printf("pws seed: g=%.6f th0=%.6f th*=%.6f\n", sol.gamma, sol.theta0,
                sol.theta_star);
  }
  RegParams rp = build_phi(0.6, 1.1, 0.4, eps);
  RegOrbit seed = reg_seed_from_pws(sol, p, rp);
  RegBranch br = continue_branch_regularized(seed, g_stop, p, rp);
  std::printf("points=%zu fold=%.6f warnings=%zu\n", br.points.size(),
              br.gamma_fold, br.warnings.size());
  for (size_t i = 0; i < br.points.size(); ++i) {
    if (i % 5 && i + 30 < br.points.size()) continue;
    const auto& o = br.points[i].orbit;
    std::printf("g=%.8f m=%zu maxy=%.6f logmu2=%10.2f logmu3=%10.3f res=%.2e %s\n",
                o.gamma, o.u.size(), o.max_abs_y, o.log_mu2, o.log_mu3,
                o.residual,
                br.points[i].segment == BranchLabel::PiEpsCenter ? "C" : "R");
  }
  for (const auto& w : br.warnings) std::printf("W: %s\n", w.c_str());
  {
    const RegOrbit* fit = nullptr;
    double best = 1e300;
    for (const auto& bp : br.points)
      if (bp.segment == BranchLabel::PiEpsCenter &&
          std::abs(bp.orbit.gamma - 23.0) < best) {
        best = std::abs(bp.orbit.gamma - 23.0);
        fit = &bp.orbit;
      }
    if (fit) dump_orbit(*fit, "/tmp/fit_orbit.txt");
  }
  if (argc <= 3 && !std::isnan(br.gamma_fold)) {
    try {
      auto rep = no_canard_explosion_check(br, {2e-3, 1e-3, 5e-4}, 23.0, p, rp);
      std::printf("explosion: slope=%.4g r2=%.4f amp_ratio=%.3f\n",
                  rep.fit_slope, rep.fit_r2, rep.amplitude_ratio);
      for (size_t i = 0; i < rep.eps_values.size(); ++i)
        std::printf("  eps=%.1e logmu3=%.2f\n", rep.eps_values[i],
                    rep.log_mu3_values[i]);
    } catch (const std::exception& e) {
      std::printf("explosion check failed: %s\n", e.what());
    }
  }
  return 0;
}
