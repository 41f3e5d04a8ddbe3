#ifndef STICTION_IO_HPP
#define STICTION_IO_HPP

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "stiction/model.hpp"
#include "stiction/orbits.hpp"
#include "stiction/pws.hpp"
#include "stiction/regularization.hpp"

// CSV and JSON export. All floating-point values are written with 17
// significant digits so outputs round-trip exactly and identical configs
// produce byte-identical files.
namespace stiction::io {

using nlohmann::json;

/// %.17g formatting used for every numeric field.
std::string fmt(double v);

/// Trajectory CSV: t, x, y, theta, region_label (one row per sample).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const Params& p, int samples_per_period = 512);
void write_trajectory_csv(std::ostream& os, const SampledTrajectory& traj,
                          const Params& p);

/// Event log as JSON lines: {"t":..., "kind":..., "state":[x,y,theta]}.
void write_event_jsonl(std::ostream& os, const std::vector<Event>& events);

/// Branch CSV: gamma, theta0, theta_star, x0, maxAbsY, reLambda, imLambda,
/// stability, branchLabel.
void write_branch_csv(std::ostream& os, const PwsBranch& branch);

/// Regularized branch CSV: gamma, x0, y0, maxAbsY, logMu2, logMu3,
/// branchLabel (the multipliers as log magnitudes).
void write_reg_branch_csv(std::ostream& os, const RegBranch& branch);

/// Critical-manifold / canard samples: xi, yhat, theta, branch.
void write_manifold_csv(std::ostream& os, const Params& p, const RegParams& rp,
                        int n_xi = 200);
void write_canard_csv(std::ostream& os, const CanardSegment& seg,
                      const Params& p, const RegParams& rp);

const char* branch_label_name(BranchLabel label);
const char* stability_name(OrbitStability s);

/// Top-level JSON report envelope: {command, config, results, warnings}.
json make_report(const std::string& command, const json& config,
                 const json& results,
                 const std::vector<std::string>& warnings);

json to_json(const State& z);
json to_json(const Params& p);
json to_json(const CriticalPoint& cp);
json to_json(const SlipStickSolution& sol);
json to_json(const FloquetData& fd);
json to_json(const RegOrbit& orbit);
json to_json(const TransversalityData& td);
json to_json(const ClosenessStudy& st);
json to_json(const CanardExplosionReport& rep);

}  // namespace stiction::io

#endif
