#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpsa/arm.hpp"
#include "bpsa/ldi.hpp"
#include "bpsa/regions.hpp"
#include "bpsa/sdp.hpp"

namespace bpsa {

struct CertReport {
  int samples_used = 0;
  double max_torque_on_boundary = 0.0;  // N*m, max over joints of |K z|
  double min_decrease_margin = 0.0;     // min of -dB/dt on the annulus, 1/s
  double min_rate_margin = 0.0;         // min of -dB/dt - alpha (|z|_Q^2 - eps0^2)
  double max_containment = 0.0;         // max dq^T Q_qq^-1 dq over region edge points
  bool torque_ok = false;
  bool workspace_ok = false;
  bool velocity_ok = false;
  bool exclusion_ok = false;
  bool containment_ok = false;
  bool decrease_ok = false;
  std::vector<std::string> violations;

  bool passed() const { return violations.empty(); }
};

// Multipliers of the solved LMIs, kept so the solution can be rechecked.
struct SynthWitness {
  Vec scale;                  // state scaling D (diagonal)
  std::vector<double> gamma;  // one per exclusion LMI (slabs, then x axes)
  double mu_x = 0.0;
  double mu_u = 0.0;
  double mu_w = 0.0;
};

// B(z) = z^T Q^-1 z - 1,  u = K z,  z = [q - q_e; qd]
struct BarrierPair {
  int id = -1;
  Vec q_e;
  Vec2 x_e = Vec2::Zero();
  Mat Q;
  Mat K;
  double eps0 = 0.15;
  double alpha = 1.0;
  double w_bar = 1.0;
  CertReport cert;
  SynthWitness witness;
  std::string contain;             // region id for E(1) containment, empty for midway pairs
  std::vector<std::string> avoid;  // region ids excluded by slabs

  Vec state_error(const JointState& s) const;
  double barrier(const JointState& s) const;
  // |[dq; 0]|_Q
  double joint_norm(const Vec& dq) const;
};

struct AlphaPolicy {
  bool pinned = false;
  double value = 1.0;  // used when pinned
  double lo = 0.05;
  double hi = 4.0;
  double resolution = 0.05;
};

struct SynthOptions {
  ElbowBranch branch = ElbowBranch::kDown;
  int per_edge = 5;
  // Optional convex half of the neighbour condition: Q <= bound for each entry.
  std::vector<Mat> upper_bounds;
  sdp::Settings solver;
};

// Solves the barrier-pair SDP at a fixed alpha. Throws Infeasible,
// InvalidScalar, NearSingular, SolverFailure.
BarrierPair synthesize(const RobotModel& model, const LinearizedPlant& plant, const LDIModel& ldi,
                       const Region* contain, const ConstraintSet& cs, double alpha, double eps0,
                       const SynthOptions& opt = {});

// Applies the alpha policy: pinned value, or coarse descending scan for a
// feasible alpha followed by bisection towards the largest feasible one.
BarrierPair synthesize_auto(const RobotModel& model, const LinearizedPlant& plant,
                            const LDIModel& ldi, const Region* contain, const ConstraintSet& cs,
                            const AlphaPolicy& policy, double eps0, const SynthOptions& opt = {});

struct LmiResidual {
  std::string name;
  double min_eigenvalue = 0.0;
};

// Rebuilds every LMI numerically from (Q, K, witness) in scaled coordinates.
std::vector<LmiResidual> lmi_residuals(const BarrierPair& bp, const RobotModel& model,
                                       const LinearizedPlant& plant, const LDIModel& ldi,
                                       const Region* contain, const ConstraintSet& cs,
                                       const SynthOptions& opt = {});

struct CertifyOptions {
  int force_directions = 32;
  int per_edge = 25;
  double annulus_gap = 0.02;
  ElbowBranch branch = ElbowBranch::kDown;
};

// Sampled check of the barrier-pair properties under the exact dynamics.
// n_samples boundary points and n_samples annulus points. Throws EmptySampleSet.
CertReport certify(const BarrierPair& bp, const RobotModel& model, const LDIModel& ldi,
                   const Region* contain, const std::vector<Region>& obstacles,
                   const ConstraintSet& cs, int n_samples, std::uint64_t seed,
                   const CertifyOptions& opt = {});
CertReport certify_serial(const BarrierPair& bp, const RobotModel& model, const LDIModel& ldi,
                          const Region* contain, const std::vector<Region>& obstacles,
                          const ConstraintSet& cs, int n_samples, std::uint64_t seed,
                          const CertifyOptions& opt = {});

// Points on the boundary of E(radius) in state space, seeded.
std::vector<Vec> sample_ellipsoid_surface(const Mat& Q, double radius, int count,
                                          std::uint64_t seed);

}  // namespace bpsa
