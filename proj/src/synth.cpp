#include "bpsa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bpsa/error.hpp"

namespace bpsa {

using sdp::AffineExpr;
using sdp::blocks;

Vec BarrierPair::state_error(const JointState& s) const {
  const Eigen::Index n = q_e.size();
  Vec z(2 * n);
  z.head(n) = s.q - q_e;
  z.tail(n) = s.qd;
  return z;
}

double BarrierPair::barrier(const JointState& s) const {
  const Vec z = state_error(s);
  return z.dot(Q.llt().solve(z)) - 1.0;
}

double BarrierPair::joint_norm(const Vec& dq) const {
  Vec z = Vec::Zero(Q.rows());
  z.head(dq.size()) = dq;
  return std::sqrt(std::max(0.0, z.dot(Q.llt().solve(z))));
}

namespace {

constexpr double kMultiplierFloor = 1e-9;

// Left/right uncertainty factors, rescaled to equal spectral norms.
struct FactorPair {
  Mat left;
  Mat right;
};

FactorPair balanced(Mat left, Mat right) {
  const double a = left.size() ? Eigen::JacobiSVD<Mat>(left).singularValues()(0) : 0.0;
  const double b = right.size() ? Eigen::JacobiSVD<Mat>(right).singularValues()(0) : 0.0;
  if (a > 0.0 && b > 0.0) {
    const double s = std::sqrt(b / a);
    left *= s;
    right /= s;
  }
  return {std::move(left), std::move(right)};
}

struct Exclusion {
  std::string name;
  Vec2 a;
  double a_bar;
};

// Problem data in nondimensional coordinates z = D z_s, u = U u_s, w = w_bar w_s.
struct ScaledData {
  int n = 0;
  int nz = 0;
  Vec scale;   // diagonal of D
  Vec u_scale; // diagonal of U
  Mat A1, Bu1, Bw1;
  FactorPair x, u, w;
  Mat J1;  // 2 x nz
  FactorPair jac;  // left 2 x k, right k x nz
  std::vector<Exclusion> exclusions;
  std::vector<Vec> contain_points;  // scaled joint offsets
  std::vector<Mat> upper_bounds;    // scaled
};

ScaledData prepare(const RobotModel& model, const LinearizedPlant& plant, const LDIModel& ldi,
                   const Region* contain, const ConstraintSet& cs, const SynthOptions& opt) {
  cs.validate();
  ScaledData d;
  d.n = model.n();
  d.nz = 2 * d.n;
  const int n = d.n, nz = d.nz;
  if (ldi.box.dq_max.size() != n || cs.qd_bounds.size() != n || cs.u_bounds.size() != n ||
      cs.x_bounds.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "constraint set dimensions do not match the robot");
  }
  if ((plant.q_e - ldi.box.q_e).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "plant and LDI linearised at different equilibria");
  }
  d.scale.resize(nz);
  d.scale << ldi.box.dq_max, cs.qd_bounds;
  d.u_scale = cs.u_bounds;
  const Mat D = d.scale.asDiagonal();
  const Mat Di = d.scale.cwiseInverse().asDiagonal();
  const Mat U = d.u_scale.asDiagonal();
  Mat S1 = Mat::Zero(n, nz), S2 = Mat::Zero(n, nz);
  S1.leftCols(n).setIdentity();
  S2.rightCols(n).setIdentity();

  d.A1 = Di * plant.A * D;
  d.Bu1 = Di * plant.B_u * U;
  d.Bw1 = Di * plant.B_w * cs.w_bar;
  d.x = balanced(Di * S2.transpose() * ldi.damping.left(), ldi.damping.right() * S2 * D);
  d.u = balanced(Di * S2.transpose() * ldi.torque_gain.left(), ldi.torque_gain.right() * U);
  d.w = balanced(Di * S2.transpose() * ldi.force_gain.left(),
                 ldi.force_gain.right() * cs.w_bar);
  d.J1 = plant.C_x * D;
  d.jac = balanced(ldi.jacobian.left(), ldi.jacobian.right() * S1 * D);

  for (std::size_t i = 0; i < cs.slabs.size(); ++i) {
    d.exclusions.push_back(
        {"slab" + std::to_string(i), cs.slabs[i].normal, cs.slabs[i].half_width});
  }
  for (int i = 0; i < 2; ++i) {
    d.exclusions.push_back({"x_bar" + std::to_string(i), Vec2::Unit(i), cs.x_bounds[i]});
  }

  if (contain) {
    for (const Vec2& x : edge_samples(*contain, opt.per_edge)) {
      Vec q;
      try {
        q = inverse_kinematics(model, x, opt.branch);
      } catch (const Error& e) {
        throw Error(ErrorCode::kInfeasible,
                    "containment point of " + contain->id + " unreachable: " + e.what());
      }
      d.contain_points.push_back((q - plant.q_e).cwiseQuotient(ldi.box.dq_max));
    }
  }
  for (const Mat& b : opt.upper_bounds) d.upper_bounds.push_back(Di * b * Di);
  return d;
}

AffineExpr constant(const Mat& m) { return AffineExpr(m); }
AffineExpr zeros(int r, int c) { return AffineExpr(Mat::Zero(r, c)); }
AffineExpr scalar(double v) { return AffineExpr(Mat::Constant(1, 1, v)); }
Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

struct Variables {
  AffineExpr Q, Y, mu_x, mu_u, mu_w;
  std::vector<AffineExpr> gamma;
};

// Each LMI is written once per representation: symbolic for the solver and
// numeric for the recheck.
AffineExpr exclusion_lmi(const ScaledData& d, const Exclusion& e, const AffineExpr& Q,
                         const AffineExpr& g) {
  const int nz = d.nz;
  const int k = static_cast<int>(d.jac.left.cols());
  const int m = static_cast<int>(d.jac.right.rows());
  const Mat aJ1 = e.a.transpose() * d.J1;        // 1 x nz
  const Mat aJ2 = e.a.transpose() * d.jac.left;  // 1 x k
  const AffineExpr r1 = aJ1 * Q;                 // 1 x nz
  const AffineExpr r3 = d.jac.right * Q;         // m x nz
  return blocks({
      {e.a_bar * e.a_bar * Q, zeros(nz, k), r1.transpose(), r3.transpose()},
      {zeros(k, nz), g.times(Mat::Identity(k, k)), g.times(aJ2.transpose()), zeros(k, m)},
      {r1, g.times(aJ2), scalar(1.0), zeros(1, m)},
      {r3, zeros(m, k), zeros(m, 1), g.times(Mat::Identity(m, m))},
  });
}

Mat exclusion_numeric(const ScaledData& d, const Exclusion& e, const Mat& Q, double g) {
  const int nz = d.nz;
  const int k = static_cast<int>(d.jac.left.cols());
  const int m = static_cast<int>(d.jac.right.rows());
  const Mat aJ1Q = e.a.transpose() * d.J1 * Q;
  const Mat aJ2 = e.a.transpose() * d.jac.left;
  const Mat J3Q = d.jac.right * Q;
  Mat F = Mat::Zero(nz + k + 1 + m, nz + k + 1 + m);
  F.block(0, 0, nz, nz) = e.a_bar * e.a_bar * Q;
  F.block(0, nz + k, nz, 1) = aJ1Q.transpose();
  F.block(0, nz + k + 1, nz, m) = J3Q.transpose();
  F.block(nz, nz, k, k) = g * Mat::Identity(k, k);
  F.block(nz, nz + k, k, 1) = g * aJ2.transpose();
  F.block(nz + k, 0, 1, nz) = aJ1Q;
  F.block(nz + k, nz, 1, k) = g * aJ2;
  F(nz + k, nz + k) = 1.0;
  F.block(nz + k + 1, 0, m, nz) = J3Q;
  F.block(nz + k + 1, nz + k + 1, m, m) = g * Mat::Identity(m, m);
  return F;
}

AffineExpr stability_lmi(const ScaledData& d, const Variables& v, double alpha, double eps0) {
  const int nz = d.nz;
  const int nw = static_cast<int>(d.Bw1.cols());
  const int px = static_cast<int>(d.x.right.rows());
  const int pu = static_cast<int>(d.u.right.rows());
  const int pw = static_cast<int>(d.w.right.rows());
  const AffineExpr& Q = v.Q;
  const AffineExpr& Y = v.Y;
  const AffineExpr AQ = d.A1 * Q;
  const AffineExpr BY = d.Bu1 * Y;
  const AffineExpr TL = AQ + AQ.transpose() + BY + BY.transpose() + alpha * Q +
                        v.mu_x.times(d.x.left * d.x.left.transpose()) +
                        v.mu_u.times(d.u.left * d.u.left.transpose()) +
                        v.mu_w.times(d.w.left * d.w.left.transpose());
  const AffineExpr RxQ = d.x.right * Q;
  const AffineExpr RuY = d.u.right * Y;
  const AffineExpr X = blocks({
      {TL, constant(d.Bw1), RxQ.transpose(), RuY.transpose(), zeros(nz, pw)},
      {constant(d.Bw1.transpose()), constant(-alpha * eps0 * eps0 * Mat::Identity(nw, nw)),
       zeros(nw, px), zeros(nw, pu), constant(d.w.right.transpose())},
      {RxQ, zeros(px, nw), -v.mu_x.times(Mat::Identity(px, px)), zeros(px, pu), zeros(px, pw)},
      {RuY, zeros(pu, nw), zeros(pu, px), -v.mu_u.times(Mat::Identity(pu, pu)), zeros(pu, pw)},
      {zeros(pw, nz), constant(d.w.right), zeros(pw, px), zeros(pw, pu),
       -v.mu_w.times(Mat::Identity(pw, pw))},
  });
  return -X;
}

Mat stability_numeric(const ScaledData& d, const Mat& Q, const Mat& Y, const SynthWitness& w,
                      double alpha, double eps0) {
  const int nz = d.nz;
  const int nw = static_cast<int>(d.Bw1.cols());
  const int px = static_cast<int>(d.x.right.rows());
  const int pu = static_cast<int>(d.u.right.rows());
  const int pw = static_cast<int>(d.w.right.rows());
  const int N = nz + nw + px + pu + pw;
  const Mat TL = d.A1 * Q + Q * d.A1.transpose() + d.Bu1 * Y + Y.transpose() * d.Bu1.transpose() +
                 alpha * Q + w.mu_x * d.x.left * d.x.left.transpose() +
                 w.mu_u * d.u.left * d.u.left.transpose() +
                 w.mu_w * d.w.left * d.w.left.transpose();
  Mat X = Mat::Zero(N, N);
  auto put = [&X](int r, int c, const Mat& b) {
    X.block(r, c, b.rows(), b.cols()) = b;
    if (r != c) X.block(c, r, b.cols(), b.rows()) = b.transpose();
  };
  put(0, 0, TL);
  put(nz, 0, d.Bw1.transpose());
  put(nz, nz, -alpha * eps0 * eps0 * Mat::Identity(nw, nw));
  int r = nz + nw;
  put(r, 0, d.x.right * Q);
  put(r, r, -w.mu_x * Mat::Identity(px, px));
  r += px;
  put(r, 0, d.u.right * Y);
  put(r, r, -w.mu_u * Mat::Identity(pu, pu));
  r += pu;
  put(r, nz, d.w.right);
  put(r, r, -w.mu_w * Mat::Identity(pw, pw));
  return -X;
}

double min_eig(const Mat& F) {
  return Eigen::SelfAdjointEigenSolver<Mat>(sym(F), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

void check_scalars(double alpha, double eps0) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw Error(ErrorCode::kInvalidScalar, "eps0 must lie in (0,1)");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidScalar, "alpha must be positive");
}

}  // namespace

BarrierPair synthesize(const RobotModel& model, const LinearizedPlant& plant, const LDIModel& ldi,
                       const Region* contain, const ConstraintSet& cs, double alpha, double eps0,
                       const SynthOptions& opt) {
  check_scalars(alpha, eps0);
  if (is_singular(model, plant.q_e)) {
    throw Error(ErrorCode::kNearSingular, "equilibrium too close to a singularity");
  }
  const ScaledData d = prepare(model, plant, ldi, contain, cs, opt);
  const int n = d.n, nz = d.nz;

  sdp::Problem p;
  Variables v;
  v.Q = p.symmetric_variable(nz);
  v.Y = p.matrix_variable(n, nz);
  v.mu_x = p.scalar_variable();
  v.mu_u = p.scalar_variable();
  v.mu_w = p.scalar_variable();
  for (std::size_t i = 0; i < d.exclusions.size(); ++i) v.gamma.push_back(p.scalar_variable());

  for (const AffineExpr* mu : {&v.mu_x, &v.mu_u, &v.mu_w}) {
    p.add_lmi(*mu - scalar(kMultiplierFloor), "multiplier");
  }
  for (std::size_t i = 0; i < d.exclusions.size(); ++i) {
    p.add_lmi(v.gamma[i] - scalar(kMultiplierFloor), "multiplier");
    p.add_lmi(exclusion_lmi(d, d.exclusions[i], v.Q, v.gamma[i]), d.exclusions[i].name);
  }
  for (int i = 0; i < nz; ++i) {
    p.add_lmi(scalar(1.0) - v.Q.block(i, i, 1, 1), "box" + std::to_string(i));
  }
  for (int i = 0; i < n; ++i) {
    const AffineExpr Yi = v.Y.row(i);
    p.add_lmi(blocks({{v.Q, Yi.transpose()}, {Yi, scalar(1.0)}}), "torque" + std::to_string(i));
  }
  for (std::size_t k = 0; k < d.contain_points.size(); ++k) {
    const Vec& c = d.contain_points[k];
    p.add_lmi(blocks({{scalar(1.0), constant(c.transpose())},
                      {constant(c), v.Q.block(0, 0, n, n)}}),
              "contain" + std::to_string(k));
  }
  for (const Mat& b : d.upper_bounds) p.add_lmi(constant(sym(b)) - v.Q, "neighbour");
  p.add_lmi(stability_lmi(d, v, alpha, eps0), "stability");
  p.set_logdet_objective(v.Q);

  const sdp::Result r = sdp::solve(p, opt.solver);
  if (r.status == sdp::Status::kInfeasible) {
    throw Error(ErrorCode::kInfeasible, "barrier-pair LMIs infeasible: " + r.message);
  }
  if (r.status != sdp::Status::kOptimal) {
    throw Error(ErrorCode::kSolverFailure, r.message);
  }

  const Mat Qs = sym(v.Q.evaluate(r.x));
  const Mat Ys = v.Y.evaluate(r.x);
  const Mat D = d.scale.asDiagonal();
  BarrierPair bp;
  bp.q_e = plant.q_e;
  bp.x_e = plant.x_e;
  bp.Q = sym(D * Qs * D);
  bp.K = d.u_scale.asDiagonal() * Ys * Qs.llt().solve(Mat::Identity(nz, nz)) *
         d.scale.cwiseInverse().asDiagonal();
  bp.eps0 = eps0;
  bp.alpha = alpha;
  bp.w_bar = cs.w_bar;
  bp.contain = contain ? contain->id : std::string();
  bp.witness.scale = d.scale;
  bp.witness.mu_x = v.mu_x.evaluate(r.x)(0, 0);
  bp.witness.mu_u = v.mu_u.evaluate(r.x)(0, 0);
  bp.witness.mu_w = v.mu_w.evaluate(r.x)(0, 0);
  for (const auto& g : v.gamma) bp.witness.gamma.push_back(g.evaluate(r.x)(0, 0));
  return bp;
}

BarrierPair synthesize_auto(const RobotModel& model, const LinearizedPlant& plant,
                            const LDIModel& ldi, const Region* contain, const ConstraintSet& cs,
                            const AlphaPolicy& policy, double eps0, const SynthOptions& opt) {
  if (policy.pinned) return synthesize(model, plant, ldi, contain, cs, policy.value, eps0, opt);
  if (!(policy.lo > 0.0 && policy.hi >= policy.lo && policy.resolution > 0.0)) {
    throw Error(ErrorCode::kInvalidScalar, "bad alpha policy bounds");
  }
  auto attempt = [&](double a) -> std::optional<BarrierPair> {
    try {
      return synthesize(model, plant, ldi, contain, cs, a, eps0, opt);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInfeasible || e.code() == ErrorCode::kSolverFailure) {
        return std::nullopt;
      }
      throw;
    }
  };
  // Coarse descending scan, halving from hi.
  double upper = std::numeric_limits<double>::quiet_NaN();
  std::optional<BarrierPair> best;
  double a = policy.hi;
  while (true) {
    best = attempt(a);
    if (best) break;
    upper = a;
    if (a <= policy.lo) break;
    a = std::max(policy.lo, 0.5 * a);
  }
  if (!best) throw Error(ErrorCode::kInfeasible, "no feasible alpha in policy range");
  double lower = a;
  while (!std::isnan(upper) && upper - lower > policy.resolution) {
    const double mid = 0.5 * (lower + upper);
    if (auto r = attempt(mid)) {
      best = std::move(r);
      lower = mid;
    } else {
      upper = mid;
    }
  }
  return *best;
}

std::vector<LmiResidual> lmi_residuals(const BarrierPair& bp, const RobotModel& model,
                                       const LinearizedPlant& plant, const LDIModel& ldi,
                                       const Region* contain, const ConstraintSet& cs,
                                       const SynthOptions& opt) {
  const ScaledData d = prepare(model, plant, ldi, contain, cs, opt);
  const int n = d.n, nz = d.nz;
  const Vec di = d.scale.cwiseInverse();
  const Mat Qs = di.asDiagonal() * bp.Q * di.asDiagonal();
  const Mat Ys = d.u_scale.cwiseInverse().asDiagonal() * bp.K * d.scale.asDiagonal() * Qs;
  const SynthWitness& w = bp.witness;
  if (w.gamma.size() != d.exclusions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "witness does not match the constraint set");
  }
  std::vector<LmiResidual> out;
  out.push_back({"Q", min_eig(Qs)});
  out.push_back({"mu_x", w.mu_x - kMultiplierFloor});
  out.push_back({"mu_u", w.mu_u - kMultiplierFloor});
  out.push_back({"mu_w", w.mu_w - kMultiplierFloor});
  for (std::size_t i = 0; i < d.exclusions.size(); ++i) {
    out.push_back({d.exclusions[i].name + ".gamma", w.gamma[i] - kMultiplierFloor});
    out.push_back({d.exclusions[i].name, min_eig(exclusion_numeric(d, d.exclusions[i], Qs,
                                                                   w.gamma[i]))});
  }
  for (int i = 0; i < nz; ++i) out.push_back({"box" + std::to_string(i), 1.0 - Qs(i, i)});
  for (int i = 0; i < n; ++i) {
    Mat F(nz + 1, nz + 1);
    F << Qs, Ys.row(i).transpose(), Ys.row(i), 1.0;
    out.push_back({"torque" + std::to_string(i), min_eig(F)});
  }
  for (std::size_t k = 0; k < d.contain_points.size(); ++k) {
    const Vec& c = d.contain_points[k];
    Mat F(n + 1, n + 1);
    F << 1.0, c.transpose(), c, Qs.topLeftCorner(n, n);
    out.push_back({"contain" + std::to_string(k), min_eig(F)});
  }
  for (std::size_t k = 0; k < d.upper_bounds.size(); ++k) {
    out.push_back({"neighbour" + std::to_string(k), min_eig(d.upper_bounds[k] - Qs)});
  }
  out.push_back({"stability", min_eig(stability_numeric(d, Qs, Ys, w, bp.alpha, bp.eps0))});
  return out;
}

// ---------------------------------------------------------------------------
// Certification

std::vector<Vec> sample_ellipsoid_surface(const Mat& Q, double radius, int count,
                                          std::uint64_t seed) {
  const Mat L = Eigen::LLT<Mat>(Q).matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(std::max(count, 0));
  for (int k = 0; k < count; ++k) {
    Vec v(Q.rows());
    do {
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    } while (v.norm() < 1e-12);
    out.push_back(radius * (L * v.normalized()));
  }
  return out;
}

namespace {

constexpr double kArithTol = 1e-9;

struct Partial {
  double max_torque = 0.0;
  double min_decrease = std::numeric_limits<double>::infinity();
  double min_rate = std::numeric_limits<double>::infinity();
  double max_contain = 0.0;
  int torque_bad = 0, workspace_bad = 0, velocity_bad = 0, exclusion_bad = 0, box_bad = 0;
  int decrease_bad = 0, contain_bad = 0;

  void merge(const Partial& o) {
    max_torque = std::max(max_torque, o.max_torque);
    min_decrease = std::min(min_decrease, o.min_decrease);
    min_rate = std::min(min_rate, o.min_rate);
    max_contain = std::max(max_contain, o.max_contain);
    torque_bad += o.torque_bad;
    workspace_bad += o.workspace_bad;
    velocity_bad += o.velocity_bad;
    exclusion_bad += o.exclusion_bad;
    box_bad += o.box_bad;
    decrease_bad += o.decrease_bad;
    contain_bad += o.contain_bad;
  }
};

struct CertContext {
  const BarrierPair& bp;
  const RobotModel& model;
  const LDIModel& ldi;
  const std::vector<Region>& obstacles;
  const ConstraintSet& cs;
  Mat Q_inv;
  std::vector<Vec2> forces;
};

JointState to_state(const BarrierPair& bp, const Vec& z) {
  const Eigen::Index n = bp.q_e.size();
  return {bp.q_e + z.head(n), z.tail(n)};
}

Partial check_boundary(const CertContext& c, const Vec& z) {
  Partial p;
  const int n = c.model.n();
  const Vec u = c.bp.K * z;
  for (int i = 0; i < n; ++i) {
    p.max_torque = std::max(p.max_torque, std::abs(u[i]));
    if (std::abs(u[i]) > c.cs.u_bounds[i] + kArithTol) ++p.torque_bad;
  }
  bool vel_bad = false, box_bad = false;
  for (int i = 0; i < n; ++i) {
    if (std::abs(z[n + i]) > c.cs.qd_bounds[i] + kArithTol) vel_bad = true;
    if (std::abs(z[i]) > c.ldi.box.dq_max[i] + kArithTol) box_bad = true;
  }
  p.velocity_bad += vel_bad;
  p.box_bad += box_bad;
  const JointState s = to_state(c.bp, z);
  const Vec2 x_lin = c.bp.x_e + jacobian(c.model, s.q) * z.head(n);
  const Vec2 x_fk = forward_kinematics(c.model, s.q);
  bool ws_bad = false;
  for (const Vec2& x : {x_lin, x_fk}) {
    for (int i = 0; i < 2; ++i) {
      if (std::abs(x[i] - c.bp.x_e[i]) > c.cs.x_bounds[i] + kArithTol) ws_bad = true;
    }
  }
  p.workspace_bad += ws_bad;
  bool ex_bad = false;
  for (const Region& r : c.obstacles) {
    if (contains(r, x_lin) || contains(r, x_fk)) ex_bad = true;
  }
  p.exclusion_bad += ex_bad;
  return p;
}

Partial check_annulus(const CertContext& c, const Vec& z) {
  Partial p;
  const int n = c.model.n();
  const JointState s = to_state(c.bp, z);
  const Vec u = c.bp.K * z;
  const Vec Qz = c.Q_inv * z;
  const double norm2 = z.dot(Qz);
  const double floor = c.bp.alpha * (norm2 - c.bp.eps0 * c.bp.eps0);
  bool bad = false;
  for (const Vec2& w : c.forces) {
    const Vec qdd = forward_dynamics(c.model, s, u, w);
    Vec zd(2 * n);
    zd << s.qd, qdd;
    const double decrease = -2.0 * Qz.dot(zd);
    p.min_decrease = std::min(p.min_decrease, decrease);
    p.min_rate = std::min(p.min_rate, decrease - floor);
    if (!(decrease > 0.0) || decrease - floor < -1e-6) bad = true;
  }
  p.decrease_bad += bad;
  return p;
}

struct Samples {
  std::vector<Vec> boundary;
  std::vector<Vec> annulus;
  std::vector<Vec> contain;  // joint offsets; empty vector marks an IK failure
};

Samples draw(const BarrierPair& bp, const RobotModel& model, const Region* contain, int n_samples,
             std::uint64_t seed, const CertifyOptions& opt) {
  if (n_samples < 1) throw Error(ErrorCode::kEmptySampleSet, "certify needs samples");
  Samples s;
  s.boundary = sample_ellipsoid_surface(bp.Q, 1.0, n_samples, seed);
  s.annulus = sample_ellipsoid_surface(bp.Q, 1.0, n_samples, seed + 1);
  std::mt19937_64 rng(seed + 2);
  const double r0 = std::min(1.0, bp.eps0 + opt.annulus_gap);
  std::uniform_real_distribution<double> radius(r0, 1.0);
  for (auto& z : s.annulus) z *= radius(rng);
  if (contain) {
    for (const Vec2& x : edge_samples(*contain, opt.per_edge)) {
      try {
        s.contain.push_back(inverse_kinematics(model, x, opt.branch) - bp.q_e);
      } catch (const Error&) {
        s.contain.push_back(Vec());
      }
    }
  }
  return s;
}

CertContext make_context(const BarrierPair& bp, const RobotModel& model, const LDIModel& ldi,
                         const std::vector<Region>& obstacles, const ConstraintSet& cs,
                         const CertifyOptions& opt) {
  CertContext c{bp, model, ldi, obstacles, cs, bp.Q.llt().solve(Mat::Identity(bp.Q.rows(), bp.Q.cols())), {}};
  for (int k = 0; k < opt.force_directions; ++k) {
    const double th = 2.0 * M_PI * k / opt.force_directions;
    c.forces.emplace_back(bp.w_bar * std::cos(th), bp.w_bar * std::sin(th));
  }
  return c;
}

Partial check_contain(const CertContext& c, const Vec& dq) {
  Partial p;
  if (dq.size() == 0) {
    ++p.contain_bad;
    p.max_contain = std::numeric_limits<double>::infinity();
    return p;
  }
  // Projection of E(1) onto joint space.
  const Mat Qq = c.bp.Q.topLeftCorner(dq.size(), dq.size());
  p.max_contain = dq.dot(Qq.llt().solve(dq));
  if (p.max_contain > 1.0 + kArithTol) ++p.contain_bad;
  return p;
}

CertReport finish(const Partial& p, const Samples& s, bool has_contain) {
  CertReport r;
  r.samples_used = static_cast<int>(s.boundary.size() + s.annulus.size() + s.contain.size());
  r.max_torque_on_boundary = p.max_torque;
  r.min_decrease_margin = p.min_decrease;
  r.min_rate_margin = p.min_rate;
  r.max_containment = has_contain ? p.max_contain : 0.0;
  r.torque_ok = p.torque_bad == 0;
  r.workspace_ok = p.workspace_bad == 0 && p.box_bad == 0;
  r.velocity_ok = p.velocity_bad == 0;
  r.exclusion_ok = p.exclusion_bad == 0;
  r.decrease_ok = p.decrease_bad == 0 && p.min_decrease > 0.0;
  r.containment_ok = p.contain_bad == 0;
  auto note = [&](int count, const std::string& what) {
    if (count == 0) return;
    std::ostringstream os;
    os << what << ": " << count << " samples";
    r.violations.push_back(os.str());
  };
  note(p.torque_bad, "torque bound exceeded on boundary");
  note(p.workspace_bad, "workspace bound exceeded on boundary");
  note(p.box_bad, "joint box exceeded on boundary");
  note(p.velocity_bad, "velocity bound exceeded on boundary");
  note(p.exclusion_bad, "obstacle entered on boundary");
  note(p.decrease_bad, "barrier not decreasing on annulus");
  note(p.contain_bad, "region point outside E(1)");
  return r;
}

}  // namespace

CertReport certify(const BarrierPair& bp, const RobotModel& model, const LDIModel& ldi,
                   const Region* contain, const std::vector<Region>& obstacles,
                   const ConstraintSet& cs, int n_samples, std::uint64_t seed,
                   const CertifyOptions& opt) {
  const Samples s = draw(bp, model, contain, n_samples, seed, opt);
  const CertContext c = make_context(bp, model, ldi, obstacles, cs, opt);
  const long nb = static_cast<long>(s.boundary.size());
  const long na = static_cast<long>(s.annulus.size());
  std::vector<Partial> parts(nb + na);
#pragma omp parallel for schedule(dynamic, 64)
  for (long k = 0; k < nb + na; ++k) {
    parts[k] = k < nb ? check_boundary(c, s.boundary[k]) : check_annulus(c, s.annulus[k - nb]);
  }
  Partial total;
  for (const auto& p : parts) total.merge(p);
  for (const auto& dq : s.contain) total.merge(check_contain(c, dq));
  return finish(total, s, contain != nullptr);
}

CertReport certify_serial(const BarrierPair& bp, const RobotModel& model, const LDIModel& ldi,
                          const Region* contain, const std::vector<Region>& obstacles,
                          const ConstraintSet& cs, int n_samples, std::uint64_t seed,
                          const CertifyOptions& opt) {
  const Samples s = draw(bp, model, contain, n_samples, seed, opt);
  const CertContext c = make_context(bp, model, ldi, obstacles, cs, opt);
  Partial total;
  for (const auto& z : s.boundary) total.merge(check_boundary(c, z));
  for (const auto& z : s.annulus) total.merge(check_annulus(c, z));
  for (const auto& dq : s.contain) total.merge(check_contain(c, dq));
  return finish(total, s, contain != nullptr);
}

}  // namespace bpsa
