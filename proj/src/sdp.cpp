#include "bpsa/sdp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bpsa/error.hpp"

namespace bpsa::sdp {

// ---------------------------------------------------------------------------
// AffineExpr

AffineExpr AffineExpr::variable(int index) {
  AffineExpr e(1, 1);
  e.terms_.emplace(index, Mat::Ones(1, 1));
  return e;
}

Mat AffineExpr::evaluate(const Vec& x) const {
  Mat out = constant_;
  for (const auto& [i, c] : terms_) out += x[i] * c;
  return out;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr out(constant_.transpose());
  for (const auto& [i, c] : terms_) out.terms_.emplace(i, c.transpose());
  return out;
}

AffineExpr AffineExpr::block(int row, int col, int rows, int cols) const {
  AffineExpr out(constant_.block(row, col, rows, cols));
  for (const auto& [i, c] : terms_) {
    Mat b = c.block(row, col, rows, cols);
    if (!b.isZero(0.0)) out.terms_.emplace(i, std::move(b));
  }
  return out;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  if (rows() != other.rows() || cols() != other.cols()) {
    throw std::invalid_argument("AffineExpr: dimension mismatch in addition");
  }
  constant_ += other.constant_;
  for (const auto& [i, c] : other.terms_) {
    auto it = terms_.find(i);
    if (it == terms_.end()) {
      terms_.emplace(i, c);
    } else {
      it->second += c;
    }
  }
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) { return *this += -other; }

AffineExpr operator-(const AffineExpr& a) { return -1.0 * a; }

AffineExpr operator*(double s, const AffineExpr& a) {
  AffineExpr out(s * a.constant_);
  for (const auto& [i, c] : a.terms_) out.terms_.emplace(i, s * c);
  return out;
}

AffineExpr operator*(const Mat& m, const AffineExpr& a) {
  if (m.cols() != a.rows()) throw std::invalid_argument("AffineExpr: left product mismatch");
  AffineExpr out(m * a.constant_);
  for (const auto& [i, c] : a.terms_) out.terms_.emplace(i, m * c);
  return out;
}

AffineExpr operator*(const AffineExpr& a, const Mat& m) {
  if (a.cols() != m.rows()) throw std::invalid_argument("AffineExpr: right product mismatch");
  AffineExpr out(a.constant_ * m);
  for (const auto& [i, c] : a.terms_) out.terms_.emplace(i, c * m);
  return out;
}

AffineExpr AffineExpr::times(const Mat& m) const {
  if (rows() != 1 || cols() != 1) throw std::invalid_argument("AffineExpr::times needs 1x1");
  AffineExpr out(constant_(0, 0) * m);
  for (const auto& [i, c] : terms_) out.terms_.emplace(i, c(0, 0) * m);
  return out;
}

AffineExpr blocks(const std::vector<std::vector<AffineExpr>>& rows) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("blocks: empty");
  std::vector<int> heights, widths;
  for (const auto& r : rows) heights.push_back(r.front().rows());
  for (const auto& e : rows.front()) widths.push_back(e.cols());
  int total_h = 0, total_w = 0;
  for (int h : heights) total_h += h;
  for (int w : widths) total_w += w;

  Mat constant = Mat::Zero(total_h, total_w);
  std::map<int, Mat> terms;
  int r0 = 0;
  for (std::size_t bi = 0; bi < rows.size(); ++bi) {
    if (rows[bi].size() != widths.size()) throw std::invalid_argument("blocks: ragged rows");
    int c0 = 0;
    for (std::size_t bj = 0; bj < rows[bi].size(); ++bj) {
      const AffineExpr& e = rows[bi][bj];
      if (e.rows() != heights[bi] || e.cols() != widths[bj]) {
        throw std::invalid_argument("blocks: inconsistent block sizes");
      }
      constant.block(r0, c0, e.rows(), e.cols()) = e.constant();
      for (const auto& [i, c] : e.terms()) {
        auto it = terms.find(i);
        if (it == terms.end()) it = terms.emplace(i, Mat::Zero(total_h, total_w)).first;
        it->second.block(r0, c0, e.rows(), e.cols()) = c;
      }
      c0 += widths[bj];
    }
    r0 += heights[bi];
  }
  AffineExpr result(std::move(constant));
  for (auto& [i, c] : terms) result += AffineExpr::variable(i).times(c);
  return result;
}

// ---------------------------------------------------------------------------
// Problem

int Problem::add_variable() { return num_vars_++; }

AffineExpr Problem::scalar_variable() { return AffineExpr::variable(add_variable()); }

AffineExpr Problem::symmetric_variable(int n) {
  AffineExpr out(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      Mat basis = Mat::Zero(n, n);
      basis(i, j) = 1.0;
      basis(j, i) = 1.0;
      out += AffineExpr::variable(add_variable()).times(basis);
    }
  }
  return out;
}

AffineExpr Problem::matrix_variable(int rows, int cols) {
  AffineExpr out(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      Mat basis = Mat::Zero(rows, cols);
      basis(i, j) = 1.0;
      out += AffineExpr::variable(add_variable()).times(basis);
    }
  }
  return out;
}

namespace {

bool is_symmetric(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

void require_symmetric(const AffineExpr& F, const std::string& name) {
  if (F.rows() != F.cols()) throw std::invalid_argument("LMI '" + name + "' is not square");
  if (!is_symmetric(F.constant())) throw std::invalid_argument("LMI '" + name + "' asymmetric");
  for (const auto& [i, c] : F.terms()) {
    if (!is_symmetric(c)) throw std::invalid_argument("LMI '" + name + "' asymmetric");
  }
}

}  // namespace

void Problem::add_lmi(const AffineExpr& F, std::string name) {
  require_symmetric(F, name);
  constraints_.push_back({F, std::move(name)});
}

void Problem::set_logdet_objective(const AffineExpr& G) {
  require_symmetric(G, "logdet objective");
  logdet_ = G;
  has_logdet_ = true;
}

std::vector<double> constraint_slacks(const Problem& problem, const Vec& x) {
  std::vector<double> out;
  out.reserve(problem.constraints().size());
  for (const auto& c : problem.constraints()) {
    const Mat F = c.expr.evaluate(x);
    out.push_back(Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (F + F.transpose()),
                                                     Eigen::EigenvaluesOnly)
                      .eigenvalues()
                      .minCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Barrier method

namespace {

struct Block {
  Mat a0;
  std::vector<int> vars;
  std::vector<Mat> coefs;
  bool objective = false;  // logdet objective term rather than a constraint
};

struct Compiled {
  int dim = 0;  // decision vector length (phase I adds the slack variable)
  std::vector<Block> blocks;
  Vec linear;
  int bounded_vars = 0;  // the first bounded_vars entries carry |x_i| <= R
  double bound = 1e6;
  int constraint_rows = 0;
};

Block make_block(const AffineExpr& e, bool objective) {
  Block b;
  b.a0 = 0.5 * (e.constant() + e.constant().transpose());
  for (const auto& [i, c] : e.terms()) {
    b.vars.push_back(i);
    b.coefs.push_back(0.5 * (c + c.transpose()));
  }
  b.objective = objective;
  return b;
}

Compiled compile(const Problem& p, bool phase1, double bound) {
  Compiled c;
  const int m = p.num_variables();
  c.dim = phase1 ? m + 1 : m;
  c.bound = bound;
  c.bounded_vars = m;
  c.linear = Vec::Zero(c.dim);
  for (const auto& k : p.constraints()) {
    c.blocks.push_back(make_block(k.expr, false));
    c.constraint_rows += k.expr.rows();
  }
  if (const AffineExpr* g = p.logdet_term()) {
    // Phase I treats the objective matrix as one more strict constraint.
    c.blocks.push_back(make_block(*g, !phase1));
    if (phase1) c.constraint_rows += g->rows();
  }
  if (phase1) {
    for (auto& b : c.blocks) {
      b.vars.push_back(m);
      b.coefs.push_back(Mat::Identity(b.a0.rows(), b.a0.cols()));
    }
    c.linear[m] = 1.0;
  } else if (p.linear_objective().size() == m) {
    c.linear = p.linear_objective();
  }
  return c;
}

Mat evaluate(const Block& b, const Vec& x) {
  Mat F = b.a0;
  for (std::size_t k = 0; k < b.vars.size(); ++k) F += x[b.vars[k]] * b.coefs[k];
  return F;
}

// Barrier weight of a block: t on the objective term, 1 on constraints.
double weight(const Block& b, double t) { return b.objective ? t : 1.0; }

// Returns +inf when x is outside the domain.
double barrier_value(const Compiled& c, const Vec& x, double t) {
  double f = t * c.linear.dot(x);
  for (const auto& b : c.blocks) {
    Eigen::LLT<Mat> llt(evaluate(b, x));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Mat& L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const double d = L(i, i);
      if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
      logdet += 2.0 * std::log(d);
    }
    f -= weight(b, t) * logdet;
  }
  for (int i = 0; i < c.bounded_vars; ++i) {
    const double lo = c.bound + x[i], hi = c.bound - x[i];
    if (!(lo > 0.0 && hi > 0.0)) return std::numeric_limits<double>::infinity();
    f -= std::log(lo) + std::log(hi);
  }
  return f;
}

void gradient_hessian(const Compiled& c, const Vec& x, double t, Vec& g, Mat& H) {
  g = t * c.linear;
  H = Mat::Zero(c.dim, c.dim);
  std::vector<Mat> W;
  for (const auto& b : c.blocks) {
    const double w = weight(b, t);
    const Mat F_inv = evaluate(b, x).llt().solve(Mat::Identity(b.a0.rows(), b.a0.cols()));
    const std::size_t nv = b.vars.size();
    W.resize(nv);
    for (std::size_t k = 0; k < nv; ++k) {
      W[k].noalias() = F_inv * b.coefs[k];
      g[b.vars[k]] -= w * W[k].trace();
    }
    for (std::size_t k = 0; k < nv; ++k) {
      for (std::size_t l = k; l < nv; ++l) {
        // tr(W_k W_l) without forming the product.
        const double v = w * W[k].cwiseProduct(W[l].transpose()).sum();
        H(b.vars[k], b.vars[l]) += v;
        if (l != k) H(b.vars[l], b.vars[k]) += v;
      }
    }
  }
  for (int i = 0; i < c.bounded_vars; ++i) {
    const double lo = c.bound + x[i], hi = c.bound - x[i];
    g[i] += -1.0 / lo + 1.0 / hi;
    H(i, i) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
  }
}

struct CenteringOutcome {
  bool ok = true;
  int steps = 0;
};

// Newton centering for fixed t. `stop` lets phase I exit early.
template <typename StopFn>
CenteringOutcome center(const Compiled& c, Vec& x, double t, int max_steps, StopFn stop) {
  CenteringOutcome out;
  Vec g;
  Mat H;
  double f = barrier_value(c, x, t);
  while (out.steps < max_steps) {
    if (stop(x)) return out;
    gradient_hessian(c, x, t, g, H);
    const double reg = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += reg;
    Eigen::LDLT<Mat> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      out.ok = false;
      return out;
    }
    const Vec dx = -ldlt.solve(g);
    const double decrement = -g.dot(dx);
    ++out.steps;
    if (!(decrement >= 0.0) || !std::isfinite(decrement)) {
      out.ok = false;
      return out;
    }
    if (decrement < 1e-10) return out;
    double step = 1.0;
    double f_new = barrier_value(c, x + step * dx, t);
    while (!(f_new <= f - 0.25 * step * decrement)) {
      step *= 0.5;
      if (step < 1e-14) {
        // No further progress possible at this t; accept current point.
        return out;
      }
      f_new = barrier_value(c, x + step * dx, t);
    }
    x += step * dx;
    // Progress below rounding level of f: centred as well as arithmetic allows.
    const bool stalled = f - f_new <= 1e-13 * std::abs(f);
    f = f_new;
    if (stalled) return out;
  }
  return out;
}

double min_eigenvalue(const Mat& F) {
  return Eigen::SelfAdjointEigenSolver<Mat>(F, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// Phase I: minimize s subject to F_k(x) + s I >= 0.
Result phase1(const Problem& p, const Settings& st) {
  const Compiled c = compile(p, true, st.variable_bound);
  const int m = p.num_variables();
  Vec y = Vec::Zero(c.dim);
  double worst = 0.0;
  for (const auto& b : c.blocks) worst = std::min(worst, min_eigenvalue(evaluate(b, y)));
  y[m] = -worst + 1.0;

  Result r;
  const double target = -st.phase1_target_slack;
  auto reached = [&](const Vec& v) { return v[m] < target; };
  double t = 1.0;
  const int rows = c.constraint_rows + 2 * c.bounded_vars;
  while (true) {
    const CenteringOutcome o = center(c, y, t, st.max_newton_steps - r.newton_steps, reached);
    r.newton_steps += o.steps;
    if (reached(y)) break;
    if (!o.ok || r.newton_steps >= st.max_newton_steps) {
      // A strictly negative slack is still a usable interior point.
      if (y[m] < 0.0) break;
      r.status = Status::kFailure;
      r.message = "phase I did not converge";
      r.x = y.head(m);
      return r;
    }
    const double gap = rows / t;
    if (y[m] - gap > 0.0) {
      r.status = Status::kInfeasible;
      r.message = "phase I lower bound is positive";
      r.x = y.head(m);
      return r;
    }
    if (gap < st.feasibility_tol) {
      if (y[m] < 0.0) break;
      r.status = Status::kInfeasible;
      r.message = "no strictly feasible point";
      r.x = y.head(m);
      return r;
    }
    t *= st.barrier_growth;
  }
  r.status = Status::kOptimal;
  r.x = y.head(m);
  r.objective = y[m];
  return r;
}

}  // namespace

Result find_feasible(const Problem& problem, const Settings& settings) {
  Result r = phase1(problem, settings);
  if (r.status == Status::kOptimal) {
    const auto slacks = constraint_slacks(problem, r.x);
    r.min_slack = slacks.empty() ? 0.0 : *std::min_element(slacks.begin(), slacks.end());
  }
  return r;
}

Result solve(const Problem& problem, const Settings& settings) {
  Result start = phase1(problem, settings);
  if (start.status != Status::kOptimal) return start;

  const Compiled c = compile(problem, false, settings.variable_bound);
  Vec x = start.x;
  Result r;
  r.newton_steps = start.newton_steps;
  const int rows = c.constraint_rows + 2 * c.bounded_vars +
                   (problem.logdet_term() ? problem.logdet_term()->rows() : 0);
  auto never = [](const Vec&) { return false; };
  double t = 1.0;
  while (true) {
    const CenteringOutcome o = center(c, x, t, settings.max_newton_steps, never);
    r.newton_steps += o.steps;
    if (!o.ok) {
      r.status = Status::kFailure;
      r.message = "Newton system breakdown";
      break;
    }
    double objective = c.linear.dot(x);
    if (const AffineExpr* g = problem.logdet_term()) {
      const Mat G = g->evaluate(x);
      objective -= 2.0 * Eigen::LLT<Mat>(G).matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    r.objective = objective;
    if (rows / t < settings.gap_tol * std::max(1.0, std::abs(objective))) {
      r.status = Status::kOptimal;
      break;
    }
    if (r.newton_steps > 50 * settings.max_newton_steps) {
      r.status = Status::kFailure;
      r.message = "iteration limit";
      break;
    }
    t *= settings.barrier_growth;
  }
  r.x = x;
  const auto slacks = constraint_slacks(problem, x);
  r.min_slack = slacks.empty() ? 0.0 : *std::min_element(slacks.begin(), slacks.end());
  return r;
}

}  // namespace bpsa::sdp
