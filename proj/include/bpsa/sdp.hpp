#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bpsa::sdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Matrix-valued affine function of the decision vector x:
//   E(x) = constant + sum_i x_i * coefficient_i
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(int rows, int cols) : constant_(Mat::Zero(rows, cols)) {}
  explicit AffineExpr(Mat constant) : constant_(std::move(constant)) {}

  static AffineExpr variable(int index);

  int rows() const { return static_cast<int>(constant_.rows()); }
  int cols() const { return static_cast<int>(constant_.cols()); }
  const Mat& constant() const { return constant_; }
  const std::map<int, Mat>& terms() const { return terms_; }

  Mat evaluate(const Vec& x) const;
  AffineExpr transpose() const;
  AffineExpr block(int row, int col, int rows, int cols) const;
  AffineExpr row(int i) const { return block(i, 0, 1, cols()); }

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(const AffineExpr& a);
  friend AffineExpr operator*(double s, const AffineExpr& a);
  friend AffineExpr operator*(const Mat& m, const AffineExpr& a);
  friend AffineExpr operator*(const AffineExpr& a, const Mat& m);
  AffineExpr times(const Mat& m) const;  // scalar expression times constant matrix

 private:
  Mat constant_;
  std::map<int, Mat> terms_;
};

// Block matrix assembly; every row must share heights and every column widths.
AffineExpr blocks(const std::vector<std::vector<AffineExpr>>& rows);

struct Settings {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-8;
  double barrier_growth = 20.0;
  double variable_bound = 1e6;
  int max_newton_steps = 400;
  // Phase I stops once this much strict slack has been found.
  double phase1_target_slack = 1e-3;
};

enum class Status { kOptimal, kInfeasible, kFailure };

struct Result {
  Status status = Status::kFailure;
  Vec x;
  double objective = 0.0;
  double min_slack = 0.0;  // smallest eigenvalue over all LMIs at x
  int newton_steps = 0;
  std::string message;
};

// minimize c^T x - logdet(G(x))  subject to  F_k(x) >= 0.
class Problem {
 public:
  int add_variable();
  AffineExpr scalar_variable();
  AffineExpr symmetric_variable(int n);
  AffineExpr matrix_variable(int rows, int cols);

  // Requires F symmetric; asymmetry above 1e-12 throws.
  void add_lmi(const AffineExpr& F, std::string name);
  void set_linear_objective(const Vec& c) { linear_ = c; }
  void set_logdet_objective(const AffineExpr& G);

  int num_variables() const { return num_vars_; }
  struct Constraint {
    AffineExpr expr;
    std::string name;
  };
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const AffineExpr* logdet_term() const { return has_logdet_ ? &logdet_ : nullptr; }
  const Vec& linear_objective() const { return linear_; }

 private:
  int num_vars_ = 0;
  std::vector<Constraint> constraints_;
  AffineExpr logdet_;
  bool has_logdet_ = false;
  Vec linear_;
};

// Barrier-method solve (phase I for a strictly feasible point, then
// path-following on the objective).
Result solve(const Problem& problem, const Settings& settings = {});

// Phase I only: kOptimal with a strictly feasible x, or kInfeasible.
Result find_feasible(const Problem& problem, const Settings& settings = {});

// Smallest eigenvalue of every constraint at x, in insertion order.
std::vector<double> constraint_slacks(const Problem& problem, const Vec& x);

}  // namespace bpsa::sdp
