#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "model.hpp"
#include "solver.hpp"

namespace strictbounds {

enum class FastPath { None, OneDimConstrained, UnconstrainedFullRank, TwoDimCounterexample, ThreeDimCounterexample };
enum class FastPathPolicy { Auto, Off };

inline const char* to_string(FastPath f) {
  switch (f) {
    case FastPath::None: return "None";
    case FastPath::OneDimConstrained: return "OneDimConstrained";
    case FastPath::UnconstrainedFullRank: return "UnconstrainedFullRank";
    case FastPath::TwoDimCounterexample: return "TwoDimCounterexample";
    case FastPath::ThreeDimCounterexample: return "ThreeDimCounterexample";
  }
  return "?";
}

// ---- closed forms ---------------------------------------------------------

/// y = x + eps, x >= 0, phi(x) = x: lambda = (y - mu)^2 - y^2 1{y < 0}.
/// nullopt for mu < 0 (outside phi(X)).
inline std::optional<double> llr_1d_closed_form(double mu, double y) {
  if (mu < 0) return std::nullopt;
  double v = (y - mu) * (y - mu);
  if (y < 0) v -= y * y;
  return std::max(0.0, v);
}

/// Slice objective of the 2D example (K = I, h = (1, -1), orthant) at mu = 0.
inline double two_dim_slice_objective(double y1, double y2) {
  if (y1 + y2 < 0) return y1 * y1 + y2 * y2;
  return 0.5 * (y1 - y2) * (y1 - y2);
}

inline double evaluate_2d_counterexample(const Eigen::Vector2d& y, double mu0 = 0.0) {
  if (mu0 != 0.0) throw std::invalid_argument("evaluate_2d_counterexample: closed form holds only at mu = 0");
  double sub = std::pow(std::min(y[0], 0.0), 2) + std::pow(std::min(y[1], 0.0), 2);
  return std::max(0.0, two_dim_slice_objective(y[0], y[1]) - sub);
}

/// Slice objective of the 3D example (K = I, h = (1, 1, -1), orthant) at
/// mu = -1, piecewise in (y1, y2, z3) with z3 = 1 - y3.
inline double three_dim_slice_objective(double y1, double y2, double y3) {
  const double z = 1.0 - y3;
  if (y1 <= z && y2 <= z) return y1 * y1 + y2 * y2 + z * z;
  if (y1 >= z && y1 - 2.0 * y2 + z >= 0) return 0.5 * (y1 * y1 + 2.0 * y1 * z + 2.0 * y2 * y2 + z * z);
  if (y2 >= z && 2.0 * y1 - y2 - z <= 0) return 0.5 * (2.0 * y1 * y1 + y2 * y2 + 2.0 * y2 * z + z * z);
  double s = y1 + y2 + z;
  return s * s / 3.0;
}

inline double evaluate_3d_counterexample(const Eigen::Vector3d& y) {
  double sub = 0.0;
  for (int i = 0; i < 3; ++i) sub += std::pow(std::min(y[i], 0.0), 2);
  return std::max(0.0, three_dim_slice_objective(y[0], y[1], y[2]) - sub);
}

/// Least-squares pieces shared by the unconstrained closed forms.
class UnconstrainedLeastSquares {
 public:
  explicit UnconstrainedLeastSquares(const ProblemInstance& inst) : qr_(inst.K()), h_(inst.h()) {
    if (qr_.rank() < inst.p()) throw NumericalError("K^T K is singular (K lacks full column rank)");
    MatrixXd R = qr_.matrixR().topLeftCorner(inst.p(), inst.p()).triangularView<Eigen::Upper>();
    // v = (K^T K)^{-1} h through the pivoted R factor.
    VectorXd ph = qr_.colsPermutation().transpose() * h_;
    VectorXd t = R.transpose().triangularView<Eigen::Lower>().solve(ph);
    variance_ = t.squaredNorm();
  }

  VectorXd estimate(const VectorXd& y) const { return qr_.solve(y); }
  /// h^T (K^T K)^{-1} h
  double variance() const { return variance_; }
  const VectorXd& h() const { return h_; }

 private:
  Eigen::ColPivHouseholderQR<MatrixXd> qr_;
  VectorXd h_;
  double variance_ = 0.0;
};

/// (h^T x_ls - mu)^2 / h^T (K^T K)^{-1} h, ignoring any constraints on X.
inline double evaluate_unconstrained_closed_form(const ProblemInstance& inst, double mu, const VectorXd& y) {
  if (y.size() != inst.m()) throw DimensionError("observation must have length m");
  UnconstrainedLeastSquares ls(inst);
  double d = inst.h().dot(ls.estimate(y)) - mu;
  return d * d / ls.variance();
}

// ---- generic statistic ------------------------------------------------------

/// Both solver objectives behind lambda. `slice` is +inf when the slice is empty.
struct LlrParts {
  double slice = kInf;
  double subtrahend = 0.0;

  std::optional<double> value() const {
    if (!std::isfinite(slice)) return std::nullopt;
    return std::max(0.0, slice - subtrahend);
  }
};

/// lambda(mu, y) = min_{X, h^T x = mu} ||y - Kx||^2 - min_X ||y - Kx||^2.
///
/// A closed form is used when the instance matches one exactly; the generic
/// path runs two active-set solves. Callers pass a per-thread QpSolver.
class LlrStatistic {
 public:
  explicit LlrStatistic(ProblemInstance inst, FastPathPolicy policy = FastPathPolicy::Auto)
      : inst_(std::move(inst)) {
    if (policy == FastPathPolicy::Auto) fast_ = detect(inst_);
    identity_orthant_ = inst_.constraints().kind() == ConstraintSet::Kind::NonNegativeOrthant &&
                        inst_.m() == inst_.p() && inst_.K().isIdentity(0.0);
    if (fast_ == FastPath::UnconstrainedFullRank) ls_.emplace(inst_);
  }

  const ProblemInstance& instance() const { return inst_; }
  FastPath fast_path() const { return fast_; }

  /// s^2(y) and the minimizer over X.
  QpSolution fit(const VectorXd& y, QpSolver& ws) const {
    if (y.size() != inst_.m()) throw DimensionError("observation must have length m");
    if (identity_orthant_) {
      QpSolution s;
      s.x_hat = y.cwiseMax(0.0);
      s.objective = y.cwiseMin(0.0).squaredNorm();
      s.status = QpStatus::Optimal;
      s.kkt_residual = 0.0;
      return s;
    }
    if (ls_) {
      QpSolution s;
      s.x_hat = ls_->estimate(y);
      s.objective = (y - inst_.K() * s.x_hat).squaredNorm();
      s.status = QpStatus::Optimal;
      s.kkt_residual = 0.0;
      return s;
    }
    QpSolution s = ws.min_residual(inst_, y);
    if (s.status == QpStatus::Infeasible) throw std::invalid_argument("constraint set X is empty");
    if (s.status != QpStatus::Optimal) throw NumericalError("min_residual hit its iteration limit");
    return s;
  }

  /// Slice objective; +inf when mu lies outside phi(X).
  double slice_objective(double mu, const VectorXd& y, QpSolver& ws, double s2_hint = kInf) const {
    if (y.size() != inst_.m()) throw DimensionError("observation must have length m");
    switch (fast_) {
      case FastPath::OneDimConstrained:
        return mu < 0 ? kInf : (y[0] - mu) * (y[0] - mu);
      case FastPath::UnconstrainedFullRank: {
        double s2 = std::isfinite(s2_hint) ? s2_hint : fit(y, ws).objective;
        double d = inst_.h().dot(ls_->estimate(y)) - mu;
        return s2 + d * d / ls_->variance();
      }
      case FastPath::TwoDimCounterexample:
        if (mu == 0.0) return two_dim_slice_objective(y[0], y[1]);
        break;
      case FastPath::ThreeDimCounterexample:
        if (mu == -1.0) return three_dim_slice_objective(y[0], y[1], y[2]);
        break;
      case FastPath::None:
        break;
    }
    QpSolution s = ws.min_residual_on_slice(inst_, y, mu);
    if (s.status == QpStatus::Infeasible) return kInf;
    if (s.status != QpStatus::Optimal) throw NumericalError("min_residual_on_slice hit its iteration limit");
    return s.objective;
  }

  LlrParts evaluate_parts(double mu, const VectorXd& y, QpSolver& ws) const {
    LlrParts parts;
    parts.subtrahend = fit(y, ws).objective;
    parts.slice = slice_objective(mu, y, ws, parts.subtrahend);
    return parts;
  }

  /// lambda(mu, y), or nullopt when the slice is empty.
  std::optional<double> evaluate(double mu, const VectorXd& y, QpSolver& ws) const {
    return evaluate_parts(mu, y, ws).value();
  }

  std::optional<double> evaluate(double mu, const VectorXd& y) const {
    QpSolver ws;
    return evaluate(mu, y, ws);
  }

 private:
  static FastPath detect(const ProblemInstance& inst) {
    const auto& cs = inst.constraints();
    const bool orthant = cs.kind() == ConstraintSet::Kind::NonNegativeOrthant;
    const bool identity = inst.m() == inst.p() && inst.K().isIdentity(0.0);
    auto h_is = [&](std::initializer_list<double> v) {
      if (inst.p() != static_cast<Index>(v.size())) return false;
      Index i = 0;
      for (double c : v) {
        if (inst.h()[i++] != c) return false;
      }
      return true;
    };
    if (orthant && identity && h_is({1.0})) return FastPath::OneDimConstrained;
    if (orthant && identity && h_is({1.0, -1.0})) return FastPath::TwoDimCounterexample;
    if (orthant && identity && h_is({1.0, 1.0, -1.0})) return FastPath::ThreeDimCounterexample;
    if (cs.is_unconstrained()) {
      Eigen::ColPivHouseholderQR<MatrixXd> qr(inst.K());
      if (qr.rank() == inst.p()) return FastPath::UnconstrainedFullRank;
    }
    return FastPath::None;
  }

  ProblemInstance inst_;
  FastPath fast_ = FastPath::None;
  bool identity_orthant_ = false;
  std::optional<UnconstrainedLeastSquares> ls_;
};

/// An observation with s^2(y) and x_hat cached, for evaluating lambda at many
/// mu (interval search). Counts solver calls.
class BoundObservation {
 public:
  BoundObservation(const LlrStatistic& stat, VectorXd y, QpSolver& ws) : stat_(&stat), y_(std::move(y)) {
    QpSolution s = stat.fit(y_, ws);
    s2_ = s.objective;
    x_hat_ = std::move(s.x_hat);
    mu_hat_ = stat.instance().h().dot(x_hat_);
    solves_ = 1;
  }

  const VectorXd& y() const { return y_; }
  double s2() const { return s2_; }
  const VectorXd& x_hat() const { return x_hat_; }
  double mu_hat() const { return mu_hat_; }
  long solves() const { return solves_; }

  /// slice objective - s^2, +inf outside phi(X).
  double g(double mu, QpSolver& ws) const {
    ++solves_;
    double f = stat_->slice_objective(mu, y_, ws, s2_);
    if (!std::isfinite(f)) return kInf;
    return std::max(0.0, f - s2_);
  }

  std::optional<double> lambda(double mu, QpSolver& ws) const {
    double v = g(mu, ws);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  }

 private:
  const LlrStatistic* stat_;
  VectorXd y_;
  double s2_ = 0.0;
  VectorXd x_hat_;
  double mu_hat_ = 0.0;
  mutable long solves_ = 0;
};

}  // namespace strictbounds
