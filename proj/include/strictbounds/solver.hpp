#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"

namespace strictbounds {

enum class QpStatus { Optimal, Infeasible, IterationLimit };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

/// Result of min ||y - K x||^2 over a polyhedron.
///
/// `objective` is recomputed from `x_hat`. `kkt_residual` is the largest of the
/// primal violation, the stationarity residual and the most negative
/// inequality multiplier, the last two divided by (1 + ||K^T y||_inf).
struct QpSolution {
  VectorXd x_hat;
  double objective = kInf;
  QpStatus status = QpStatus::Infeasible;
  double kkt_residual = kInf;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct SolverOptions {
  double tol = kFeasibilityTol;
  /// Iteration cap is iteration_factor * (p + number of constraints).
  int iteration_factor = 100;
};

/// Primal active-set solver for the convex quadratic programs
///
///     min ||y - K x||^2  s.t.  A x <= b  [and h^T x = mu].
///
/// The working set is handled by null-space elimination: each step solves the
/// equality-constrained subproblem on null(M) (M = equality row plus working
/// rows) as a minimum-norm least-squares problem, so rank-deficient K is fine.
/// Directions with K d = 0 do not change the objective, and the method
/// returns whichever minimizer its path reaches.
///
/// Holds scratch storage; use one instance per thread.
class QpSolver {
 public:
  explicit QpSolver(SolverOptions options = {}) : options_(options) {}

  const SolverOptions& options() const { return options_; }

  /// min over X of ||y - K x||^2, i.e. s^2(y) and its argmin.
  QpSolution min_residual(const ProblemInstance& inst, const VectorXd& y) {
    check_observation(inst, y);
    const auto& li = inst.linear_constraints();
    std::optional<VectorXd> start;
    switch (inst.constraints().kind()) {
      case ConstraintSet::Kind::NonNegativeOrthant:
        start = VectorXd::Zero(inst.p());
        break;
      case ConstraintSet::Kind::Box: {
        const Box& bx = inst.constraints().as_box();
        start = VectorXd::Zero(inst.p()).cwiseMax(bx.lower).cwiseMin(bx.upper);
        break;
      }
      case ConstraintSet::Kind::LinearInequalities:
        start = li.A.rows() == 0 ? std::optional<VectorXd>(VectorXd::Zero(inst.p())) : phase_one(li, nullptr, 0.0);
        break;
    }
    if (!start) return infeasible(inst.p());
    return solve_from(inst.K(), y, li.A, li.b, nullptr, 0.0, std::move(*start));
  }

  /// min over X intersected with {h^T x = mu}. Status Infeasible when that
  /// slice is empty, i.e. mu lies outside phi(X).
  QpSolution min_residual_on_slice(const ProblemInstance& inst, const VectorXd& y, double mu) {
    check_observation(inst, y);
    if (!std::isfinite(mu)) return infeasible(inst.p());
    const auto& li = inst.linear_constraints();
    std::optional<VectorXd> start;
    if (inst.constraints().kind() == ConstraintSet::Kind::LinearInequalities) {
      if (li.A.rows() == 0) {
        start = (mu / inst.h().squaredNorm()) * inst.h();
      } else {
        start = phase_one(li, &inst.h(), mu);
      }
    } else {
      start = closed_form_slice_point(inst.constraints(), inst.h(), mu);
    }
    if (!start) return infeasible(inst.p());
    return solve_from(inst.K(), y, li.A, li.b, &inst.h(), mu, std::move(*start));
  }

  /// Core active-set loop from a feasible start x0.
  QpSolution solve_from(const MatrixXd& K, const VectorXd& y, const MatrixXd& A, const VectorXd& b,
                        const VectorXd* h, double mu, VectorXd x0) {
    const Index p = K.cols();
    const Index nc = A.rows();
    const Index n_eq = h ? 1 : 0;
    const double scale = 1.0 + (K.transpose() * y).lpNorm<Eigen::Infinity>();
    const int max_iter = options_.iteration_factor * static_cast<int>(p + nc + n_eq);

    working_.clear();
    in_working_.assign(static_cast<std::size_t>(nc), 0);

    QpSolution sol;
    VectorXd& x = x0;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
      r_.noalias() = y - K * x;
      const Index k = n_eq + static_cast<Index>(working_.size());
      build_working_matrix(A, h, k, p);

      if (k > 0) {
        qr_.compute(M_.transpose());
        const Index rank = qr_.rank();
        if (rank < p) {
          Z_ = qr_.householderQ();
          Z_ = Z_.rightCols(p - rank).eval();
        } else {
          Z_.resize(p, 0);
        }
      } else {
        Z_ = MatrixXd::Identity(p, p);
      }

      d_.setZero(p);
      if (Z_.cols() > 0) {
        B_.noalias() = K * Z_;
        cod_.compute(B_);
        w_ = cod_.solve(r_);
        d_.noalias() = Z_ * w_;
      }

      const double step_tol = 1e-11 * (1.0 + x.lpNorm<Eigen::Infinity>());
      if (d_.lpNorm<Eigen::Infinity>() <= step_tol) {
        if (k == 0) {
          converged = true;
          lambda_.resize(0);
          break;
        }
        g_.noalias() = 2.0 * (K.transpose() * r_);
        lambda_ = qr_.solve(g_);
        Index drop = -1;
        double most_negative = -options_.tol * scale;
        for (Index j = n_eq; j < k; ++j) {
          if (lambda_[j] < most_negative) {
            most_negative = lambda_[j];
            drop = j;
          }
        }
        if (drop < 0) {
          converged = true;
          break;
        }
        const Index row = working_[static_cast<std::size_t>(drop - n_eq)];
        in_working_[static_cast<std::size_t>(row)] = 0;
        working_.erase(working_.begin() + (drop - n_eq));
        continue;
      }

      double alpha = 1.0;
      Index blocking = -1;
      const double d_norm = d_.lpNorm<Eigen::Infinity>();
      for (Index i = 0; i < nc; ++i) {
        if (in_working_[static_cast<std::size_t>(i)]) continue;
        const double ad = A.row(i).dot(d_);
        if (ad <= 1e-13 * d_norm * (1.0 + A.row(i).lpNorm<Eigen::Infinity>())) continue;
        const double slack = std::max(0.0, b[i] - A.row(i).dot(x));
        const double a = slack / ad;
        if (a < alpha) {
          alpha = a;
          blocking = i;
        }
      }
      x.noalias() += alpha * d_;
      if (blocking >= 0) {
        working_.push_back(blocking);
        in_working_[static_cast<std::size_t>(blocking)] = 1;
      }
    }

    sol.iterations = it;
    r_.noalias() = y - K * x;
    sol.objective = r_.squaredNorm();
    double primal = 0.0;
    if (nc > 0) primal = std::max(0.0, (A * x - b).maxCoeff());
    if (h) primal = std::max(primal, std::abs(h->dot(x) - mu));
    double dual = 0.0;
    const Index k = n_eq + static_cast<Index>(working_.size());
    if (converged && k > 0) {
      build_working_matrix(A, h, k, p);
      g_.noalias() = 2.0 * (K.transpose() * r_);
      dual = (M_.transpose() * lambda_ - g_).lpNorm<Eigen::Infinity>() / scale;
      for (Index j = n_eq; j < k; ++j) dual = std::max(dual, -lambda_[j] / scale);
    } else if (converged) {
      dual = (2.0 * (K.transpose() * r_)).lpNorm<Eigen::Infinity>() / scale;
    }
    sol.kkt_residual = std::max(primal, dual);
    sol.status = converged ? QpStatus::Optimal : QpStatus::IterationLimit;
    sol.x_hat = std::move(x);
    return sol;
  }

 private:
  static void check_observation(const ProblemInstance& inst, const VectorXd& y) {
    if (y.size() != inst.m()) throw DimensionError("observation must have length m = rows(K)");
  }

  static QpSolution infeasible(Index p) {
    QpSolution s;
    s.x_hat = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    s.status = QpStatus::Infeasible;
    return s;
  }

  void build_working_matrix(const MatrixXd& A, const VectorXd* h, Index k, Index p) {
    M_.resize(k, p);
    Index row = 0;
    if (h) M_.row(row++) = h->transpose();
    for (Index i : working_) M_.row(row++) = A.row(i);
  }

  /// Finds a point of {A x <= b [, h^T x = mu]} by minimizing t^2 over
  /// A x - t <= b, t >= 0 with the same active-set loop. nullopt if the
  /// smallest achievable t exceeds the feasibility tolerance.
  std::optional<VectorXd> phase_one(const LinearInequalities& li, const VectorXd* h, double mu) {
    const Index p = li.A.cols();
    const Index nc = li.A.rows();
    MatrixXd K1 = MatrixXd::Zero(1, p + 1);
    K1(0, p) = 1.0;
    VectorXd y1 = VectorXd::Zero(1);
    MatrixXd A1(nc + 1, p + 1);
    A1.topLeftCorner(nc, p) = li.A;
    A1.topRightCorner(nc, 1).setConstant(-1.0);
    A1.bottomRows(1).setZero();
    A1(nc, p) = -1.0;
    VectorXd b1(nc + 1);
    b1.head(nc) = li.b;
    b1[nc] = 0.0;
    VectorXd z0 = VectorXd::Zero(p + 1);
    VectorXd h1;
    if (h) {
      z0.head(p) = (mu / h->squaredNorm()) * (*h);
      h1 = VectorXd::Zero(p + 1);
      h1.head(p) = *h;
    }
    z0[p] = std::max(0.0, (li.A * z0.head(p) - li.b).maxCoeff());
    QpSolution s = solve_from(K1, y1, A1, b1, h ? &h1 : nullptr, mu, std::move(z0));
    if (s.status != QpStatus::Optimal) return std::nullopt;
    const double t = s.x_hat[p];
    if (t > options_.tol * (1.0 + li.b.lpNorm<Eigen::Infinity>())) return std::nullopt;
    return VectorXd(s.x_hat.head(p));
  }

  SolverOptions options_;
  std::vector<Index> working_;
  std::vector<char> in_working_;
  MatrixXd M_, Z_, B_;
  VectorXd r_, d_, w_, g_, lambda_;
  Eigen::ColPivHouseholderQR<MatrixXd> qr_;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod_;
};

inline QpSolution min_residual(const ProblemInstance& inst, const VectorXd& y) {
  QpSolver s;
  return s.min_residual(inst, y);
}

inline QpSolution min_residual_on_slice(const ProblemInstance& inst, const VectorXd& y, double mu) {
  QpSolver s;
  return s.min_residual_on_slice(inst, y, mu);
}

/// Axis-aligned grid for brute_force_min.
struct GridSpec {
  VectorXd lower;
  VectorXd upper;
  double step = 1e-2;
};

/// Exhaustive grid search, the independent oracle for the active-set solver.
///
/// Without `mu`, every grid point inside X is scored. With `mu`, the
/// coordinate with the largest |h_i| is eliminated and solved from
/// h^T x = mu, so candidates lie exactly on the slice (well within the
/// |h^T x - mu| <= step * ||h||_1 band); the eliminated coordinate must fall
/// inside the grid box and X. Limited to p <= 4.
inline QpSolution brute_force_min(const ProblemInstance& inst, const VectorXd& y, std::optional<double> mu,
                                  const GridSpec& grid) {
  const Index p = inst.p();
  if (p > 4) throw std::invalid_argument("brute_force_min supports p <= 4");
  if (grid.lower.size() != p || grid.upper.size() != p) throw DimensionError("grid box must have length p");
  if (!(grid.step > 0)) throw std::invalid_argument("grid step must be positive");
  if (y.size() != inst.m()) throw DimensionError("observation must have length m");

  Index skip = -1;
  if (mu) inst.h().cwiseAbs().maxCoeff(&skip);

  std::vector<Index> counts(static_cast<std::size_t>(p), 1);
  for (Index i = 0; i < p; ++i) {
    if (i == skip) continue;
    counts[static_cast<std::size_t>(i)] =
        static_cast<Index>(std::floor((grid.upper[i] - grid.lower[i]) / grid.step + 1e-9)) + 1;
  }

  QpSolution best;
  best.status = QpStatus::Infeasible;
  best.x_hat = VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  VectorXd x(p);
  VectorXd r(inst.m());
  std::vector<Index> idx(static_cast<std::size_t>(p), 0);
  for (;;) {
    for (Index i = 0; i < p; ++i) {
      if (i != skip) x[i] = grid.lower[i] + static_cast<double>(idx[static_cast<std::size_t>(i)]) * grid.step;
    }
    bool ok = true;
    if (skip >= 0) {
      double rest = 0.0;
      for (Index i = 0; i < p; ++i) {
        if (i != skip) rest += inst.h()[i] * x[i];
      }
      x[skip] = (*mu - rest) / inst.h()[skip];
      ok = x[skip] >= grid.lower[skip] - 1e-12 && x[skip] <= grid.upper[skip] + 1e-12;
    }
    if (ok && inst.constraints().contains(x, kFeasibilityTol)) {
      r.noalias() = y - inst.K() * x;
      double f = r.squaredNorm();
      if (f < best.objective) {
        best.objective = f;
        best.x_hat = x;
        best.status = QpStatus::Optimal;
      }
    }
    Index d = 0;
    for (; d < p; ++d) {
      auto& c = idx[static_cast<std::size_t>(d)];
      if (++c < counts[static_cast<std::size_t>(d)]) break;
      c = 0;
    }
    if (d == p) break;
  }
  best.kkt_residual = best.status == QpStatus::Optimal ? 0.0 : kInf;
  return best;
}

}  // namespace strictbounds
