#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "errors.hpp"
#include "random.hpp"

namespace strictbounds {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Default absolute tolerance for constraint membership and solver KKT checks.
inline constexpr double kFeasibilityTol = 1e-9;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct NonNegativeOrthant {
  Index dim = 0;
};

struct Box {
  VectorXd lower;
  VectorXd upper;
};

/// {x : A x <= b}. Zero rows means all of R^p.
struct LinearInequalities {
  MatrixXd A;
  VectorXd b;
};

/// The parameter constraint set X.
class ConstraintSet {
 public:
  enum class Kind { NonNegativeOrthant, Box, LinearInequalities };

  static ConstraintSet nonnegative(Index p) {
    if (p < 1) throw DimensionError("constraint dimension must be >= 1");
    return ConstraintSet(NonNegativeOrthant{p});
  }

  static ConstraintSet box(VectorXd lower, VectorXd upper) {
    if (lower.size() != upper.size() || lower.size() < 1)
      throw DimensionError("box bounds must have equal, positive length");
    for (Index i = 0; i < lower.size(); ++i) {
      if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw std::invalid_argument("box requires finite lower <= upper componentwise");
    }
    return ConstraintSet(Box{std::move(lower), std::move(upper)});
  }

  static ConstraintSet linear(MatrixXd A, VectorXd b) {
    if (A.rows() != b.size()) throw DimensionError("A and b row counts differ");
    if (A.cols() < 1) throw DimensionError("A must have at least one column");
    return ConstraintSet(LinearInequalities{std::move(A), std::move(b)});
  }

  /// X = R^p, represented as a linear system with no rows.
  static ConstraintSet unconstrained(Index p) {
    return linear(MatrixXd(0, p), VectorXd(0));
  }

  Kind kind() const { return static_cast<Kind>(set_.index()); }

  Index dim() const {
    return std::visit(
        [](const auto& s) -> Index {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, NonNegativeOrthant>) return s.dim;
          else if constexpr (std::is_same_v<T, Box>) return s.lower.size();
          else return s.A.cols();
        },
        set_);
  }

  bool is_unconstrained() const {
    return kind() == Kind::LinearInequalities && std::get<LinearInequalities>(set_).A.rows() == 0;
  }

  const Box& as_box() const { return std::get<Box>(set_); }
  const LinearInequalities& as_linear() const { return std::get<LinearInequalities>(set_); }

  /// Exact conversion to A x <= b form.
  LinearInequalities as_linear_inequalities() const {
    switch (kind()) {
      case Kind::NonNegativeOrthant: {
        Index p = dim();
        return {-MatrixXd::Identity(p, p), VectorXd::Zero(p)};
      }
      case Kind::Box: {
        const Box& bx = as_box();
        Index p = bx.lower.size();
        LinearInequalities li{MatrixXd(2 * p, p), VectorXd(2 * p)};
        li.A.topRows(p) = MatrixXd::Identity(p, p);
        li.A.bottomRows(p) = -MatrixXd::Identity(p, p);
        li.b.head(p) = bx.upper;
        li.b.tail(p) = -bx.lower;
        return li;
      }
      case Kind::LinearInequalities:
        return as_linear();
    }
    return {};
  }

  /// True iff every constraint residual is <= tol.
  bool contains(const VectorXd& x, double tol = kFeasibilityTol) const {
    if (x.size() != dim()) throw DimensionError("point dimension does not match constraint set");
    if (tol < 0) throw std::invalid_argument("tolerance must be nonnegative");
    switch (kind()) {
      case Kind::NonNegativeOrthant:
        return (x.array() >= -tol).all();
      case Kind::Box: {
        const Box& bx = as_box();
        return (x.array() >= bx.lower.array() - tol).all() && (x.array() <= bx.upper.array() + tol).all();
      }
      case Kind::LinearInequalities: {
        const auto& li = as_linear();
        if (li.A.rows() == 0) return true;
        return ((li.A * x - li.b).array() <= tol).all();
      }
    }
    return false;
  }

  /// [inf, sup] of h^T x over X when it has a closed form (orthant, box);
  /// (-inf, +inf) for general linear systems.
  std::pair<double, double> functional_range(const VectorXd& h) const {
    switch (kind()) {
      case Kind::NonNegativeOrthant:
        return {(h.array() >= 0).all() ? 0.0 : -kInf, (h.array() <= 0).all() ? 0.0 : kInf};
      case Kind::Box: {
        const Box& bx = as_box();
        double lo = 0, hi = 0;
        for (Index i = 0; i < h.size(); ++i) {
          double a = h[i] * bx.lower[i], b = h[i] * bx.upper[i];
          lo += std::min(a, b);
          hi += std::max(a, b);
        }
        return {lo, hi};
      }
      case Kind::LinearInequalities:
        return {-kInf, kInf};
    }
    return {-kInf, kInf};
  }

 private:
  using Variant = std::variant<NonNegativeOrthant, Box, LinearInequalities>;
  explicit ConstraintSet(Variant v) : set_(std::move(v)) {}
  Variant set_;
};

/// A point of {x in X : h^T x = mu} built in closed form, for the orthant and
/// the box. nullopt means the slice is empty. Not available for general
/// linear systems (the solver runs a phase-1 problem there).
inline std::optional<VectorXd> closed_form_slice_point(const ConstraintSet& cs, const VectorXd& h, double mu) {
  const Index p = h.size();
  if (cs.kind() == ConstraintSet::Kind::NonNegativeOrthant) {
    VectorXd x = VectorXd::Zero(p);
    if (mu == 0.0) return x;
    Index best = -1;
    for (Index i = 0; i < p; ++i) {
      if (h[i] * mu > 0 && (best < 0 || std::abs(h[i]) > std::abs(h[best]))) best = i;
    }
    if (best < 0) return std::nullopt;
    x[best] = mu / h[best];
    return x;
  }
  if (cs.kind() == ConstraintSet::Kind::Box) {
    const Box& bx = cs.as_box();
    VectorXd x_lo(p), x_hi(p);
    for (Index i = 0; i < p; ++i) {
      bool up = h[i] >= 0;
      x_lo[i] = up ? bx.lower[i] : bx.upper[i];
      x_hi[i] = up ? bx.upper[i] : bx.lower[i];
    }
    double f_lo = h.dot(x_lo), f_hi = h.dot(x_hi);
    if (mu < f_lo || mu > f_hi) return std::nullopt;
    if (mu == f_lo) return x_lo;
    if (mu == f_hi) return x_hi;
    double theta = (mu - f_lo) / (f_hi - f_lo);
    VectorXd x = x_lo + theta * (x_hi - x_lo);
    return x.cwiseMax(bx.lower).cwiseMin(bx.upper);
  }
  throw std::logic_error("closed_form_slice_point: general linear constraints need phase 1");
}

struct ParameterPoint {
  VectorXd x;
};

/// Gaussian linear model y = K x + eps, eps ~ N(0, I_m), with functional
/// phi(x) = h^T x and constraint set X.
///
/// Identity noise is the canonical form; a general covariance has to be
/// removed first with Whitener.
class ProblemInstance {
 public:
  ProblemInstance(MatrixXd K, VectorXd h, ConstraintSet constraints)
      : K_(std::move(K)), h_(std::move(h)), constraints_(std::move(constraints)) {
    if (K_.rows() < 1 || K_.cols() < 1) throw DimensionError("K must be at least 1x1");
    if (h_.size() != K_.cols()) throw DimensionError("h must have length p = cols(K)");
    if (constraints_.dim() != K_.cols()) throw DimensionError("constraint dimension must equal p");
    if (!K_.allFinite() || !h_.allFinite()) throw std::invalid_argument("K and h must be finite");
    if (h_.isZero(0)) throw std::invalid_argument("functional weights h must not be all zero");
    linear_ = constraints_.as_linear_inequalities();
  }

  const MatrixXd& K() const { return K_; }
  const VectorXd& h() const { return h_; }
  const ConstraintSet& constraints() const { return constraints_; }
  const LinearInequalities& linear_constraints() const { return linear_; }
  Index m() const { return K_.rows(); }
  Index p() const { return K_.cols(); }

  double functional(const VectorXd& x) const {
    if (x.size() != p()) throw DimensionError("point has wrong dimension");
    return h_.dot(x);
  }

 private:
  MatrixXd K_;
  VectorXd h_;
  ConstraintSet constraints_;
  LinearInequalities linear_;
};

/// K x, the noiseless observation.
inline VectorXd forward_mean(const ProblemInstance& inst, const ParameterPoint& pt) {
  if (pt.x.size() != inst.p()) throw DimensionError("x must have length p");
  return inst.K() * pt.x;
}

/// K x + eps with eps drawn from `engine`.
inline VectorXd simulate(const ProblemInstance& inst, const ParameterPoint& pt, Engine& engine) {
  VectorXd y = forward_mean(inst, pt);
  VectorXd eps(inst.m());
  fill_standard_normal(engine, eps);
  return y + eps;
}

inline bool contains(const ConstraintSet& cs, const ParameterPoint& pt, double tol = kFeasibilityTol) {
  return cs.contains(pt.x, tol);
}

/// Maps a model with noise covariance Sigma = L L^T to the identity-noise form
/// by left-multiplying K and y with L^{-1}.
class Whitener {
 public:
  explicit Whitener(const MatrixXd& covariance) : llt_(covariance) {
    if (covariance.rows() != covariance.cols()) throw DimensionError("covariance must be square");
    if (llt_.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive definite");
  }

  ProblemInstance instance(const MatrixXd& K, const VectorXd& h, const ConstraintSet& cs) const {
    if (K.rows() != llt_.rows()) throw DimensionError("covariance size must equal rows(K)");
    MatrixXd Kw = llt_.matrixL().solve(K);
    return ProblemInstance(std::move(Kw), h, cs);
  }

  VectorXd observation(const VectorXd& y) const {
    if (y.size() != llt_.rows()) throw DimensionError("observation size must equal covariance size");
    return llt_.matrixL().solve(y);
  }

 private:
  Eigen::LLT<MatrixXd> llt_;
};

}  // namespace strictbounds
