#include "gencov/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "gencov/rng.hpp"

namespace gencov {

namespace {

constexpr double kProbClamp = 1e-8;   // fitted probabilities in the solver
constexpr double kWeightFloor = 1e-5; // IRLS working weights
constexpr int kMaxIrlsOuter = 100;

struct Standardized {
  Eigen::MatrixXd X;  // centered, unit standard deviation (1/n variance)
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<int> cols;  // columns with positive variance
};

Standardized standardize(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  const auto p = X.cols();
  Standardized s;
  s.mean = X.colwise().mean();
  s.scale.resize(p);
  s.X.resize(n, p);
  s.cols.reserve(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd centered = X.col(j).array() - s.mean[j];
    const double var = centered.squaredNorm() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      s.scale[j] = sd;
      s.X.col(j) = centered / sd;
      s.cols.push_back(static_cast<int>(j));
    } else {
      // Constant column: excluded from the fit, scale kept at 1 so the
      // back-transform stays well defined.
      s.scale[j] = 1.0;
      s.X.col(j).setZero();
    }
  }
  return s;
}

struct StdModel {
  double b0 = 0.0;
  Eigen::VectorXd b;
};

// Weighted lasso on standardized columns:
//   min (2n)^-1 sum_i w_i (z_i - b0 - xs_i b)^2 + lambda(pen_b0 |b0| + |b|_1)
// A null weight pointer means unit weights, for which the per-column
// curvature is exactly 1.
class CdContext {
 public:
  CdContext(const Standardized& s, const FitConfig& cfg)
      : s_(s), cfg_(cfg), n_(static_cast<double>(s.X.rows())) {}

  void set_weights(const Eigen::VectorXd* w) {
    w_ = w;
    if (w_) {
      wsum_over_n_ = w_->sum() / n_;
      denom_ = (s_.X.array().square().colwise() * w_->array())
                   .colwise()
                   .sum()
                   .transpose() /
               n_;
    } else {
      wsum_over_n_ = 1.0;
    }
  }

  // One pass over the given columns (intercept first); returns the largest
  // absolute coefficient change.
  double sweep(const std::vector<int>& cols, Eigen::VectorXd& r, StdModel& m,
               double lambda) const {
    double max_delta = update_intercept(r, m, lambda);
    for (int j : cols) {
      double grad, denom;
      if (w_) {
        grad = (s_.X.col(j).array() * w_->array() * r.array()).sum() / n_;
        denom = denom_[j];
        if (denom <= 0.0) continue;
      } else {
        grad = s_.X.col(j).dot(r) / n_;
        denom = 1.0;
      }
      const double nb = soft_threshold(denom * m.b[j] + grad, lambda) / denom;
      const double delta = nb - m.b[j];
      if (delta != 0.0) {
        r -= s_.X.col(j) * delta;
        m.b[j] = nb;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  }

  void solve(Eigen::VectorXd& r, StdModel& m, double lambda,
             int& sweep_budget) const {
    const double tol = cfg_.cd_tolerance;
    double last = std::numeric_limits<double>::infinity();
    for (;;) {
      last = sweep(s_.cols, r, m, lambda);
      spend(sweep_budget, last);
      if (last < tol) return;
      std::vector<int> active;
      active.reserve(64);
      for (int j : s_.cols) {
        if (m.b[j] != 0.0) active.push_back(j);
      }
      for (;;) {
        last = sweep(active, r, m, lambda);
        spend(sweep_budget, last);
        if (last < tol) break;
      }
    }
  }

  double n() const { return n_; }
  const std::vector<int>& cols() const { return s_.cols; }

 private:
  double update_intercept(Eigen::VectorXd& r, StdModel& m,
                          double lambda) const {
    double grad, denom;
    if (w_) {
      grad = w_->dot(r) / n_;
      denom = wsum_over_n_;
    } else {
      grad = r.mean();
      denom = 1.0;
    }
    double nb0;
    if (cfg_.penalize_intercept) {
      nb0 = soft_threshold(denom * m.b0 + grad, lambda) / denom;
    } else {
      nb0 = m.b0 + grad / denom;
    }
    const double delta = nb0 - m.b0;
    if (delta != 0.0) {
      r.array() -= delta;
      m.b0 = nb0;
    }
    return std::abs(delta);
  }

  void spend(int& budget, double last) const {
    if (--budget < 0) {
      fail(ErrorKind::convergence,
           "coordinate descent did not converge within max_sweeps; final max "
           "coefficient change " +
               std::to_string(last));
    }
  }

  const Standardized& s_;
  const FitConfig& cfg_;
  double n_;
  const Eigen::VectorXd* w_ = nullptr;
  double wsum_over_n_ = 1.0;
  Eigen::VectorXd denom_;
};

void solve_linear(CdContext& ctx, double lambda, StdModel& m,
                  Eigen::VectorXd& r, int& budget) {
  ctx.set_weights(nullptr);
  ctx.solve(r, m, lambda, budget);
}

// Direct active-set solver for the linear-family path. For a fixed active
// set A with signs s the lasso solution solves G_AA b_A = c_A - lambda s_A
// (standardized columns; the intercept separates because the columns are
// centered). The Cholesky factor of G_AA is grown by bordering as columns
// activate; drops trigger a refactorization. Any irregularity falls back to
// plain coordinate descent, which is always correct.
class LinearPathSolver {
 public:
  LinearPathSolver(const Standardized& s, const Eigen::VectorXd& y,
                   const FitConfig& cfg)
      : s_(s),
        cfg_(cfg),
        n_(static_cast<double>(y.size())),
        p_(s.X.cols()),
        ybar_(y.mean()),
        yc_(y.array() - y.mean()),
        gram_(p_, p_),
        gram_ready_(p_, 0),
        in_active_(p_, 0),
        ctx_(s, cfg) {
    c_ = s_.X.transpose() * yc_ / n_;
    for (Eigen::Index j = 0; j < p_; ++j) {
      if (s_.scale[j] == 1.0 && s_.X.col(j).isZero(0.0)) c_[j] = 0.0;
    }
    chol_.resize(0, 0);
  }

  // Solves at one penalty, warm-starting from the previous model.
  void step(double lambda, StdModel& m) {
    m.b0 = cfg_.penalize_intercept ? soft_threshold(ybar_, lambda) : ybar_;
    if (as_ok_ && solve_active_set(lambda, m)) return;

    // Fallback: coordinate descent from the current point.
    Eigen::VectorXd r =
        yc_ + Eigen::VectorXd::Constant(yc_.size(), ybar_ - m.b0) -
        s_.X * m.b;
    int budget = cfg_.max_sweeps;
    ctx_.set_weights(nullptr);
    ctx_.solve(r, m, lambda, budget);
    as_ok_ = rebuild_active_from(m);
  }

 private:
  static constexpr int kMaxRounds = 200;

  bool solve_active_set(double lambda, StdModel& m) {
    for (int round = 0; round < kMaxRounds; ++round) {
      const auto k = static_cast<Eigen::Index>(active_.size());
      if (k > 0) {
        Eigen::VectorXd rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
          rhs[i] = c_[active_[i]] - lambda * signs_[i];
        }
        chol_.topLeftCorner(k, k)
            .triangularView<Eigen::Lower>()
            .solveInPlace(rhs);
        chol_.topLeftCorner(k, k)
            .triangularView<Eigen::Lower>()
            .transpose()
            .solveInPlace(rhs);

        // Sign-consistency: entries pulled across zero leave the set.
        bool dropped = false;
        for (Eigen::Index i = 0; i < k; ++i) {
          if (rhs[i] * signs_[i] <= 0.0) dropped = true;
        }
        if (dropped) {
          int size = static_cast<int>(k);
          for (Eigen::Index i = k; i-- > 0;) {
            if (rhs[i] * signs_[i] <= 0.0) {
              in_active_[active_[i]] = 0;
              m.b[active_[i]] = 0.0;
              active_.erase(active_.begin() + i);
              signs_.erase(signs_.begin() + i);
              chol_delete(static_cast<int>(i), size);
              --size;
            }
          }
          continue;
        }

        for (Eigen::Index i = 0; i < k; ++i) m.b[active_[i]] = rhs[i];
      }

      // KKT over the inactive coordinates.
      Eigen::VectorXd grad = c_;
      if (k > 0) {
        for (Eigen::Index i = 0; i < k; ++i) {
          grad -= gram_col(active_[i]) * m.b[active_[i]];
        }
      }
      const double slack = lambda * 1e-10 + 1e-14;
      std::vector<int> violators;
      for (Eigen::Index j = 0; j < p_; ++j) {
        if (!in_active_[j] && std::abs(grad[j]) > lambda + slack) {
          violators.push_back(static_cast<int>(j));
        }
      }
      if (violators.empty()) return true;
      ensure_gram_cols(violators);
      for (int j : violators) {
        if (!border_add(j, grad[j] > 0.0 ? 1.0 : -1.0)) return false;
      }
    }
    return false;
  }

  Eigen::MatrixXd::ConstColXpr gram_col(int j) {
    if (!gram_ready_[j]) {
      gram_.col(j).noalias() = s_.X.transpose() * s_.X.col(j) / n_;
      gram_ready_[j] = 1;
    }
    return std::as_const(gram_).col(j);
  }

  // One pass over X per batch instead of per column.
  void ensure_gram_cols(const std::vector<int>& cols) {
    std::vector<int> missing;
    for (int j : cols) {
      if (!gram_ready_[j]) missing.push_back(j);
    }
    if (missing.size() <= 4) return;  // per-column paths handle these
    Eigen::MatrixXd block(s_.X.rows(), missing.size());
    for (std::size_t i = 0; i < missing.size(); ++i) {
      block.col(i) = s_.X.col(missing[i]);
    }
    Eigen::MatrixXd prod = s_.X.transpose() * block / n_;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      gram_.col(missing[i]) = prod.col(i);
      gram_ready_[missing[i]] = 1;
    }
  }

  bool border_add(int j, double sign) {
    const auto k = static_cast<Eigen::Index>(active_.size());
    if (static_cast<double>(k + 1) > 0.9 * n_ || k + 1 > p_) return false;
    if (chol_.rows() < k + 1) {
      const Eigen::Index cap = std::max<Eigen::Index>(2 * (k + 1), 32);
      Eigen::MatrixXd bigger = Eigen::MatrixXd::Zero(cap, cap);
      bigger.topLeftCorner(chol_.rows(), chol_.cols()) = chol_;
      chol_ = std::move(bigger);
    }
    const auto gj = gram_col(j);
    Eigen::VectorXd cross(k);
    for (Eigen::Index i = 0; i < k; ++i) cross[i] = gj[active_[i]];
    chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(
        cross);
    const double d2 = gj[j] - cross.squaredNorm();
    if (!(d2 > 1e-10)) return false;  // numerically collinear
    chol_.row(k).head(k) = cross.transpose();
    chol_(k, k) = std::sqrt(d2);
    active_.push_back(j);
    signs_.push_back(sign);
    in_active_[j] = 1;
    return true;
  }

  // Deletes factor position i (O(k^2)): removing row i of L leaves a
  // lower-Hessenberg matrix whose right Givens rotations restore the
  // triangle.
  void chol_delete(int i, int k) {
    for (int r = i; r < k - 1; ++r) {
      chol_.row(r).head(k) = chol_.row(r + 1).head(k);
    }
    for (int c = i; c < k - 1; ++c) {
      const double a = chol_(c, c);
      const double b = chol_(c, c + 1);
      const double rad = std::hypot(a, b);
      if (rad == 0.0) continue;
      const double ca = a / rad, sb = b / rad;
      for (int rr = c; rr < k - 1; ++rr) {
        const double u = chol_(rr, c), v = chol_(rr, c + 1);
        chol_(rr, c) = ca * u + sb * v;
        chol_(rr, c + 1) = -sb * u + ca * v;
      }
    }
  }

  bool refactor() {
    const auto k = static_cast<Eigen::Index>(active_.size());
    Eigen::MatrixXd G(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto gi = gram_col(active_[i]);
      for (Eigen::Index l = 0; l < k; ++l) G(l, i) = gi[active_[l]];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) return false;
    if (chol_.rows() < k) {
      chol_ = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(k, 32),
                                    std::max<Eigen::Index>(k, 32));
    }
    chol_.topLeftCorner(k, k) = llt.matrixL();
    return true;
  }

  bool rebuild_active_from(const StdModel& m) {
    active_.clear();
    signs_.clear();
    std::fill(in_active_.begin(), in_active_.end(), 0);
    for (Eigen::Index j = 0; j < p_; ++j) {
      if (m.b[j] != 0.0) {
        active_.push_back(static_cast<int>(j));
        signs_.push_back(m.b[j] > 0.0 ? 1.0 : -1.0);
        in_active_[j] = 1;
      }
    }
    return refactor();
  }

  const Standardized& s_;
  const FitConfig& cfg_;
  double n_;
  Eigen::Index p_;
  double ybar_;
  Eigen::VectorXd yc_;
  Eigen::VectorXd c_;
  Eigen::MatrixXd gram_;        // lazily filled columns of X'X/n
  std::vector<char> gram_ready_;
  std::vector<int> active_;
  std::vector<double> signs_;
  std::vector<char> in_active_;
  Eigen::MatrixXd chol_;  // lower factor of G[A,A], top-left block in use
  bool as_ok_ = true;
  CdContext ctx_;
};

double penalized_logistic_objective(const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& eta,
                                    const StdModel& m, double lambda,
                                    bool penalize_intercept) {
  double nll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = eta[i];
    const double log1pe = (t > 30.0) ? t : std::log1p(std::exp(t));
    nll += log1pe - y[i] * t;
  }
  nll /= static_cast<double>(y.size());
  double pen = m.b.cwiseAbs().sum();
  if (penalize_intercept) pen += std::abs(m.b0);
  return nll + lambda * pen;
}

// Outer IRLS loop; eta tracks the current linear predictor and is kept in
// sync with the working residual so no extra matrix-vector products are
// needed. Steps that fail to decrease the penalized objective are damped,
// which keeps the saturation regime (clamped probabilities, floored
// weights) from oscillating.
void solve_logistic(CdContext& ctx, const Eigen::VectorXd& y, double lambda,
                    StdModel& m, Eigen::VectorXd& eta, const FitConfig& cfg,
                    int& budget) {
  const auto n = y.size();
  Eigen::VectorXd prob(n), w(n), z(n), r(n);
  double obj = penalized_logistic_objective(y, eta, m, lambda,
                                            cfg.penalize_intercept);
  for (int outer = 0; outer < kMaxIrlsOuter; ++outer) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double pi = expit(eta[i]);
      pi = std::min(1.0 - kProbClamp, std::max(kProbClamp, pi));
      prob[i] = pi;
      w[i] = std::max(pi * (1.0 - pi), kWeightFloor);
      z[i] = eta[i] + (y[i] - pi) / w[i];
    }
    r = z - eta;
    const double b0_old = m.b0;
    const Eigen::VectorXd b_old = m.b;
    const Eigen::VectorXd eta_old = eta;
    ctx.set_weights(&w);
    ctx.solve(r, m, lambda, budget);
    eta = z - r;

    const double b0_new = m.b0;
    const Eigen::VectorXd b_new = m.b;
    const Eigen::VectorXd eta_new = eta;
    double trial_obj = penalized_logistic_objective(y, eta, m, lambda,
                                                    cfg.penalize_intercept);
    double step = 1.0;
    while (trial_obj > obj + 1e-14 && step > 1e-3) {
      step *= 0.5;
      m.b0 = b0_old + step * (b0_new - b0_old);
      m.b = b_old + step * (b_new - b_old);
      eta = eta_old + step * (eta_new - eta_old);
      trial_obj = penalized_logistic_objective(y, eta, m, lambda,
                                               cfg.penalize_intercept);
    }
    obj = trial_obj;

    double delta = std::abs(m.b0 - b0_old);
    delta = std::max(delta, (m.b - b_old).cwiseAbs().maxCoeff());
    if (delta < cfg.cd_tolerance) return;
  }
  fail(ErrorKind::convergence, "IRLS did not converge for penalty " +
                                   std::to_string(lambda));
}

FittedGlm to_original(const StdModel& m, const Standardized& s,
                      GlmFamily family, double lambda) {
  FittedGlm fit;
  fit.family = family;
  fit.lambda = lambda;
  fit.column_means = s.mean;
  fit.column_scales = s.scale;
  fit.coefficients = Eigen::VectorXd::Zero(s.mean.size());
  double shift = 0.0;
  for (int j : s.cols) {
    if (m.b[j] != 0.0) {
      fit.coefficients[j] = m.b[j] / s.scale[j];
      shift += m.b[j] * s.mean[j] / s.scale[j];
      fit.support.push_back(j);
    }
  }
  fit.intercept = m.b0 - shift;
  return fit;
}

void check_logistic_outcome(const Eigen::VectorXd& y) {
  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      any0 = true;
    } else if (y[i] == 1.0) {
      any1 = true;
    } else {
      fail(ErrorKind::data, "logistic fit: outcome must be 0/1");
    }
  }
  if (!any0 || !any1) {
    fail(ErrorKind::degenerate,
         "logistic fit: outcome has a single class; the model is not "
         "identifiable");
  }
}

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// Path fit over a decreasing penalty grid with warm starts. For a single
// logistic class (allowed only inside CV folds) the intercept-only fit is
// used at every penalty.
// Mean negative log-likelihood of the logistic working model.
double logistic_nll(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double nll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = eta[i];
    const double log1pe = (t > 30.0) ? t : std::log1p(std::exp(t));
    nll += log1pe - y[i] * t;
  }
  return nll / static_cast<double>(y.size());
}

std::vector<StdModel> fit_path(const Standardized& s, const Eigen::VectorXd& y,
                               GlmFamily family,
                               const Eigen::VectorXd& lambdas,
                               const FitConfig& cfg,
                               bool allow_single_class = false,
                               bool freeze_on_saturation = false) {
  const auto n = y.size();
  std::vector<StdModel> out;
  out.reserve(lambdas.size());

  if (family.kind == Family::logistic) {
    bool single = true;
    for (Eigen::Index i = 1; i < n && single; ++i) single = (y[i] == y[0]);
    if (single) {
      if (!allow_single_class) check_logistic_outcome(y);
      StdModel m;
      m.b = Eigen::VectorXd::Zero(s.mean.size());
      const double pbar = clamp_prob(y.mean());
      m.b0 = std::log(pbar / (1.0 - pbar));
      out.assign(lambdas.size(), m);
      return out;
    }
  }

  StdModel m;
  m.b = Eigen::VectorXd::Zero(s.mean.size());
  if (family.kind == Family::linear && s.mean.size() <= 4096) {
    LinearPathSolver solver(s, y, cfg);
    for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
      solver.step(lambdas[k], m);
      out.push_back(m);
    }
    return out;
  }

  CdContext ctx(s, cfg);
  Eigen::VectorXd state;  // residual (linear) or linear predictor (logistic)
  if (family.kind == Family::linear) {
    state = y;
  } else {
    state = Eigen::VectorXd::Zero(n);
  }
  double null_nll = 0.0;
  if (family.kind == Family::logistic && freeze_on_saturation) {
    const double pbar = clamp_prob(y.mean());
    null_nll = -(y.mean() * std::log(pbar) +
                 (1.0 - y.mean()) * std::log(1.0 - pbar));
  }
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    int budget = cfg.max_sweeps;
    if (family.kind == Family::linear) {
      solve_linear(ctx, lambdas[k], m, state, budget);
    } else {
      solve_logistic(ctx, y, lambdas[k], m, state, cfg, budget);
    }
    out.push_back(m);
    // Saturated binomial fits (deviance ratio > 0.999, or a visible share
    // of probabilities pinned at the clamps) sit at quasi-separation;
    // further penalty decreases only chase diverging coefficients. As in
    // glmnet's path stop, the saturated solution is carried over the rest
    // of the grid.
    if (family.kind == Family::logistic && freeze_on_saturation &&
        k + 1 < lambdas.size()) {
      int clamped = 0;
      const double hi = std::log((1.0 - kProbClamp) / kProbClamp);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(state[i]) >= hi) ++clamped;
      }
      if (logistic_nll(y, state) < 0.001 * null_nll ||
          clamped * 200 > n) {
        for (Eigen::Index rest = k + 1; rest < lambdas.size(); ++rest) {
          out.push_back(m);
        }
        break;
      }
    }
  }
  return out;
}

double lambda_max_standardized(const Standardized& s,
                               const Eigen::VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const Eigen::VectorXd yc = y.array() - y.mean();
  double lmax = 0.0;
  for (int j : s.cols) {
    lmax = std::max(lmax, std::abs(s.X.col(j).dot(yc)) / n);
  }
  return lmax;
}

std::vector<std::vector<int>> make_folds(Eigen::Index n, int k,
                                         std::uint64_t seed) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  std::vector<std::vector<int>> folds(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    folds[i % k].push_back(perm[i]);
  }
  return folds;
}

}  // namespace

Eigen::VectorXd lambda_grid(double lambda_max, int n_lambda,
                            double min_ratio) {
  if (n_lambda < 1) fail(ErrorKind::config, "n_lambda must be >= 1");
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) {
    fail(ErrorKind::config, "lambda_min_ratio must lie in (0,1)");
  }
  Eigen::VectorXd grid(n_lambda);
  if (n_lambda == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * min_ratio);
  for (int k = 0; k < n_lambda; ++k) {
    grid[k] = std::exp(log_max + (log_min - log_max) * k / (n_lambda - 1));
  }
  // exp(log(.)) can land an ulp below the exact endpoints; the top of the
  // grid must be exactly lambda_max so the null model is reproduced there.
  grid[0] = lambda_max;
  grid[n_lambda - 1] = lambda_max * min_ratio;
  return grid;
}

double lambda_max_value(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return lambda_max_standardized(standardize(X), y);
}

FittedGlm fit_at_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        GlmFamily family, double lambda,
                        const FittedGlm* warm_start, const FitConfig& config) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "fit: X/y length mismatch");
  if (X.rows() < 2) fail(ErrorKind::data, "fit: need at least two samples");
  if (!X.allFinite() || !y.allFinite()) {
    fail(ErrorKind::data, "fit: non-finite input");
  }
  if (!(lambda >= 0.0)) fail(ErrorKind::config, "fit: lambda must be >= 0");
  if (family.kind == Family::logistic) check_logistic_outcome(y);

  const Standardized s = standardize(X);
  CdContext ctx(s, config);
  StdModel m;
  m.b = Eigen::VectorXd::Zero(X.cols());
  if (warm_start) {
    if (warm_start->coefficients.size() != X.cols()) {
      fail(ErrorKind::shape, "fit: warm start has wrong dimension");
    }
    double shift = 0.0;
    for (int j : warm_start->support) {
      m.b[j] = warm_start->coefficients[j] * s.scale[j];
      shift += warm_start->coefficients[j] * s.mean[j];
    }
    m.b0 = warm_start->intercept + shift;
  }

  int budget = config.max_sweeps;
  if (family.kind == Family::linear) {
    Eigen::VectorXd r = y - Eigen::VectorXd::Constant(y.size(), m.b0) -
                        s.X * m.b;
    solve_linear(ctx, lambda, m, r, budget);
  } else {
    Eigen::VectorXd eta =
        Eigen::VectorXd::Constant(y.size(), m.b0) + s.X * m.b;
    solve_logistic(ctx, y, lambda, m, eta, config, budget);
  }
  return to_original(m, s, family, lambda);
}

Eigen::VectorXd predict_mean(const FittedGlm& model,
                             const Eigen::MatrixXd& X) {
  if (X.cols() != model.coefficients.size()) {
    fail(ErrorKind::shape, "predict: column count mismatch (" +
                               std::to_string(X.cols()) + " vs " +
                               std::to_string(model.coefficients.size()) +
                               ")");
  }
  Eigen::VectorXd eta =
      (X * model.coefficients).array() + model.intercept;
  if (model.family.kind == Family::logistic) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  }
  return eta;
}

Eigen::VectorXd residuals(const FittedGlm& model, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    fail(ErrorKind::shape, "residuals: X/y length mismatch");
  }
  return y - predict_mean(model, X);
}

CvFit fit_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
             GlmFamily family, const FitConfig& config) {
  const auto n = X.rows();
  const auto p = X.cols();
  const int k = config.cv_folds;
  if (k < 2) fail(ErrorKind::config, "cv_folds must be >= 2");
  if (n < k) fail(ErrorKind::data, "cv: fewer samples than folds");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorKind::data, "cv: non-finite");
  if (family.kind == Family::logistic) check_logistic_outcome(y);

  const Standardized s_full = standardize(X);
  const double lmax = std::max(lambda_max_standardized(s_full, y),
                               std::numeric_limits<double>::min());
  const Eigen::VectorXd grid =
      lambda_grid(lmax, config.n_lambda, config.min_ratio(n, p));
  const int L = static_cast<int>(grid.size());

  const auto folds = make_folds(n, k, config.seed);

  Eigen::MatrixXd fold_loss(k, L);
  Eigen::VectorXd fold_size(k);
  for (int f = 0; f < k; ++f) {
    std::vector<char> in_val(n, 0);
    for (int i : folds[f]) in_val[i] = 1;

    const auto n_val = static_cast<Eigen::Index>(folds[f].size());
    const auto n_tr = n - n_val;
    Eigen::MatrixXd X_tr(n_tr, p), X_val(n_val, p);
    Eigen::VectorXd y_tr(n_tr), y_val(n_val);
    Eigen::Index it = 0, iv = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_val[i]) {
        X_val.row(iv) = X.row(i);
        y_val[iv++] = y[i];
      } else {
        X_tr.row(it) = X.row(i);
        y_tr[it++] = y[i];
      }
    }

    const Standardized s_tr = standardize(X_tr);
    const auto path = fit_path(s_tr, y_tr, family, grid, config,
                               /*allow_single_class=*/true,
                               /*freeze_on_saturation=*/true);

    // Validation rows on the training fold's standardized scale.
    Eigen::MatrixXd Xs_val(n_val, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      Xs_val.col(j) = (X_val.col(j).array() - s_tr.mean[j]) / s_tr.scale[j];
    }
    fold_size[f] = static_cast<double>(n_val);
    for (int l = 0; l < L; ++l) {
      Eigen::VectorXd eta =
          (Xs_val * path[l].b).array() + path[l].b0;
      double loss = 0.0;
      if (family.kind == Family::linear) {
        loss = (y_val - eta).squaredNorm() / static_cast<double>(n_val);
      } else {
        for (Eigen::Index i = 0; i < n_val; ++i) {
          const double pi = clamp_prob(expit(eta[i]));
          loss -= y_val[i] * std::log(pi) + (1.0 - y_val[i]) * std::log(1.0 - pi);
        }
        loss /= static_cast<double>(n_val);
      }
      fold_loss(f, l) = loss;
    }
  }

  CvFit out;
  out.lambdas = grid;
  out.mean_loss.resize(L);
  out.se_loss.resize(L);
  for (int l = 0; l < L; ++l) {
    out.mean_loss[l] =
        fold_loss.col(l).dot(fold_size) / static_cast<double>(n);
    const double m = fold_loss.col(l).mean();
    const double var =
        (fold_loss.col(l).array() - m).square().sum() / (k - 1.0);
    out.se_loss[l] = std::sqrt(var / k);
  }

  int best = 0;
  for (int l = 1; l < L; ++l) {
    if (out.mean_loss[l] < out.mean_loss[best]) best = l;
  }
  if (config.selection_rule == SelectionRule::one_se) {
    const double bound = out.mean_loss[best] + out.se_loss[best];
    for (int l = 0; l <= best; ++l) {
      if (out.mean_loss[l] <= bound) {
        best = l;
        break;
      }
    }
  }
  out.selected = best;

  // Refit on all data along the warm-started path up to the selected
  // penalty.
  const auto full_path =
      fit_path(s_full, y, family, grid.head(best + 1), config);
  out.model = to_original(full_path[best], s_full, family, grid[best]);
  return out;
}

}  // namespace gencov
