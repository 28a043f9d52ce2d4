#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "spinforge/fitting.hpp"

namespace spinforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Weighted {
  Eigen::VectorXd r;  // sqrt(rho') * r
  Eigen::VectorXd w;  // sqrt(rho')
  double cost = 0.0;
};

Weighted apply_loss(const Eigen::VectorXd& r, Loss loss, double c) {
  Weighted out;
  if (loss == Loss::squares) {
    out.r = r;
    out.w = Eigen::VectorXd::Ones(r.size());
    out.cost = 0.5 * r.squaredNorm();
    return out;
  }
  const Eigen::ArrayXd z = (r.array() / c).square();
  const Eigen::ArrayXd root = (1.0 + z).sqrt();
  out.cost = 0.5 * c * c * (2.0 * (root - 1.0)).sum();
  out.w = root.inverse().sqrt().matrix();
  out.r = (out.w.array() * r.array()).matrix();
  return out;
}

bool near(double x, double bound) {
  return std::isfinite(bound) && std::abs(x - bound) <= 1e-12 * std::max(1.0, std::abs(bound));
}

}  // namespace

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max-iter";
    case FitStatus::singular: return "singular";
  }
  return "unknown";
}

void FitProblem::validate() const {
  if (!residuals) throw std::invalid_argument("fit problem has no residual function");
  if (parameters.empty()) throw std::invalid_argument("fit problem has no parameters");
  for (const auto& p : parameters) {
    if (!std::isfinite(p.value)) throw std::invalid_argument("initial value of " + p.name + " is not finite");
    if (p.lower > p.upper || p.value < p.lower || p.value > p.upper)
      throw std::invalid_argument("inconsistent bounds for " + p.name);
  }
  if (loss == Loss::soft_l1 && !(loss_scale > 0.0)) throw std::invalid_argument("soft-L1 scale must be positive");
}

Eigen::VectorXd FitProblem::initial_values() const {
  Eigen::VectorXd x(parameters.size());
  for (std::size_t i = 0; i < parameters.size(); ++i) x(i) = parameters[i].value;
  return x;
}

int FitResult::index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no fit parameter named " + name);
  return static_cast<int>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return estimates(index(name)); }
double FitResult::interval(const std::string& name) const { return ci95(index(name)); }

double student_t_975(int dof) {
  if (dof < 1) return kInf;
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.975);
}

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& steps,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 const Eigen::VectorXd* f0) {
  Eigen::VectorXd base;
  if (f0 == nullptr) base = f(x);
  const Eigen::VectorXd& center = f0 ? *f0 : base;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(center.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = steps(i);
    if (h == 0.0) continue;
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    if (x(i) + h <= upper(i) && x(i) - h >= lower(i)) {
      xp(i) += h;
      xm(i) -= h;
      J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    } else if (x(i) + 2.0 * h <= upper(i)) {
      // second-order forward difference
      xp(i) += h;
      xm(i) += 2.0 * h;
      J.col(i) = (-3.0 * center + 4.0 * f(xp) - f(xm)) / (2.0 * h);
    } else {
      xp(i) -= h;
      xm(i) -= 2.0 * h;
      J.col(i) = (3.0 * center - 4.0 * f(xp) + f(xm)) / (2.0 * h);
    }
  }
  return J;
}

FitResult least_squares(const FitProblem& problem) {
  problem.validate();
  const int n = static_cast<int>(problem.parameters.size());
  Eigen::VectorXd lower(n), upper(n), scale(n);
  std::vector<int> free;
  for (int i = 0; i < n; ++i) {
    const auto& p = problem.parameters[i];
    lower(i) = p.fixed ? p.value : p.lower;
    upper(i) = p.fixed ? p.value : p.upper;
    scale(i) = p.scale > 0.0 ? p.scale : 1.0;
    if (!p.fixed) free.push_back(i);
  }
  const int nf = static_cast<int>(free.size());

  FitResult result;
  for (const auto& p : problem.parameters) result.names.push_back(p.name);

  int evaluations = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    Eigen::VectorXd r = problem.residuals(x);
    if (!r.allFinite()) r.setConstant(kInf);
    return r;
  };

  Eigen::VectorXd x = problem.initial_values();
  Eigen::VectorXd r = eval(x);
  if (!r.allFinite()) throw std::invalid_argument("model is not evaluable at the initial parameters");
  const int m = static_cast<int>(r.size());
  if (m < nf) throw std::invalid_argument("fewer residuals than free parameters");

  Weighted wr = apply_loss(r, problem.loss, problem.loss_scale);
  const double fd_eps = std::cbrt(std::numeric_limits<double>::epsilon());

  auto jacobian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& r_at, const Weighted& w) {
    Eigen::VectorXd steps = Eigen::VectorXd::Zero(n);
    for (int i : free) steps(i) = fd_eps * std::max(std::abs(at(i)), scale(i));
    const Eigen::MatrixXd full = numeric_jacobian(eval, at, steps, lower, upper, &r_at);
    Eigen::MatrixXd J(m, nf);
    for (int c = 0; c < nf; ++c) J.col(c) = w.w.asDiagonal() * full.col(free[c]);
    return J;
  };

  Eigen::MatrixXd J = jacobian(x, r, wr);
  Eigen::VectorXd diag_scale = Eigen::VectorXd::Zero(nf);
  double lambda = -1.0;
  double nu = 2.0;
  FitStatus status = FitStatus::max_iterations;
  std::string message = "iteration limit reached";
  int accepted = 0;

  for (int iter = 0; iter < problem.max_iterations; ++iter) {
    const Eigen::VectorXd g = J.transpose() * wr.r;
    const Eigen::MatrixXd A = J.transpose() * J;

    // Active bound constraints: at a bound with the descent direction pointing out.
    std::vector<bool> active(nf, false);
    double gnorm = 0.0;
    for (int c = 0; c < nf; ++c) {
      const int i = free[c];
      if ((near(x(i), lower(i)) && g(c) > 0.0) || (near(x(i), upper(i)) && g(c) < 0.0)) {
        active[c] = true;
        continue;
      }
      gnorm = std::max(gnorm, std::abs(g(c)));
    }
    if (gnorm < problem.gradient_tol) {
      status = FitStatus::converged;
      message = "projected gradient below tolerance";
      break;
    }

    for (int c = 0; c < nf; ++c) diag_scale(c) = std::max(diag_scale(c), A(c, c));
    if (lambda < 0.0) lambda = 1e-6;

    bool step_taken = false;
    bool stalled = false;
    while (!step_taken) {
      Eigen::MatrixXd M = A;
      Eigen::VectorXd rhs = -g;
      for (int c = 0; c < nf; ++c) {
        if (active[c]) {
          M.row(c).setZero();
          M.col(c).setZero();
          M(c, c) = 1.0;
          rhs(c) = 0.0;
        } else {
          M(c, c) += lambda * std::max(diag_scale(c), 1e-300);
        }
      }
      const Eigen::VectorXd delta = M.ldlt().solve(rhs);

      Eigen::VectorXd x_new = x;
      for (int c = 0; c < nf; ++c) {
        const int i = free[c];
        x_new(i) = std::clamp(x(i) + delta(c), lower(i), upper(i));
      }
      Eigen::VectorXd actual(nf);
      for (int c = 0; c < nf; ++c) actual(c) = x_new(free[c]) - x(free[c]);
      if (!delta.allFinite() || actual.norm() <= 1e-15 * (x.norm() + 1e-15)) {
        stalled = true;
        break;
      }

      const Eigen::VectorXd r_new = eval(x_new);
      const Weighted w_new = apply_loss(r_new, problem.loss, problem.loss_scale);
      const double predicted = -(actual.dot(g) + 0.5 * actual.dot(A * actual));
      if (std::isfinite(w_new.cost) && w_new.cost < wr.cost) {
        const double rho = predicted > 0.0 ? (wr.cost - w_new.cost) / predicted : 0.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        const double old_cost = wr.cost;
        x = x_new;
        r = r_new;
        wr = w_new;
        ++accepted;
        step_taken = true;
        if (old_cost - wr.cost <= problem.cost_tol * old_cost) {
          status = FitStatus::converged;
          message = "relative cost change below tolerance";
        }
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (!std::isfinite(lambda) || lambda > 1e30) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      status = FitStatus::converged;
      message = "no further cost reduction possible";
      break;
    }
    J = jacobian(x, r, wr);
    if (status == FitStatus::converged) break;
  }

  result.estimates = x;
  result.cost = wr.cost;
  result.residual_count = m;
  result.rms = std::sqrt(r.squaredNorm() / std::max(m, 1));
  result.iterations = accepted;
  result.evaluations = evaluations;
  result.ci95 = Eigen::VectorXd::Zero(n);
  result.covariance = Eigen::MatrixXd::Zero(n, n);
  result.at_bound.assign(n, false);
  for (int i : free) {
    result.at_bound[i] = near(x(i), lower(i)) || near(x(i), upper(i));
    if (result.at_bound[i]) result.warnings.push_back(result.names[i] + " is at a bound");
  }

  if (nf > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    result.singular_ratio = smax > 0.0 ? smin / smax : 0.0;
    const int dof = m - nf;
    const double variance = dof > 0 ? 2.0 * wr.cost / dof : 2.0 * wr.cost;
    const double tq = student_t_975(std::max(dof, 1));
    if (smax == 0.0 || result.singular_ratio < 1e-10) {
      status = FitStatus::singular;
      message = "Jacobian is singular; parameters are not identifiable";
      for (int i : free) result.ci95(i) = kInf;
    } else {
      const Eigen::VectorXd inv_sq = sv.array().square().inverse().matrix();
      const Eigen::MatrixXd cov = variance * svd.matrixV() * inv_sq.asDiagonal() * svd.matrixV().transpose();
      for (int a = 0; a < nf; ++a) {
        for (int b = 0; b < nf; ++b) result.covariance(free[a], free[b]) = cov(a, b);
        result.ci95(free[a]) = tq * std::sqrt(std::max(cov(a, a), 0.0));
      }
    }
  }
  result.status = status;
  result.message = message;
  return result;
}

}  // namespace spinforge
