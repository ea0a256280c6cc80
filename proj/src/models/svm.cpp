#include <batauth/error.hpp>
#include <batauth/models.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace batauth {

namespace {

constexpr double kTau = 1e-12;

Eigen::MatrixXd kernel_matrix(const Matrix& a, const Matrix& b, SvmKernel kernel, double gamma) {
  Eigen::MatrixXd k = a * b.transpose();
  if (kernel == SvmKernel::Rbf) {
    const Eigen::VectorXd an = a.rowwise().squaredNorm();
    const Eigen::VectorXd bn = b.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        k(i, j) = std::exp(-gamma * std::max(0.0, an[i] + bn[j] - 2.0 * k(i, j)));
      }
    }
  }
  return k;
}

/// Dual C-SVC solved by SMO with second-order working-set selection.
Svm::Machine solve_binary(const Eigen::MatrixXd& kernel, const Matrix& x, const std::vector<double>& y, double c,
                          double tol) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  const Eigen::VectorXd qd = kernel.diagonal();
  auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * kernel(i, j); };
  auto in_up = [&](Eigen::Index t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0.0; };
  auto in_low = [&](Eigen::Index t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c; };

  Svm::Machine machine;
  machine.converged = false;
  const std::size_t max_iter = static_cast<std::size_t>(std::max<Eigen::Index>(10 * n, 1));
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double yg = y[t] * grad[t];
      gmax2 = std::max(gmax2, yg);
      if (i < 0) continue;
      const double diff = gmax + yg;
      if (diff > 0.0) {
        double quad = qd[i] + qd[t] - 2.0 * kernel(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -diff * diff / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) {
      machine.converged = true;
      break;
    }

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double qij = q(i, j);
    if (y[i] != y[j]) {
      double quad = qd[i] + qd[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0; alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else if (alpha[j] > c) {
        alpha[j] = c; alpha[i] = c + diff;
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0; alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0; alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }
  machine.iterations = iter;

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  machine.rho = free_count > 0 ? free_sum / free_count : (ub + lb) / 2.0;

  std::vector<Eigen::Index> support;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) support.push_back(t);
  }
  machine.support = x(support, Eigen::all);
  machine.coefficients.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    machine.coefficients[static_cast<Eigen::Index>(s)] = alpha[support[s]] * y[static_cast<std::size_t>(support[s])];
  }
  return machine;
}

}  // namespace

Svm Svm::fit(const Matrix& x, const Labels& y, int n_classes, const SvmParams& params) {
  Svm model;
  model.kernel = params.kernel;
  model.n_classes = n_classes;
  if (params.gamma) {
    model.gamma = *params.gamma;
  } else {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    model.gamma = var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
  }
  const Eigen::MatrixXd k = kernel_matrix(x, x, params.kernel, model.gamma);
  const int machine_count = n_classes == 2 ? 1 : n_classes;
  for (int m = 0; m < machine_count; ++m) {
    const int positive = n_classes == 2 ? 1 : m;
    std::vector<double> target(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) target[i] = y[i] == positive ? 1.0 : -1.0;
    model.machines.push_back(solve_binary(k, x, target, params.c, params.tol));
  }
  return model;
}

Matrix Svm::decision(const Matrix& x) const {
  Matrix out(x.rows(), static_cast<Eigen::Index>(machines.size()));
  for (std::size_t m = 0; m < machines.size(); ++m) {
    const auto& machine = machines[m];
    if (machine.support.rows() == 0) {
      out.col(static_cast<Eigen::Index>(m)).setConstant(-machine.rho);
      continue;
    }
    const Eigen::MatrixXd k = kernel_matrix(x, machine.support, kernel, gamma);
    out.col(static_cast<Eigen::Index>(m)) = (k * machine.coefficients).array() - machine.rho;
  }
  return out;
}

Labels Svm::predict(const Matrix& x) const {
  const Matrix values = decision(x);
  Labels out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (machines.size() == 1) {
      out[static_cast<std::size_t>(r)] = values(r, 0) > 0.0 ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      values.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
  }
  return out;
}

bool Svm::converged() const {
  return std::all_of(machines.begin(), machines.end(), [](const Machine& m) { return m.converged; });
}

}  // namespace batauth
