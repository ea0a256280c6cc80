#include <batauth/error.hpp>
#include <batauth/models.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace batauth {

namespace {

constexpr std::string_view kModule = "ml-models";

std::vector<std::vector<Eigen::Index>> rows_by_class(const Labels& y, int n_classes) {
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < y.size(); ++i) rows[static_cast<std::size_t>(y[i])].push_back(static_cast<Eigen::Index>(i));
  return rows;
}

/// Row-wise softmax that tolerates -inf entries.
Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - top).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

GaussianNb GaussianNb::fit(const Matrix& x, const Labels& y, int n_classes, const GaussianNbParams& params) {
  const auto d = x.cols();
  const auto n = static_cast<double>(x.rows());
  GaussianNb model;
  const RowVector overall_mean = x.colwise().mean();
  const double max_variance = ((x.rowwise() - overall_mean).array().square().colwise().sum() / n).maxCoeff();
  model.epsilon = params.var_smoothing * (max_variance > 0.0 ? max_variance : 1.0);
  model.means = Matrix::Zero(n_classes, d);
  model.variances = Matrix::Constant(n_classes, d, 1.0);
  model.log_priors = Vector::Constant(n_classes, -std::numeric_limits<double>::infinity());

  const auto rows = rows_by_class(y, n_classes);
  for (int k = 0; k < n_classes; ++k) {
    const auto& idx = rows[static_cast<std::size_t>(k)];
    if (idx.empty()) continue;
    const Matrix members = x(idx, Eigen::all);
    const RowVector mean = members.colwise().mean();
    model.means.row(k) = mean;
    model.variances.row(k) =
        (members.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(idx.size());
    model.variances.row(k).array() += model.epsilon;
    model.log_priors[k] = std::log(static_cast<double>(idx.size()) / n);
  }
  return model;
}

Matrix GaussianNb::joint_log_likelihood(const Matrix& x) const {
  const auto classes = means.rows();
  Matrix out(x.rows(), classes);
  for (Eigen::Index k = 0; k < classes; ++k) {
    const double norm = -0.5 * (2.0 * std::numbers::pi * variances.row(k).array()).log().sum();
    const RowVector inv_var = variances.row(k).cwiseInverse();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double quad = ((x.row(r) - means.row(k)).array().square() * inv_var.array()).sum();
      out(r, k) = log_priors[k] + norm - 0.5 * quad;
    }
  }
  return out;
}

Matrix GaussianNb::predict_scores(const Matrix& x) const { return softmax_rows(joint_log_likelihood(x)); }

Qda Qda::fit(const Matrix& x, const Labels& y, int n_classes, const QdaParams& params) {
  const auto d = x.cols();
  Qda model;
  model.means = Matrix::Zero(n_classes, d);
  model.log_dets = Vector::Zero(n_classes);
  model.log_priors = Vector::Constant(n_classes, -std::numeric_limits<double>::infinity());
  model.cholesky.assign(static_cast<std::size_t>(n_classes), Eigen::MatrixXd::Identity(d, d));

  const auto rows = rows_by_class(y, n_classes);
  for (int k = 0; k < n_classes; ++k) {
    const auto& idx = rows[static_cast<std::size_t>(k)];
    if (idx.empty()) continue;
    const Eigen::MatrixXd members = x(idx, Eigen::all);
    const Eigen::RowVectorXd mean = members.colwise().mean();
    const Eigen::MatrixXd centered = members.rowwise() - mean;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    if (idx.size() > 1) cov = centered.transpose() * centered / static_cast<double>(idx.size() - 1);
    const double shrink_target = cov.trace() / static_cast<double>(d);
    Eigen::MatrixXd regularised = (1.0 - params.reg) * cov;
    regularised.diagonal().array() += params.reg * shrink_target;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(regularised, Eigen::EigenvaluesOnly);
    const double largest = eig.eigenvalues().maxCoeff();
    const double smallest = eig.eigenvalues().minCoeff();
    if (!(largest > 0.0) || smallest <= 1e-10 * largest) {
      throw Error(ErrorCode::SingularCovariance, kModule,
                  "covariance of class " + std::to_string(k) + " is singular; use reg > 0");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(regularised);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance, kModule, "covariance of class " + std::to_string(k) + " is not positive definite");
    }
    model.means.row(k) = mean;
    model.cholesky[static_cast<std::size_t>(k)] = llt.matrixL();
    model.log_dets[k] = 2.0 * model.cholesky[static_cast<std::size_t>(k)].diagonal().array().log().sum();
    model.log_priors[k] = std::log(static_cast<double>(idx.size()) / static_cast<double>(x.rows()));
  }
  return model;
}

Matrix Qda::predict_scores(const Matrix& x) const {
  const auto classes = means.rows();
  Matrix logits(x.rows(), classes);
  for (Eigen::Index k = 0; k < classes; ++k) {
    if (!std::isfinite(log_priors[k])) {
      logits.col(k).setConstant(-std::numeric_limits<double>::infinity());
      continue;
    }
    const Eigen::MatrixXd centered = (x.rowwise() - means.row(k)).transpose();
    const Eigen::MatrixXd z =
        cholesky[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>().solve(centered);
    logits.col(k) = (log_priors[k] - 0.5 * log_dets[k] - 0.5 * z.colwise().squaredNorm().array()).transpose();
  }
  return softmax_rows(logits);
}

}  // namespace batauth
