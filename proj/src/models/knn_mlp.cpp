#include <batauth/error.hpp>
#include <batauth/models.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace batauth {

Knn Knn::fit(const Matrix& x, const Labels& y, int n_classes, const KnnParams& params) {
  return Knn{x, y, n_classes, params};
}

Matrix Knn::predict_scores(const Matrix& x) const {
  const auto n = train_x.rows();
  const auto k = std::min<Eigen::Index>(params.k, n);
  Matrix scores = Matrix::Zero(x.rows(), n_classes);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Vector dist2 = (train_x.rowwise() - x.row(r)).rowwise().squaredNorm();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](auto a, auto b) {
      return dist2[a] < dist2[b] || (dist2[a] == dist2[b] && a < b);
    });
    const bool exact_match = dist2[order[0]] == 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto i = order[static_cast<std::size_t>(j)];
      double w = 1.0;
      if (params.weights == KnnWeights::Distance) {
        // Exact matches take all the weight, as 1/0 would.
        w = exact_match ? (dist2[i] == 0.0 ? 1.0 : 0.0) : 1.0 / std::sqrt(dist2[i]);
      }
      scores(r, train_y[static_cast<std::size_t>(i)]) += w;
    }
    scores.row(r) /= scores.row(r).sum();
  }
  return scores;
}

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  return a == Activation::Relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : Eigen::MatrixXd(z.array().tanh().matrix());
}

/// Derivative expressed through the activation output.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& out, Activation a) {
  if (a == Activation::Relu) return (out.array() > 0.0).cast<double>().matrix();
  return (1.0 - out.array().square()).matrix();
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

struct Parameter {
  Eigen::MatrixXd* value;
  Eigen::MatrixXd grad, m, v;
};

}  // namespace

NeuralNet NeuralNet::fit(const Matrix& x, const Labels& y, int n_classes, const NeuralNetParams& params,
                         std::uint64_t seed) {
  const auto n = x.rows();
  const auto d = x.cols();
  const int h = params.hidden;
  std::mt19937_64 rng(seed);

  NeuralNet net;
  net.activation = params.activation;
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = bound * u(rng);
    return m;
  };
  Eigen::MatrixXd w1 = glorot(d, h, static_cast<double>(d), h);
  Eigen::MatrixXd b1 = glorot(1, h, static_cast<double>(d), h);
  Eigen::MatrixXd w2 = glorot(h, n_classes, h, n_classes);
  Eigen::MatrixXd b2 = glorot(1, n_classes, h, n_classes);

  std::vector<Parameter> state;
  for (auto* p : {&w1, &b1, &w2, &b2}) {
    state.push_back({p, Eigen::MatrixXd::Zero(p->rows(), p->cols()), Eigen::MatrixXd::Zero(p->rows(), p->cols()),
                     Eigen::MatrixXd::Zero(p->rows(), p->cols())});
  }

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = std::min<Eigen::Index>(params.batch_size, n);
  double best_loss = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  long step = 0;
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, momentum = 0.9;

  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const auto size = std::min(batch, n - start);
      const std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + size);
      const Eigen::MatrixXd xb = x(rows, Eigen::all);
      const Eigen::MatrixXd yb = onehot(rows, Eigen::all);
      const auto bs = static_cast<double>(size);

      const Eigen::MatrixXd hidden = activate((xb * w1).rowwise() + b1.row(0), params.activation);
      const Eigen::MatrixXd probs = softmax((hidden * w2).rowwise() + b2.row(0));
      const double data_loss = -(yb.array() * probs.array().max(1e-300).log()).sum() / bs;
      const double reg_loss = 0.5 * params.l2 * (w1.squaredNorm() + w2.squaredNorm()) / bs;
      epoch_loss += (data_loss + reg_loss) * bs;

      const Eigen::MatrixXd d_logits = (probs - yb) / bs;
      state[2].grad = hidden.transpose() * d_logits + params.l2 * w2 / bs;
      state[3].grad = d_logits.colwise().sum();
      const Eigen::MatrixXd d_hidden =
          ((d_logits * w2.transpose()).array() * activation_slope(hidden, params.activation).array()).matrix();
      state[0].grad = xb.transpose() * d_hidden + params.l2 * w1 / bs;
      state[1].grad = d_hidden.colwise().sum();

      ++step;
      for (auto& p : state) {
        if (params.solver == Solver::Adam) {
          p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
          p.v = beta2 * p.v + (1.0 - beta2) * p.grad.cwiseAbs2();
          const double lr = params.learning_rate * std::sqrt(1.0 - std::pow(beta2, step)) /
                            (1.0 - std::pow(beta1, step));
          *p.value -= (lr * p.m.array() / (p.v.array().sqrt() + adam_eps)).matrix();
        } else {
          // Nesterov momentum; m holds the velocity.
          p.m = momentum * p.m - params.learning_rate * p.grad;
          *p.value += momentum * p.m - params.learning_rate * p.grad;
        }
      }
    }
    epoch_loss /= static_cast<double>(n);
    net.loss_curve.push_back(epoch_loss);
    stale_epochs = epoch_loss > best_loss - params.tol ? stale_epochs + 1 : 0;
    best_loss = std::min(best_loss, epoch_loss);
    if (stale_epochs >= params.patience) {
      net.converged = true;
      break;
    }
  }
  net.w1 = std::move(w1);
  net.b1 = b1.row(0).transpose();
  net.w2 = std::move(w2);
  net.b2 = b2.row(0).transpose();
  return net;
}

Matrix NeuralNet::predict_scores(const Matrix& x) const {
  const Eigen::MatrixXd hidden = activate((x * w1).rowwise() + b1.transpose(), activation);
  return softmax((hidden * w2).rowwise() + b2.transpose());
}

}  // namespace batauth
