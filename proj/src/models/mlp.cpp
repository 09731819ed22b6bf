#include "kdisc/models/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"

namespace kdisc::models {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

double bce_with_logit(double z, double y) {
  // log(1 + e^z) - y z, stable for either sign of z
  const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - y * z;
}

MatrixXd elu(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return v > 0 ? v : std::expm1(v); });
}

MatrixXd elu_grad(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); });
}

void uniform_fill(double* data, std::size_t n, double bound, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

std::vector<double> flat(const Eigen::Ref<const MatrixXd>& m) {
  return {m.data(), m.data() + m.size()};
}

}  // namespace

Eigen::MatrixXd to_eigen(const Matrix& X) {
  MatrixXd out(static_cast<Eigen::Index>(X.rows()), static_cast<Eigen::Index>(X.cols()));
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = X(r, c);
  return out;
}

MlpNet::MlpNet(std::size_t n_in, int n_layer, int hidden, bool batchnorm, double dropout, Rng& init)
    : batchnorm_(batchnorm), dropout_(dropout) {
  auto fan_in = static_cast<Eigen::Index>(n_in);
  const auto h = static_cast<Eigen::Index>(hidden);
  for (int l = 0; l < n_layer; ++l) {
    Layer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.W.resize(fan_in, h);
    layer.b.resize(h);
    uniform_fill(layer.W.data(), static_cast<std::size_t>(layer.W.size()), bound, init);
    uniform_fill(layer.b.data(), static_cast<std::size_t>(h), bound, init);
    if (batchnorm) {
      layer.gamma = RowVectorXd::Ones(h);
      layer.beta = RowVectorXd::Zero(h);
      layer.run_mean = RowVectorXd::Zero(h);
      layer.run_var = RowVectorXd::Ones(h);
    }
    hidden_.push_back(std::move(layer));
    fan_in = h;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  w_out_.resize(fan_in);
  uniform_fill(w_out_.data(), static_cast<std::size_t>(fan_in), bound, init);
  b_out_ = init.uniform(-bound, bound);
}

std::size_t MlpNet::n_params() const {
  std::size_t n = static_cast<std::size_t>(w_out_.size()) + 1;
  for (const auto& l : hidden_) {
    n += static_cast<std::size_t>(l.W.size() + l.b.size());
    if (batchnorm_) n += static_cast<std::size_t>(l.gamma.size() + l.beta.size());
  }
  return n;
}

std::vector<double> MlpNet::params() const {
  std::vector<double> out;
  out.reserve(n_params());
  auto put = [&](const double* d, Eigen::Index n) { out.insert(out.end(), d, d + n); };
  for (const auto& l : hidden_) {
    put(l.W.data(), l.W.size());
    put(l.b.data(), l.b.size());
    if (batchnorm_) {
      put(l.gamma.data(), l.gamma.size());
      put(l.beta.data(), l.beta.size());
    }
  }
  put(w_out_.data(), w_out_.size());
  out.push_back(b_out_);
  return out;
}

void MlpNet::set_params(std::span<const double> p) {
  if (p.size() != n_params()) throw FitError("parameter vector has the wrong length");
  std::size_t k = 0;
  auto take = [&](double* d, Eigen::Index n) {
    std::copy(p.begin() + static_cast<std::ptrdiff_t>(k), p.begin() + static_cast<std::ptrdiff_t>(k + static_cast<std::size_t>(n)), d);
    k += static_cast<std::size_t>(n);
  };
  for (auto& l : hidden_) {
    take(l.W.data(), l.W.size());
    take(l.b.data(), l.b.size());
    if (batchnorm_) {
      take(l.gamma.data(), l.gamma.size());
      take(l.beta.data(), l.beta.size());
    }
  }
  take(w_out_.data(), w_out_.size());
  b_out_ = p[k];
}

void MlpNet::zero_output_layer() {
  w_out_.setZero();
  b_out_ = 0.0;
}

double MlpNet::loss(const MatrixXd& X, const VectorXd& y, const VectorXd& w, bool training,
                    Rng* dropout_rng, std::vector<double>* grad, bool update_running) {
  const auto n = X.rows();
  const double nd = static_cast<double>(n);
  struct Cache {
    MatrixXd in, ahat, z, mask;
    RowVectorXd inv_std;
  };
  std::vector<Cache> cache(hidden_.size());
  MatrixXd H = X;
  for (std::size_t li = 0; li < hidden_.size(); ++li) {
    auto& l = hidden_[li];
    auto& c = cache[li];
    c.in = H;
    MatrixXd A = H * l.W;
    A.rowwise() += l.b;
    if (batchnorm_) {
      RowVectorXd mean, var;
      if (training) {
        mean = A.colwise().mean();
        var = (A.rowwise() - mean).array().square().colwise().mean();
        if (update_running) {
          const double unbias = n > 1 ? nd / (nd - 1.0) : 1.0;
          l.run_mean = (1 - kBatchNormMomentum) * l.run_mean + kBatchNormMomentum * mean;
          l.run_var = (1 - kBatchNormMomentum) * l.run_var + kBatchNormMomentum * unbias * var;
        }
      } else {
        mean = l.run_mean;
        var = l.run_var;
      }
      c.inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
      c.ahat = (A.rowwise() - mean).array().rowwise() * c.inv_std.array();
      c.z = (c.ahat.array().rowwise() * l.gamma.array()).rowwise() + l.beta.array();
    } else {
      c.z = std::move(A);
    }
    H = elu(c.z);
    if (training && dropout_rng && dropout_ > 0.0) {
      c.mask.resize(H.rows(), H.cols());
      const double keep = 1.0 - dropout_;
      for (Eigen::Index j = 0; j < c.mask.cols(); ++j)
        for (Eigen::Index i = 0; i < c.mask.rows(); ++i)
          c.mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      H = H.cwiseProduct(c.mask);
    }
  }
  VectorXd z = H * w_out_;
  z.array() += b_out_;

  const double wsum = w.sum();
  double total = 0.0;
  VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    total += w(i) * bce_with_logit(z(i), y(i));
    dz(i) = w(i) * (sigmoid(z(i)) - y(i)) / wsum;
  }
  if (!grad) return total / wsum;

  // Backward pass; gradients are collected per block then flattened.
  std::vector<std::vector<double>> blocks;
  const VectorXd g_out = H.transpose() * dz;
  const double g_bout = dz.sum();
  MatrixXd dH = dz * w_out_.transpose();
  for (std::size_t li = hidden_.size(); li-- > 0;) {
    auto& l = hidden_[li];
    auto& c = cache[li];
    if (c.mask.size() > 0) dH = dH.cwiseProduct(c.mask);
    MatrixXd dZ = dH.cwiseProduct(elu_grad(c.z));
    MatrixXd dA;
    std::vector<std::vector<double>> layer_blocks;
    if (batchnorm_) {
      const RowVectorXd dgamma = dZ.cwiseProduct(c.ahat).colwise().sum();
      const RowVectorXd dbeta = dZ.colwise().sum();
      const MatrixXd dAhat = dZ.array().rowwise() * l.gamma.array();
      if (training) {
        const RowVectorXd s1 = dAhat.colwise().sum();
        const RowVectorXd s2 = dAhat.cwiseProduct(c.ahat).colwise().sum();
        MatrixXd t = (nd * dAhat).rowwise() - s1;
        t -= (c.ahat.array().rowwise() * s2.array()).matrix();
        dA = (t.array().rowwise() * (c.inv_std.array() / nd)).matrix();
      } else {
        dA = dAhat.array().rowwise() * c.inv_std.array();
      }
      layer_blocks.push_back(flat(c.in.transpose() * dA));
      layer_blocks.push_back(flat(dA.colwise().sum()));
      layer_blocks.push_back(flat(dgamma));
      layer_blocks.push_back(flat(dbeta));
    } else {
      dA = std::move(dZ);
      layer_blocks.push_back(flat(c.in.transpose() * dA));
      layer_blocks.push_back(flat(dA.colwise().sum()));
    }
    for (auto it = layer_blocks.rbegin(); it != layer_blocks.rend(); ++it) blocks.push_back(std::move(*it));
    if (li > 0) dH = dA * l.W.transpose();
  }
  grad->clear();
  grad->reserve(n_params());
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) grad->insert(grad->end(), it->begin(), it->end());
  grad->insert(grad->end(), g_out.data(), g_out.data() + g_out.size());
  grad->push_back(g_bout);
  return total / wsum;
}

VectorXd MlpNet::logits(const MatrixXd& X) const {
  MatrixXd H = X;
  for (const auto& l : hidden_) {
    MatrixXd A = H * l.W;
    A.rowwise() += l.b;
    if (batchnorm_) {
      const RowVectorXd inv_std = (l.run_var.array() + kBatchNormEps).rsqrt().matrix();
      A = ((A.rowwise() - l.run_mean).array().rowwise() * (inv_std.array() * l.gamma.array()))
              .rowwise() +
          l.beta.array();
    }
    H = elu(A);
  }
  VectorXd z = H * w_out_;
  z.array() += b_out_;
  return z;
}

json MlpNet::to_json() const {
  json layers = json::array();
  for (const auto& l : hidden_) {
    json lj = {{"rows", l.W.rows()}, {"cols", l.W.cols()}, {"W", flat(l.W)}, {"b", flat(l.b)}};
    if (batchnorm_) {
      lj["gamma"] = flat(l.gamma);
      lj["beta"] = flat(l.beta);
      lj["run_mean"] = flat(l.run_mean);
      lj["run_var"] = flat(l.run_var);
    }
    layers.push_back(std::move(lj));
  }
  return {{"batchnorm", batchnorm_}, {"dropout", dropout_}, {"layers", layers},
          {"w_out", flat(w_out_)},   {"b_out", b_out_}};
}

MlpNet MlpNet::from_json(const json& j) {
  MlpNet net;
  net.batchnorm_ = j.at("batchnorm").get<bool>();
  net.dropout_ = j.at("dropout").get<double>();
  auto row = [](const json& v) {
    const auto d = v.get<std::vector<double>>();
    return RowVectorXd(Eigen::Map<const RowVectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  };
  for (const auto& lj : j.at("layers")) {
    Layer l;
    const auto rows = lj.at("rows").get<Eigen::Index>(), cols = lj.at("cols").get<Eigen::Index>();
    const auto W = lj.at("W").get<std::vector<double>>();
    l.W = Eigen::Map<const MatrixXd>(W.data(), rows, cols);
    l.b = row(lj.at("b"));
    if (net.batchnorm_) {
      l.gamma = row(lj.at("gamma"));
      l.beta = row(lj.at("beta"));
      l.run_mean = row(lj.at("run_mean"));
      l.run_var = row(lj.at("run_var"));
    }
    net.hidden_.push_back(std::move(l));
  }
  net.w_out_ = row(j.at("w_out")).transpose();
  net.b_out_ = j.at("b_out").get<double>();
  return net;
}

Mlp::Mlp(HyperParams hp, std::uint64_t seed) : Classifier(std::move(hp), seed) {
  if (hp_int(hp_, "n_layer", 2) < 1) throw ConfigError("n_layer must be at least 1");
  if (hp_int(hp_, "hidden_dim", 64) < 1) throw ConfigError("hidden_dim must be at least 1");
  const double dropout = hp_number(hp_, "dropout", 0.0);
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(hp_number(hp_, "init_lr", 1e-3) > 0.0)) throw ConfigError("init_lr must be positive");
  if (hp_number(hp_, "weight_decay", 0.0) < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (hp_int(hp_, "batch_size", 128) < 2) throw ConfigError("batch_size must be at least 2");
  if (hp_int(hp_, "max_epochs", 500) < 1 || hp_int(hp_, "patience", 20) < 1)
    throw ConfigError("max_epochs and patience must be at least 1");
  const auto act = hp_string(hp_, "activation", "elu");
  if (act != "elu" && act != "ELU") throw ConfigError("only the ELU activation is supported");
}

void Mlp::fit(const TrainSet& d) {
  if (!d.X || !d.y || d.X->rows() < 2 || d.X->rows() != d.y->size())
    throw ConfigError("training data is too small or labels do not match rows");
  if (!d.X_val || !d.y_val || d.X_val->rows() == 0)
    throw ConfigError("the MLP needs a validation set for early stopping");
  const auto n = static_cast<Eigen::Index>(d.X->rows());
  const MatrixXd X = to_eigen(*d.X);
  const MatrixXd Xv = to_eigen(*d.X_val);
  VectorXd y(n), yv(static_cast<Eigen::Index>(d.y_val->size()));
  for (Eigen::Index i = 0; i < n; ++i) y(i) = (*d.y)[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i < yv.size(); ++i) yv(i) = (*d.y_val)[static_cast<std::size_t>(i)];

  VectorXd w = VectorXd::Ones(n);
  if (hp_int(hp_, "class_weights", 0) != 0) {
    const double pos = y.sum(), neg = static_cast<double>(n) - pos;
    if (pos > 0 && neg > 0)
      for (Eigen::Index i = 0; i < n; ++i)
        w(i) = static_cast<double>(n) / (2.0 * (y(i) > 0.5 ? pos : neg));
  }
  const VectorXd wv = VectorXd::Ones(yv.size());

  const bool bn = hp_int(hp_, "batchnorm", 0) != 0;
  Rng init(seed_, 0x1417);
  net_ = MlpNet(d.X->cols(), static_cast<int>(hp_int(hp_, "n_layer", 2)),
                static_cast<int>(hp_int(hp_, "hidden_dim", 64)), bn, hp_number(hp_, "dropout", 0.0),
                init);

  const double lr = hp_number(hp_, "init_lr", 1e-3);
  const double wd = hp_number(hp_, "weight_decay", 0.0);
  const auto batch = static_cast<Eigen::Index>(hp_int(hp_, "batch_size", 128));
  const int max_epochs = static_cast<int>(hp_int(hp_, "max_epochs", 500));
  const int patience = static_cast<int>(hp_int(hp_, "patience", 20));
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::vector<double> theta = net_.params(), m(theta.size(), 0.0), v(theta.size(), 0.0), grad;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  MlpNet best = net_;
  double best_loss = net_.loss(Xv, yv, wv, false, nullptr, nullptr);
  best_epoch_ = 0;
  long long step = 0;
  int since_best = 0;
  epochs_ = 0;
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    Rng order_rng(seed_, 0xe90c, static_cast<std::uint64_t>(epoch));
    order_rng.shuffle(std::span<Eigen::Index>(order));
    Eigen::Index start = 0;
    std::uint64_t b_idx = 0;
    while (start < n) {
      Eigen::Index end = std::min(n, start + batch);
      if (n - end == 1) end = n;  // never leave a single-row batch behind
      const Eigen::Index size = end - start;
      MatrixXd Xb(size, X.cols());
      VectorXd yb(size), wb(size);
      for (Eigen::Index i = 0; i < size; ++i) {
        const Eigen::Index r = order[static_cast<std::size_t>(start + i)];
        Xb.row(i) = X.row(r);
        yb(i) = y(r);
        wb(i) = w(r);
      }
      Rng drop(seed_, 0xd709, (static_cast<std::uint64_t>(epoch) << 24) + b_idx);
      net_.set_params(theta);
      net_.loss(Xb, yb, wb, true, &drop, &grad, true);
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] -= lr * wd * theta[k];
        m[k] = beta1 * m[k] + (1 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1 - beta2) * grad[k] * grad[k];
        theta[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
      }
      start = end;
      ++b_idx;
    }
    net_.set_params(theta);
    epochs_ = epoch;
    const double val = net_.loss(Xv, yv, wv, false, nullptr, nullptr);
    if (!std::isfinite(val)) break;
    if (val < best_loss) {
      best_loss = val;
      best = net_;
      best_epoch_ = epoch;
      since_best = 0;
    } else if (++since_best >= patience) {
      break;
    }
  }
  net_ = std::move(best);
}

double Mlp::raw_score_one(std::span<const double> x) const {
  MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  return net_.logits(row)(0);
}

std::vector<double> Mlp::raw_scores(const Matrix& X) const {
  const VectorXd z = net_.logits(to_eigen(X));
  return {z.data(), z.data() + z.size()};
}

std::vector<double> Mlp::predict_proba(const Matrix& X) const {
  auto out = raw_scores(X);
  for (double& v : out) v = sigmoid(v);
  return out;
}

json Mlp::state_json() const {
  return {{"net", net_.to_json()}, {"epochs", epochs_}, {"best_epoch", best_epoch_}};
}

void Mlp::load_state(const json& j) {
  net_ = MlpNet::from_json(j.at("net"));
  epochs_ = j.at("epochs").get<int>();
  best_epoch_ = j.at("best_epoch").get<int>();
}

}  // namespace kdisc::models
