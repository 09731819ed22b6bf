#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kdisc/core/rng.hpp"
#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

/// Fully connected ELU network with one logit output.
///
/// Hidden layer: affine -> [batch norm] -> ELU -> [dropout]. Parameters are
/// exposed as one flat vector (per layer: W column-major, b, then gamma and
/// beta when batch norm is on; the output layer last) so the optimizer and
/// the finite-difference check can treat them uniformly.
class MlpNet {
 public:
  struct Layer {
    Eigen::MatrixXd W;  ///< fan_in x fan_out
    Eigen::RowVectorXd b;
    Eigen::RowVectorXd gamma, beta;
    Eigen::RowVectorXd run_mean, run_var;
  };

  MlpNet() = default;
  MlpNet(std::size_t n_in, int n_layer, int hidden, bool batchnorm, double dropout, Rng& init);

  std::size_t n_params() const;
  std::vector<double> params() const;
  void set_params(std::span<const double> flat);

  /// Mean weighted cross-entropy of the batch. In training mode batch norm
  /// uses batch statistics (and updates the running ones when
  /// `update_running`), and dropout masks are drawn from `dropout_rng` when
  /// it is non-null. When `grad` is non-null it receives dLoss/dparams in
  /// the flat layout.
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              bool training, Rng* dropout_rng, std::vector<double>* grad,
              bool update_running = false);

  /// Logits in evaluation mode (running statistics, no dropout).
  Eigen::VectorXd logits(const Eigen::MatrixXd& X) const;

  void zero_output_layer();
  bool batchnorm() const { return batchnorm_; }

  nlohmann::json to_json() const;
  static MlpNet from_json(const nlohmann::json& j);

 private:
  std::vector<Layer> hidden_;
  Eigen::VectorXd w_out_;
  double b_out_ = 0.0;
  bool batchnorm_ = false;
  double dropout_ = 0.0;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// MLP classifier trained with AdamW on mini-batches and early stopping on
/// the validation loss. Hyperparameters: n_layer, hidden_dim, dropout,
/// batchnorm, activation ("elu"), init_lr, weight_decay, class_weights
/// (0 = unweighted, 1 = balanced), batch_size (128), max_epochs (500),
/// patience (20).
class Mlp final : public Classifier {
 public:
  Mlp(HyperParams hp, std::uint64_t seed);
  Family family() const override { return Family::Mlp; }
  void fit(const TrainSet& data) override;
  double predict_one(std::span<const double> x) const override { return sigmoid(raw_score_one(x)); }
  double raw_score_one(std::span<const double> x) const override;
  std::vector<double> predict_proba(const Matrix& X) const override;
  std::vector<double> raw_scores(const Matrix& X) const override;

  const MlpNet& net() const { return net_; }
  int epochs_run() const { return epochs_; }
  int best_epoch() const { return best_epoch_; }

 protected:
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  MlpNet net_;
  int epochs_ = 0;
  int best_epoch_ = 0;
};

Eigen::MatrixXd to_eigen(const Matrix& X);

}  // namespace kdisc::models
