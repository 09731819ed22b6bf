#pragma once

#include <string>
#include <vector>

#include "kdisc/core/rng.hpp"
#include "kdisc/models/classifier.hpp"

namespace kdisc::models {

struct ParamDomain {
  enum class Kind { Int, Float, Categorical };

  std::string name;
  Kind kind = Kind::Float;
  double lo = 0.0;
  double hi = 0.0;
  bool log = false;   ///< Float only: sample uniformly in log space
  double step = 0.0;  ///< Int: grid step (0 = 1); Float: quantization (0 = none)
  std::vector<nlohmann::json> choices;  ///< Categorical only

  bool contains(const nlohmann::json& v) const;
  nlohmann::json sample(Rng& rng) const;
  /// Snaps a raw number into the domain (rounding to the int grid, clamping).
  nlohmann::json snap(double v) const;
};

/// Search space of one family. `fixed` entries are merged into every point.
struct HyperParamSpace {
  Family family = Family::LogisticRegression;
  std::vector<ParamDomain> params;
  HyperParams fixed = nlohmann::json::object();

  HyperParams sample(Rng& rng) const;
  bool contains(const HyperParams& hp) const;

  nlohmann::json to_json() const;
  static HyperParamSpace from_json(const nlohmann::json& j);
};

/// Reference search ranges (min/max of the reference trial
/// summaries; see the README for the MLP reading).
HyperParamSpace paper_space(Family f);

/// Smaller ranges sized for a desk run on a laptop: fewer trees, boosting
/// rounds and hidden units, and a capped epoch budget for the MLP.
HyperParamSpace desk_space(Family f);

/// Reference selected configuration per family. The random forest uses
/// the decision-tree table values plus n_estimators = 446.
HyperParams paper_best_config(Family f);

}  // namespace kdisc::models
