#pragma once

#include "kdisc/models/boosting.hpp"
#include "kdisc/models/classifier.hpp"
#include "kdisc/models/ensemble.hpp"
#include "kdisc/models/hyperparams.hpp"
#include "kdisc/models/logistic.hpp"
#include "kdisc/models/mlp.hpp"
#include "kdisc/models/tree.hpp"
