#pragma once

#include "kdisc/harness/config.hpp"
#include "kdisc/harness/pipeline.hpp"
#include "kdisc/harness/report.hpp"
