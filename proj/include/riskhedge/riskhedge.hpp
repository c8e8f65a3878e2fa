#pragma once

#include "arbitrage.hpp"
#include "duality.hpp"
#include "errors.hpp"
#include "lp.hpp"
#include "model_io.hpp"
#include "parallel.hpp"
#include "pricing.hpp"
#include "report.hpp"
#include "risk.hpp"
#include "scalar.hpp"
#include "tree.hpp"
