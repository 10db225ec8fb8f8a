#pragma once

#include "series.hpp"
#include "features.hpp"
#include "cusum.hpp"
#include "longrun.hpp"
#include "psd.hpp"
#include "quantiles.hpp"
#include "estimator.hpp"
#include "harness.hpp"
