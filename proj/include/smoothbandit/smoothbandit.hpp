#pragma once

#include "smoothbandit/baselines.hpp"
#include "smoothbandit/environments.hpp"
#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/harness.hpp"
#include "smoothbandit/localpoly.hpp"
#include "smoothbandit/random.hpp"
#include "smoothbandit/report.hpp"
#include "smoothbandit/run.hpp"
#include "smoothbandit/schedule.hpp"
#include "smoothbandit/smooth_bandit.hpp"
