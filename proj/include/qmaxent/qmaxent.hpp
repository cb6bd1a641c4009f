#pragma once

#include "qmaxent/channels.hpp"
#include "qmaxent/entropy.hpp"
#include "qmaxent/error.hpp"
#include "qmaxent/linalg.hpp"
#include "qmaxent/maxent.hpp"
#include "qmaxent/random.hpp"
#include "qmaxent/report.hpp"
#include "qmaxent/scenarios.hpp"
