// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "etrap/analysis.hpp"
#include "etrap/config.hpp"
#include "etrap/dynamics.hpp"
#include "etrap/error.hpp"
#include "etrap/fit.hpp"
#include "etrap/mathieu.hpp"
#include "etrap/model.hpp"
#include "etrap/stats.hpp"
#include "etrap/units.hpp"
#include "etrap/version.hpp"
