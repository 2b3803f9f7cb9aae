#pragma once

#include "carh/errors.hpp"
#include "carh/function_space.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/model_selection.hpp"
#include "carh/operator_algebra.hpp"
#include "carh/predictor_config.hpp"
#include "carh/simulation.hpp"
