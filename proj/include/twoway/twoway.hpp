#pragma once

#include "twoway/core_model.hpp"
#include "twoway/errors.hpp"
#include "twoway/estimators.hpp"
#include "twoway/full_likelihood.hpp"
#include "twoway/hmm.hpp"
#include "twoway/io.hpp"
#include "twoway/model_selection.hpp"
#include "twoway/predict.hpp"
#include "twoway/row_composite.hpp"
#include "twoway/rowcol_composite.hpp"
#include "twoway/simulation.hpp"
#include "twoway/transition_mstep.hpp"
#include "twoway/types.hpp"
