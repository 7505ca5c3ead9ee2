#pragma once

#include "cwss/types.hpp"
#include "cwss/model.hpp"
#include "cwss/sampling.hpp"
#include "cwss/correlate.hpp"
#include "cwss/tvops.hpp"
#include "cwss/solve.hpp"
#include "cwss/detect.hpp"
#include "cwss/io.hpp"
#include "cwss/experiment.hpp"
