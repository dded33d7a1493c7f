#ifndef QNOISE_QNOISE_HPP
#define QNOISE_QNOISE_HPP

#include "qnoise/linalg.hpp"
#include "qnoise/random.hpp"
#include "qnoise/problems.hpp"
#include "qnoise/noise.hpp"
#include "qnoise/linesearch.hpp"
#include "qnoise/solver.hpp"
#include "qnoise/bench.hpp"

#endif  // QNOISE_QNOISE_HPP
