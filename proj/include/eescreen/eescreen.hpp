#pragma once

#include "eescreen/boost.hpp"
#include "eescreen/data.hpp"
#include "eescreen/equations.hpp"
#include "eescreen/error.hpp"
#include "eescreen/io.hpp"
#include "eescreen/metrics.hpp"
#include "eescreen/rng.hpp"
#include "eescreen/screening.hpp"
#include "eescreen/simulate.hpp"
#include "eescreen/survival.hpp"
