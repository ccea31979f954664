#ifndef SLOWBOND_SLOWBOND_HPP
#define SLOWBOND_SLOWBOND_HPP

#include "slowbond/bessel.hpp"
#include "slowbond/blocks.hpp"
#include "slowbond/comparison.hpp"
#include "slowbond/field.hpp"
#include "slowbond/gartner.hpp"
#include "slowbond/harness.hpp"
#include "slowbond/heat_kernel.hpp"
#include "slowbond/io.hpp"
#include "slowbond/model.hpp"
#include "slowbond/rng.hpp"
#include "slowbond/simulator.hpp"
#include "slowbond/stats.hpp"
#include "slowbond/suites.hpp"

#endif
