#ifndef REPROBANDIT_REPROBANDIT_HPP
#define REPROBANDIT_REPROBANDIT_HPP

#include "reprobandit/errors.hpp"
#include "reprobandit/shared_randomness.hpp"
#include "reprobandit/environments.hpp"
#include "reprobandit/repro_sq.hpp"
#include "reprobandit/trace.hpp"
#include "reprobandit/mab_policies.hpp"
#include "reprobandit/optimal_design.hpp"
#include "reprobandit/linear_policies.hpp"
#include "reprobandit/harness.hpp"

#endif
