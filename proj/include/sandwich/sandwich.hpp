#ifndef SANDWICH_SANDWICH_HPP
#define SANDWICH_SANDWICH_HPP

#include "sandwich/error.hpp"
#include "sandwich/prob_core.hpp"
#include "sandwich/subspace.hpp"
#include "sandwich/lp.hpp"
#include "sandwich/support.hpp"
#include "sandwich/operators.hpp"
#include "sandwich/extension.hpp"
#include "sandwich/dynamic.hpp"

#endif  // SANDWICH_SANDWICH_HPP
