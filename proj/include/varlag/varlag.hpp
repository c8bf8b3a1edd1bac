#pragma once

// Umbrella header.

#include "varlag/builtin_models.hpp"
#include "varlag/derivatives.hpp"
#include "varlag/dual.hpp"
#include "varlag/integrate.hpp"
#include "varlag/linalg.hpp"
#include "varlag/lyapunov.hpp"
#include "varlag/model.hpp"
#include "varlag/observables.hpp"
#include "varlag/prolongation.hpp"
#include "varlag/random.hpp"
#include "varlag/state.hpp"
