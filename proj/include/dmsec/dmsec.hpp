// Umbrella header: the whole library.
#pragma once

#include "core.hpp"
#include "expr.hpp"
#include "semantics.hpp"
#include "policy.hpp"
#include "verifier.hpp"
#include "casestudies.hpp"
#include "io.hpp"
