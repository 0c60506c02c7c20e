#ifndef DROIDGEN_DROIDGEN_HPP
#define DROIDGEN_DROIDGEN_HPP

#include "droidgen/encode.hpp"
#include "droidgen/evalkit.hpp"
#include "droidgen/ingest.hpp"
#include "droidgen/model.hpp"
#include "droidgen/policy.hpp"
#include "droidgen/rng.hpp"
#include "droidgen/solver.hpp"

#endif // DROIDGEN_DROIDGEN_HPP
