#pragma once

#include "versabo/acquisition.hpp"
#include "versabo/bench.hpp"
#include "versabo/core.hpp"
#include "versabo/ensemble.hpp"
#include "versabo/gp.hpp"
#include "versabo/mcmc.hpp"
#include "versabo/mf_optimizer.hpp"
#include "versabo/models/registry.hpp"
#include "versabo/probo.hpp"
#include "versabo/systems.hpp"
