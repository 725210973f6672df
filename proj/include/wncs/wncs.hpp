#pragma once

#include "wncs/agent.hpp"
#include "wncs/channel.hpp"
#include "wncs/config.hpp"
#include "wncs/env.hpp"
#include "wncs/errors.hpp"
#include "wncs/fbl.hpp"
#include "wncs/metrics.hpp"
#include "wncs/nn.hpp"
#include "wncs/optimality.hpp"
#include "wncs/rng.hpp"
#include "wncs/runner.hpp"
#include "wncs/safety.hpp"
#include "wncs/scenario.hpp"
