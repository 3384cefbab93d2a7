#pragma once

#include "sagin/csv.hpp"
#include "sagin/error.hpp"
#include "sagin/netmodel.hpp"
#include "sagin/nnprofile.hpp"
#include "sagin/privmetrics.hpp"
#include "sagin/random.hpp"
#include "sagin/retrieval.hpp"
#include "sagin/rl/agents.hpp"
#include "sagin/rl/env.hpp"
#include "sagin/rl/replay.hpp"
#include "sagin/rl/tinynet.hpp"
#include "sagin/rl/trace.hpp"
#include "sagin/trico.hpp"
