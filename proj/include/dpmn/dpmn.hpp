#pragma once

#include "dpmn/config.hpp"
#include "dpmn/data.hpp"
#include "dpmn/errors.hpp"
#include "dpmn/harness.hpp"
#include "dpmn/idx.hpp"
#include "dpmn/loss.hpp"
#include "dpmn/objective.hpp"
#include "dpmn/param.hpp"
#include "dpmn/protocol.hpp"
#include "dpmn/pruning.hpp"
#include "dpmn/simnet.hpp"
#include "dpmn/topology.hpp"
#include "dpmn/trace.hpp"
