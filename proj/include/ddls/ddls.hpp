#pragma once

#include "ddls/codec.hpp"
#include "ddls/config.hpp"
#include "ddls/core.hpp"
#include "ddls/csv.hpp"
#include "ddls/errors.hpp"
#include "ddls/feedback.hpp"
#include "ddls/lp.hpp"
#include "ddls/market.hpp"
#include "ddls/queues.hpp"
#include "ddls/scheduler.hpp"
#include "ddls/simkit.hpp"
