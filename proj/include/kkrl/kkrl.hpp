#pragma once

#include "kkrl/corpus.hpp"
#include "kkrl/error.hpp"
#include "kkrl/genpuzzle.hpp"
#include "kkrl/grpo.hpp"
#include "kkrl/logic.hpp"
#include "kkrl/logic_io.hpp"
#include "kkrl/prompts.hpp"
#include "kkrl/report.hpp"
#include "kkrl/reward.hpp"
#include "kkrl/toytrain.hpp"
