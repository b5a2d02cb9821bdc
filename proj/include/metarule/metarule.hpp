#pragma once

#include "metarule/errors.hpp"
#include "metarule/random.hpp"
#include "metarule/token.hpp"
#include "metarule/expression.hpp"
#include "metarule/types.hpp"
#include "metarule/evaluate.hpp"
#include "metarule/problems.hpp"
#include "metarule/population.hpp"
#include "metarule/policy.hpp"
#include "metarule/gradient.hpp"
#include "metarule/optimizer.hpp"
#include "metarule/checkpoint.hpp"
#include "metarule/teachers.hpp"
#include "metarule/rewards.hpp"
#include "metarule/episode.hpp"
#include "metarule/config.hpp"
#include "metarule/trainer.hpp"
#include "metarule/evaluation.hpp"
