#pragma once

#include "weakflow/core.hpp"
#include "weakflow/space.hpp"
#include "weakflow/geometry.hpp"
#include "weakflow/model_space.hpp"
#include "weakflow/sampled_space.hpp"
#include "weakflow/averaging.hpp"
#include "weakflow/propagators.hpp"
#include "weakflow/transport.hpp"
#include "weakflow/verify.hpp"
#include "weakflow/fields.hpp"
#include "weakflow/catalogue.hpp"
#include "weakflow/scenario.hpp"
