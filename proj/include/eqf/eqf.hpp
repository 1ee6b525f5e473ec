// Umbrella header.
#pragma once

#include "eqf/geom.hpp"
#include "eqf/models.hpp"
#include "eqf/eqf_core.hpp"
#include "eqf/eqf_stage1.hpp"
#include "eqf/eqf_stage2.hpp"
#include "eqf/cascade.hpp"
#include "eqf/harness.hpp"
#include "eqf/io.hpp"
