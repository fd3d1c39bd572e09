#pragma once

#include "streetrisk/change.hpp"
#include "streetrisk/config.hpp"
#include "streetrisk/error.hpp"
#include "streetrisk/geo.hpp"
#include "streetrisk/hazard.hpp"
#include "streetrisk/ingest.hpp"
#include "streetrisk/network.hpp"
#include "streetrisk/risk.hpp"
#include "streetrisk/stats.hpp"
#include "streetrisk/synth.hpp"
