#pragma once

#include "csalign/error.hpp"
#include "csalign/pmf.hpp"
#include "csalign/divergence.hpp"
#include "csalign/losses.hpp"
#include "csalign/gradient.hpp"
#include "csalign/retrieval.hpp"
#include "csalign/synth.hpp"
#include "csalign/properties.hpp"
#include "csalign/bench.hpp"
#include "csalign/io.hpp"
#include "csalign/config.hpp"
