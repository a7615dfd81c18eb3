#pragma once

#include "qgraph/error.hpp"
#include "qgraph/linalg.hpp"
#include "qgraph/graph_model.hpp"
#include "qgraph/scattering.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/trace_space.hpp"
#include "qgraph/experiments.hpp"
