#pragma once

#include "core.hpp"
#include "tree_topology.hpp"
#include "problem.hpp"
#include "tree_bp.hpp"
#include "sinkhorn.hpp"
#include "rounding.hpp"
#include "pipeline.hpp"
#include "junction_tree.hpp"
