#pragma once

#include "bctseg/brute_force.hpp"
#include "bctseg/changepoint.hpp"
#include "bctseg/context_tree.hpp"
#include "bctseg/kt.hpp"
#include "bctseg/log_math.hpp"
#include "bctseg/mcmc.hpp"
#include "bctseg/rng.hpp"
#include "bctseg/sequence.hpp"
#include "bctseg/simulator.hpp"
#include "bctseg/tree_model.hpp"
