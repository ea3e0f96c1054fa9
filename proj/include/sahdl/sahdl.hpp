#pragma once

#include <sahdl/core.hpp>
#include <sahdl/dictlearn.hpp>
#include <sahdl/harness/experiment.hpp>
#include <sahdl/harness/io.hpp>
#include <sahdl/harness/synthetic.hpp>
#include <sahdl/hypergraph.hpp>
#include <sahdl/sparse_attention.hpp>
