#ifndef HYPERNB_HYPERNB_HPP
#define HYPERNB_HYPERNB_HPP

#include "arnoldi.hpp"
#include "cluster.hpp"
#include "error.hpp"
#include "hypergraph.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "spectral.hpp"
#include "treecheck.hpp"
#include "weights.hpp"

#endif
