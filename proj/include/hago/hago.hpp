#pragma once

// Multi-domain graph recommendation toolkit: heterogeneous adaptive graph
// coordinators fuse several user-item interaction graphs into one weighted
// graph, node embeddings pre-train contrastively over it, and additive graph
// prompts transfer them to a sparse target domain under pairwise ranking.

#include "hago/analysis.hpp"
#include "hago/checkpoint.hpp"
#include "hago/config.hpp"
#include "hago/coordinators.hpp"
#include "hago/dataset.hpp"
#include "hago/dataset_io.hpp"
#include "hago/errors.hpp"
#include "hago/evaluate.hpp"
#include "hago/losses.hpp"
#include "hago/matrix.hpp"
#include "hago/pipeline.hpp"
#include "hago/pretrain.hpp"
#include "hago/propagation.hpp"
#include "hago/rng.hpp"
#include "hago/store.hpp"
#include "hago/synth.hpp"
#include "hago/transfer.hpp"
#include "hago/unified_graph.hpp"
