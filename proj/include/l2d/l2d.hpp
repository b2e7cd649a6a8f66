#pragma once

#include "l2d/error.hpp"
#include "l2d/divergence.hpp"
#include "l2d/retrieval.hpp"
#include "l2d/distribution_store.hpp"
#include "l2d/rerank.hpp"
#include "l2d/corpus.hpp"
#include "l2d/providers.hpp"
#include "l2d/remote.hpp"
#include "l2d/prompt.hpp"
#include "l2d/completion.hpp"
#include "l2d/stats.hpp"
#include "l2d/synthetic.hpp"
#include "l2d/harness.hpp"
