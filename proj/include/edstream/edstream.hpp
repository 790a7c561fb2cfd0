#pragma once

// Umbrella header: streaming k-edit approximate pattern matching.
//
// After every text symbol the matcher reports the minimum edit distance
// between the pattern and any suffix of the text seen so far, whenever that
// distance is at most k; otherwise it reports "over k". Working state per
// copy stays bounded in terms of k and log of the configured length bound,
// never in the stream length.

#include "edstream/errors.hpp"
#include "edstream/hashing.hpp"
#include "edstream/edit_distance.hpp"
#include "edstream/grammar.hpp"
#include "edstream/decompose.hpp"
#include "edstream/active_tail.hpp"
#include "edstream/encoding.hpp"
#include "edstream/mismatch_engine.hpp"
#include "edstream/matcher.hpp"
#include "edstream/oracle.hpp"
