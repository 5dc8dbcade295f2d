#pragma once

#include "paramine/access.hpp"
#include "paramine/corpus.hpp"
#include "paramine/embed.hpp"
#include "paramine/error.hpp"
#include "paramine/eval.hpp"
#include "paramine/index.hpp"
#include "paramine/levenshtein.hpp"
#include "paramine/lm.hpp"
#include "paramine/manifest.hpp"
#include "paramine/mine.hpp"
#include "paramine/tune.hpp"
