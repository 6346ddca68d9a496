#pragma once

#include "nlvr/scene.hpp"
#include "nlvr/grammar.hpp"
#include "nlvr/program.hpp"
#include "nlvr/executor.hpp"
#include "nlvr/reference_executor.hpp"
#include "nlvr/search.hpp"
#include "nlvr/model.hpp"
#include "nlvr/beam.hpp"
#include "nlvr/consistency.hpp"
#include "nlvr/pairing.hpp"
#include "nlvr/generator.hpp"
#include "nlvr/training.hpp"
#include "nlvr/eval.hpp"
#include "nlvr/util.hpp"
