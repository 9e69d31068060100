#pragma once

#include <halm/analysis.hpp>
#include <halm/client.hpp>
#include <halm/corpus.hpp>
#include <halm/errors.hpp>
#include <halm/evaluator.hpp>
#include <halm/inference.hpp>
#include <halm/labeler.hpp>
#include <halm/mock_service.hpp>
#include <halm/pipeline.hpp>
#include <halm/ppl_baseline.hpp>
