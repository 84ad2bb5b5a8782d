#pragma once

#include "hybridtn/corpus.hpp"
#include "hybridtn/corpus_generator.hpp"
#include "hybridtn/eval.hpp"
#include "hybridtn/extractor.hpp"
#include "hybridtn/legality.hpp"
#include "hybridtn/neural/checkpoint.hpp"
#include "hybridtn/neural/classifier.hpp"
#include "hybridtn/neural/gradient_check.hpp"
#include "hybridtn/neural/trainer.hpp"
#include "hybridtn/pattern_reader.hpp"
#include "hybridtn/pipeline.hpp"
#include "hybridtn/rule_engine.hpp"
#include "hybridtn/taxonomy.hpp"
