#pragma once

#include "coverage/aggregation.hpp"
#include "coverage/answer_source.hpp"
#include "coverage/classifier.hpp"
#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/harness.hpp"
#include "coverage/io.hpp"
#include "coverage/lattice.hpp"
#include "coverage/query.hpp"
#include "coverage/schema.hpp"
#include "coverage/service.hpp"
#include "coverage/verdict.hpp"
