#pragma once

// Umbrella header: the whole compliance engine and benchmark harness.

#include "fincheck/calendar.hpp"
#include "fincheck/check_compile.hpp"
#include "fincheck/check_eval.hpp"
#include "fincheck/check_ir.hpp"
#include "fincheck/cu_model.hpp"
#include "fincheck/cu_parser.hpp"
#include "fincheck/data_store.hpp"
#include "fincheck/decimal.hpp"
#include "fincheck/graph_eval.hpp"
#include "fincheck/llm_gateway.hpp"
#include "fincheck/metrics.hpp"
#include "fincheck/pipeline.hpp"
#include "fincheck/report.hpp"
#include "fincheck/sandbox.hpp"
#include "fincheck/table.hpp"
#include "fincheck/task_model.hpp"
#include "fincheck/text.hpp"
#include "fincheck/value.hpp"
