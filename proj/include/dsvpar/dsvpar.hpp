#pragma once

#include "dsvpar/chunk_parse.hpp"
#include "dsvpar/columnar.hpp"
#include "dsvpar/container.hpp"
#include "dsvpar/dfa.hpp"
#include "dsvpar/dfa_json.hpp"
#include "dsvpar/encoding.hpp"
#include "dsvpar/error.hpp"
#include "dsvpar/generator.hpp"
#include "dsvpar/offsets.hpp"
#include "dsvpar/packed_array.hpp"
#include "dsvpar/pipeline.hpp"
#include "dsvpar/reference.hpp"
#include "dsvpar/scan.hpp"
#include "dsvpar/streaming.hpp"
#include "dsvpar/swar.hpp"
#include "dsvpar/typeconv.hpp"
#include "dsvpar/worker_pool.hpp"
