#pragma once

#include "horq/binary_gemm.hpp"
#include "horq/binary_plane.hpp"
#include "horq/conv.hpp"
#include "horq/errors.hpp"
#include "horq/perf_model.hpp"
#include "horq/quantize.hpp"
#include "horq/tensor.hpp"
#include "horq/train.hpp"
