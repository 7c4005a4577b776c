#pragma once

#include "nnc/channel.hpp"
#include "nnc/dataset_io.hpp"
#include "nnc/decoder.hpp"
#include "nnc/dtw.hpp"
#include "nnc/errors.hpp"
#include "nnc/log_sum_exp.hpp"
#include "nnc/oracle.hpp"
#include "nnc/parallel.hpp"
#include "nnc/pore_model.hpp"
#include "nnc/random.hpp"
#include "nnc/rates.hpp"
#include "nnc/version.hpp"
