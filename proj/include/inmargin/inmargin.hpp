#pragma once

#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/metric.hpp"
#include "inmargin/model.hpp"
#include "inmargin/dataset.hpp"
#include "inmargin/svm.hpp"
#include "inmargin/temporals.hpp"
#include "inmargin/projection.hpp"
#include "inmargin/trainer.hpp"
#include "inmargin/simplified.hpp"
#include "inmargin/io.hpp"
#include "inmargin/benchmark.hpp"
