#pragma once

#include "nvar/baselines.hpp"
#include "nvar/errors.hpp"
#include "nvar/estimation.hpp"
#include "nvar/evaluation.hpp"
#include "nvar/geometry.hpp"
#include "nvar/ingest.hpp"
#include "nvar/io.hpp"
#include "nvar/matrix.hpp"
#include "nvar/model.hpp"
#include "nvar/parallel.hpp"
#include "nvar/rng.hpp"
