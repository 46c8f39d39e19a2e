#pragma once

#include "quadshift/errors.hpp"
#include "quadshift/model.hpp"
#include "quadshift/quadrature.hpp"
#include "quadshift/fourier.hpp"
#include "quadshift/representation.hpp"
#include "quadshift/classical.hpp"
#include "quadshift/moments.hpp"
#include "quadshift/propagator.hpp"
#include "quadshift/transform.hpp"
#include "quadshift/scenario.hpp"
#include "quadshift/pipeline.hpp"
