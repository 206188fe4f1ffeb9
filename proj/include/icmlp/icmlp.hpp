#pragma once

#include "icmlp/activation.hpp"
#include "icmlp/affine_fit.hpp"
#include "icmlp/algebra.hpp"
#include "icmlp/approximate.hpp"
#include "icmlp/chebyshev.hpp"
#include "icmlp/circuit.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"
#include "icmlp/modelio.hpp"
#include "icmlp/mollifier.hpp"
#include "icmlp/net.hpp"
#include "icmlp/rng.hpp"
#include "icmlp/square.hpp"
#include "icmlp/targets.hpp"
#include "icmlp/train.hpp"
#include "icmlp/verify.hpp"
