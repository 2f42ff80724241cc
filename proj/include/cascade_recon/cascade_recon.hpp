#pragma once

#include "cascade_recon/baselines.hpp"
#include "cascade_recon/cascade.hpp"
#include "cascade_recon/cascade_io.hpp"
#include "cascade_recon/dmp.hpp"
#include "cascade_recon/dmp_grad.hpp"
#include "cascade_recon/errors.hpp"
#include "cascade_recon/exact_oracle.hpp"
#include "cascade_recon/generators.hpp"
#include "cascade_recon/grouping.hpp"
#include "cascade_recon/network.hpp"
#include "cascade_recon/optimize.hpp"
#include "cascade_recon/parallel.hpp"
#include "cascade_recon/reconstruct.hpp"
#include "cascade_recon/rng.hpp"
#include "cascade_recon/text.hpp"
